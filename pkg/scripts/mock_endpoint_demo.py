"""Score a model served over HTTP, using a canned local endpoint as the model.

One sample is delayed past the client timeout to show unscored accounting.

    python scripts/mock_endpoint_demo.py --out endpoint_demo
"""

import argparse
import json
from pathlib import Path

from ccot.annotator import load_manifest, load_record
from ccot.cli import main as ccot
from ccot.config import PlannerConfig
from ccot.evaluation import CannedEndpoint
from ccot.evaluation.oracle import oracle_text
from ccot.scenario import extract_window, write_scenario
from ccot.synthetic import scene_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="endpoint_demo")
    ap.add_argument("--timeout", type=float, default=0.5)
    args = ap.parse_args()

    out = Path(args.out)
    (out / "scenes").mkdir(parents=True, exist_ok=True)
    suite = {s.scene_id: s for s in scene_suite(6, 4, seed=1)}
    for s in suite.values():
        (out / "scenes" / f"{s.scene_id}.json").write_bytes(write_scenario(s))
    common = ["--set", f"scenario_dir={out / 'scenes'}", "--set", f"output_dir={out / 'run'}", "--seed", "1"]
    ccot(["annotate", *common])
    ccot(["split", *common])

    cfg = PlannerConfig()
    manifest = load_manifest(out / "run" / "manifest.json")
    canned = {}
    for ref in manifest.subset("val"):
        rec = load_record(out / "run" / ref.path)
        s = suite[rec.scene_id]
        canned[rec.sample_id] = oracle_text(extract_window(s, rec.analysis_time, cfg), s, cfg)
    slow = sorted(canned)[0]

    with CannedEndpoint(canned, delays={slow: 3 * args.timeout}) as ep:
        print(f"endpoint {ep.url}; delaying {slow}")
        code = ccot(["evaluate", *common, "--set", f"endpoint_url={ep.url}",
                     "--set", f"request_timeout={args.timeout}"])
    rep = json.loads((out / "run" / "report.json").read_text())
    print(f"exit {code}: {rep['n_samples']} scored, {rep['n_unscored']} unscored")


if __name__ == "__main__":
    main()
