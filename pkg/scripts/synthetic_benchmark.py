"""Desk-scale benchmark: generate scenes, annotate, split, evaluate the oracle and replay.

    python scripts/synthetic_benchmark.py --out bench --normal 12 --collision 8 --seed 3
"""

import argparse
import json
import time
from pathlib import Path

from ccot.cli import main as ccot
from ccot.scenario import write_scenario
from ccot.synthetic import scene_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="bench")
    ap.add_argument("--normal", type=int, default=12)
    ap.add_argument("--collision", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    out = Path(args.out)
    scenes = out / "scenes"
    scenes.mkdir(parents=True, exist_ok=True)
    for s in scene_suite(args.normal, args.collision, seed=args.seed):
        (scenes / f"{s.scene_id}.json").write_bytes(write_scenario(s))

    common = ["--set", f"scenario_dir={scenes}", "--set", f"output_dir={out / 'run'}", "--seed", str(args.seed)]
    for cmd in ("annotate", "split", "evaluate", "simulate"):
        t0 = time.perf_counter()
        code = ccot([cmd, *common])
        print(f"[{cmd}] exit {code} in {time.perf_counter() - t0:.2f} s\n")

    report = json.loads((out / "run" / "report.json").read_text())
    by_source = {}
    for row in report["rows"]:
        by_source.setdefault(row["gt_source"], []).append(row)
    for src, rows in sorted(by_source.items()):
        print(f"{src}: {len(rows)} val samples, {sum(bool(r['collided']) for r in rows)} oracle plans touch a log")


if __name__ == "__main__":
    main()
