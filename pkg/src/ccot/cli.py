"""Command-line entry point.

Exit codes: 0 success, 1 partial result (some samples or scenes skipped, or
nothing produced), 2 invalid invocation or configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

from .annotator import (DatasetManifest, annotate_scenario, build_manifest, dumps, load_manifest, load_record,
                        split_scenes, write_dataset)
from .config import RunConfig, coerce_value
from .errors import CCoTError, ConfigError
from .evaluation.metrics import MetricsReport, evaluate
from .evaluation.oracle import oracle_text
from .evaluation.prompts import assemble_prompt
from .evaluation.remote import Endpoint, query_batch
from .evaluation.schema import parse_response
from .planner import plan
from .scenario import Scenario, extract_window, load_scenario, risk_window
from .simulate import replay

logger = logging.getLogger("ccot")

EXIT_OK, EXIT_PARTIAL, EXIT_INVALID = 0, 1, 2


class UsageError(Exception):
    pass


def load_config(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file {path} not found")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path}: {exc}") from exc
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        data[key.strip()] = coerce_value(value)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.strict:
        data["strict_parsing"] = True
    return RunConfig.from_mapping(data)


def _scenario_files(cfg: RunConfig) -> list[Path]:
    if not cfg.scenario_dir or not Path(cfg.scenario_dir).is_dir():
        raise UsageError(f"scenario_dir {cfg.scenario_dir!r} is not a directory")
    return sorted(p for p in Path(cfg.scenario_dir).iterdir() if p.suffix in (".json", ".jsonl"))


def _load_file(path: Path, strict: bool) -> Scenario:
    fmt = "deepaccident_log" if path.suffix == ".jsonl" else "canonical"
    return load_scenario(path.read_bytes(), fmt, strict=strict)


def load_scenarios(cfg: RunConfig) -> tuple[dict[str, Scenario], list[str]]:
    scenes, failures = {}, []
    for path in _scenario_files(cfg):
        try:
            s = _load_file(path, cfg.strict_parsing)
        except (CCoTError, ValueError, UnicodeDecodeError) as exc:
            logger.warning("skipping %s: %s", path.name, exc)
            failures.append(path.name)
            continue
        scenes[s.scene_id] = s
    return scenes, failures


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_annotate(cfg: RunConfig, args) -> int:
    scenes, failures = load_scenarios(cfg)
    records = []
    for sid in sorted(scenes):
        try:
            records.extend(annotate_scenario(scenes[sid], cfg.planner))
        except CCoTError as exc:
            logger.warning("scene %s failed: %s", sid, exc)
            failures.append(sid)
    if not records:
        logger.error("no records produced")
        return EXIT_PARTIAL
    out = _out(cfg)
    manifest = build_manifest(records)
    write_dataset(records, out, manifest)
    if cfg.resolved_manifest != out / "manifest.json":
        cfg.resolved_manifest.parent.mkdir(parents=True, exist_ok=True)
        cfg.resolved_manifest.write_bytes(dumps(manifest.to_dict()))
    c = manifest.counts
    print(f"annotated {c['total']} records ({c['collision']} collision) from {len(scenes)} scene(s); "
          f"{len(failures)} skipped")
    return EXIT_OK


def cmd_split(cfg: RunConfig, args) -> int:
    path = cfg.resolved_manifest
    if not path.is_file():
        raise UsageError(f"manifest {path} not found")
    manifest = split_scenes(load_manifest(path), cfg.split_ratio, cfg.seed)
    path.write_bytes(dumps(manifest.to_dict()))
    n_train, n_val = len(manifest.subset("train")), len(manifest.subset("val"))
    val_scenes = sorted({r.scene_id for r in manifest.subset("val")})
    print(f"split {len(manifest.scene_ids)} scenes: {n_train} train / {n_val} val samples; val scenes {val_scenes}")
    return EXIT_OK


def _fmt_ttc(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.3f}"


def cmd_plan(cfg: RunConfig, args) -> int:
    path = Path(args.scene)
    try:
        scenario = _load_file(path, cfg.strict_parsing)
    except (OSError, CCoTError, ValueError) as exc:
        raise UsageError(f"cannot load scene {path}: {exc}") from exc
    t = args.time if args.time is not None else round(scenario.ego.start + cfg.planner.history_horizon, 9)
    result = plan(risk_window(scenario, t, cfg.planner), cfg.planner)
    doc = {"scene_id": scenario.scene_id, "time": t, "config_hash": cfg.config_hash(), **result.to_dict()}
    print(json.dumps(doc, indent=1, sort_keys=True))
    print()
    print(f"{'action':<26} {'min_ttc':>8} {'label':>7} {'progress':>9}  selected")
    for o in result.outcomes:
        mark = "*" if o.action == result.selected else ""
        print(f"{o.action.key:<26} {_fmt_ttc(o.min_ttc):>8} {o.label.value:>7} {o.progress:>9.3f}  {mark}")
    print(f"selected {result.selected.key} ({result.selection_reason.value})")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, args) -> int:
    scenes, failures = load_scenarios(cfg)
    results = [replay(scenes[sid], cfg.planner) for sid in sorted(scenes)]
    if not results:
        logger.error("no scenes replayed")
        return EXIT_PARTIAL
    rate = 100.0 * sum(r.collided for r in results) / len(results)
    doc = {"config_hash": cfg.config_hash(), "collision_rate": rate,
           "scenes": [{"scene_id": r.scene_id, "collided": r.collided, "contact_time": r.contact_time,
                       "n_replans": r.n_replans, "actions": list(r.actions)} for r in results]}
    (_out(cfg) / "simulate.json").write_bytes(dumps(doc))
    print(f"closed-loop replay over {len(results)} scene(s): collision rate {rate:.2f}%")
    return EXIT_PARTIAL if failures else EXIT_OK


def _val_samples(cfg: RunConfig) -> tuple[DatasetManifest, dict]:
    path = cfg.resolved_manifest
    if not path.is_file():
        raise UsageError(f"manifest {path} not found")
    manifest = load_manifest(path)
    val = manifest.subset("val")
    if not val:
        raise UsageError("manifest has no validation split; run `split` first")
    base = path.parent
    return manifest, {r.sample_id: load_record(base / r.path) for r in val}


def _write_report(report: MetricsReport, cfg: RunConfig, stem: str = "report") -> None:
    out = _out(cfg)
    (out / f"{stem}.json").write_text(report.to_json())
    (out / f"{stem}.txt").write_text(report.to_text())
    (out / f"{stem}_samples.csv").write_text(report.to_csv())
    print(report.to_text(), end="")


def cmd_prompt(cfg: RunConfig, args) -> int:
    _, gts = _val_samples(cfg)
    scenes, _ = load_scenarios(cfg)
    out = _out(cfg) / "prompts"
    out.mkdir(exist_ok=True)
    missing = 0
    for sid, gt in sorted(gts.items()):
        if gt.scene_id not in scenes:
            missing += 1
            continue
        window = extract_window(scenes[gt.scene_id], gt.analysis_time, cfg.planner)
        (out / f"{sid}.txt").write_text(assemble_prompt(window, cfg.planner))
    print(f"wrote {len(gts) - missing} prompt(s) to {out}")
    return EXIT_PARTIAL if missing else EXIT_OK


def cmd_evaluate(cfg: RunConfig, args) -> int:
    _, gts = _val_samples(cfg)
    scenes, _ = load_scenarios(cfg)
    texts: dict[str, object] = {}
    if cfg.endpoint_url:
        prompts = {sid: assemble_prompt(extract_window(scenes[gt.scene_id], gt.analysis_time, cfg.planner),
                                        cfg.planner)
                   for sid, gt in gts.items() if gt.scene_id in scenes}
        ev = cfg.evaluation
        texts = query_batch(prompts, Endpoint(cfg.endpoint_url, ev.request_timeout, ev.retries), ev.max_in_flight)
    elif cfg.responses_dir:
        texts = _read_responses(Path(cfg.responses_dir), gts)
    else:
        for sid, gt in gts.items():
            if gt.scene_id in scenes:
                window = extract_window(scenes[gt.scene_id], gt.analysis_time, cfg.planner)
                texts[sid] = oracle_text(window, scenes[gt.scene_id], cfg.planner)
    resp_dir = _out(cfg) / "responses"
    resp_dir.mkdir(exist_ok=True)
    for sid, text in sorted(texts.items()):
        if isinstance(text, str):
            (resp_dir / f"{sid}.txt").write_text(text)
    results = {sid: parse_response(t, sid) if isinstance(t, str) else t for sid, t in texts.items()}
    report = evaluate(results, gts, scenes, cfg.planner, cfg.evaluation, cfg.config_hash())
    _write_report(report, cfg)
    if report.n_unscored:
        logger.warning("%d sample(s) unscored", report.n_unscored)
        return EXIT_PARTIAL
    return EXIT_OK


def _read_responses(directory: Path, gts: dict) -> dict[str, str]:
    if not directory.is_dir():
        raise UsageError(f"responses_dir {directory} is not a directory")
    texts = {}
    for p in sorted(directory.glob("*.txt")):
        if p.stem not in gts:
            logger.warning("ignoring response %s: no matching validation sample", p.name)
            continue
        texts[p.stem] = p.read_text()
    return texts


def cmd_score(cfg: RunConfig, args) -> int:
    if not cfg.responses_dir:
        raise UsageError("score needs responses_dir (use --set responses_dir=...)")
    _, gts = _val_samples(cfg)
    scenes, _ = load_scenarios(cfg) if cfg.scenario_dir else ({}, [])
    texts = _read_responses(Path(cfg.responses_dir), gts)
    results = {sid: parse_response(t, sid) for sid, t in texts.items()}
    report = evaluate(results, gts, scenes, cfg.planner, cfg.evaluation, cfg.config_hash())
    _write_report(report, cfg, stem="score")
    return EXIT_PARTIAL if report.n_unscored else EXIT_OK


COMMANDS = {
    "annotate": (cmd_annotate, "build five-stage records and a manifest from scenario_dir"),
    "split": (cmd_split, "assign scenes to train/val in the manifest"),
    "plan": (cmd_plan, "run the meta-action tree on one scene"),
    "simulate": (cmd_simulate, "closed-loop replay with the planner, reporting collision rate"),
    "evaluate": (cmd_evaluate, "score oracle, endpoint or stored responses on the val split"),
    "prompt": (cmd_prompt, "write one prompt file per val sample"),
    "score": (cmd_score, "score a directory of response texts keyed by sample_id"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    common.add_argument("--strict", action="store_true", help="reject unknown keys in scenario files")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ccot", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "plan":
            p.add_argument("--scene", required=True, help="scenario file")
            p.add_argument("--time", type=float, help="analysis time (default: first full history window)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command][0](cfg, args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CCoTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
