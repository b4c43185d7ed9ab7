"""Scoring: language accuracy, risk accuracy/recall, trajectory L2, collision rate."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from ..annotator import AnnotationRecord, first_contact_with_log
from ..config import EvalConfig, PlannerConfig
from ..errors import ScoringError
from ..kinematics import enumerate_meta_actions
from ..risk import Label, Trajectory
from ..scenario import Scenario
from .schema import ResponseRecord

N_LANGUAGE_FIELDS = 19

Waypoints = Sequence[Sequence[float]]  # (offset, x, y)


def _same_text(a: str | None, b: str | None) -> bool:
    return a is not None and b is not None and a.strip().lower() == b.strip().lower()


def language_field_hits(resp: ResponseRecord, gt: AnnotationRecord, ecfg: EvalConfig = EvalConfig()) -> int:
    """Count of correct fields out of 19:
    scene 3 + critical object 4 + current risk 1 + counterfactuals 9 + plan actions 2."""
    hits = 0
    if resp.ok("stage1_scene"):
        got, want = resp.stage1_scene, gt.stage1_scene
        hits += sum(_same_text(getattr(got, f), getattr(want, f)) for f in ("weather", "lighting", "road_layout"))
    if resp.ok("stage2_critical"):
        got, want = resp.stage2_critical, gt.stage2_critical
        if got is None or want is None:
            hits += 4 if got is None and want is None else 0
        else:
            hits += _same_text(got.category, want.category)
            hits += all(abs(g - w) <= ecfg.position_tolerance
                        for g, w in zip(got.relative_position, want.relative_position))
            hits += abs(got.distance - want.distance) <= ecfg.distance_tolerance
            hits += _same_text(got.predicted_behavior, want.predicted_behavior)
    if resp.ok("stage3_risk"):
        hits += resp.stage3_risk == gt.stage3_risk
    if resp.ok("stage4_counterfactuals"):
        hits += sum(resp.stage4_counterfactuals.get(a) == gt.stage4_counterfactuals[a]
                    for a in enumerate_meta_actions())
    if resp.ok("stage5_plan"):
        hits += resp.stage5_plan.short == gt.stage5_plan.short
        hits += resp.stage5_plan.long == gt.stage5_plan.long
    return int(hits)


def score_language(resp: ResponseRecord, gt: AnnotationRecord, ecfg: EvalConfig = EvalConfig()) -> float:
    return language_field_hits(resp, gt, ecfg) / N_LANGUAGE_FIELDS


def score_risk(pairs: Sequence[tuple[Label | None, Label]]) -> tuple[float, float | None]:
    """(accuracy %, recall % on Unsafe); recall is ``None`` without any Unsafe ground truth."""
    if not pairs:
        raise ScoringError("no risk predictions to score")
    correct = sum(p == g for p, g in pairs)
    positives = [p for p, g in pairs if g is Label.UNSAFE]
    recall = 100.0 * sum(p is Label.UNSAFE for p in positives) / len(positives) if positives else None
    return 100.0 * correct / len(pairs), recall


def _interp_xy(wps: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.stack([np.interp(t, wps[:, 0], wps[:, 1]), np.interp(t, wps[:, 0], wps[:, 2])], axis=1)


def l2_error(pred: Waypoints, gt: Waypoints, horizons: Sequence[float] = (1.0, 3.0),
             mode: str = "average") -> tuple[float, ...]:
    """L2 at each horizon h.

    ``average``: mean distance over ground-truth offsets in (0, h], with the
    prediction linearly resampled onto those offsets. ``final``: distance at h.
    """
    p = np.asarray(pred, dtype=float).reshape(-1, 3)
    g = np.asarray(gt, dtype=float).reshape(-1, 3)
    if len(p) == 0 or len(g) == 0:
        raise ScoringError("empty trajectory")
    lo, hi = max(p[0, 0], g[0, 0]), min(p[-1, 0], g[-1, 0])
    out = []
    for h in horizons:
        if mode == "final":
            if h > hi + 1e-6 or h < lo - 1e-6:
                raise ScoringError(f"horizon {h} s not covered by both trajectories")
            t = np.array([h])
        else:
            t = g[(g[:, 0] > 1e-9) & (g[:, 0] <= h + 1e-6) & (g[:, 0] >= lo - 1e-6) & (g[:, 0] <= hi + 1e-6), 0]
            if len(t) == 0:
                raise ScoringError(f"no shared offsets in (0, {h}] s")
        d = np.linalg.norm(_interp_xy(p, t) - _interp_xy(g, t), axis=1)
        out.append(float(d.mean()))
    return tuple(out)


def waypoints_to_trajectory(wps: Waypoints, footprint: tuple[float, float], initial_heading: float,
                            cfg: PlannerConfig) -> Trajectory:
    """Resample waypoints onto the rollout grid; heading follows the direction of travel."""
    w = np.asarray(wps, dtype=float).reshape(-1, 3)
    grid = np.array([o for o in cfg.offsets() if w[0, 0] - 1e-6 <= o <= w[-1, 0] + 1e-6])
    xy = _interp_xy(w, grid)
    headings, h = [], initial_heading
    for k in range(len(grid)):
        j = min(k + 1, len(grid) - 1)
        i = j - 1 if j > 0 else 0
        dx, dy = xy[j] - xy[i]
        if math.hypot(dx, dy) > 1e-6:
            h = math.atan2(dy, dx)
        headings.append(h)
    return Trajectory(tuple(float(o) for o in grid), tuple((float(x), float(y)) for x, y in xy), tuple(headings),
                      footprint, "ego")


def collides_with_log(wps: Waypoints, scenario: Scenario, t: float, cfg: PlannerConfig) -> bool:
    ego = scenario.ego.state_at(t, cfg.max_gap) or scenario.ego.last_sample_before(t)[1]
    traj = waypoints_to_trajectory(wps, ego.footprint, ego.heading, cfg)
    return first_contact_with_log(traj, scenario, t, cfg) is not None


def collision_rate(samples: Iterable[tuple[Waypoints, Scenario, float]], cfg: PlannerConfig) -> float:
    """Percent of predicted trajectories that touch any logged neighbor within the horizon."""
    flags = [collides_with_log(w, s, t, cfg) for w, s, t in samples]
    if not flags:
        raise ScoringError("no trajectories to check")
    return 100.0 * sum(flags) / len(flags)


# ---------------------------------------------------------------------------
# reports


@dataclass
class SampleScore:
    sample_id: str
    scored: bool
    error: str | None = None
    language: float | None = None
    risk_pred: str | None = None
    risk_gt: str | None = None
    l2_1s: float | None = None
    l2_3s: float | None = None
    collided: bool | None = None
    gt_source: str | None = None


@dataclass
class MetricsReport:
    language_acc: float | None
    risk_acc: float | None
    risk_recall: float | None
    l2_1s: float | None
    l2_3s: float | None
    collision_rate: float | None
    n_samples: int
    n_unscored: int
    rows: list[SampleScore] = field(default_factory=list)
    l2_mode: str = "average"
    config_hash: str = ""

    @property
    def n_submitted(self) -> int:
        return self.n_samples + self.n_unscored

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["rows"] = [asdict(r) for r in self.rows]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def to_text(self) -> str:
        def cell(v, unit=""):
            return "N/A" if v is None else f"{v:.2f}{unit}"
        header = ["Language Acc", "Risk Acc", "Risk Rec", "L2@1s", "L2@3s", "Coll."]
        values = [cell(self.language_acc, "%"), cell(self.risk_acc, "%"), cell(self.risk_recall, "%"),
                  cell(self.l2_1s, " m"), cell(self.l2_3s, " m"), cell(self.collision_rate, "%")]
        widths = [max(len(h), len(v)) for h, v in zip(header, values)]
        lines = [
            f"# L2 mode: {self.l2_mode}; config {self.config_hash}",
            f"# scored {self.n_samples} of {self.n_submitted} ({self.n_unscored} unscored)",
            " | ".join(h.rjust(w) for h, w in zip(header, widths)),
            "-+-".join("-" * w for w in widths),
            " | ".join(v.rjust(w) for v, w in zip(values, widths)),
        ]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["sample_id", "l2_1s", "l2_3s", "collided", "risk_pred", "risk_gt"])
        for r in self.rows:
            writer.writerow([r.sample_id, "" if r.l2_1s is None else f"{r.l2_1s:.6f}",
                             "" if r.l2_3s is None else f"{r.l2_3s:.6f}",
                             "" if r.collided is None else int(r.collided), r.risk_pred or "", r.risk_gt or ""])
        return buf.getvalue()


def _mean(xs: Sequence[float]) -> float | None:
    return float(np.mean(xs)) if xs else None


def evaluate(results: Mapping[str, ResponseRecord | Exception], gts: Mapping[str, AnnotationRecord],
             scenarios: Mapping[str, Scenario], cfg: PlannerConfig, ecfg: EvalConfig = EvalConfig(),
             config_hash: str = "") -> MetricsReport:
    """Score every ground-truth sample. Samples with no response, or whose
    response is an exception, are reported but left out of every metric."""
    rows: list[SampleScore] = []
    lang, risk_pairs, l1, l3, coll = [], [], [], [], []
    for sid in sorted(gts):
        gt = gts[sid]
        res = results.get(sid)
        if res is None or isinstance(res, Exception):
            err = "no response" if res is None else f"{type(res).__name__}: {res}"
            rows.append(SampleScore(sid, False, error=err, risk_gt=gt.stage3_risk.value,
                                    gt_source=gt.provenance.gt_source.value))
            continue
        row = SampleScore(sid, True, risk_gt=gt.stage3_risk.value, gt_source=gt.provenance.gt_source.value)
        row.language = score_language(res, gt, ecfg)
        lang.append(row.language)
        pred_risk = res.stage3_risk if res.ok("stage3_risk") else None
        row.risk_pred = pred_risk.value if pred_risk else None
        risk_pairs.append((pred_risk, gt.stage3_risk))
        if res.ok("stage5_plan"):
            try:
                row.l2_1s, row.l2_3s = l2_error(res.stage5_plan.waypoints, gt.stage5_plan.waypoints,
                                                ecfg.l2_horizons, ecfg.l2_mode)[:2]
                l1.append(row.l2_1s)
                l3.append(row.l2_3s)
            except ScoringError as exc:
                row.error = str(exc)
            scenario = scenarios.get(gt.scene_id)
            if scenario is not None:
                row.collided = collides_with_log(res.stage5_plan.waypoints, scenario, gt.analysis_time, cfg)
                coll.append(row.collided)
        rows.append(row)
    acc, rec = score_risk(risk_pairs) if risk_pairs else (None, None)
    n = sum(r.scored for r in rows)
    return MetricsReport(
        language_acc=None if not lang else 100.0 * _mean(lang),
        risk_acc=acc, risk_recall=rec,
        l2_1s=_mean(l1), l2_3s=_mean(l3),
        collision_rate=None if not coll else 100.0 * sum(coll) / len(coll),
        n_samples=n, n_unscored=len(rows) - n, rows=rows, l2_mode=ecfg.l2_mode, config_hash=config_hash)
