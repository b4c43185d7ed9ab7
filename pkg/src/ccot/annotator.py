"""Five-stage ground-truth records, temporal sampling and scene-level splits."""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .config import PlannerConfig
from .errors import CCoTError, StructuralError
from .kinematics import Behavior, MetaAction, enumerate_meta_actions
from .planner import evaluate_tree, select_action
from .risk import (Label, Trajectory, identify_critical_object, instantaneous_ttc, label_current_risk,
                   to_ego_frame, trajectories_collide)
from .scenario import TIME_EPS, AgentState, Scenario, risk_window

logger = logging.getLogger(__name__)

FLOAT_DIGITS = 6

BEHAVIOR_WORDS = ("approaching", "crossing from left", "crossing from right", "leading", "stationary")
STATIONARY_SPEED = 0.5  # m/s


class GtSource(str, Enum):
    RECORDED_FUTURE = "recorded_future"
    POST_INTERVENTION = "post_intervention"


@dataclass(frozen=True)
class SceneDescription:
    weather: str
    lighting: str
    road_layout: str


@dataclass(frozen=True)
class CriticalObjectAnnotation:
    agent_id: str
    category: str
    relative_position: tuple[float, float]
    distance: float
    predicted_behavior: str


@dataclass(frozen=True)
class PlanAnnotation:
    short: Behavior
    long: Behavior
    waypoints: tuple[tuple[float, float, float], ...]  # (offset, x, y), world frame

    @property
    def action(self) -> MetaAction:
        return MetaAction(self.short, self.long)


@dataclass(frozen=True)
class Provenance:
    is_collision_scene: bool
    gt_source: GtSource


@dataclass(frozen=True)
class AnnotationRecord:
    sample_id: str
    scene_id: str
    analysis_time: float
    stage1_scene: SceneDescription
    stage2_critical: CriticalObjectAnnotation | None
    stage3_risk: Label
    stage4_counterfactuals: Mapping[MetaAction, Label]
    stage5_plan: PlanAnnotation
    provenance: Provenance

    def validate(self, cfg: PlannerConfig) -> None:
        if set(self.stage4_counterfactuals) != set(enumerate_meta_actions()):
            raise StructuralError(f"{self.sample_id}: stage4 must cover all 9 meta-actions")
        wps = self.stage5_plan.waypoints
        if not wps or abs(wps[0][0]) > TIME_EPS:
            raise StructuralError(f"{self.sample_id}: waypoints must start at offset 0")
        if any(b[0] <= a[0] for a, b in zip(wps, wps[1:])):
            raise StructuralError(f"{self.sample_id}: waypoint offsets must increase")
        if abs(wps[-1][0] - cfg.plan_horizon) > 1e-6:
            raise StructuralError(f"{self.sample_id}: last waypoint must sit at the plan horizon")


def sample_id_for(scene_id: str, t: float) -> str:
    return f"{scene_id}_{int(round(t * 1000)):06d}"


def _r(x: float) -> float:
    return round(float(x), FLOAT_DIGITS) + 0.0  # + 0.0 folds -0.0


def stage_payloads(rec: AnnotationRecord) -> dict[str, Any]:
    """The five stage blocks in their JSON form (shared with model responses)."""
    crit = rec.stage2_critical
    return {
        "stage1_scene": {"weather": rec.stage1_scene.weather, "lighting": rec.stage1_scene.lighting,
                         "road_layout": rec.stage1_scene.road_layout},
        "stage2_critical": None if crit is None else {
            "agent_id": crit.agent_id, "category": crit.category,
            "relative_position": [_r(crit.relative_position[0]), _r(crit.relative_position[1])],
            "distance": _r(crit.distance), "predicted_behavior": crit.predicted_behavior},
        "stage3_risk": rec.stage3_risk.value,
        "stage4_counterfactuals": {a.key: rec.stage4_counterfactuals[a].value for a in enumerate_meta_actions()},
        "stage5_plan": {"short": rec.stage5_plan.short.value, "long": rec.stage5_plan.long.value,
                        "waypoints": [[_r(o), _r(x), _r(y)] for o, x, y in rec.stage5_plan.waypoints]},
    }


def record_to_dict(rec: AnnotationRecord) -> dict[str, Any]:
    out = {"sample_id": rec.sample_id, "scene_id": rec.scene_id, "analysis_time": _r(rec.analysis_time)}
    out.update(stage_payloads(rec))
    out["provenance"] = {"is_collision_scene": rec.provenance.is_collision_scene,
                         "gt_source": rec.provenance.gt_source.value}
    return out


def record_from_dict(d: Mapping[str, Any]) -> AnnotationRecord:
    crit = d["stage2_critical"]
    plan = d["stage5_plan"]
    return AnnotationRecord(
        sample_id=d["sample_id"],
        scene_id=d["scene_id"],
        analysis_time=float(d["analysis_time"]),
        stage1_scene=SceneDescription(**d["stage1_scene"]),
        stage2_critical=None if crit is None else CriticalObjectAnnotation(
            crit["agent_id"], crit["category"], tuple(crit["relative_position"]), crit["distance"],
            crit["predicted_behavior"]),
        stage3_risk=Label(d["stage3_risk"]),
        stage4_counterfactuals={MetaAction.from_key(k): Label(v) for k, v in d["stage4_counterfactuals"].items()},
        stage5_plan=PlanAnnotation(Behavior(plan["short"]), Behavior(plan["long"]),
                                   tuple(tuple(w) for w in plan["waypoints"])),
        provenance=Provenance(d["provenance"]["is_collision_scene"], GtSource(d["provenance"]["gt_source"])),
    )


def dumps(obj: Any) -> bytes:
    return (json.dumps(obj, indent=1, sort_keys=True) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# stage logic


def describe_behavior(ego: AgentState, other: AgentState) -> str:
    """Coarse label from the neighbor's velocity decomposed in the ego frame."""
    if other.speed < STATIONARY_SPEED:
        return "stationary"
    c, s = math.cos(ego.heading), math.sin(ego.heading)
    vx, vy = other.velocity
    along, across = c * vx + s * vy, -s * vx + c * vy
    if abs(across) > abs(along):
        return "crossing from left" if across < 0 else "crossing from right"
    ahead = to_ego_frame(ego, other.position)[0] >= 0
    return "leading" if along > 0 and ahead else "approaching"


def recorded_future(s: Scenario, agent_id: str, t: float, cfg: PlannerConfig,
                    partial: bool = False) -> Trajectory | None:
    """Logged path of ``agent_id`` on the rollout grid starting at ``t``.

    With ``partial`` the trajectory keeps only offsets the log covers;
    otherwise any uncovered offset yields ``None``.
    """
    tr = s.track(agent_id)
    offs, pos, head = [], [], []
    for off in cfg.offsets():
        st = tr.state_at(t + off, cfg.max_gap)
        if st is None:
            if partial:
                continue
            return None
        offs.append(off)
        pos.append(st.position)
        head.append(st.heading)
    if not offs:
        return None
    return Trajectory(tuple(offs), tuple(pos), tuple(head), tr.footprint, agent_id)


def restrict(traj: Trajectory, offsets: Sequence[float]) -> Trajectory:
    keep = [i for i, o in enumerate(traj.offsets) if any(abs(o - q) <= TIME_EPS for q in offsets)]
    return Trajectory(tuple(traj.offsets[i] for i in keep), tuple(traj.positions[i] for i in keep),
                      tuple(traj.headings[i] for i in keep), traj.footprint, traj.agent_id)


def first_contact_with_log(traj: Trajectory, s: Scenario, t: float, cfg: PlannerConfig) -> float | None:
    """Earliest contact between ``traj`` and any logged neighbor future."""
    hits = []
    for tr in s.neighbors:
        other = recorded_future(s, tr.agent_id, t, cfg, partial=True)
        if other is None:
            continue
        mine = restrict(traj, other.offsets)
        if len(mine.offsets) != len(other.offsets):
            other = restrict(other, mine.offsets)
        hit = trajectories_collide(mine, other)
        if hit is not None:
            hits.append(hit)
    return min(hits) if hits else None


def _snap(slope: float, step: float) -> Behavior:
    options = ((0.0, Behavior.MAINTAIN), (step, Behavior.ACCELERATE), (-step, Behavior.DECELERATE))
    return min(options, key=lambda p: abs(slope - p[0]))[1]


def _ls_slope(ts: Sequence[float], vs: Sequence[float]) -> float:
    tm = sum(ts) / len(ts)
    vm = sum(vs) / len(vs)
    den = sum((t - tm) ** 2 for t in ts)
    return sum((t - tm) * (v - vm) for t, v in zip(ts, vs)) / den if den else 0.0


def infer_meta_action(s: Scenario, t: float, cfg: PlannerConfig) -> MetaAction:
    """Snap least-squares speed slopes of the logged ego future onto the action grid."""
    ego = s.ego
    offs = cfg.offsets()
    speeds = [ego.state_at(t + o, cfg.max_gap).speed for o in offs]
    k = cfg.n_short
    short = _snap(_ls_slope(offs[:k + 1], speeds[:k + 1]), cfg.accel_step)
    long = _snap(_ls_slope(offs[k:], speeds[k:]), cfg.accel_step)
    return MetaAction(short, long)


def build_record(s: Scenario, t: float, cfg: PlannerConfig) -> AnnotationRecord:
    window = risk_window(s, t, cfg)
    ego = window.ego_state

    env = s.environment
    stage1 = SceneDescription(env.weather, env.lighting, env.road_layout)

    crit = identify_critical_object(window, s, cfg)
    stage2 = None
    if crit is not None:
        stage2 = CriticalObjectAnnotation(crit.agent_id, crit.category.value, crit.relative_position,
                                          crit.distance, describe_behavior(ego, crit.state))

    stage3 = label_current_risk(window, s, cfg).label

    outcomes = evaluate_tree(window, cfg)
    stage4 = {o.action: o.label for o in outcomes}

    future = recorded_future(s, s.ego_id, t, cfg) if stage3 is Label.SAFE else None
    if future is not None and first_contact_with_log(future, s, t, cfg) is None:
        action = infer_meta_action(s, t, cfg)
        waypoints = tuple((o, x, y) for o, (x, y) in zip(future.offsets, future.positions))
        source = GtSource.RECORDED_FUTURE
    else:
        action, _ = select_action(outcomes, cfg)
        chosen = next(o for o in outcomes if o.action == action)
        waypoints = tuple((smp.offset, *smp.position) for smp in chosen.rollout.samples)
        source = GtSource.POST_INTERVENTION
    stage5 = PlanAnnotation(action.short, action.long, waypoints)

    rec = AnnotationRecord(sample_id_for(s.scene_id, t), s.scene_id, t, stage1, stage2, stage3, stage4, stage5,
                           Provenance(s.collision is not None, source))
    rec.validate(cfg)
    return rec


# ---------------------------------------------------------------------------
# temporal sampling


def _min_ttc_at(s: Scenario, t: float, cfg: PlannerConfig) -> float:
    ego = s.ego.state_at(t, cfg.max_gap)
    if ego is None:
        return math.inf
    best = math.inf
    for tr in s.neighbors:
        st = tr.state_at(t, cfg.max_gap)
        if st is not None and math.dist(st.position, ego.position) <= cfg.risk_radius:
            best = min(best, instantaneous_ttc(ego, st).ttc)
    return best


def _is_stable(s: Scenario, t: float, cfg: PlannerConfig) -> bool:
    if _min_ttc_at(s, t - cfg.history_horizon, cfg) >= cfg.ttc_threshold:
        return True
    try:
        window = risk_window(s, t, cfg)
    except CCoTError:
        return False
    return label_current_risk(window, s, cfg).label is Label.SAFE


def sample_windows(s: Scenario, cfg: PlannerConfig) -> list[float]:
    """Analysis times for one scene.

    Normal scenes step forward by ``stride`` and keep stable windows. Collision
    scenes step backward from one grid step before impact.
    """
    ms = lambda x: int(round(x * 1000))  # noqa: E731
    start, end = ms(s.ego.start), ms(s.ego.end)
    hist, stride = ms(cfg.history_horizon), ms(cfg.stride)
    if end - start < hist:
        logger.warning("scene %s: %.3f s of ego data is shorter than the %.3f s history window",
                       s.scene_id, (end - start) / 1000, cfg.history_horizon)
        return []
    if s.collision is not None:
        t = min(ms(s.collision.impact_time - cfg.rollout_dt), end)
        times = []
        while t - hist >= start:
            times.append(t / 1000)
            t -= stride
        return times
    return [t / 1000 for t in range(start + hist, end + 1, stride) if _is_stable(s, t / 1000, cfg)]


def annotate_scenario(s: Scenario, cfg: PlannerConfig) -> list[AnnotationRecord]:
    records = []
    for t in sample_windows(s, cfg):
        try:
            records.append(build_record(s, t, cfg))
        except CCoTError as exc:
            logger.warning("scene %s, t=%.3f: skipped (%s)", s.scene_id, t, exc)
    return sorted(records, key=lambda r: r.analysis_time)


# ---------------------------------------------------------------------------
# manifest and split


@dataclass(frozen=True)
class RecordRef:
    sample_id: str
    scene_id: str
    analysis_time: float
    is_collision_scene: bool
    path: str


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[RecordRef, ...]
    split: Mapping[str, str] = field(default_factory=dict)  # scene_id -> "train" | "val"

    @property
    def counts(self) -> dict[str, int]:
        return {"total": len(self.records), "collision": sum(r.is_collision_scene for r in self.records)}

    @property
    def scene_ids(self) -> list[str]:
        return sorted({r.scene_id for r in self.records})

    def subset(self, which: str) -> list[RecordRef]:
        return [r for r in self.records if self.split.get(r.scene_id) == which]

    def to_dict(self) -> dict[str, Any]:
        return {
            "records": [{"sample_id": r.sample_id, "scene_id": r.scene_id, "analysis_time": _r(r.analysis_time),
                         "is_collision_scene": r.is_collision_scene, "path": r.path} for r in self.records],
            "split": dict(sorted(self.split.items())),
            "counts": self.counts,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "DatasetManifest":
        refs = tuple(RecordRef(r["sample_id"], r["scene_id"], float(r["analysis_time"]), bool(r["is_collision_scene"]),
                               r["path"]) for r in d["records"])
        m = cls(refs, dict(d.get("split") or {}))
        if "counts" in d and d["counts"] != m.counts:
            raise StructuralError("manifest counts do not match its records")
        return m


def build_manifest(records: Iterable[AnnotationRecord], record_dir: str = "records") -> DatasetManifest:
    ordered = sorted(records, key=lambda r: (r.scene_id, r.analysis_time))
    return DatasetManifest(tuple(
        RecordRef(r.sample_id, r.scene_id, r.analysis_time, r.provenance.is_collision_scene,
                  f"{record_dir}/{r.sample_id}.json") for r in ordered))


def split_scenes(manifest: DatasetManifest, ratio: float = 0.8, seed: int = 0) -> DatasetManifest:
    """Scene-level split stratified by whether the scene contains a collision."""
    scene_collision: dict[str, bool] = {}
    for r in manifest.records:
        scene_collision[r.scene_id] = scene_collision.get(r.scene_id, False) or r.is_collision_scene
    if len(scene_collision) < 2:
        raise StructuralError("need at least two scenes to split without temporal leakage")

    strata = {flag: sorted(sid for sid, c in scene_collision.items() if c == flag) for flag in (True, False)}
    strata = {k: v for k, v in strata.items() if v}
    rng = random.Random(seed)
    split: dict[str, str] = {}
    for flag in (True, False):
        scenes = strata.get(flag)
        if not scenes:
            continue
        rng.shuffle(scenes)
        n_val = math.floor(len(scenes) * (1 - ratio) + 0.5)
        if len(strata) > 1 and len(scenes) >= 2:
            n_val = max(n_val, 1)
        n_val = min(n_val, len(scenes) - 1) if len(scenes) > 1 else n_val
        for i, sid in enumerate(scenes):
            split[sid] = "val" if i < n_val else "train"
    if "val" not in split.values():
        biggest = max(strata.values(), key=len)
        split[biggest[0]] = "val"
    if "train" not in split.values():
        raise StructuralError("split left no training scenes")
    return replace(manifest, split=split)


def write_dataset(records: Sequence[AnnotationRecord], out_dir: Path | str,
                  manifest: DatasetManifest | None = None) -> DatasetManifest:
    out = Path(out_dir)
    (out / "records").mkdir(parents=True, exist_ok=True)
    for rec in records:
        (out / "records" / f"{rec.sample_id}.json").write_bytes(dumps(record_to_dict(rec)))
    manifest = manifest or build_manifest(records)
    (out / "manifest.json").write_bytes(dumps(manifest.to_dict()))
    return manifest


def load_manifest(path: Path | str) -> DatasetManifest:
    return DatasetManifest.from_dict(json.loads(Path(path).read_text()))


def load_record(path: Path | str) -> AnnotationRecord:
    return record_from_dict(json.loads(Path(path).read_text()))
