"""Time-to-collision, risk labels, critical objects and footprint collision tests.

TTC uses circumscribed discs under constant velocity (closed form, smooth,
conservative). Collision checks use oriented rectangles via separating axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .config import PlannerConfig
from .errors import StructuralError
from .kinematics import EgoRollout, PredictedTrack
from .scenario import TIME_EPS, AgentState, Category, ObservationWindow, Scenario

INF = math.inf


class Label(str, Enum):
    SAFE = "Safe"
    UNSAFE = "Unsafe"


class RiskReason(str, Enum):
    TTC_BELOW_THRESHOLD = "ttc_below_threshold"
    PREIMPACT_WINDOW = "preimpact_window"
    NONE = "none"


@dataclass(frozen=True)
class TtcResult:
    agent_id: str
    ttc: float
    closest_approach: float


@dataclass(frozen=True)
class RiskLabel:
    label: Label
    min_ttc: float
    critical_agent: str | None
    reason: RiskReason


@dataclass(frozen=True)
class CriticalObject:
    agent_id: str
    category: Category
    relative_position: tuple[float, float]  # ego frame: x forward, y left
    distance: float
    ttc: float
    state: AgentState
    low_priority: bool = False


def disc_radius(footprint: tuple[float, float]) -> float:
    length, width = footprint
    return 0.5 * math.hypot(length, width)


def instantaneous_ttc(ego: AgentState, other: AgentState) -> TtcResult:
    """Smallest tau >= 0 at which the two discs touch under constant velocity."""
    px = other.position[0] - ego.position[0]
    py = other.position[1] - ego.position[1]
    vx = other.velocity[0] - ego.velocity[0]
    vy = other.velocity[1] - ego.velocity[1]
    r = disc_radius(ego.footprint) + disc_radius(other.footprint)

    a = vx * vx + vy * vy
    b = px * vx + py * vy  # half of the linear coefficient
    c = px * px + py * py - r * r
    dist = math.hypot(px, py)

    if a > 0:
        tau_star = max(0.0, -b / a)
        closest = math.hypot(px + vx * tau_star, py + vy * tau_star)
    else:
        closest = dist
    closest_gap = max(0.0, closest - r)

    if c <= 0:
        return TtcResult(other.agent_id, 0.0, closest_gap)
    if a == 0 or b >= 0:
        return TtcResult(other.agent_id, INF, closest_gap)
    disc = b * b - a * c
    if disc < 0:
        return TtcResult(other.agent_id, INF, closest_gap)
    # c > 0 and b < 0 put both roots on the positive side; take the earlier,
    # written in the cancellation-free form c / (-b + sqrt(disc)).
    tau = c / (-b + math.sqrt(disc))
    return TtcResult(other.agent_id, tau, closest_gap)


# ---------------------------------------------------------------------------
# oriented rectangles


def box_corners(position: Sequence[float], heading: float, footprint: Sequence[float]) -> np.ndarray:
    """Corners (4, 2) of a length x width rectangle centred at ``position``."""
    c, s = math.cos(heading), math.sin(heading)
    hl, hw = footprint[0] / 2.0, footprint[1] / 2.0
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.asarray(position, dtype=float)


def boxes_overlap(a: np.ndarray, b: np.ndarray) -> bool:
    """Separating-axis test for two convex quadrilaterals; touching counts as overlap."""
    for poly in (a, b):
        for i in range(len(poly)):
            edge = poly[(i + 1) % len(poly)] - poly[i]
            axis = np.array([-edge[1], edge[0]])
            pa, pb = a @ axis, b @ axis
            if pa.max() < pb.min() - 1e-12 or pb.max() < pa.min() - 1e-12:
                return False
    return True


@dataclass(frozen=True)
class Trajectory:
    """Sampled rigid-body path on a shared offset grid."""

    offsets: tuple[float, ...]
    positions: tuple[tuple[float, float], ...]
    headings: tuple[float, ...]
    footprint: tuple[float, float]
    agent_id: str = ""

    @classmethod
    def from_rollout(cls, roll: EgoRollout, footprint: tuple[float, float], agent_id: str = "ego") -> "Trajectory":
        return cls(tuple(s.offset for s in roll.samples), tuple(s.position for s in roll.samples),
                   tuple(s.heading for s in roll.samples), footprint, agent_id)

    @classmethod
    def from_prediction(cls, pred: PredictedTrack) -> "Trajectory":
        return cls(pred.offsets, tuple(s.position for s in pred.states), tuple(s.heading for s in pred.states),
                   pred.states[0].footprint, pred.agent_id)


def check_grid(a: Sequence[float], b: Sequence[float]) -> None:
    if len(a) != len(b) or any(abs(x - y) > TIME_EPS for x, y in zip(a, b)):
        raise StructuralError("trajectories are not sampled on the same offset grid")


def trajectories_collide(a: Trajectory, b: Trajectory) -> float | None:
    """Earliest shared offset at which the two rectangles overlap, else ``None``."""
    check_grid(a.offsets, b.offsets)
    reach = disc_radius(a.footprint) + disc_radius(b.footprint)
    for off, pa, ha, pb, hb in zip(a.offsets, a.positions, a.headings, b.positions, b.headings):
        if math.dist(pa, pb) > reach:
            continue
        if boxes_overlap(box_corners(pa, ha, a.footprint), box_corners(pb, hb, b.footprint)):
            return off
    return None


# ---------------------------------------------------------------------------
# rollouts vs predictions


@dataclass(frozen=True)
class MinTtc:
    min_ttc: float
    agent_id: str | None
    offset: float | None


def ego_state_on_rollout(roll: EgoRollout, k: int, footprint: tuple[float, float], ego_id: str = "ego") -> AgentState:
    smp = roll.samples[k]
    v = (smp.speed * math.cos(smp.heading), smp.speed * math.sin(smp.heading))
    return AgentState(ego_id, smp.position, v, smp.heading, footprint)


def rollout_min_ttc(ego_roll: EgoRollout, neighbors: Sequence[PredictedTrack], cfg: PlannerConfig,
                    ego_footprint: tuple[float, float]) -> MinTtc:
    """Minimum instantaneous TTC over every grid offset and neighbor.

    Contact (TTC = 0) short-circuits the scan; ties keep the earliest offset.
    """
    best = MinTtc(INF, None, None)
    offsets = ego_roll.offsets
    for pred in neighbors:
        check_grid(offsets, pred.offsets)
    for k, off in enumerate(offsets):
        ego = ego_state_on_rollout(ego_roll, k, ego_footprint)
        for pred in neighbors:
            ttc = instantaneous_ttc(ego, pred.states[k]).ttc
            if ttc < best.min_ttc:
                best = MinTtc(ttc, pred.agent_id, off)
                if ttc == 0.0:
                    return best
    return best


# ---------------------------------------------------------------------------
# labels at the analysis time


def current_ttcs(window: ObservationWindow) -> list[tuple[TtcResult, AgentState]]:
    ego = window.ego_state
    return [(instantaneous_ttc(ego, st), st) for st, _ in window.neighbor_states().values()]


def label_current_risk(window: ObservationWindow, scenario: Scenario, cfg: PlannerConfig) -> RiskLabel:
    ttcs = current_ttcs(window)
    min_res = min((r for r, _ in ttcs), key=lambda r: (r.ttc, r.agent_id), default=None)
    min_ttc = min_res.ttc if min_res else INF
    if scenario.in_preimpact_window(window.time, cfg):
        return RiskLabel(Label.UNSAFE, min_ttc, scenario.collision.colliding_agent_id, RiskReason.PREIMPACT_WINDOW)
    if min_ttc < cfg.ttc_threshold:
        return RiskLabel(Label.UNSAFE, min_ttc, min_res.agent_id, RiskReason.TTC_BELOW_THRESHOLD)
    return RiskLabel(Label.SAFE, min_ttc, None, RiskReason.NONE)


def to_ego_frame(ego: AgentState, point: Sequence[float]) -> tuple[float, float]:
    dx, dy = point[0] - ego.position[0], point[1] - ego.position[1]
    c, s = math.cos(ego.heading), math.sin(ego.heading)
    return (c * dx + s * dy, -s * dx + c * dy)


def _critical(ego: AgentState, other: AgentState, ttc: float, low_priority: bool = False) -> CriticalObject:
    return CriticalObject(other.agent_id, other.category, to_ego_frame(ego, other.position),
                          math.dist(ego.position, other.position), ttc, other, low_priority)


def _state_near(scenario: Scenario, agent_id: str, t: float, cfg: PlannerConfig) -> AgentState:
    tr = scenario.track(agent_id)
    st = tr.state_at(t, cfg.max_gap)
    if st is not None:
        return st
    last = tr.last_sample_before(t)
    if last is not None:
        return last[1].moved(t - last[0])
    t0, first = tr.samples[0]
    return first.moved(t - t0)


def identify_critical_object(window: ObservationWindow, scenario: Scenario,
                             cfg: PlannerConfig) -> CriticalObject | None:
    ego = window.ego_state
    if scenario.in_preimpact_window(window.time, cfg):
        other = _state_near(scenario, scenario.collision.colliding_agent_id, window.time, cfg)
        return _critical(ego, other, instantaneous_ttc(ego, other).ttc)
    ttcs = current_ttcs(window)
    if not ttcs:
        return None
    finite = [(r, st) for r, st in ttcs if math.isfinite(r.ttc)]
    if finite:
        r, st = min(finite, key=lambda p: (p[0].ttc, p[0].agent_id))
        return _critical(ego, st, r.ttc)
    r, st = min(ttcs, key=lambda p: (math.dist(ego.position, p[1].position), p[0].agent_id))
    return _critical(ego, st, r.ttc, low_priority=True)
