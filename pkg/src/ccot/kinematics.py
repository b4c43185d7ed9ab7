"""Meta-actions and longitudinal rollouts.

A meta-action fixes the ego's longitudinal acceleration on two consecutive
segments, ``[0, short_horizon)`` and ``[short_horizon, plan_horizon]``. The
ego keeps its heading; speed is clamped at zero (no reversing).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import total_ordering
from itertools import product

from .config import PlannerConfig, PredictionModel
from .scenario import TIME_EPS, AgentState, ObservationWindow

logger = logging.getLogger(__name__)


class Behavior(str, Enum):
    ACCELERATE = "Accelerate"
    MAINTAIN = "Maintain"
    DECELERATE = "Decelerate"

    @property
    def rank(self) -> int:
        return _BEHAVIOR_ORDER.index(self)

    @property
    def sign(self) -> int:
        return {Behavior.ACCELERATE: 1, Behavior.MAINTAIN: 0, Behavior.DECELERATE: -1}[self]


_BEHAVIOR_ORDER = (Behavior.ACCELERATE, Behavior.MAINTAIN, Behavior.DECELERATE)


@total_ordering
@dataclass(frozen=True)
class MetaAction:
    short: Behavior
    long: Behavior

    def __post_init__(self):
        object.__setattr__(self, "short", Behavior(self.short))
        object.__setattr__(self, "long", Behavior(self.long))

    def __lt__(self, other: "MetaAction") -> bool:
        return (self.short.rank, self.long.rank) < (other.short.rank, other.long.rank)

    @property
    def key(self) -> str:
        """Stable string form, e.g. ``Maintain-Decelerate``."""
        return f"{self.short.value}-{self.long.value}"

    @classmethod
    def from_key(cls, key: str) -> "MetaAction":
        short, _, long = key.strip().partition("-")
        return cls(Behavior(short.strip().capitalize()), Behavior(long.strip().capitalize()))

    def __str__(self) -> str:
        return f"({self.short.value}, {self.long.value})"


def enumerate_meta_actions() -> list[MetaAction]:
    """The full two-layer tree: 3 short-term x 3 long-term behaviors, canonical order."""
    return [MetaAction(s, l) for s, l in product(_BEHAVIOR_ORDER, _BEHAVIOR_ORDER)]


@dataclass(frozen=True)
class AccelProfile:
    """Piecewise-constant acceleration: ``segments`` holds ((start, end), accel)."""

    segments: tuple[tuple[tuple[float, float], float], tuple[tuple[float, float], float]]

    @property
    def short_accel(self) -> float:
        return self.segments[0][1]

    @property
    def long_accel(self) -> float:
        return self.segments[1][1]

    @property
    def switch_time(self) -> float:
        return self.segments[0][0][1]

    @property
    def horizon(self) -> float:
        return self.segments[1][0][1]


def to_accel_profile(a: MetaAction, cfg: PlannerConfig) -> AccelProfile:
    step = cfg.accel_step
    return AccelProfile((
        ((0.0, cfg.short_horizon), a.short.sign * step),
        ((cfg.short_horizon, cfg.plan_horizon), a.long.sign * step),
    ))


def _advance(v0: float, accel: float, tau: float) -> tuple[float, float]:
    """Distance and end speed after ``tau`` seconds at ``accel``, clamped at v = 0."""
    if tau <= 0:
        return 0.0, v0
    if accel < 0:
        t_stop = v0 / -accel
        if tau >= t_stop:
            return v0 * t_stop / 2.0, 0.0
    return v0 * tau + 0.5 * accel * tau * tau, v0 + accel * tau


def distance_and_speed(v0: float, profile: AccelProfile, offset: float) -> tuple[float, float]:
    """Closed-form distance travelled and speed at ``offset`` seconds."""
    ts = profile.switch_time
    d1, v1 = _advance(v0, profile.short_accel, min(offset, ts))
    if offset <= ts:
        return d1, v1
    d2, v2 = _advance(v1, profile.long_accel, offset - ts)
    return d1 + d2, v2


@dataclass(frozen=True)
class RolloutSample:
    offset: float
    position: tuple[float, float]
    speed: float
    heading: float


@dataclass(frozen=True)
class EgoRollout:
    meta_action: MetaAction | None
    samples: tuple[RolloutSample, ...]

    @property
    def offsets(self) -> list[float]:
        return [s.offset for s in self.samples]

    @property
    def progress(self) -> float:
        (x0, y0), (x1, y1) = self.samples[0].position, self.samples[-1].position
        return math.hypot(x1 - x0, y1 - y0)


def rollout(ego: AgentState, profile: AccelProfile, cfg: PlannerConfig,
            meta_action: MetaAction | None = None) -> EgoRollout:
    """Sample the closed-form rollout at ``k * rollout_dt`` for k = 0..n."""
    v0 = ego.speed
    c, s = math.cos(ego.heading), math.sin(ego.heading)
    x0, y0 = ego.position
    samples = []
    for k in range(cfg.n_rollout + 1):
        offset = k * cfg.rollout_dt
        dist, speed = distance_and_speed(v0, profile, offset)
        samples.append(RolloutSample(offset, (x0 + dist * c, y0 + dist * s), speed, ego.heading))
    return EgoRollout(meta_action, tuple(samples))


def rollout_action(ego: AgentState, a: MetaAction, cfg: PlannerConfig) -> EgoRollout:
    return rollout(ego, to_accel_profile(a, cfg), cfg, meta_action=a)


@dataclass(frozen=True)
class PredictedTrack:
    """A neighbor's future on the rollout grid (offsets from the analysis time)."""

    agent_id: str
    offsets: tuple[float, ...]
    states: tuple[AgentState, ...]
    stale_by: float = 0.0

    @property
    def stale(self) -> bool:
        return self.stale_by > TIME_EPS


def predict_neighbors(window: ObservationWindow, cfg: PlannerConfig) -> list[PredictedTrack]:
    """Extrapolate every neighbor over ``[t, t + plan_horizon]``."""
    if cfg.prediction_model is not PredictionModel.CONSTANT_VELOCITY:
        raise NotImplementedError(cfg.prediction_model)
    offsets = tuple(cfg.offsets())
    out = []
    for tr in window.neighbor_histories:
        t_last, anchor = tr.samples[-1]
        lag = max(0.0, window.time - t_last)
        if lag > TIME_EPS:
            logger.warning("scene %s: neighbor %s last seen %.3f s before t=%.3f; extrapolating",
                           window.scene_id, tr.agent_id, lag, window.time)
        else:
            lag = 0.0
        states = tuple(anchor.moved(off + lag) for off in offsets)
        out.append(PredictedTrack(tr.agent_id, offsets, states, lag))
    return out
