"""Closed-loop replay: the planner drives the ego while neighbors follow their logs."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

from .config import PlannerConfig, n_steps
from .errors import CCoTError
from .planner import plan
from .risk import box_corners, boxes_overlap, disc_radius
from .scenario import AgentState, AgentTrack, Scenario, risk_window

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReplayResult:
    scene_id: str
    collided: bool
    contact_time: float | None
    n_replans: int
    actions: tuple[str, ...]


def _touches(ego: AgentState, other: AgentState) -> bool:
    if math.dist(ego.position, other.position) > disc_radius(ego.footprint) + disc_radius(other.footprint):
        return False
    return boxes_overlap(box_corners(ego.position, ego.heading, ego.footprint),
                         box_corners(other.position, other.heading, other.footprint))


def replay(scenario: Scenario, cfg: PlannerConfig) -> ReplayResult:
    """Replan every ``stride`` seconds and execute the first stride of each plan."""
    ego_log = scenario.ego
    t = round(ego_log.start + cfg.history_horizon, 9)
    end = max(tr.end for tr in scenario.tracks)
    history = list(ego_log.clipped(ego_log.start, t).samples)
    steps = n_steps(cfg.stride, cfg.rollout_dt)
    actions: list[str] = []
    while t + cfg.stride <= end + 1e-9:
        ego_so_far = AgentTrack(scenario.ego_id, tuple(history))
        sim = replace(scenario, tracks=(*scenario.neighbors, ego_so_far), collision=None)
        try:
            result = plan(risk_window(sim, t, cfg), cfg)
        except CCoTError as exc:
            logger.warning("scene %s: replay stopped at t=%.2f (%s)", scenario.scene_id, t, exc)
            break
        actions.append(result.selected.key)
        base = history[-1][1]
        for smp in result.planned_trajectory.samples[1:steps + 1]:
            ts = round(t + smp.offset, 9)
            v = (smp.speed * math.cos(smp.heading), smp.speed * math.sin(smp.heading))
            state = AgentState(base.agent_id, smp.position, v, smp.heading, base.footprint, base.category)
            history.append((ts, state))
            for tr in scenario.neighbors:
                other = tr.state_at(ts, cfg.max_gap)
                if other is not None and _touches(state, other):
                    return ReplayResult(scenario.scene_id, True, ts, len(actions), tuple(actions))
        t = round(t + cfg.stride, 9)
    return ReplayResult(scenario.scene_id, False, None, len(actions), tuple(actions))
