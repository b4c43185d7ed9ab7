"""Meta-action evaluation tree: roll out all nine branches, label, select.

Selection is lexicographic: any Safe branch beats every Unsafe one; among Safe
branches the one with the most progress wins; when nothing is Safe the branch
with the largest minimum TTC wins, and branches with physical contact rank
below every contact-free branch. Ties fall back to canonical action order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .config import PlannerConfig
from .errors import StructuralError
from .kinematics import EgoRollout, MetaAction, PredictedTrack, enumerate_meta_actions, predict_neighbors, rollout_action
from .risk import Label, Trajectory, rollout_min_ttc, trajectories_collide
from .scenario import ObservationWindow

N_ACTIONS = 9


class SelectionReason(str, Enum):
    MAX_PROGRESS_AMONG_SAFE = "max_progress_among_safe"
    MAX_MIN_TTC_ALL_UNSAFE = "max_min_ttc_all_unsafe"


@dataclass(frozen=True)
class CounterfactualOutcome:
    action: MetaAction
    rollout: EgoRollout
    min_ttc: float
    contact: float | None
    label: Label
    progress: float
    critical_agent: str | None = None


@dataclass(frozen=True)
class PlanResult:
    outcomes: tuple[CounterfactualOutcome, ...]
    selected: MetaAction
    planned_trajectory: EgoRollout
    selection_reason: SelectionReason

    @property
    def selected_outcome(self) -> CounterfactualOutcome:
        return next(o for o in self.outcomes if o.action == self.selected)

    def to_dict(self) -> dict:
        return {
            "selected": self.selected.key,
            "selection_reason": self.selection_reason.value,
            "outcomes": [
                {"action": o.action.key, "min_ttc": None if math.isinf(o.min_ttc) else o.min_ttc,
                 "contact": o.contact, "label": o.label.value, "progress": o.progress,
                 "critical_agent": o.critical_agent}
                for o in self.outcomes
            ],
            "planned_trajectory": [[s.offset, s.position[0], s.position[1], s.speed]
                                   for s in self.planned_trajectory.samples],
        }


def evaluate_action(window: ObservationWindow, action: MetaAction, predictions: Sequence[PredictedTrack],
                    cfg: PlannerConfig) -> CounterfactualOutcome:
    ego = window.ego_state
    roll = rollout_action(ego, action, cfg)
    risk = rollout_min_ttc(roll, predictions, cfg, ego.footprint)
    ego_traj = Trajectory.from_rollout(roll, ego.footprint, ego.agent_id)
    contacts = [c for p in predictions
                if (c := trajectories_collide(ego_traj, Trajectory.from_prediction(p))) is not None]
    contact = min(contacts) if contacts else None
    unsafe = risk.min_ttc < cfg.ttc_threshold or contact is not None
    return CounterfactualOutcome(action, roll, risk.min_ttc, contact, Label.UNSAFE if unsafe else Label.SAFE,
                                 roll.progress, risk.agent_id)


def evaluate_tree(window: ObservationWindow, cfg: PlannerConfig, workers: int = 1) -> list[CounterfactualOutcome]:
    """Simulate every branch of the tree; output is always in canonical order."""
    predictions = predict_neighbors(window, cfg)
    actions = enumerate_meta_actions()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda a: evaluate_action(window, a, predictions, cfg), actions))
    return [evaluate_action(window, a, predictions, cfg) for a in actions]


def select_action(outcomes: Sequence[CounterfactualOutcome],
                  cfg: PlannerConfig | None = None) -> tuple[MetaAction, SelectionReason]:
    if len(outcomes) != N_ACTIONS:
        raise StructuralError(f"expected {N_ACTIONS} outcomes, got {len(outcomes)}")
    safe = [o for o in outcomes if o.label is Label.SAFE]
    if safe:
        # max() keeps the first maximal element, so canonical order breaks ties
        best = max(sorted(safe, key=lambda o: o.action), key=lambda o: o.progress)
        return best.action, SelectionReason.MAX_PROGRESS_AMONG_SAFE
    best = max(sorted(outcomes, key=lambda o: o.action), key=lambda o: (o.contact is None, o.min_ttc))
    return best.action, SelectionReason.MAX_MIN_TTC_ALL_UNSAFE


def plan(window: ObservationWindow, cfg: PlannerConfig) -> PlanResult:
    outcomes = evaluate_tree(window, cfg)
    action, reason = select_action(outcomes, cfg)
    chosen = next(o for o in outcomes if o.action == action)
    return PlanResult(tuple(outcomes), action, chosen.rollout, reason)
