"""Counterfactual risk estimation and meta-action planning for driving scenes."""

from .annotator import AnnotationRecord, DatasetManifest, build_record, sample_windows, split_scenes
from .config import PlannerConfig, RunConfig
from .kinematics import Behavior, MetaAction, enumerate_meta_actions, predict_neighbors, rollout, to_accel_profile
from .planner import PlanResult, evaluate_tree, plan, select_action
from .risk import (Label, identify_critical_object, instantaneous_ttc, label_current_risk, rollout_min_ttc,
                   trajectories_collide)
from .scenario import Scenario, extract_window, load_scenario, risk_window, write_scenario

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord", "Behavior", "DatasetManifest", "Label", "MetaAction", "PlanResult", "PlannerConfig",
    "RunConfig", "Scenario", "build_record", "enumerate_meta_actions", "evaluate_tree", "extract_window",
    "identify_critical_object", "instantaneous_ttc", "label_current_risk", "load_scenario", "plan",
    "predict_neighbors", "risk_window", "rollout", "rollout_min_ttc", "sample_windows", "select_action",
    "split_scenes", "to_accel_profile", "trajectories_collide", "write_scenario",
]
