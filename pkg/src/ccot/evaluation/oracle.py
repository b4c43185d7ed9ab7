"""Rule-based stand-in for a model: the ground-truth pipeline, rendered as a response."""

from __future__ import annotations

from ..annotator import build_record
from ..config import PlannerConfig
from ..scenario import ObservationWindow, Scenario
from .schema import ResponseRecord, parse_response, render_response


def oracle_text(window: ObservationWindow, scenario: Scenario, cfg: PlannerConfig) -> str:
    rec = build_record(scenario, window.time, cfg)
    return render_response(rec, prose=f"Five-stage analysis for {rec.sample_id}.")


def oracle_respond(window: ObservationWindow, scenario: Scenario, cfg: PlannerConfig) -> ResponseRecord:
    text = oracle_text(window, scenario, cfg)
    return parse_response(text, sample_id=f"{scenario.scene_id}_{int(round(window.time * 1000)):06d}")
