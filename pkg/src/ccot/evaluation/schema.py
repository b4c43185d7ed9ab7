"""Model-response records: rendering and tolerant parsing.

A response carries the same five stage blocks as an annotation record. Parsing
never raises; each stage gets a status of ``ok``, ``missing`` or ``malformed``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

from ..annotator import (AnnotationRecord, CriticalObjectAnnotation, PlanAnnotation, SceneDescription,
                         stage_payloads)
from ..kinematics import Behavior, MetaAction
from ..risk import Label

STAGES = ("stage1_scene", "stage2_critical", "stage3_risk", "stage4_counterfactuals", "stage5_plan")

_ALIASES = {
    "scene_description": "stage1_scene",
    "critical_object": "stage2_critical",
    "critical_object_identification": "stage2_critical",
    "current_risk": "stage3_risk",
    "current_risk_estimation": "stage3_risk",
    "counterfactual_risk": "stage4_counterfactuals",
    "counterfactual_risk_reasoning": "stage4_counterfactuals",
    "action_plan": "stage5_plan",
    "action_planning": "stage5_plan",
}


class ParseStatus(str, Enum):
    OK = "ok"
    MISSING = "missing"
    MALFORMED = "malformed"


@dataclass
class ResponseRecord:
    raw_text: str
    sample_id: str | None = None
    stage1_scene: SceneDescription | None = None
    stage2_critical: CriticalObjectAnnotation | None = None
    stage3_risk: Label | None = None
    stage4_counterfactuals: dict[MetaAction, Label] = field(default_factory=dict)
    stage5_plan: PlanAnnotation | None = None
    status: dict[str, ParseStatus] = field(default_factory=lambda: {s: ParseStatus.MISSING for s in STAGES})

    def ok(self, stage: str) -> bool:
        return self.status[stage] is ParseStatus.OK


def render_response(rec: AnnotationRecord, prose: str = "") -> str:
    """Text a perfect model would emit for ``rec``: optional prose plus a JSON block."""
    body = json.dumps(stage_payloads(rec), indent=2, sort_keys=True)
    lead = f"{prose}\n\n" if prose else ""
    return f"{lead}```json\n{body}\n```\n"


# ---------------------------------------------------------------------------
# parsing helpers

_FENCE = re.compile(r"```(?:json|JSON)?\s*\n(.*?)```", re.DOTALL)


def _candidate_objects(text: str):
    for m in _FENCE.finditer(text):
        try:
            obj = json.loads(m.group(1))
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            yield obj
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\{", text):
        try:
            obj, _ = decoder.raw_decode(text, m.start())
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            yield obj


def extract_structured_block(text: str) -> dict[str, Any] | None:
    """First JSON object in ``text`` that names at least one stage."""
    for obj in _candidate_objects(text):
        keys = {_ALIASES.get(k, k) for k in obj}
        if keys & set(STAGES):
            return {_ALIASES.get(k, k): v for k, v in obj.items()}
    return None


def parse_number(value: Any) -> float:
    """Locale-independent decimal: accepts numbers and numeric strings, with a
    lone comma read as the decimal separator and an optional unit suffix."""
    if isinstance(value, bool):
        raise ValueError("boolean is not a number")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"not a number: {value!r}")
    s = value.strip().replace("−", "-").replace(" ", "")
    s = re.sub(r"(m|s|m/s|sec|meters?)$", "", s)
    if "," in s and "." not in s and s.count(",") == 1:
        s = s.replace(",", ".")
    else:
        s = s.replace(",", "")
    return float(s)


def _text(value: Any) -> str:
    if not isinstance(value, str) or not value.strip():
        raise ValueError(f"expected non-empty text, got {value!r}")
    return value.strip()


def _label(value: Any) -> Label:
    return Label(_text(value).capitalize())


def _behavior(value: Any) -> Behavior:
    return Behavior(_text(value).capitalize())


def parse_action_key(key: str) -> MetaAction:
    parts = [p for p in re.split(r"[^A-Za-z]+", key) if p]
    if len(parts) != 2:
        raise ValueError(f"cannot read meta-action from {key!r}")
    return MetaAction(Behavior(parts[0].capitalize()), Behavior(parts[1].capitalize()))


def _stage1(v: Any) -> SceneDescription:
    return SceneDescription(_text(v["weather"]), _text(v["lighting"]), _text(v["road_layout"]))


def _stage2(v: Any) -> CriticalObjectAnnotation | None:
    if v is None:
        return None
    rel = v["relative_position"]
    if isinstance(rel, Mapping):
        rel = (rel["x"], rel["y"])
    if len(rel) != 2:
        raise ValueError("relative_position needs two components")
    return CriticalObjectAnnotation(str(v.get("agent_id", "")).strip(), _text(v["category"]),
                                    (parse_number(rel[0]), parse_number(rel[1])), parse_number(v["distance"]),
                                    _text(v["predicted_behavior"]))


def _stage4(v: Any) -> dict[MetaAction, Label]:
    if not isinstance(v, Mapping):
        raise ValueError("counterfactuals must be a mapping")
    return {parse_action_key(k): _label(lbl) for k, lbl in v.items()}


def _waypoint(w: Any) -> tuple[float, float, float]:
    if isinstance(w, Mapping):
        w = (w.get("t", w.get("offset")), w["x"], w["y"])
    if len(w) != 3:
        raise ValueError("waypoint needs (offset, x, y)")
    return (parse_number(w[0]), parse_number(w[1]), parse_number(w[2]))


def _stage5(v: Any) -> PlanAnnotation:
    wps = tuple(_waypoint(w) for w in v["waypoints"])
    if not wps or any(b[0] <= a[0] for a, b in zip(wps, wps[1:])):
        raise ValueError("waypoint offsets must be non-empty and increasing")
    return PlanAnnotation(_behavior(v["short"]), _behavior(v["long"]), wps)


_PARSERS = {
    "stage1_scene": _stage1,
    "stage2_critical": _stage2,
    "stage3_risk": _label,
    "stage4_counterfactuals": _stage4,
    "stage5_plan": _stage5,
}


def parse_response(text: str, sample_id: str | None = None) -> ResponseRecord:
    rec = ResponseRecord(raw_text=text, sample_id=sample_id)
    try:
        block = extract_structured_block(text) if isinstance(text, str) else None
    except RecursionError:
        block = None
    if block is None:
        return rec
    for stage in STAGES:
        if stage not in block:
            continue
        try:
            value = _PARSERS[stage](block[stage])
        except (KeyError, TypeError, ValueError, AttributeError):
            rec.status[stage] = ParseStatus.MALFORMED
            continue
        setattr(rec, stage, value)
        rec.status[stage] = ParseStatus.OK
    return rec
