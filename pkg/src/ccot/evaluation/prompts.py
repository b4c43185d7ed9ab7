"""Prompt assembly: system, user and task sections in a byte-stable layout."""

from __future__ import annotations

from ..config import PlannerConfig
from ..kinematics import enumerate_meta_actions
from ..scenario import AgentTrack, ObservationWindow

SYSTEM = (
    "You are the reasoning module of an automated vehicle. You receive the recent history of the "
    "ego vehicle and of nearby road users, plus references to front-facing camera frames. Reason "
    "step by step about the scene, the most critical road user, the current risk, the outcome of "
    "each candidate longitudinal meta-action, and finally plan the ego motion."
)

OUTPUT_SCHEMA = """{
  "stage1_scene": {"weather": str, "lighting": str, "road_layout": str},
  "stage2_critical": null | {"agent_id": str, "category": str,
                             "relative_position": [x_forward_m, y_left_m], "distance": m,
                             "predicted_behavior": "approaching" | "crossing from left" |
                                                   "crossing from right" | "leading" | "stationary"},
  "stage3_risk": "Safe" | "Unsafe",
  "stage4_counterfactuals": {"<Short>-<Long>": "Safe" | "Unsafe", ... all nine ...},
  "stage5_plan": {"short": "Accelerate" | "Maintain" | "Decelerate",
                  "long": "Accelerate" | "Maintain" | "Decelerate",
                  "waypoints": [[offset_s, x_m, y_m], ...]}
}"""


def _fmt(x: float) -> str:
    return f"{x:.3f}".replace("-0.000", "0.000")


def _history_block(title: str, track: AgentTrack, t: float) -> list[str]:
    length, width = track.footprint
    lines = [f"### {title} {track.agent_id} ({track.category.value}, {_fmt(length)} x {_fmt(width)} m)",
             "dt_s, x_m, y_m, vx_mps, vy_mps, heading_rad"]
    for ts, st in track.samples:
        lines.append(", ".join(_fmt(v) for v in (ts - t, *st.position, *st.velocity, st.heading)))
    return lines


def assemble_prompt(window: ObservationWindow, cfg: PlannerConfig) -> str:
    t = window.time
    actions = enumerate_meta_actions()
    user = [
        "## User",
        f"Scene {window.scene_id}, analysis time t = {_fmt(t)} s. "
        f"History covers the last {_fmt(cfg.history_horizon)} s at {round(1 / cfg.rollout_dt)} Hz; "
        "times are relative to t, coordinates are world-frame meters.",
        "",
        "### Camera frames",
    ]
    if window.camera_refs:
        user += [f"{_fmt(c.timestamp - t)} s {c.camera}: {c.image_path}" for c in window.camera_refs]
    else:
        user.append("(none)")
    user.append("")
    user += _history_block("Ego", window.ego_history, t)
    neighbors = sorted(window.neighbor_histories, key=lambda tr: tr.agent_id)
    user.append("")
    user.append(f"{len(neighbors)} neighbor(s) within {_fmt(cfg.neighbor_radius)} m.")
    for tr in neighbors:
        user.append("")
        user += _history_block("Neighbor", tr, t)

    task = [
        "## Task",
        "Answer in five stages:",
        "1. Scene description: weather, lighting and road layout.",
        "2. Critical object identification: category, relative position in the ego frame, distance and "
        "likely behavior of the most critical road user (null if there is none).",
        "3. Current risk estimation: Safe or Unsafe at time t "
        f"(Unsafe when time-to-collision is below {_fmt(cfg.ttc_threshold)} s).",
        f"4. Counterfactual risk reasoning: for each meta-action, a short-term behavior over "
        f"[0, {_fmt(cfg.short_horizon)}] s followed by a long-term behavior over "
        f"[{_fmt(cfg.short_horizon)}, {_fmt(cfg.plan_horizon)}] s with accelerations of "
        f"+{_fmt(cfg.accel_step)}, 0 or -{_fmt(cfg.accel_step)} m/s^2, state Safe or Unsafe. "
        "The nine meta-actions are:",
        *[f"   - {a.key}" for a in actions],
        "5. Action planning: the chosen short-term and long-term behaviors and ego waypoints every "
        f"{_fmt(cfg.rollout_dt)} s from offset 0 to {_fmt(cfg.plan_horizon)} s.",
        "",
        "Return a single JSON object with this schema:",
        OUTPUT_SCHEMA,
    ]
    return "\n".join(["## System", SYSTEM, "", *user, "", *task]) + "\n"
