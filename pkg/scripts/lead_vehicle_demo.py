"""Evaluate all nine meta-actions for a car closing on a stopped vehicle.

    python scripts/lead_vehicle_demo.py [--gap 50] [--speed 10]
"""

import argparse
import math

from ccot.annotator import build_record
from ccot.config import PlannerConfig
from ccot.planner import plan
from ccot.scenario import risk_window
from ccot.synthetic import lead_vehicle_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gap", type=float, default=50.0)
    ap.add_argument("--speed", type=float, default=10.0)
    args = ap.parse_args()

    cfg = PlannerConfig()
    scene = lead_vehicle_scenario("accelerate", gap=args.gap, speed=args.speed)
    result = plan(risk_window(scene, 1.5, cfg), cfg)
    print(f"ego {args.speed:.1f} m/s, stopped car {args.gap:.1f} m ahead\n")
    print(f"{'action':<24} {'min TTC [s]':>11} {'label':>7} {'progress [m]':>13}")
    for o in result.outcomes:
        ttc = "inf" if math.isinf(o.min_ttc) else f"{o.min_ttc:.3f}"
        mark = "  <- selected" if o.action == result.selected else ""
        print(f"{o.action.key:<24} {ttc:>11} {o.label.value:>7} {o.progress:>13.2f}{mark}")

    rec = build_record(scene, 1.5, cfg)
    crit = rec.stage2_critical
    print(f"\ncurrent risk: {rec.stage3_risk.value}; critical object {crit.agent_id} "
          f"({crit.predicted_behavior}) at {crit.distance:.1f} m")
    print(f"plan ground truth: ({rec.stage5_plan.short.value}, {rec.stage5_plan.long.value}), "
          f"source {rec.provenance.gt_source.value}")


if __name__ == "__main__":
    main()
