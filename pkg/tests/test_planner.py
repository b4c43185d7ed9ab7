import math
import random

import pytest
from oracles import brute_force_tree

from ccot.errors import StructuralError
from ccot.kinematics import Behavior, MetaAction, enumerate_meta_actions
from ccot.planner import SelectionReason, evaluate_tree, plan, select_action
from ccot.risk import Label
from ccot.scenario import Environment, Scenario, risk_window, time_grid, uniform_track
from ccot.synthetic import empty_scenario, head_on_scenario, lead_following_scenario

A, M, D = Behavior.ACCELERATE, Behavior.MAINTAIN, Behavior.DECELERATE


def oracle_for(window):
    e = window.ego_state
    nbs = [dict(pos=st.position, vel=st.velocity, footprint=st.footprint)
           for st, _ in window.neighbor_states().values()]
    return brute_force_tree(dict(pos=e.position, heading=e.heading, speed=e.speed, footprint=e.footprint), nbs)


def test_lead_vehicle_selects_maintain_decelerate(cfg, lead_scene):
    res = plan(risk_window(lead_scene, 1.5, cfg), cfg)
    assert res.selected == MetaAction(M, D)
    assert res.selection_reason is SelectionReason.MAX_PROGRESS_AMONG_SAFE
    safe = {o.action for o in res.outcomes if o.label is Label.SAFE}
    assert safe == {MetaAction(M, D), MetaAction(D, D)}
    by = {o.action: o for o in res.outcomes}
    assert by[MetaAction(M, D)].progress == pytest.approx(26.0)
    assert by[MetaAction(D, D)].progress == pytest.approx(21.0)
    # frozen from the fine-step oracle
    assert by[MetaAction(M, D)].min_ttc == pytest.approx(3.2447, abs=2e-3)
    assert by[MetaAction(D, D)].min_ttc == pytest.approx(4.5308, abs=2e-3)
    assert by[MetaAction(M, M)].min_ttc == pytest.approx(1.5528, abs=2e-3)


def test_lead_vehicle_matches_oracle_per_branch(cfg, lead_scene):
    w = risk_window(lead_scene, 1.5, cfg)
    for out, ref in zip(evaluate_tree(w, cfg), oracle_for(w)):
        assert (out.action.short.sign, out.action.long.sign) == ref["action"]
        assert (out.label is Label.SAFE) == ref["safe"]
        assert out.progress == pytest.approx(ref["progress"], abs=1e-3)
        # the planner samples at 0.1 s, so it can only over-estimate the minimum
        assert out.min_ttc >= ref["min_ttc"] - 1e-6
        assert out.min_ttc == pytest.approx(ref["min_ttc"], abs=0.05)


def test_head_on_all_unsafe(cfg):
    res = plan(risk_window(head_on_scenario(1.0), 1.5, cfg), cfg)
    assert all(o.label is Label.UNSAFE for o in res.outcomes)
    assert res.selection_reason is SelectionReason.MAX_MIN_TTC_ALL_UNSAFE
    assert all(not r["safe"] for r in oracle_for(risk_window(head_on_scenario(1.0), 1.5, cfg)))


def test_no_neighbors_accelerates(cfg):
    res = plan(risk_window(empty_scenario(), 1.5, cfg), cfg)
    assert all(o.label is Label.SAFE and math.isinf(o.min_ttc) for o in res.outcomes)
    assert res.selected == MetaAction(A, A)


def test_stopped_ego_tie_breaks_canonically(cfg):
    times = time_grid(0, 2)
    ego = uniform_track("ego", times, (0, 0), (0, 0))
    blocker = uniform_track("b", times, (10, 0), (0, 0))
    s = Scenario("stop", "ego", (ego, blocker), Environment("a", "b", "c"))
    w = risk_window(s, 1.5, cfg)
    res = plan(w, cfg)
    safe = [o.action for o in res.outcomes if o.label is Label.SAFE]
    assert safe == [MetaAction(M, M), MetaAction(M, D), MetaAction(D, M), MetaAction(D, D)]
    assert res.selected == MetaAction(M, M)
    assert [r["safe"] for r in oracle_for(w)] == [o.label is Label.SAFE for o in res.outcomes]


def test_outputs_in_canonical_order_and_parallel_equal(cfg, lead_scene):
    w = risk_window(lead_scene, 1.5, cfg)
    serial = evaluate_tree(w, cfg)
    assert [o.action for o in serial] == enumerate_meta_actions()
    assert evaluate_tree(w, cfg, workers=4) == serial


def test_select_requires_nine(cfg, lead_scene):
    outcomes = evaluate_tree(risk_window(lead_scene, 1.5, cfg), cfg)
    with pytest.raises(StructuralError):
        select_action(outcomes[:8])


def test_all_unsafe_prefers_contact_free(cfg, lead_scene):
    import dataclasses

    outcomes = evaluate_tree(risk_window(lead_scene, 1.5, cfg), cfg)
    fake = [dataclasses.replace(o, label=Label.UNSAFE, min_ttc=1.0, contact=0.5) for o in outcomes]
    fake[6] = dataclasses.replace(fake[6], contact=None, min_ttc=0.2)
    action, reason = select_action(fake)
    assert action == outcomes[6].action
    assert reason is SelectionReason.MAX_MIN_TTC_ALL_UNSAFE


def test_plan_deterministic(cfg):
    s = lead_following_scenario(random.Random(4))
    w = risk_window(s, 1.5, cfg)
    assert plan(w, cfg) == plan(w, cfg)


def test_lead_following_agrees_with_oracle(cfg):
    rng = random.Random(9)
    for i in range(25):
        w = risk_window(lead_following_scenario(rng, scene_id=f"lf{i}"), 1.5, cfg)
        res = plan(w, cfg)
        ref = oracle_for(w)
        assert [o.label is Label.SAFE for o in res.outcomes] == [r["safe"] for r in ref]
        if any(r["safe"] for r in ref):
            assert res.selected_outcome.label is Label.SAFE
            best = max(r["progress"] for r in ref if r["safe"])
            assert res.selected_outcome.progress == pytest.approx(best, abs=1e-3)


def test_plan_to_dict(cfg, lead_scene):
    d = plan(risk_window(lead_scene, 1.5, cfg), cfg).to_dict()
    assert d["selected"] == "Maintain-Decelerate"
    assert len(d["outcomes"]) == 9 and len(d["planned_trajectory"]) == 31


def test_all_unsafe_argmax_and_scale_invariance(cfg, lead_scene):
    import dataclasses

    outcomes = evaluate_tree(risk_window(lead_scene, 1.5, cfg), cfg)
    ttcs = [0.4, 1.1, 0.9, 1.7, 1.2, 0.3, 1.0, 1.5, 1.9]
    fake = [dataclasses.replace(o, label=Label.UNSAFE, min_ttc=t, contact=None) for o, t in zip(outcomes, ttcs)]
    assert select_action(fake)[0] == MetaAction(D, D)
    scaled = [dataclasses.replace(o, min_ttc=o.min_ttc * 3.7) for o in fake]
    assert select_action(scaled)[0] == MetaAction(D, D)
