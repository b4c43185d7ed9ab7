import dataclasses
import json
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccot.annotator import annotate_scenario, build_record, dumps, record_from_dict, record_to_dict
from ccot.config import EvalConfig
from ccot.errors import RemoteStatusError, RemoteTimeoutError, RemoteTransportError, ScoringError
from ccot.evaluation import (CannedEndpoint, Endpoint, ParseStatus, assemble_prompt, collision_rate, evaluate,
                             l2_error, oracle_respond, parse_response, query_batch, query_remote_model,
                             render_response, score_language, score_risk)
from ccot.evaluation.metrics import language_field_hits
from ccot.evaluation.schema import extract_structured_block, parse_number
from ccot.kinematics import Behavior, MetaAction, enumerate_meta_actions
from ccot.risk import Label
from ccot.scenario import Environment, Scenario, extract_window, risk_window, time_grid, uniform_track
from ccot.synthetic import collision_scene, lead_vehicle_scenario

U, S = Label.UNSAFE, Label.SAFE


@pytest.fixture
def lead_record(cfg, lead_scene):
    return build_record(lead_scene, 1.5, cfg)


def flip(label):
    return U if label is S else S


# ---------------------------------------------------------------------------
# parsing


def test_well_formed_all_ok(lead_record):
    resp = parse_response(render_response(lead_record, "Some reasoning first."))
    assert all(v is ParseStatus.OK for v in resp.status.values())
    assert len(resp.stage5_plan.waypoints) == 31
    assert resp.stage5_plan.waypoints[-1][0] == pytest.approx(3.0)


def test_missing_stage4(lead_record):
    d = json.loads(render_response(lead_record).split("```json\n")[1].split("```")[0])
    del d["stage4_counterfactuals"]
    resp = parse_response("prose " + json.dumps(d) + " trailing")
    assert resp.status["stage4_counterfactuals"] is ParseStatus.MISSING
    assert all(resp.ok(s) for s in resp.status if s != "stage4_counterfactuals")


def test_malformed_stage_is_isolated(lead_record):
    d = json.loads(render_response(lead_record).split("```json\n")[1].split("```")[0])
    d["stage3_risk"] = "maybe"
    d["stage5_plan"]["waypoints"] = "soon"
    resp = parse_response(json.dumps(d))
    assert resp.status["stage3_risk"] is ParseStatus.MALFORMED
    assert resp.status["stage5_plan"] is ParseStatus.MALFORMED
    assert resp.ok("stage1_scene") and resp.ok("stage4_counterfactuals")


def test_no_json_all_missing():
    resp = parse_response("I cannot help with that.")
    assert set(resp.status.values()) == {ParseStatus.MISSING}


def test_aliases_and_case():
    text = 'answer: {"current_risk": "unsafe", "scene_description": {"weather": "Rainy", "lighting": "night", ' \
           '"road_layout": "T-junction"}}'
    resp = parse_response(text)
    assert resp.stage3_risk is U
    assert resp.stage1_scene.weather == "Rainy"


@pytest.mark.parametrize("raw,val", [("12,5", 12.5), ("1,234.5", 1234.5), ("3.0 m", 3.0), ("−2", -2.0), (7, 7.0)])
def test_parse_number(raw, val):
    assert parse_number(raw) == val


@settings(max_examples=200, deadline=None)
@given(st.text())
def test_parse_totality(text):
    resp = parse_response(text)
    assert set(resp.status) == {"stage1_scene", "stage2_critical", "stage3_risk", "stage4_counterfactuals",
                                "stage5_plan"}


@settings(max_examples=100, deadline=None)
@given(st.recursive(st.none() | st.booleans() | st.floats() | st.text(max_size=5),
                    lambda ch: st.lists(ch, max_size=4) | st.dictionaries(
                        st.sampled_from(["stage1_scene", "stage2_critical", "stage3_risk", "stage4_counterfactuals",
                                         "stage5_plan", "x"]), ch, max_size=5), max_leaves=20))
def test_parse_totality_structured(obj):
    parse_response(json.dumps(obj))


def test_fenced_block_preferred():
    text = 'Use {"stage3_risk": "Safe"} as a template.\n```json\n{"stage3_risk": "Unsafe"}\n```'
    assert extract_structured_block(text) == {"stage3_risk": "Unsafe"}


# ---------------------------------------------------------------------------
# language and risk scoring


def test_identical_scores_one(lead_record):
    assert score_language(parse_response(render_response(lead_record)), lead_record) == 1.0


def test_flipped_stage4_ten_of_nineteen(lead_record):
    flipped = dataclasses.replace(lead_record, stage4_counterfactuals={
        a: flip(v) for a, v in lead_record.stage4_counterfactuals.items()})
    resp = parse_response(render_response(flipped))
    assert language_field_hits(resp, lead_record) == 10
    assert score_language(resp, lead_record) == pytest.approx(10 / 19)


def test_distance_tolerance(lead_record):
    crit = lead_record.stage2_critical
    near = dataclasses.replace(lead_record, stage2_critical=dataclasses.replace(crit, distance=crit.distance + 0.8))
    far = dataclasses.replace(lead_record, stage2_critical=dataclasses.replace(crit, distance=crit.distance + 1.2))
    assert score_language(parse_response(render_response(near)), lead_record) == 1.0
    assert language_field_hits(parse_response(render_response(far)), lead_record) == 18
    assert score_language(parse_response(render_response(far)), lead_record,
                          EvalConfig(distance_tolerance=1.5)) == 1.0


def test_case_insensitive_categories(lead_record):
    scene = dataclasses.replace(lead_record.stage1_scene, weather="  CLEAR ")
    resp = parse_response(render_response(dataclasses.replace(lead_record, stage1_scene=scene)))
    assert score_language(resp, lead_record) == 1.0


def test_missing_stage_scores_zero_fields(lead_record):
    d = json.loads(render_response(lead_record).split("```json\n")[1].split("```")[0])
    del d["stage1_scene"]
    assert language_field_hits(parse_response(json.dumps(d)), lead_record) == 16


def test_risk_examples():
    assert score_risk([(U, U), (S, U), (S, S), (S, S)]) == (75.0, 50.0)
    assert score_risk([(U, U), (S, S)]) == (100.0, 100.0)
    assert score_risk([(S, S), (U, S)]) == (50.0, None)
    assert score_risk([(None, U), (U, U)]) == (50.0, 50.0)
    with pytest.raises(ScoringError):
        score_risk([])


# ---------------------------------------------------------------------------
# L2


def line(speed, lateral=0.0):
    return [(round(0.1 * k, 10), speed * 0.1 * k, lateral) for k in range(31)]


def test_l2_identical_zero():
    assert l2_error(line(10), line(10)) == (0.0, 0.0)


def test_l2_constant_offset():
    assert l2_error(line(10, 0.5), line(10)) == pytest.approx((0.5, 0.5), abs=1e-12)


def test_l2_speed_difference():
    assert l2_error(line(11), line(10)) == pytest.approx((0.55, 1.55), abs=1e-9)


def test_l2_final_mode():
    assert l2_error(line(11), line(10), mode="final") == pytest.approx((1.0, 3.0), abs=1e-9)


def test_l2_resamples_coarse_prediction():
    coarse = [(0.0, 0.0, 0.5), (1.5, 15.0, 0.5), (3.0, 30.0, 0.5)]
    assert l2_error(coarse, line(10)) == pytest.approx((0.5, 0.5), abs=1e-9)


def test_l2_no_overlap():
    with pytest.raises(ScoringError):
        l2_error([(0.0, 0.0, 0.0)], line(10))


@settings(max_examples=50, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(-100, 100), st.floats(-100, 100), st.floats(0, 20), st.floats(-2, 2))
def test_l2_rigid_invariance(theta, tx, ty, v, lat):
    def move(wps):
        c, s = math.cos(theta), math.sin(theta)
        return [(o, c * x - s * y + tx, s * x + c * y + ty) for o, x, y in wps]
    a, b = line(v, lat), line(10)
    assert l2_error(move(a), move(b)) == pytest.approx(l2_error(a, b), abs=1e-9)


# ---------------------------------------------------------------------------
# collision rate


def crossing_scene():
    times = time_grid(0, 5)
    ego = uniform_track("ego", times, (0, 0), (10, 0))
    wall = uniform_track("wall", times, (35, 0), (0, 0))
    return Scenario("cx", "ego", (ego, wall), Environment("a", "b", "c"))


def test_collision_rate_counts(cfg):
    s = crossing_scene()
    stop = [(round(0.1 * k, 10), 15.0, 0.0) for k in range(31)]
    drive = [(o, 15 + 10 * o, 0.0) for o, _, _ in stop]
    samples = [(stop, s, 1.5)] * 19 + [(drive, s, 1.5)]
    assert collision_rate(samples, cfg) == 5.0


# ---------------------------------------------------------------------------
# prompts


def test_prompt_deterministic_and_complete(cfg):
    times = time_grid(0, 3)
    tracks = [uniform_track("ego", times, (0, 0), (5, 0))]
    tracks += [uniform_track(f"n{i}", times, (10 + 3 * i, 6), (1, 0)) for i in range(3)]
    w = extract_window(Scenario("p", "ego", tuple(tracks), Environment("a", "b", "c")), 2.0, cfg)
    p1, p2 = assemble_prompt(w, cfg), assemble_prompt(w, cfg)
    assert p1 == p2
    assert p1.count("### Neighbor ") == 3
    for section in ("## System", "## User", "## Task"):
        assert section in p1
    for a in enumerate_meta_actions():
        assert a.key in p1


def test_prompt_omits_far_agents(cfg, lead_scene):
    # the stopped lead is 50 m away: outside what the model is shown
    assert "### Neighbor" not in assemble_prompt(extract_window(lead_scene, 1.5, cfg), cfg)


# ---------------------------------------------------------------------------
# oracle and full evaluation


def test_oracle_lead_vehicle(cfg, lead_scene):
    resp = oracle_respond(risk_window(lead_scene, 1.5, cfg), lead_scene, cfg)
    safe = {a for a, v in resp.stage4_counterfactuals.items() if v is S}
    assert safe == {MetaAction(Behavior.MAINTAIN, Behavior.DECELERATE),
                    MetaAction(Behavior.DECELERATE, Behavior.DECELERATE)}
    assert resp.stage3_risk is U


def test_oracle_preimpact_unsafe(cfg):
    s = collision_scene("c", random.Random(2))
    resp = oracle_respond(risk_window(s, s.collision.impact_time - 1.0, cfg), s, cfg)
    assert resp.stage3_risk is U


def test_evaluate_oracle_perfect(cfg):
    s = lead_vehicle_scenario("accelerate")
    # ground truth as stored on disk, at 6-decimal precision
    gts = {r.sample_id: record_from_dict(json.loads(dumps(record_to_dict(r)))) for r in annotate_scenario(s, cfg)}
    results = {sid: parse_response(render_response(r)) for sid, r in gts.items()}
    rep = evaluate(results, gts, {s.scene_id: s}, cfg)
    assert rep.language_acc == 100.0 and rep.risk_acc == 100.0 and rep.risk_recall == 100.0
    assert rep.l2_1s == 0.0 and rep.l2_3s == 0.0
    assert rep.n_samples == len(gts) and rep.n_unscored == 0


def test_evaluate_unscored_accounting(cfg, lead_record, lead_scene):
    gts = {lead_record.sample_id: lead_record, "other": lead_record}
    rep = evaluate({lead_record.sample_id: RemoteTimeoutError("slow")}, gts, {lead_scene.scene_id: lead_scene}, cfg)
    assert rep.n_samples == 0 and rep.n_unscored == 2 and rep.n_submitted == 2
    assert rep.language_acc is None
    assert "N/A" in rep.to_text()


def test_report_formats(cfg, lead_record, lead_scene):
    gts = {lead_record.sample_id: lead_record}
    rep = evaluate({lead_record.sample_id: parse_response(render_response(lead_record))}, gts,
                   {lead_scene.scene_id: lead_scene}, cfg, config_hash="abc")
    text = rep.to_text()
    assert text.index("Language Acc") < text.index("Risk Acc") < text.index("L2@1s") < text.index("Coll.")
    assert "config abc" in text
    csv = rep.to_csv().splitlines()
    assert csv[0] == "sample_id,l2_1s,l2_3s,collided,risk_pred,risk_gt"
    assert csv[1].endswith(",0,Unsafe,Unsafe")
    assert json.loads(rep.to_json())["n_samples"] == 1


# ---------------------------------------------------------------------------
# remote client against the canned endpoint


def test_remote_roundtrip():
    with CannedEndpoint({"a": "hello"}) as ep:
        assert query_remote_model("p", Endpoint(ep.url, 5.0), "a") == "hello"


def test_remote_batch_with_timeout():
    with CannedEndpoint({"a": "x", "b": "y", "c": "z"}, delays={"b": 1.0}) as ep:
        out = query_batch({"a": "p", "b": "p", "c": "p"}, Endpoint(ep.url, timeout=0.2, retries=1), max_in_flight=3)
        assert ep.calls.count("b") == 2  # one retry
    assert out["a"] == "x" and out["c"] == "z"
    assert isinstance(out["b"], RemoteTimeoutError)


def test_remote_status_errors():
    with CannedEndpoint({"a": "x"}, fail={"a"}) as ep:
        with pytest.raises(RemoteStatusError) as err:
            query_remote_model("p", Endpoint(ep.url, 5.0, retries=2), "a")
        assert err.value.status == 500
        assert ep.calls == ["a", "a", "a"]
        with pytest.raises(RemoteStatusError):
            query_remote_model("p", Endpoint(ep.url, 5.0), "missing")
        assert ep.calls.count("missing") == 1  # 4xx is not retried


def test_remote_unreachable():
    with CannedEndpoint({}) as ep:
        url = ep.url
    with pytest.raises(RemoteTransportError):
        query_remote_model("p", Endpoint(url, 1.0, retries=0), "a")
