import json
from fractions import Fraction as F

import pytest

from fastconj import tracefile as T
from fastconj.construction import ConstructionConfig, periodic_orbit_residual, run, verify_stage
from fastconj.diophantine import oracle_from_spec
from fastconj.generators import TypeTag

LAM4 = TypeTag("III_lambda", (F(4),))
TOWER = {"kind": "tower_series", "base": 10, "growth": 8}


@pytest.fixture(scope="module")
def one_stage():
    return run(LAM4, 1, 1, oracle_from_spec(TOWER), ConstructionConfig(distance_samples=200, sample_points=300))


def test_one_stage_passes(one_stage):
    tr = one_stage
    assert tr.passed and tr.failure is None
    assert [c.name[0] for c in tr.stages[0].checks] == list("abcdefg")
    assert tr.stages[0].Q_n == 10**8 and tr.planned.witness.q == 10**512


def test_alpha_is_witness(one_stage):
    w = one_stage.stages[0].witness
    assert w.approx == F(w.p, w.q) and w.gap_bound < w.threshold()


def test_periodic_residual_small(one_stage):
    res, mode = periodic_orbit_residual(one_stage, 1)
    assert abs(res) < 1e-30 and mode == "factored"


def test_trace_round_trip(one_stage, tmp_path):
    doc = T.make_document(one_stage, {"note": "x"}, {"k": 1})
    path = tmp_path / "t.json"
    T.write_document(path, doc)
    back = T.read_document(path)
    assert not T.checksum_mismatches(back) and not T.generator_mismatches(back["trace"])
    tr = T.trace_from_record(back["trace"])
    assert T.trace_to_record(tr) == T.trace_to_record(T.trace_from_record(doc["trace"]))
    assert json.loads(json.dumps(T.trace_to_record(tr))) == back["trace"]
    assert all(c.verdict for c in verify_stage(tr, 1))


def test_tamper_detected(one_stage, tmp_path):
    doc = json.loads(json.dumps(T.make_document(one_stage)))
    doc["trace"]["stages"][0]["generator"]["delta_prime"] = "1/7"
    assert T.generator_mismatches(doc["trace"])
    assert T.checksum_mismatches(doc)


def test_bad_documents(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(T.TraceFormatError):
        T.read_document(p)
    p.write_text(json.dumps({"format": T.FORMAT, "version": 99}))
    with pytest.raises(T.TraceFormatError):
        T.read_document(p)


def test_budget_failure():
    tr = run(LAM4, 1, 1, oracle_from_spec(TOWER), ConstructionConfig(cap_digits=1), verify=False)
    assert tr.failure_kind == "budget" and not tr.passed


def test_argument_validation():
    with pytest.raises(ValueError):
        run(LAM4, 0, 1, oracle_from_spec(TOWER))
    with pytest.raises(ValueError):
        run(LAM4, 1, 0, oracle_from_spec(TOWER))


def test_bad_override_fails_constraints():
    cfg = ConstructionConfig(alpha_overrides={1: F(1, 3)}, stop_on_failure=False)
    tr = run(LAM4, 1, 1, oracle_from_spec(TOWER), cfg, verify=False)
    assert not all(c.verdict for c in tr.stages[0].constraints)
