import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import spacetime
from staticgeom.causal import (
    CLASSES,
    classify_eigenvalues,
    definiteness,
    diameter_bound,
    energy_report,
    hyperbolicity_classify,
    is_nsd,
    is_psd,
)
from staticgeom.expr import parse
from staticgeom.geometry import coordinate_metric
from staticgeom.warped import StaticSpacetime

PLANE = coordinate_metric(("x", "y"), ((-1, 1), (-1, 1)), {("x", "x"): "1", ("y", "y"): "1"})


def _checks(report):
    return {c["name"]: c for c in report["checks"]}


def test_definiteness_examples():
    P = spacetime("paraboloid")
    q = definiteness(lambda p: P.fiber_point(p).q, P.fiber)
    assert q.cls == "positive-definite"
    assert q.min_eigenvalue == pytest.approx(2.0) and q.max_eigenvalue == pytest.approx(2.0)
    M = spacetime("minkowski")
    assert definiteness(lambda p: M.fiber_point(p).q, M.fiber).cls == "zero"
    H = spacetime("hyperbolic")
    ric = definiteness(lambda p: H.fiber_point(p).ric, H.fiber)
    assert ric.cls == "negative-definite"
    assert ric.max_eigenvalue == pytest.approx(-1.0)
    C = spacetime("cosh")
    assert definiteness(lambda p: C.fiber_point(p).q, C.fiber).cls == "positive-semidefinite"


def test_definiteness_uses_metric_eigenvalues():
    H = spacetime("hyperbolic")
    # g itself has g^-1 g = I everywhere, although its entries vary wildly
    v = definiteness(lambda p: H.fiber.matrix(p), H.fiber)
    assert v.min_eigenvalue == pytest.approx(1.0) and v.max_eigenvalue == pytest.approx(1.0)


def test_definiteness_needs_samples():
    with pytest.raises(ValueError):
        definiteness(lambda p: np.eye(2), PLANE, np.zeros((0, 2)))


def test_verdict_carries_witnesses_and_box():
    v = definiteness(lambda p: np.diag([p[0], 1.0]), PLANE, 40)
    assert v.cls == "indefinite"
    assert v.witness_min[0] == pytest.approx(v.min_eigenvalue)
    assert v.to_dict()["domain_box"] == [[-1.0, 1.0], [-1.0, 1.0]]


# tightening the tolerance may only refine a verdict
REFINES = {
    "zero": set(CLASSES),
    "positive-semidefinite": {"positive-semidefinite", "positive-definite", "indefinite"},
    "negative-semidefinite": {"negative-semidefinite", "negative-definite", "indefinite"},
    "positive-definite": {"positive-definite"},
    "negative-definite": {"negative-definite"},
    "indefinite": {"indefinite"},
}

reals = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=500, deadline=None)
@given(reals, reals, st.floats(0, 5), st.floats(0, 1))
def test_tolerance_monotonicity(a, b, thr, shrink):
    lo, hi = min(a, b), max(a, b)
    coarse = classify_eigenvalues(lo, hi, thr)
    fine = classify_eigenvalues(lo, hi, thr * shrink)
    assert fine in REFINES[coarse]


@settings(max_examples=500, deadline=None)
@given(reals, reals, st.floats(0, 5))
def test_class_consistent_with_range(a, b, thr):
    lo, hi = min(a, b), max(a, b)
    cls = classify_eigenvalues(lo, hi, thr)
    if is_psd(cls):
        assert lo >= -thr
    if is_nsd(cls):
        assert hi <= thr
    if cls == "positive-definite":
        assert lo > thr
    if cls == "negative-definite":
        assert hi < -thr
    if cls == "indefinite":
        assert lo < -thr and hi > thr


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(1e-12, 1e-2))
def test_field_monotonicity(coeffs, tol):
    a, b, c = coeffs
    form = lambda p: np.array([[a + p[0] ** 2, c * p[1]], [c * p[1], b]])  # noqa: E731
    coarse = definiteness(form, PLANE, 9, tol * 10)
    fine = definiteness(form, PLANE, 9, tol)
    assert fine.cls in REFINES[coarse.cls]


def test_paraboloid_energy_report():
    r = energy_report(spacetime("paraboloid"))
    c = _checks(r)
    assert r["hypotheses"]["Ric_F"]["class"] == "zero"
    assert r["hypotheses"]["Q_F^f"]["class"] == "positive-definite"
    assert c["NCC"]["verdict"] == "pass" and c["TCC/SEC"]["verdict"] == "pass"
    assert c["empirical_consistency"]["verdict"] == "pass"
    assert r["empirical"]["min_ric_null"] >= -1e-8
    assert r["empirical"]["causal_vectors"] == 10_000
    assert r["implied"]["ncc_iff_Q_psd"]


def test_hyperbolic_energy_report():
    r = energy_report(spacetime("hyperbolic"))
    c = _checks(r)
    assert r["implied"]["ric_nonpositive_on_causal"]
    assert r["empirical"]["max_ric_causal"] <= r["empirical"]["ric_threshold"]
    assert c["reversed_NCC"]["verdict"] == "pass"
    # tau_F = -2 < 0 rules out the weak energy condition
    assert c["WEC"]["verdict"] == "fail"
    assert c["empirical_consistency"]["verdict"] == "pass"


def test_minkowski_energy_report():
    r = energy_report(spacetime("minkowski"))
    assert all(c["verdict"] == "pass" for c in r["checks"])
    assert r["empirical"]["min_ric_null"] == 0.0 and r["empirical"]["max_T_causal"] == 0.0


def test_subharmonic_necessary_condition():
    # f = 2 + cos(th) has Lap f = -2 cos(th) < 0 in the northern hemisphere
    r = energy_report(spacetime("sphere_warp"), causal_samples=2000)
    assert not r["necessary"]["subharmonic"]
    assert _checks(r)["TCC/SEC"]["verdict"] == "fail"


def test_causal_sampling_covers_null_cone():
    r = energy_report(spacetime("cosh"), causal_samples=400)
    emp = r["empirical"]
    assert emp["null_vectors"] == 100
    assert emp["max_gap_ricci_forms"] <= 1e-10 and emp["max_gap_stress_forms"] <= 1e-10


def test_energy_report_deterministic():
    a = energy_report(spacetime("cosh"), causal_samples=500, rng=3)
    b = energy_report(spacetime("cosh"), causal_samples=500, rng=3)
    assert a == b


def test_hyperbolicity_examples():
    h = hyperbolicity_classify(spacetime("hyperbolic"))
    assert h["classification"] == "trivial-pseudo-distance"
    assert h["checklist"]["inf_f_source"] == "exact (constant warp)"
    p = hyperbolicity_classify(spacetime("paraboloid"))
    assert p["classification"] == "conformally-hyperbolic"


def test_hyperbolicity_missing_flags_inconclusive():
    H = spacetime("hyperbolic")
    bare = StaticSpacetime(H.fiber, H.warp)
    assert hyperbolicity_classify(bare)["classification"] == "inconclusive"
    short = StaticSpacetime(H.fiber, H.warp, 0.0, 1.0, complete=True)
    assert hyperbolicity_classify(short)["classification"] == "inconclusive"
    assert not hyperbolicity_classify(short)["checklist"]["I_is_R"]


def test_sampled_inf_f_does_not_certify():
    H = spacetime("hyperbolic")
    S = StaticSpacetime(H.fiber, parse("2 + 0*x", ["x", "y"]), complete=True)
    # 2 + 0*x is not syntactically constant, so inf f is only sampled
    out = hyperbolicity_classify(S)
    assert out["checklist"]["inf_f_source"] == "sampled"
    assert out["classification"] == "inconclusive"
    declared = StaticSpacetime(H.fiber, S.warp, complete=True, inf_f_declared=2.0)
    assert hyperbolicity_classify(declared)["classification"] == "trivial-pseudo-distance"


def test_diameter_examples():
    d = diameter_bound(spacetime("cosh"))
    assert d["c"] == pytest.approx(1.0, abs=1e-12)
    assert d["bound"] == pytest.approx(math.pi * math.sqrt(2))
    p = diameter_bound(spacetime("paraboloid"))
    assert p["c"] == pytest.approx(4 / 3)
    assert p["bound"] == pytest.approx(math.pi * math.sqrt(1.5))
    m = diameter_bound(spacetime("minkowski"))
    assert m["bound"] is None and m["c"] == 0.0 and m["reasons"]


def test_diameter_item_three_needs_sup_f():
    d = diameter_bound(spacetime("cosh"))
    assert len(d["items"]) == 2
    assert "sup f only sampled" in d["diameter_item_missing"]
    C = spacetime("cosh")
    declared = StaticSpacetime(C.fiber, C.warp, complete=True, sup_f_declared=math.cosh(1.0))
    assert len(diameter_bound(declared)["items"]) == 3
