import math

import numpy as np
import pytest

from conftest import MANIFESTS, spacetime
from staticgeom.expr import parse
from staticgeom.geometry import coordinate_metric, vector_field
from staticgeom.killing import (
    KillingError,
    SpacetimeFieldCandidate,
    assemble_candidate,
    b_tensor,
    check_conformal,
    check_f2grad_killing,
    check_killing,
    check_theorem_static_candidate,
    classify_compact_fiber,
    classify_structured,
    eigen_residual,
)
from staticgeom.manifest import load_manifest

PLANE = coordinate_metric(("x", "y"), ((-1, 1), (-1, 1)), {("x", "x"): "1", ("y", "y"): "1"})
SPHERE = spacetime("sphere").fiber


def P(src, names=("x", "y")):
    return parse(src, list(names))


def T(src):
    return parse(src, ["t"])


def test_check_killing_examples():
    rot = check_killing(PLANE, vector_field(PLANE.chart, ["-y", "x"]))
    assert rot.verdict == "killing" and rot.residuals["lie_metric"] == 0.0
    dil = check_killing(PLANE, vector_field(PLANE.chart, ["x", "y"]))
    assert dil.verdict == "neither" and dil.residuals["lie_metric"] == pytest.approx(2.0)
    kz = check_killing(SPHERE, vector_field(SPHERE.chart, ["0", "1"]))
    assert kz.verdict == "killing" and kz.residuals["lie_metric"] <= 1e-12


def test_check_conformal_examples():
    dil = check_conformal(PLANE, vector_field(PLANE.chart, ["x", "y"]))
    assert dil.verdict == "conformal"
    assert dil.constants["sigma_min"] == pytest.approx(1.0) and dil.constants["sigma_max"] == pytest.approx(1.0)
    rot = check_conformal(PLANE, vector_field(PLANE.chart, ["-y", "x"]))
    # a Killing field is conformal with vanishing factor
    assert rot.verdict == "conformal" and rot.constants["sigma_max"] == 0.0
    sq = check_conformal(PLANE, vector_field(PLANE.chart, ["x^2", "0"]))
    assert sq.verdict == "neither" and sq.residuals["conformal"] > 0.5


def test_report_invariant_residuals_within_tol_when_passing():
    for X in (["-y", "x"], ["x", "y"], ["1", "0"]):
        rep = check_conformal(PLANE, vector_field(PLANE.chart, X))
        if rep.passed:
            assert all(v <= rep.tol for v in rep.residuals.values())


def test_static_candidate_examples():
    M = spacetime("minkowski")
    zero = vector_field(M.fiber.chart, ["0", "0"])
    dt = check_theorem_static_candidate(M, T("1"), zero)
    assert dt.verdict == "killing" and all(v <= 1e-15 for v in dt.residuals.values())
    dil = check_theorem_static_candidate(M, T("t"), vector_field(M.fiber.chart, ["x", "y"]))
    assert dil.verdict == "conformal"
    assert dil.constants["mu"] == pytest.approx(1.0)
    sq = check_theorem_static_candidate(M, T("t^2"), zero)
    assert sq.verdict == "neither" and sq.residuals["h_affine"] > 0


def test_static_candidate_agrees_with_raw_spacetime_check():
    M = spacetime("minkowski")
    dil = check_theorem_static_candidate(M, T("t"), vector_field(M.fiber.chart, ["x", "y"]))
    raw = dil.extra["raw_spacetime"]
    assert raw["conformal_residual"] <= 1e-8 and raw["killing_residual"] > 1


def test_b_tensor_examples():
    Z = vector_field(PLANE.chart, ["0", "1"])
    np.testing.assert_allclose(b_tensor(PLANE, Z, P("x"), [0.2, 0.3]).matrix, [[0, 1], [1, 0]])
    assert not b_tensor(PLANE, Z, P("4"), [0.2, 0.3]).matrix.any()
    assert not b_tensor(PLANE, vector_field(PLANE.chart, ["0", "0"]), P("x"), [0.2, 0.3]).matrix.any()


def test_f2grad_examples():
    one = P("1")
    const = check_f2grad_killing(PLANE, one, P("3"))
    assert const.verdict == "killing" and const.residuals["hessian_identity"] == 0.0
    lin = check_f2grad_killing(PLANE, one, P("x"))
    assert lin.verdict == "killing"
    quad = check_f2grad_killing(PLANE, one, P("x^2"))
    assert quad.verdict == "neither"
    assert quad.extra["verdicts_agree"]


def test_f2grad_identity_equals_half_lie_over_f2():
    # both residuals measure the same tensor up to the factor 2 f^2
    f = P("1 + x^2 + y^2")
    psi = P("x*y + sin(y)")
    rep = check_f2grad_killing(PLANE, f, psi)
    assert rep.verdict == "neither" and rep.extra["verdicts_agree"]


def test_eigen_residual_examples():
    one = P("1")
    assert eigen_residual(PLANE, one, P("2"), 0.0) == 0.0
    assert eigen_residual(PLANE, one, P("x"), 0.0) == 0.0
    assert eigen_residual(PLANE, one, P("sin(x)"), 0.5) <= 1e-14
    assert eigen_residual(PLANE, one, P("sin(x)"), 1.0) > 0.1


def test_boost_is_case_ii():
    m = load_manifest(MANIFESTS / "minkowski_boost.ini")
    cand = m.killing.candidate()
    rep = classify_structured(m.spacetime, cand)
    assert rep.case == "ii" and rep.verdict == "killing"
    np.testing.assert_allclose(rep.constants["tau"], [1.0, 0.0], atol=1e-12)
    raw = check_killing(m.spacetime.product_metric, assemble_candidate(m.spacetime, cand))
    assert raw.verdict == "killing"


def test_t_squared_rejected():
    m = load_manifest(MANIFESTS / "t_squared.ini")
    rep = classify_structured(m.spacetime, m.killing.candidate())
    assert rep.verdict == "neither"


def test_einstein_static_structured_candidate():
    m = load_manifest(MANIFESTS / "einstein_static.ini")
    S = m.spacetime
    phis = tuple(T(c) for c in ("0.5", "-1", "0", "2", "0", "0.25"))
    cand = SpacetimeFieldCandidate(T("1"), parse("1", list(S.fiber.chart.names)), phis, m.killing.basis, m.killing.basis_names)
    rep = classify_structured(S, cand)
    assert rep.verdict == "killing" and rep.case in ("i", "ii")
    raw = check_killing(S.product_metric, assemble_candidate(S, cand), tol=1e-10)
    assert raw.verdict == "killing"


def test_unit_psi_with_linear_h_on_warped_fiber_is_rejected():
    S = spacetime("paraboloid")
    names = list(S.fiber.chart.names)
    cand = SpacetimeFieldCandidate(T("t"), parse("1", names))
    rep = classify_structured(S, cand)
    assert rep.verdict == "neither"
    assert max(rep.residuals.values()) > rep.tol


def test_non_killing_basis_is_a_precondition_error():
    S = spacetime("minkowski")
    bad = vector_field(S.fiber.chart, ["x", "y"])
    cand = SpacetimeFieldCandidate(T("1"), P("1"), (T("1"),), (bad,))
    with pytest.raises(KillingError):
        classify_structured(S, cand)


def test_compact_fiber_examples():
    m = load_manifest(MANIFESTS / "sphere_warp.ini")
    rep = classify_compact_fiber(m.spacetime, m.killing.basis, m.killing.basis_names)
    assert rep.constants["generators"] == ["d_t", "kz"]
    e = load_manifest(MANIFESTS / "einstein_static.ini")
    rep = classify_compact_fiber(e.spacetime, e.killing.basis, e.killing.basis_names)
    assert rep.constants["generators"] == ["d_t", *e.killing.basis_names]
    assert max(rep.residuals.values()) <= 1e-10
    empty = classify_compact_fiber(e.spacetime, [], [])
    assert empty.constants["generators"] == ["d_t"]


def test_compact_fiber_requires_flag():
    S = spacetime("paraboloid")
    with pytest.raises(KillingError):
        classify_compact_fiber(S, [vector_field(S.fiber.chart, ["-y", "x"])])


def test_sphere_rotations_move_nonaxial_warp():
    S = spacetime("sphere_warp")
    kx = vector_field(S.fiber.chart, ["-sin(ph)", "-cos(ph)*cos(th)/sin(th)"])
    p = np.array([1.0, 0.4])
    vals, _ = kx.jet1(p)
    fp = S.fiber_point(p)
    # K(f) = -sin(th) * K^th for f = 2 + cos(th)
    assert float(vals @ fp.df) == pytest.approx(math.sin(0.4) * math.sin(1.0))
