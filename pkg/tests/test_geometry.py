import math

import numpy as np
import pytest
import sympy as sp

from staticgeom.expr import parse
from staticgeom.geometry import (
    Chart,
    DegenerateMetricError,
    GeometryError,
    SignatureError,
    christoffel,
    coordinate_metric,
    grad,
    hessian,
    laplacian,
    lie_metric,
    metric_at,
    ricci,
    riemann,
    scalar_curv,
    vector_field,
)

RNG = np.random.default_rng(7)

PLANE = coordinate_metric(("x", "y"), ((-2, 2), (-2, 2)), {("x", "x"): "1", ("y", "y"): "1"})
SPHERE = coordinate_metric(("th", "ph"), ((0, math.pi), (-math.pi, math.pi)), {("th", "th"): "1", ("ph", "ph"): "sin(th)^2"}, margin=0.05)
HYPER = coordinate_metric(("x", "y"), ((-2, 2), (0.2, 4)), {("x", "x"): "1/y^2", ("y", "y"): "1/y^2"})
# a generic non-diagonal 3-metric for the symbolic oracle
GENERIC_SRC = {
    ("x", "x"): "2 + y^2",
    ("x", "y"): "0.3*x*z",
    ("y", "y"): "1 + x^2",
    ("z", "z"): "3 + z^2 + y",
}
GENERIC = coordinate_metric(("x", "y", "z"), ((-1, 1), (-1, 1), (-1, 1)), GENERIC_SRC)
LORENTZ = coordinate_metric(
    ("t", "x", "y"), ((-1, 1), (-1, 1), (-1, 1)), {("t", "t"): "-(1 + x^2)", ("x", "x"): "1", ("y", "y"): "cosh(x)"}, signature=1
)
FIXTURES = [PLANE, SPHERE, HYPER, GENERIC, LORENTZ]


def _sympy_curvature(point):
    X = sp.symbols("x y z", real=True)
    loc = dict(zip("xyz", X))
    g = sp.zeros(3, 3)
    idx = {"x": 0, "y": 1, "z": 2}
    for (a, b), src in GENERIC_SRC.items():
        e = sp.sympify(src.replace("^", "**"), locals=loc)
        g[idx[a], idx[b]] = g[idx[b], idx[a]] = e
    gi = g.inv()
    Gam = [[[sum(gi[k, l] * (sp.diff(g[j, l], X[i]) + sp.diff(g[i, l], X[j]) - sp.diff(g[i, j], X[l])) for l in range(3)) / 2 for j in range(3)] for i in range(3)] for k in range(3)]
    R = [
        [
            [
                [
                    sp.diff(Gam[l][k][i], X[j])
                    - sp.diff(Gam[l][j][i], X[k])
                    + sum(Gam[l][j][m] * Gam[m][k][i] - Gam[l][k][m] * Gam[m][j][i] for m in range(3))
                    for k in range(3)
                ]
                for j in range(3)
            ]
            for i in range(3)
        ]
        for l in range(3)
    ]
    G = np.array(sp.lambdify(X, Gam, "math")(*point), dtype=float)
    Rm = np.array(sp.lambdify(X, R, "math")(*point), dtype=float)
    return G, Rm


def test_metric_at_examples():
    np.testing.assert_array_equal(metric_at(PLANE, [0.3, 0.1]).matrix, np.eye(2))
    np.testing.assert_allclose(metric_at(SPHERE, [math.pi / 2, 0.0]).matrix, np.eye(2))
    np.testing.assert_allclose(metric_at(HYPER, [0.0, 2.0]).matrix, np.diag([0.25, 0.25]))


def test_metric_symmetrised_from_upper_triangle():
    m = GENERIC.matrix([0.2, 0.4, -0.3])
    assert np.array_equal(m, m.T)


def test_christoffel_examples():
    assert not christoffel(PLANE, [0.5, 0.5]).any()
    assert christoffel(SPHERE, [math.pi / 4, 0.0])[0, 1, 1] == pytest.approx(-0.5, abs=1e-15)
    assert christoffel(SPHERE, [math.pi / 4, 0.0])[1, 0, 1] == pytest.approx(1.0, abs=1e-15)
    assert christoffel(HYPER, [0.0, 1.0])[0, 0, 1] == pytest.approx(-1.0, abs=1e-15)


def test_generic_metric_matches_symbolic_oracle():
    p = [0.3, -0.4, 0.6]
    G, Rm = _sympy_curvature(p)
    np.testing.assert_allclose(christoffel(GENERIC, p), G, atol=1e-13)
    np.testing.assert_allclose(riemann(GENERIC, p), Rm, atol=1e-12)


def test_gradient_examples():
    np.testing.assert_allclose(grad(PLANE, parse("x^2 + y^2", ["x", "y"]), [1, 2]), [2, 4])
    assert not grad(PLANE, parse("7", ["x", "y"]), [1, 2]).any()
    np.testing.assert_allclose(grad(HYPER, parse("y", ["x", "y"]), [0, 2]), [0, 4])


def test_hessian_and_laplacian_examples():
    r2 = parse("x^2 + y^2", ["x", "y"])
    for p in ([0.1, 0.2], [-1.0, 1.5]):
        np.testing.assert_allclose(hessian(PLANE, r2, p).matrix, 2 * np.eye(2))
        assert laplacian(PLANE, r2, p) == pytest.approx(4.0)
    assert not hessian(SPHERE, parse("3", ["th", "ph"]), [1.0, 0.5]).matrix.any()
    c = parse("cos(th)", ["th", "ph"])
    np.testing.assert_allclose(hessian(SPHERE, c, [math.pi / 3, 0.0]).matrix, np.diag([-0.5, -0.375]), atol=1e-15)
    for th in (0.4, 1.0, 2.5):
        assert laplacian(SPHERE, c, [th, 0.2]) == pytest.approx(-2 * math.cos(th), abs=1e-14)


def test_constant_curvature_fixtures():
    for _ in range(20):
        p = SPHERE.chart.sample(1, RNG)[0]
        np.testing.assert_allclose(ricci(SPHERE, p).matrix, SPHERE.matrix(p), atol=1e-13)
        assert scalar_curv(SPHERE, p) == pytest.approx(2.0, abs=1e-12)
        q = HYPER.chart.sample(1, RNG)[0]
        np.testing.assert_allclose(ricci(HYPER, q).matrix, -HYPER.matrix(q), atol=1e-12)
        assert scalar_curv(HYPER, q) == pytest.approx(-2.0, abs=1e-12)
    assert not ricci(PLANE, [0.0, 0.0]).matrix.any()
    assert scalar_curv(PLANE, [0.0, 0.0]) == 0.0


def test_lie_examples():
    rot = vector_field(PLANE.chart, ["-y", "x"])
    dil = vector_field(PLANE.chart, ["x", "y"])
    zero = vector_field(SPHERE.chart, ["0", "0"])
    assert not lie_metric(PLANE, rot, [0.3, -0.7]).matrix.any()
    np.testing.assert_allclose(lie_metric(PLANE, dil, [0.3, -0.7]).matrix, 2 * np.eye(2))
    assert not lie_metric(SPHERE, zero, [1.0, 0.0]).matrix.any()


@pytest.mark.parametrize("M", FIXTURES, ids=["plane", "sphere", "hyper", "generic", "lorentz"])
def test_curvature_identities(M):
    for p in M.chart.sample(10, RNG):
        loc = M.at(p)
        R = loc.riemann
        # R^l_{ijk} + R^l_{jki} + R^l_{kij}
        cyc = R + np.transpose(R, (0, 2, 3, 1)) + np.transpose(R, (0, 3, 1, 2))
        assert np.max(np.abs(cyc)) <= 1e-9
        np.testing.assert_allclose(loc.ricci, np.einsum("ijik->jk", R), atol=1e-12 * (1 + np.max(np.abs(R))))
        # antisymmetry in the last pair
        assert np.max(np.abs(R + np.transpose(R, (0, 1, 3, 2)))) <= 1e-12 * (1 + np.max(np.abs(R)))


@pytest.mark.parametrize("M", FIXTURES, ids=["plane", "sphere", "hyper", "generic", "lorentz"])
def test_laplacian_is_trace_of_hessian(M):
    names = M.chart.names
    phis = [parse(s, names) for s in (f"sin({names[0]})*{names[1]}^2", f"exp({names[-1]}/3) + {names[0]}^3", f"cosh({names[0]}*{names[1]})")]
    for p in M.chart.sample(8, RNG):
        for phi in phis:
            H = hessian(M, phi, p).matrix
            assert np.array_equal(H, H.T)
            lap = laplacian(M, phi, p)
            tr = float(np.trace(np.linalg.inv(M.matrix(p)) @ H))
            assert abs(lap - tr) <= 1e-12 * max(1.0, abs(tr))


@pytest.mark.parametrize("M", FIXTURES, ids=["plane", "sphere", "hyper", "generic", "lorentz"])
def test_lie_derivative_two_routes(M):
    names = M.chart.names
    comps = [f"{names[(i + 1) % len(names)]}^2 - sin({names[i]})" for i in range(len(names))]
    X = vector_field(M.chart, comps)
    for p in M.chart.sample(8, RNG):
        loc = M.at(p)
        vals, jac = X.jet1(p)
        a, b = loc.lie(vals, jac), loc.lie_covariant(vals, jac)
        assert np.max(np.abs(a - b)) <= 1e-10 * (1 + np.max(np.abs(a)))


def test_sphere_rotation_is_killing():
    kz = vector_field(SPHERE.chart, ["0", "1"])
    kx = vector_field(SPHERE.chart, ["-sin(ph)", "-cos(ph)*cos(th)/sin(th)"])
    for p in SPHERE.chart.sample(10, RNG):
        assert np.max(np.abs(lie_metric(SPHERE, kz, p).matrix)) <= 1e-12
        assert np.max(np.abs(lie_metric(SPHERE, kx, p).matrix)) <= 1e-12


def test_degenerate_metric_rejected():
    M = coordinate_metric(("x", "y"), ((-1, 1), (-1, 1)), {("x", "x"): "x^2", ("y", "y"): "1"})
    with pytest.raises(DegenerateMetricError):
        M.at([0.0, 0.3])
    # the sphere pole is excluded by the margin
    assert all(SPHERE.chart.contains(p) for p in SPHERE.chart.sample(50, RNG))
    assert not SPHERE.chart.contains([0.0, 0.0])


def test_signature_validation():
    with pytest.raises(SignatureError):
        PLANE.__class__(PLANE.chart, PLANE.components, signature=1).validate([[0.0, 0.0]])
    LORENTZ.validate(LORENTZ.chart.sample(5, RNG))


def test_chart_rejects_empty_box():
    with pytest.raises(GeometryError):
        Chart(("x",), ((0.0, 1.0),), margin=0.6)


def test_sampling_starts_at_center_and_corners():
    pts = PLANE.chart.sample(10, np.random.default_rng(0))
    np.testing.assert_array_equal(pts[0], [0.0, 0.0])
    assert {tuple(p) for p in pts[1:5]} == {(-2.0, -2.0), (-2.0, 2.0), (2.0, -2.0), (2.0, 2.0)}
