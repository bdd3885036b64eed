"""Pointwise semi-Riemannian geometry on a single coordinate chart.

All curvature is evaluated on demand at a point from second-order jets of
the metric components; no mesh or global discretisation is involved.

Index conventions (all arrays are plain numpy):

* ``dg[k, i, j] = d_k g_ij`` and ``ddg[k, l, i, j] = d_k d_l g_ij``
* ``gamma[k, i, j] = Gamma^k_ij``
* ``riemann[l, i, j, k] = R^l_ijk`` with ``Ric_jk = R^i_jik``; the round
  sphere has positive Ricci curvature in this convention.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .expr import Node, bind, eval_jet2, evaluate

DEGENERACY_THRESHOLD = 1e-12


class GeometryError(ValueError):
    pass


class DegenerateMetricError(GeometryError):
    def __init__(self, point, det: float):
        self.point = tuple(float(x) for x in point)
        self.det = det
        super().__init__(f"metric is degenerate at {self.point} (det={det:.3e})")


class SignatureError(GeometryError):
    def __init__(self, point, expected: int, found: int):
        self.point = tuple(float(x) for x in point)
        super().__init__(
            f"metric at {self.point} has {found} negative eigenvalue(s), expected {expected}"
        )


@dataclass(frozen=True)
class Chart:
    """Coordinate names plus the closed box used for sampling."""

    names: tuple[str, ...]
    domain: tuple[tuple[float, float], ...]
    margin: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "domain", tuple((float(a), float(b)) for a, b in self.domain))
        if len(self.names) == 0:
            raise GeometryError("a chart needs at least one coordinate")
        if len(self.domain) != len(self.names):
            raise GeometryError("one domain interval per coordinate is required")
        if self.margin < 0:
            raise GeometryError("singular margin must be non-negative")
        for name, (lo, hi) in zip(self.names, self.box):
            if not lo < hi:
                raise GeometryError(f"interval for {name!r} is empty after the margin shrink")

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def box(self) -> tuple[tuple[float, float], ...]:
        m = self.margin
        return tuple((lo + m, hi - m) for lo, hi in self.domain)

    def contains(self, p) -> bool:
        return all(lo <= x <= hi for x, (lo, hi) in zip(p, self.box))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Deterministic sample of ``n`` points: centre, box corners, then uniform draws.

        The centre and corners are included so that monotone extrema over the
        box are seen exactly.
        """
        if n < 1:
            raise GeometryError("at least one sample point is required")
        box = np.array(self.box)
        lo, hi = box[:, 0], box[:, 1]
        fixed = [0.5 * (lo + hi)]
        if self.dim <= 4:
            for corner in itertools.product(*self.box):
                fixed.append(np.array(corner))
        fixed = np.array(fixed[:n])
        extra = n - len(fixed)
        if extra <= 0:
            return fixed
        draws = lo + (hi - lo) * rng.random((extra, self.dim))
        return np.vstack([fixed, draws])

    def sample_interior(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform draws only, without the centre/corner points."""
        box = np.array(self.box)
        return box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((n, self.dim))


@dataclass(frozen=True)
class SymBilinear:
    """Symmetric bilinear form at a point; the upper triangle is authoritative."""

    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", np.triu(m) + np.triu(m, 1).T)

    def __call__(self, u, v) -> float:
        return float(np.asarray(u) @ self.matrix @ np.asarray(v))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class VectorFieldExpr:
    chart: Chart
    components: tuple[Node, ...]
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        comps = tuple(bind(c, self.chart.names) for c in self.components)
        if len(comps) != self.chart.dim:
            raise GeometryError(
                f"vector field has {len(comps)} components, chart dimension is {self.chart.dim}"
            )
        object.__setattr__(self, "components", comps)

    def values(self, p) -> np.ndarray:
        return np.array([evaluate(c, p, self.params) for c in self.components])

    def jet1(self, p) -> tuple[np.ndarray, np.ndarray]:
        """Components and their Jacobian ``dX[k, i] = d_i X^k`` at ``p``."""
        jets = [eval_jet2(c, p, self.params) for c in self.components]
        return np.array([j.value for j in jets]), np.array([j.grad for j in jets])


@dataclass(frozen=True)
class MetricField:
    chart: Chart
    components: tuple[tuple[Node, ...], ...]
    signature: int = 0
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        n = self.chart.dim
        comps = [[bind(c, self.chart.names) for c in row] for row in self.components]
        if len(comps) != n or any(len(row) != n for row in comps):
            raise GeometryError(f"metric must be a {n}x{n} matrix of expressions")
        # symmetric by construction: the upper triangle wins
        full = tuple(tuple(comps[min(i, j)][max(i, j)] for j in range(n)) for i in range(n))
        object.__setattr__(self, "components", full)

    @classmethod
    def from_upper(
        cls,
        chart: Chart,
        upper: Mapping[tuple[int, int], Node],
        signature: int = 0,
        params: Mapping[str, float] | None = None,
    ) -> MetricField:
        from .expr import const

        n = chart.dim
        rows = [[const(0.0)] * n for _ in range(n)]
        for (i, j), e in upper.items():
            i, j = min(i, j), max(i, j)
            rows[i][j] = e
        return cls(chart, tuple(tuple(r) for r in rows), signature, dict(params or {}))

    @property
    def dim(self) -> int:
        return self.chart.dim

    def matrix(self, p) -> np.ndarray:
        n = self.dim
        g = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                g[i, j] = g[j, i] = evaluate(self.components[i][j], p, self.params)
        return g

    def jets(self, p) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.dim
        g = np.empty((n, n))
        dg = np.empty((n, n, n))
        ddg = np.empty((n, n, n, n))
        for i in range(n):
            for j in range(i, n):
                jet = eval_jet2(self.components[i][j], p, self.params)
                g[i, j] = g[j, i] = jet.value
                dg[:, i, j] = dg[:, j, i] = jet.grad
                ddg[:, :, i, j] = ddg[:, :, j, i] = jet.hess
        return g, dg, ddg

    def at(self, p) -> LocalGeometry:
        return LocalGeometry(self, np.asarray(p, dtype=float))

    def validate(self, points) -> None:
        """Check nondegeneracy and the expected signature at every point."""
        for p in points:
            g = self.at(p).g
            neg = int(np.sum(np.linalg.eigvalsh(g) < 0))
            if neg != self.signature:
                raise SignatureError(p, self.signature, neg)


class LocalGeometry:
    """Metric jets and derived curvature at one point, computed lazily."""

    def __init__(self, metric: MetricField, p: np.ndarray):
        self.metric = metric
        self.p = p
        g, self.dg, self.ddg = metric.jets(p)
        scale = float(np.max(np.abs(g))) or 1.0
        det = float(np.linalg.det(g))
        if abs(det) < DEGENERACY_THRESHOLD * scale ** g.shape[0]:
            raise DegenerateMetricError(p, det)
        self.g = g

    @cached_property
    def ginv(self) -> np.ndarray:
        gi = np.linalg.inv(self.g)
        return 0.5 * (gi + gi.T)

    @cached_property
    def _gamma_lower(self) -> np.ndarray:
        # Gamma_{l i j} = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
        dg = self.dg
        return 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)

    @cached_property
    def gamma(self) -> np.ndarray:
        return np.einsum("kl,lij->kij", self.ginv, self._gamma_lower)

    @cached_property
    def dgamma(self) -> np.ndarray:
        """``dgamma[m, k, i, j] = d_m Gamma^k_ij`` from second jets of the metric."""
        ginv, ddg = self.ginv, self.ddg
        dginv = -np.einsum("ka,mab,bl->mkl", ginv, self.dg, ginv)
        dlower = 0.5 * (
            np.einsum("mijl->mlij", ddg) + np.einsum("mjil->mlij", ddg) - ddg
        )
        return np.einsum("mkl,lij->mkij", dginv, self._gamma_lower) + np.einsum(
            "kl,mlij->mkij", ginv, dlower
        )

    @cached_property
    def riemann(self) -> np.ndarray:
        G, dG = self.gamma, self.dgamma
        return (
            np.einsum("jlki->lijk", dG)
            - np.einsum("klji->lijk", dG)
            + np.einsum("ljm,mki->lijk", G, G)
            - np.einsum("lkm,mji->lijk", G, G)
        )

    @cached_property
    def ricci(self) -> np.ndarray:
        r = np.einsum("ijik->jk", self.riemann)
        return np.triu(r) + np.triu(r, 1).T

    @cached_property
    def scalar(self) -> float:
        return float(np.sum(self.ginv * self.ricci))

    def gradient(self, phi: Node, params=None) -> np.ndarray:
        jet = eval_jet2(phi, self.p, self._params(params))
        return self.ginv @ jet.grad

    def hessian(self, phi: Node, params=None) -> np.ndarray:
        jet = eval_jet2(phi, self.p, self._params(params))
        return self.hessian_from_jet(jet.grad, jet.hess)

    def hessian_from_jet(self, grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
        h = hess - np.einsum("kij,k->ij", self.gamma, grad)
        return np.triu(h) + np.triu(h, 1).T

    def laplacian(self, phi: Node, params=None) -> float:
        return float(np.sum(self.ginv * self.hessian(phi, params)))

    def lie(self, X: np.ndarray, dX: np.ndarray) -> np.ndarray:
        """Coordinate Lie derivative of the metric along a field with Jacobian ``dX[k, i]``."""
        g = self.g
        out = np.einsum("k,kij->ij", X, self.dg) + np.einsum("kj,ki->ij", g, dX) + np.einsum(
            "ik,kj->ij", g, dX
        )
        return np.triu(out) + np.triu(out, 1).T

    def lie_covariant(self, X: np.ndarray, dX: np.ndarray) -> np.ndarray:
        """Lie derivative via the Levi-Civita connection: g(nabla_i X, d_j) + g(d_i, nabla_j X)."""
        nabla = dX.T + np.einsum("kil,l->ik", self.gamma, X)  # nabla[i, k] = nabla_i X^k
        low = nabla @ self.g  # low[i, j] = g(nabla_i X, d_j)
        return low + low.T

    def _params(self, params):
        return self.metric.params if params is None else params


def _as_local(M: MetricField, p) -> LocalGeometry:
    return M.at(p)


def metric_at(M: MetricField, p) -> SymBilinear:
    return SymBilinear(_as_local(M, p).g, "g")


def christoffel(M: MetricField, p) -> np.ndarray:
    return _as_local(M, p).gamma


def grad(M: MetricField, phi: Node, p) -> np.ndarray:
    return _as_local(M, p).gradient(phi)


def hessian(M: MetricField, phi: Node, p) -> SymBilinear:
    return SymBilinear(_as_local(M, p).hessian(phi), "hessian")


def laplacian(M: MetricField, phi: Node, p) -> float:
    return _as_local(M, p).laplacian(phi)


def riemann(M: MetricField, p) -> np.ndarray:
    return _as_local(M, p).riemann


def ricci(M: MetricField, p) -> SymBilinear:
    return SymBilinear(_as_local(M, p).ricci, "ricci")


def scalar_curv(M: MetricField, p) -> float:
    return _as_local(M, p).scalar


def lie_metric(M: MetricField, X, p) -> SymBilinear:
    """Lie derivative of the metric along ``X`` (anything exposing ``jet1(p)``)."""
    local = _as_local(M, p)
    vals, jac = X.jet1(local.p)
    return SymBilinear(local.lie(vals, jac), "lie_metric")


def coordinate_metric(
    names: Sequence[str],
    domain: Sequence[tuple[float, float]],
    components: Mapping[tuple[str, str], str],
    margin: float = 0.0,
    signature: int = 0,
    params: Mapping[str, float] | None = None,
) -> MetricField:
    """Convenience constructor from source text keyed by coordinate-name pairs."""
    from .expr import parse

    chart = Chart(tuple(names), tuple(domain), margin)
    params = dict(params or {})
    index = {n: i for i, n in enumerate(names)}
    upper = {
        (index[a], index[b]): parse(src, names, params) for (a, b), src in components.items()
    }
    return MetricField.from_upper(chart, upper, signature, params)


def vector_field(chart: Chart, sources: Sequence[str], params: Mapping[str, float] | None = None) -> VectorFieldExpr:
    from .expr import parse

    params = dict(params or {})
    return VectorFieldExpr(chart, tuple(parse(s, chart.names, params) for s in sources), params)
