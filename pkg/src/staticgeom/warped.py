"""Standard static space-times ``I x_f F`` with metric ``-f^2 dt^2 + g_F``.

Curvature is available two ways: from the warped-product formulas, which
only need fiber data (Ric_F, the Hessian and Laplacian of f), and from the
generic engine run on the (s+1)-dimensional product chart. The latter is the
cross-check for the former.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .expr import Node, bind, eval_jet2, evaluate, parse
from .geometry import Chart, GeometryError, LocalGeometry, MetricField, SymBilinear


class WarpError(GeometryError):
    pass


@dataclass(frozen=True)
class SpacetimeVector:
    """Tangent vector ``u d_t + v`` split into its time and fiber parts."""

    u: float
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", float(self.u))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.u], self.v])

    @classmethod
    def from_array(cls, a) -> SpacetimeVector:
        a = np.asarray(a, dtype=float)
        return cls(a[0], a[1:])


@dataclass(frozen=True)
class StaticSpacetime:
    fiber: MetricField
    warp: Node
    t1: float = -math.inf
    t2: float = math.inf
    compact: bool = False
    complete: bool = False
    ricci_flat: bool = False
    inf_f_declared: float | None = None
    sup_f_declared: float | None = None
    t_window: float = 10.0
    time_name: str = "t"

    def __post_init__(self):
        if not self.t1 < self.t2:
            raise WarpError(f"time interval ({self.t1}, {self.t2}) is empty")
        if self.fiber.signature != 0:
            raise WarpError("the fiber metric must be Riemannian")
        if self.time_name in self.fiber.chart.names:
            raise WarpError(f"fiber coordinate may not be named {self.time_name!r}")
        object.__setattr__(self, "warp", bind(self.warp, self.fiber.chart.names))

    @property
    def s(self) -> int:
        return self.fiber.dim

    @property
    def n(self) -> int:
        return self.fiber.dim + 1

    @property
    def params(self):
        return self.fiber.params

    @property
    def whole_line(self) -> bool:
        return self.t1 == -math.inf and self.t2 == math.inf

    @property
    def t_range(self) -> tuple[float, float]:
        lo = max(self.t1, -self.t_window)
        hi = min(self.t2, self.t_window)
        if math.isfinite(self.t1) and lo == self.t1:
            lo += 1e-6 * (hi - lo)
        if math.isfinite(self.t2) and hi == self.t2:
            hi -= 1e-6 * (hi - lo)
        return lo, hi

    def f(self, p) -> float:
        return evaluate(self.warp, p, self.params)

    def validate(self, points) -> None:
        for p in points:
            val = self.f(p)
            if not val > 0:
                pt = ", ".join(f"{x:g}" for x in p)
                raise WarpError(f"warp nonpositive at ({pt}): f = {val:g}")
        self.fiber.validate(points)

    @cached_property
    def product_chart(self) -> Chart:
        return Chart((self.time_name, *self.fiber.chart.names), (self.t_range, *self.fiber.chart.box))

    @cached_property
    def product_metric(self) -> MetricField:
        names = self.product_chart.names
        n = self.n
        f = bind(self.warp, names)
        upper = {(0, 0): -(f ** 2)}
        for i in range(self.s):
            for j in range(i, self.s):
                upper[(i + 1, j + 1)] = bind(self.fiber.components[i][j], names)
        return MetricField.from_upper(self.product_chart, upper, signature=1, params=self.params)

    def fiber_point(self, p) -> FiberPoint:
        return FiberPoint(self, np.asarray(p, dtype=float))

    def parse_time(self, source: str) -> Node:
        return parse(source, [self.time_name], self.params)

    def parse_fiber(self, source: str) -> Node:
        return parse(source, self.fiber.chart.names, self.params)


class FiberPoint:
    """Fiber quantities entering the warped-product formulas at one point."""

    def __init__(self, S: StaticSpacetime, p: np.ndarray):
        self.S = S
        self.p = p
        self.local: LocalGeometry = S.fiber.at(p)
        jet = eval_jet2(S.warp, p, S.params)
        if not jet.value > 0:
            raise WarpError(f"warp nonpositive at {tuple(p)}")
        self.f = jet.value
        self.df = jet.grad
        self.hess_f = self.local.hessian_from_jet(jet.grad, jet.hess)

    @cached_property
    def lap_f(self) -> float:
        return float(np.sum(self.local.ginv * self.hess_f))

    @cached_property
    def grad_f(self) -> np.ndarray:
        return self.local.ginv @ self.df

    @property
    def g(self) -> np.ndarray:
        return self.local.g

    @property
    def ric(self) -> np.ndarray:
        return self.local.ricci

    @property
    def tau(self) -> float:
        return self.local.scalar

    @cached_property
    def q(self) -> np.ndarray:
        return self.lap_f * self.g - self.hess_f

    def norm2(self, w: SpacetimeVector) -> float:
        return -self.f ** 2 * w.u ** 2 + float(w.v @ self.g @ w.v)


def _coerce(w) -> SpacetimeVector:
    return w if isinstance(w, SpacetimeVector) else SpacetimeVector.from_array(w)


def spacetime_metric_at(S: StaticSpacetime, t: float, p) -> SymBilinear:
    fp = S.fiber_point(p)
    m = np.zeros((S.n, S.n))
    m[0, 0] = -fp.f ** 2
    m[1:, 1:] = fp.g
    return SymBilinear(m, "g")


def ricci_sss(S: StaticSpacetime, p, w1, w2) -> float:
    """Ric(U+V, U+W) from fiber data: Ric_F(V,W) + f Lap f u1 u2 - H^f(V,W)/f."""
    fp = S.fiber_point(p)
    w1, w2 = _coerce(w1), _coerce(w2)
    return float(
        w1.v @ fp.ric @ w2.v + fp.f * fp.lap_f * w1.u * w2.u - (w1.v @ fp.hess_f @ w2.v) / fp.f
    )


def ricci_sss_matrix(S: StaticSpacetime, p) -> SymBilinear:
    """Block assembly of the warped Ricci formula in product-chart components."""
    fp = S.fiber_point(p)
    m = np.zeros((S.n, S.n))
    m[0, 0] = fp.f * fp.lap_f
    m[1:, 1:] = fp.ric - fp.hess_f / fp.f
    return SymBilinear(m, "ricci")


def scalar_sss(S: StaticSpacetime, p) -> float:
    fp = S.fiber_point(p)
    return fp.tau - 2.0 * fp.lap_f / fp.f


def q_tensor(S: StaticSpacetime, p) -> SymBilinear:
    return SymBilinear(S.fiber_point(p).q, "Q")


def ricci_q_form(S: StaticSpacetime, p, w) -> float:
    """Ric(w,w) = Ric_F(V,V) + Q(V,V)/f - g(w,w) Lap f / f."""
    fp = S.fiber_point(p)
    w = _coerce(w)
    return float(w.v @ fp.ric @ w.v + (w.v @ fp.q @ w.v) / fp.f - fp.norm2(w) * fp.lap_f / fp.f)


def direct_product_ricci(S: StaticSpacetime, t: float, p) -> SymBilinear:
    """Ricci tensor of ``-f^2 dt^2 + g_F`` computed as a generic (s+1)-metric."""
    return SymBilinear(S.product_metric.at(np.concatenate([[t], p])).ricci, "ricci")


def direct_product_scalar(S: StaticSpacetime, t: float, p) -> float:
    return S.product_metric.at(np.concatenate([[t], p])).scalar


def stress_energy(S: StaticSpacetime, p, w) -> float:
    """8 pi T(w,w) through the Einstein equation, Ric(w,w) - tau g(w,w)/2."""
    fp = S.fiber_point(p)
    w = _coerce(w)
    return ricci_sss(S, p, w, w) - 0.5 * scalar_sss(S, p) * fp.norm2(w)


def stress_energy_decomposed(S: StaticSpacetime, p, w) -> float:
    """8 pi T(w,w) = Ric_F(V,V) + Q(V,V)/f - tau_F g(w,w)/2."""
    fp = S.fiber_point(p)
    w = _coerce(w)
    return float(w.v @ fp.ric @ w.v + (w.v @ fp.q @ w.v) / fp.f - 0.5 * fp.tau * fp.norm2(w))
