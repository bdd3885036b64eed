"""Geodesic and Jacobi-field integration on the product chart.

Everything is fixed-step classical RK4. Conjugate points are the zeros of
``det[N, J_1, ..., J_{n-1}]`` where the ``J_i`` start at zero with initial
covariant derivatives spanning the orthogonal complement of the velocity,
and ``N`` is a field transverse to that complement (the velocity itself, or
``d_t`` along null geodesics). Zeros are bracketed by sign changes between
steps and refined by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import ExprError
from .geometry import GeometryError
from .warped import SpacetimeVector, StaticSpacetime

DEFAULT_STEP = 0.01
BISECTION_TOL = 1e-8
NULL_RTOL = 1e-12


class IntegrationError(ValueError):
    pass


class _DomainExit(Exception):
    pass


@dataclass
class GeodesicTrace:
    params: np.ndarray
    positions: np.ndarray  # (N, n): t then fiber coordinates
    velocities: np.ndarray
    norms: np.ndarray  # g(gamma', gamma') at each node
    lengths: np.ndarray  # running Lorentzian length, zero unless timelike
    character: str
    step: float
    span: float
    truncated: bool = False
    exit_param: float | None = None
    notes: list[str] = field(default_factory=list)

    def velocity(self, k: int) -> SpacetimeVector:
        return SpacetimeVector.from_array(self.velocities[k])

    @property
    def length(self) -> float:
        return float(self.lengths[-1])

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norms - self.norms[0])))

    def to_dict(self, every: int = 0) -> dict:
        out = {
            "character": self.character,
            "step": self.step,
            "span": self.span,
            "integrated_span": float(self.params[-1]),
            "nodes": int(len(self.params)),
            "truncated": self.truncated,
            "exit_param": self.exit_param,
            "initial_norm": float(self.norms[0]),
            "norm_drift": self.norm_drift,
            "lorentzian_length": self.length,
            "endpoint": [float(x) for x in self.positions[-1]],
            "end_velocity": [float(x) for x in self.velocities[-1]],
            "notes": self.notes,
        }
        if every > 0:
            idx = range(0, len(self.params), every)
            out["samples"] = [
                {
                    "s": float(self.params[k]),
                    "t": float(self.positions[k, 0]),
                    "p": [float(x) for x in self.positions[k, 1:]],
                    "velocity": [float(x) for x in self.velocities[k]],
                }
                for k in idx
            ]
        return out


@dataclass
class ConjugateReport:
    conjugate_params: list[float]
    conjugate_lengths: list[float | None]
    character: str
    integrated_span: float
    truncated: bool
    tol: float
    transverse: str
    determinants: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    c: float | None = None
    bound: float | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "conjugate_params": self.conjugate_params,
            "conjugate_lengths": self.conjugate_lengths,
            "character": self.character,
            "integrated_span": self.integrated_span,
            "truncated": self.truncated,
            "tol": self.tol,
            "transverse_field": self.transverse,
            "c": self.c,
            "bound": self.bound,
            "scope": "conjugate points on the integrated span only; geodesic completeness not assessed",
            "notes": self.notes,
        }


def _christoffel(S: StaticSpacetime, x: np.ndarray) -> np.ndarray:
    if not S.fiber.chart.contains(x[1:]):
        raise _DomainExit
    try:
        return S.product_metric.at(x).gamma
    except (ExprError, GeometryError) as exc:
        raise _DomainExit from exc


def _geodesic_rhs(S: StaticSpacetime, y: np.ndarray) -> np.ndarray:
    n = S.n
    x, v = y[:n], y[n:]
    G = _christoffel(S, x)
    return np.concatenate([v, -np.einsum("kij,i,j->k", G, v, v)])


def _rk4(rhs, y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _grid(span: float, step: float) -> tuple[int, float]:
    if not step > 0:
        raise IntegrationError(f"step must be positive, got {step}")
    if not span > 0:
        raise IntegrationError(f"span must be positive, got {span}")
    count = max(1, math.ceil(span / step - 1e-9))
    return count, span / count


def _character(norm: float, scale: float) -> str:
    if abs(norm) <= NULL_RTOL * scale:
        return "null"
    return "timelike" if norm < 0 else "spacelike"


def _norm(S: StaticSpacetime, x: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    g = S.product_metric.matrix(x)
    return float(v @ g @ v), float(np.abs(v) @ np.abs(g) @ np.abs(v))


def integrate_geodesic(
    S: StaticSpacetime,
    t0: float,
    p0,
    v0: SpacetimeVector,
    span: float,
    step: float = DEFAULT_STEP,
) -> GeodesicTrace:
    p0 = np.asarray(p0, dtype=float)
    v0 = v0 if isinstance(v0, SpacetimeVector) else SpacetimeVector.from_array(v0)
    if len(p0) != S.s or len(v0.v) != S.s:
        raise IntegrationError(f"initial data must have fiber dimension {S.s}")
    if not np.any(v0.as_array()):
        raise IntegrationError("initial velocity is zero")
    if not S.fiber.chart.contains(p0):
        raise IntegrationError(f"initial point {tuple(p0)} outside the fiber domain")
    count, h = _grid(span, step)
    x0 = np.concatenate([[t0], p0])
    y = np.concatenate([x0, v0.as_array()])
    norm0, scale = _norm(S, x0, v0.as_array())
    character = _character(norm0, scale)

    n = S.n
    states = [y]
    truncated, exit_param = False, None
    for k in range(count):
        try:
            y_next = _rk4(lambda z: _geodesic_rhs(S, z), y, h)
            if not S.fiber.chart.contains(y_next[1:n]):
                raise _DomainExit
        except _DomainExit:
            truncated, exit_param = True, k * h
            break
        y = y_next
        states.append(y)
    states = np.array(states)
    params = h * np.arange(len(states))
    norms = np.array([states[k, n:] @ S.product_metric.matrix(states[k, :n]) @ states[k, n:] for k in range(len(states))])
    speed = np.sqrt(np.maximum(0.0, -norms)) if character == "timelike" else np.zeros(len(norms))
    lengths = np.concatenate([[0.0], np.cumsum(0.5 * h * (speed[1:] + speed[:-1]))])
    notes = ["fiber domain exited; trace truncated"] if truncated else []
    return GeodesicTrace(params, states[:, :n], states[:, n:], norms, lengths, character, h, span, truncated, exit_param, notes)


def _jacobi_rhs(S: StaticSpacetime, y: np.ndarray) -> np.ndarray:
    n = S.n
    m = n - 1
    x, v = y[:n], y[n : 2 * n]
    J = y[2 * n : 2 * n + n * m].reshape(n, m)
    DJ = y[2 * n + n * m :].reshape(n, m)
    if not S.fiber.chart.contains(x[1:]):
        raise _DomainExit
    try:
        loc = S.product_metric.at(x)
        G, R = loc.gamma, loc.riemann
    except (ExprError, GeometryError) as exc:
        raise _DomainExit from exc
    Gv = np.einsum("abc,b->ac", G, v)
    dJ = DJ - Gv @ J
    dDJ = -np.einsum("abcd,b,cj,d->aj", R, v, J, v) - Gv @ DJ
    return np.concatenate([v, -Gv @ v, dJ.ravel(), dDJ.ravel()])


def _frame_det(S: StaticSpacetime, y: np.ndarray, null: bool) -> float:
    n = S.n
    m = n - 1
    J = y[2 * n : 2 * n + n * m].reshape(n, m)
    N = np.zeros(n)
    if null:
        N[0] = 1.0
    else:
        N = y[n : 2 * n]
    return float(np.linalg.det(np.column_stack([N, J])))


def _orthogonal_frame(g: np.ndarray, v: np.ndarray) -> np.ndarray:
    row = (g @ v).reshape(1, -1)
    _, _, vt = np.linalg.svd(row)
    return vt[1:].T  # columns span {e : g(e, v) = 0}


def jacobi_conjugate(S: StaticSpacetime, trace: GeodesicTrace, tol: float = BISECTION_TOL) -> ConjugateReport:
    """Locate conjugate points to the start of ``trace`` along its integrated span."""
    if trace.character == "spacelike":
        raise IntegrationError("conjugate-point search needs a causal geodesic")
    n = S.n
    m = n - 1
    x0, v0 = trace.positions[0], trace.velocities[0]
    g0 = S.product_metric.matrix(x0)
    E = _orthogonal_frame(g0, v0)
    null = trace.character == "null"
    y = np.concatenate([x0, v0, np.zeros(n * m), E.ravel()])
    h = trace.step
    rhs = lambda z: _jacobi_rhs(S, z)  # noqa: E731

    steps = len(trace.params) - 1
    dets = [0.0]
    states = [y]
    truncated = trace.truncated
    for _ in range(steps):
        try:
            y = _rk4(rhs, y, h)
        except _DomainExit:
            truncated = True
            break
        states.append(y)
        dets.append(_frame_det(S, y, null))
    dets = np.array(dets)

    speed = math.sqrt(max(0.0, -trace.norms[0])) if trace.character == "timelike" else None
    found: list[float] = []
    for k in range(1, len(dets) - 1):
        a, b = dets[k], dets[k + 1]
        if a == 0.0 or a * b < 0:
            lo, hi = 0.0, h
            if a == 0.0:
                found.append(k * h)
                continue
            sa = math.copysign(1.0, a)
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                # one RK4 substep from the stored node
                dm = _frame_det(S, _rk4(rhs, states[k], mid), null)
                if math.copysign(1.0, dm) == sa and dm != 0.0:
                    lo = mid
                else:
                    hi = mid
            found.append(k * h + 0.5 * (lo + hi))
    found = sorted(set(found))
    notes = []
    if truncated:
        notes.append("integration stopped at fiber domain exit")
    if not found:
        notes.append("no conjugate point on the integrated span")
    return ConjugateReport(
        found,
        [s * speed if speed is not None else None for s in found],
        trace.character,
        float(h * (len(dets) - 1)),
        truncated,
        tol,
        "d_t" if null else "velocity",
        dets,
        notes=notes,
    )
