"""Killing and conformal-Killing verification on fibers and static space-times.

Every check samples points, evaluates residuals pointwise, and reports the
maximum together with the tolerance and sample count that produced the
verdict. Fitted constants (affine coefficients of h, coordinates of
``f^2 grad psi`` in the Killing basis, the eigen-constant nu, ...) come from
least squares and are re-verified separately, so fit quality and condition
satisfaction show up as distinct residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expr import Node, bind, const, eval_jet2, evaluate
from .geometry import GeometryError, MetricField, SymBilinear, VectorFieldExpr
from .warped import StaticSpacetime

CONSTANT_H_RTOL = 1e-10


class KillingError(GeometryError):
    pass


@dataclass
class KillingReport:
    check: str
    verdict: str  # killing | conformal | neither
    tol: float
    samples: int
    residuals: dict[str, float] = field(default_factory=dict)
    case: str = "raw"
    constants: dict[str, object] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    extra: dict[str, object] = field(default_factory=dict)
    # per-sample arrays kept for callers, never serialised
    data: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return self.verdict != "neither"

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "verdict": self.verdict,
            "tol": self.tol,
            "samples": self.samples,
            "case": self.case,
            "residuals": dict(self.residuals),
            "constants": dict(self.constants),
            "notes": list(self.notes),
            **self.extra,
        }


@dataclass(frozen=True)
class SpacetimeFieldCandidate:
    """Candidate ``K = psi h d_t + phi^b K_b`` (h and phi^b depend on t only)."""

    h: Node
    psi: Node
    phis: tuple[Node, ...] = ()
    basis: tuple[VectorFieldExpr, ...] = ()
    basis_names: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.phis) != len(self.basis):
            raise KillingError(
                f"{len(self.phis)} coefficient functions for {len(self.basis)} basis fields"
            )
        if not self.basis_names:
            object.__setattr__(self, "basis_names", tuple(f"K{i + 1}" for i in range(len(self.basis))))


def _opnorm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2))


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def check_killing(M: MetricField, X, samples: int = 64, tol: float = 1e-8, rng=0) -> KillingReport:
    if samples < 1:
        raise KillingError("samples must be >= 1")
    pts = M.chart.sample(samples, _rng(rng))
    worst = 0.0
    for p in pts:
        local = M.at(p)
        vals, jac = X.jet1(p)
        worst = max(worst, _opnorm(local.lie(vals, jac)))
    return KillingReport(
        "killing",
        "killing" if worst <= tol else "neither",
        tol,
        len(pts),
        {"lie_metric": worst},
    )


def check_conformal(M: MetricField, X, samples: int = 64, tol: float = 1e-8, rng=0) -> KillingReport:
    if samples < 1:
        raise KillingError("samples must be >= 1")
    pts = M.chart.sample(samples, _rng(rng))
    n = M.dim
    worst = 0.0
    sigmas = []
    for p in pts:
        local = M.at(p)
        vals, jac = X.jet1(p)
        lie = local.lie(vals, jac)
        sigma = float(np.sum(local.ginv * lie)) / (2 * n)
        sigmas.append(sigma)
        worst = max(worst, _opnorm(lie - 2.0 * sigma * local.g))
    sig = np.array(sigmas)
    return KillingReport(
        "conformal",
        "conformal" if worst <= tol else "neither",
        tol,
        len(pts),
        {"conformal": worst},
        constants={"sigma_min": float(sig.min()), "sigma_max": float(sig.max())},
        data={"points": pts, "sigma": sig},
    )


def b_tensor(F: MetricField, Z, phi: Node, p) -> SymBilinear:
    """``B = dphi (x) Z_flat + Z_flat (x) dphi`` at ``p``; ``Z`` is a field or a component vector."""
    local = F.at(p)
    z = Z.values(p) if hasattr(Z, "values") else np.asarray(Z, dtype=float)
    zflat = local.g @ z
    dphi = eval_jet2(phi, p, F.params).grad
    return SymBilinear(np.outer(dphi, zflat) + np.outer(zflat, dphi), "B")


class ScaledGradient:
    """The field ``f^2 grad psi`` with its Jacobian obtained from second jets."""

    def __init__(self, F: MetricField, f: Node, psi: Node):
        self.F, self.f, self.psi = F, bind(f, F.chart.names), bind(psi, F.chart.names)

    def jet1(self, p):
        local = self.F.at(p)
        jf = eval_jet2(self.f, p, self.F.params)
        jp = eval_jet2(self.psi, p, self.F.params)
        ginv = local.ginv
        grad = ginv @ jp.grad
        dginv = -np.einsum("ia,kab,bj->kij", ginv, local.dg, ginv)
        # d_k Z^i = 2 f d_k f grad^i + f^2 (d_k ginv^{ij} d_j psi + ginv^{ij} d_k d_j psi)
        jac = (
            2.0 * jf.value * np.outer(grad, jf.grad)
            + jf.value ** 2 * (np.einsum("kij,j->ik", dginv, jp.grad) + ginv @ jp.hess)
        )
        return jf.value ** 2 * grad, jac

    def values(self, p):
        return self.jet1(p)[0]


def _hessian_identity_residual(F: MetricField, f: Node, psi: Node, p) -> float:
    local = F.at(p)
    jf = eval_jet2(f, p, F.params)
    jp = eval_jet2(psi, p, F.params)
    h = local.hessian_from_jet(jp.grad, jp.hess)
    # grad psi lowered is d psi, so B^f_{grad psi} = df (x) dpsi + dpsi (x) df
    b = np.outer(jf.grad, jp.grad) + np.outer(jp.grad, jf.grad)
    return _opnorm(h + b / jf.value)


def check_f2grad_killing(
    F: MetricField, f: Node, psi: Node, samples: int = 64, tol: float = 1e-8, rng=0
) -> KillingReport:
    """Decide whether ``f^2 grad psi`` is Killing via the Hessian identity and directly."""
    f, psi = bind(f, F.chart.names), bind(psi, F.chart.names)
    pts = F.chart.sample(samples, _rng(rng))
    field_ = ScaledGradient(F, f, psi)
    ident = direct = 0.0
    for p in pts:
        ident = max(ident, _hessian_identity_residual(F, f, psi, p))
        vals, jac = field_.jet1(p)
        direct = max(direct, _opnorm(F.at(p).lie(vals, jac)))
    v_ident = "killing" if ident <= tol else "neither"
    vdir = "killing" if direct <= tol else "neither"
    report = KillingReport(
        "f2grad_killing",
        "killing" if v_ident == vdir == "killing" else "neither",
        tol,
        len(pts),
        {"hessian_identity": ident, "lie_metric": direct},
        extra={"identity_verdict": v_ident, "direct_verdict": vdir, "verdicts_agree": v_ident == vdir},
    )
    if v_ident != vdir:
        report.notes.append("Hessian-identity and direct Lie-derivative verdicts disagree")
    return report


def eigen_residual(F: MetricField, f: Node, psi: Node, nu: float, samples: int = 64, rng=0) -> float:
    """max |-Lap psi - 2 nu psi / f^2| over sampled fiber points."""
    f, psi = bind(f, F.chart.names), bind(psi, F.chart.names)
    worst = 0.0
    for p in F.chart.sample(samples, _rng(rng)):
        fv = evaluate(f, p, F.params)
        pv = evaluate(psi, p, F.params)
        worst = max(worst, abs(-F.at(p).laplacian(psi) - nu * 2.0 / fv ** 2 * pv))
    return worst


# ---------------------------------------------------------------------------
# space-time fields


def spacetime_field(S: StaticSpacetime, time_component: Node, fiber_components: Sequence[Node]) -> VectorFieldExpr:
    names = S.product_chart.names
    comps = (bind(time_component, names), *(bind(c, names) for c in fiber_components))
    return VectorFieldExpr(S.product_chart, comps, S.params)


def assemble_candidate(S: StaticSpacetime, cand: SpacetimeFieldCandidate) -> VectorFieldExpr:
    names = S.product_chart.names
    fiber = [const(0.0)] * S.s
    for phi, K in zip(cand.phis, cand.basis):
        phi = bind(phi, names)
        fiber = [acc + phi * bind(c, names) for acc, c in zip(fiber, K.components)]
    return spacetime_field(S, bind(cand.psi, names) * bind(cand.h, names), fiber)


def _time_samples(S: StaticSpacetime, samples: int) -> np.ndarray:
    lo, hi = S.t_range
    return np.linspace(lo, hi, max(int(samples), 21))


def _affine_fit(ts: np.ndarray, hs: np.ndarray) -> tuple[float, float, float]:
    A = np.column_stack([ts, np.ones_like(ts)])
    (mu, nu), *_ = np.linalg.lstsq(A, hs, rcond=None)
    return float(mu), float(nu), float(np.max(np.abs(A @ [mu, nu] - hs)))


def check_theorem_static_candidate(
    S: StaticSpacetime,
    h: Node,
    V: VectorFieldExpr,
    tol: float = 1e-8,
    samples: int = 64,
    rng=0,
) -> KillingReport:
    """Check ``h d_t + V`` through its three fiber/time conditions.

    (a) V conformal-Killing on the fiber with factor sigma, (b) h affine,
    h = mu t + nu, (c) V(f) = (sigma - mu) f. The Killing sub-case needs
    sigma = 0 as well.
    """
    rng = _rng(rng)
    conf = check_conformal(S.fiber, V, samples, tol, rng)
    h = bind(h, [S.time_name])
    ts = _time_samples(S, samples)
    hs = np.array([evaluate(h, [t], S.params) for t in ts])
    mu, nu, affine_res = _affine_fit(ts, hs)

    cond3 = 0.0
    for p, sigma in zip(conf.data["points"], conf.data["sigma"]):
        fp = S.fiber_point(p)
        vf = float(V.values(p) @ fp.df)
        cond3 = max(cond3, abs(vf - (sigma - mu) * fp.f))
    sigma_max = float(np.max(np.abs(conf.data["sigma"])))

    residuals = {
        "conformal_on_fiber": conf.residuals["conformal"],
        "h_affine": affine_res,
        "V(f)=(sigma-mu)f": float(cond3),
    }
    ok = all(r <= tol for r in residuals.values())
    if ok and sigma_max <= tol:
        verdict = "killing"
    elif ok:
        verdict = "conformal"
    else:
        verdict = "neither"

    # raw cross-check on the product chart
    X = spacetime_field(S, h, V.components)
    raw = check_conformal(S.product_metric, X, samples, tol, rng)
    raw_kill = check_killing(S.product_metric, X, samples, tol, rng)
    return KillingReport(
        "static_candidate",
        verdict,
        tol,
        len(conf.data["points"]),
        residuals,
        case="static-candidate",
        constants={"mu": mu, "nu": nu, "sigma_max_abs": sigma_max},
        extra={
            "raw_spacetime": {
                "conformal_residual": raw.residuals["conformal"],
                "killing_residual": raw_kill.residuals["lie_metric"],
            }
        },
    )


class _FiberData:
    """Per-point fiber quantities shared by the structured-classification cases."""

    def __init__(self, S: StaticSpacetime, cand: SpacetimeFieldCandidate, pts: np.ndarray):
        names = S.fiber.chart.names
        psi = bind(cand.psi, names)
        nb = len(cand.basis)
        self.pts = pts
        self.psi = np.empty(len(pts))
        self.Z = np.empty((len(pts), S.s))  # f^2 grad psi
        self.Zlnf = np.empty(len(pts))  # (f^2 grad psi)(ln f)
        self.gradpsi_f = np.empty(len(pts))  # grad psi (f)
        self.K = np.empty((len(pts), nb, S.s))
        self.Klnf = np.empty((len(pts), nb))  # K_b(ln f) = K_b(f) / f
        for a, p in enumerate(pts):
            fp = S.fiber_point(p)
            jp = eval_jet2(psi, p, S.params)
            gpsi = fp.local.ginv @ jp.grad
            self.psi[a] = jp.value
            self.Z[a] = fp.f ** 2 * gpsi
            self.gradpsi_f[a] = float(gpsi @ fp.df)
            self.Zlnf[a] = fp.f * self.gradpsi_f[a]
            for b, K in enumerate(cand.basis):
                kv = K.values(p)
                self.K[a, b] = kv
                self.Klnf[a, b] = float(kv @ fp.df) / fp.f

    def fit_tau(self) -> tuple[np.ndarray, float]:
        nb = self.K.shape[1]
        y = self.Z.reshape(-1)
        if nb == 0:
            return np.zeros(0), float(np.max(np.abs(y)))
        A = np.transpose(self.K, (0, 2, 1)).reshape(-1, nb)
        tau, *_ = np.linalg.lstsq(A, y, rcond=None)
        return tau, float(np.max(np.abs(A @ tau - y)))

    def orthogonality(self, omega: np.ndarray) -> float:
        if omega.size == 0:
            return 0.0
        return float(np.max(np.abs(self.Klnf @ omega)))


def _interval_around(mask: np.ndarray, i0: int) -> np.ndarray:
    lo = hi = i0
    while lo > 0 and mask[lo - 1]:
        lo -= 1
    while hi < len(mask) - 1 and mask[hi + 1]:
        hi += 1
    sel = np.zeros_like(mask)
    sel[lo : hi + 1] = True
    return sel


def _integral(h: Node, t0: float, t: float, params) -> float:
    nodes, weights = np.polynomial.legendre.leggauss(24)
    half = 0.5 * (t - t0)
    mid = 0.5 * (t + t0)
    return half * float(sum(w * evaluate(h, [mid + half * x], params) for x, w in zip(nodes, weights)))


def classify_structured(
    S: StaticSpacetime,
    cand: SpacetimeFieldCandidate,
    tol: float = 1e-8,
    samples: int = 64,
    rng=0,
) -> KillingReport:
    """Classify a candidate of the form ``psi h d_t + phi^b K_b``.

    The case follows from h over the sampled time window: identically zero,
    nonzero constant (relative variation below 1e-10), or nonconstant; the
    last splits on whether psi vanishes identically.
    """
    rng = _rng(rng)
    basis_res = {}
    for name, K in zip(cand.basis_names, cand.basis):
        r = check_killing(S.fiber, K, samples, tol, rng)
        basis_res[name] = r.residuals["lie_metric"]
        if r.verdict != "killing":
            raise KillingError(f"basis field {name!r} is not Killing on the fiber (residual {basis_res[name]:.3e})")

    h = bind(cand.h, [S.time_name])
    phis = [bind(phi, [S.time_name]) for phi in cand.phis]
    ts = _time_samples(S, samples)
    hs = np.array([evaluate(h, [t], S.params) for t in ts])
    Phi = np.array([[evaluate(phi, [t], S.params) for t in ts] for phi in phis]).reshape(len(phis), len(ts))
    pts = S.fiber.chart.sample(samples, rng)
    data = _FiberData(S, cand, pts)

    hscale = float(np.max(np.abs(hs)))
    residuals: dict[str, float] = {}
    constants: dict[str, object] = {}
    notes: list[str] = []

    def phi_constants(sel) -> np.ndarray:
        if not len(phis):
            return np.zeros(0)
        sub = Phi[:, sel]
        residuals["phi_constant"] = float(np.max(sub.max(axis=1) - sub.min(axis=1)))
        return sub.mean(axis=1)

    if hscale <= tol:
        case = "i"
        omega = phi_constants(np.ones(len(ts), dtype=bool))
        residuals["omega.K(ln f)"] = data.orthogonality(omega)
        constants["omega"] = omega.tolist()
    elif (hs.max() - hs.min()) / hscale < CONSTANT_H_RTOL:
        case = "ii"
        h0 = float(hs.mean())
        tau, fit_res = data.fit_tau()
        residuals["f2grad_psi_killing"] = max(
            _hessian_identity_residual(S.fiber, S.warp, bind(cand.psi, S.fiber.chart.names), p) for p in pts
        )
        residuals["tau_fit"] = fit_res
        residuals["grad_psi(f)"] = float(np.max(np.abs(data.gradpsi_f)))
        if len(phis):
            omega = (Phi - h0 * np.outer(tau, ts)).mean(axis=1)
            model = h0 * np.outer(tau, ts) + omega[:, None]
            residuals["phi_affine"] = float(np.max(np.abs(Phi - model)))
        else:
            omega = np.zeros(0)
        residuals["omega.K(ln f)"] = data.orthogonality(omega)
        constants.update(h0=h0, tau=tau.tolist(), omega=omega.tolist())
    else:
        i0 = int(np.argmax(np.abs(hs)))
        t0 = float(ts[i0])
        sel = _interval_around(np.abs(hs) > tol, i0)
        constants.update(t0=t0, I_t0=[float(ts[sel].min()), float(ts[sel].max())])
        if float(np.max(np.abs(data.psi))) <= tol:
            case = "iii-a"
            omega = phi_constants(sel)
            residuals["omega.K(ln f)"] = data.orthogonality(omega)
            constants["omega"] = omega.tolist()
        else:
            case = "iii-b"
            psi = bind(cand.psi, S.fiber.chart.names)
            residuals["f2grad_psi_killing"] = max(_hessian_identity_residual(S.fiber, S.warp, psi, p) for p in pts)
            tau, fit_res = data.fit_tau()
            residuals["tau_fit"] = fit_res
            nu = float(data.Zlnf @ data.psi / (data.psi @ data.psi))
            residuals["nu_fit"] = float(np.max(np.abs(data.Zlnf - nu * data.psi)))
            tsel, hsel = ts[sel], hs[sel]
            if abs(nu) <= tol:
                basis_fns = [tsel, np.ones_like(tsel)]
                form = "a t + b"
            elif nu < 0:
                k = math.sqrt(-nu)
                basis_fns = [np.exp(k * tsel), np.exp(-k * tsel)]
                form = "a exp(sqrt(-nu) t) + b exp(-sqrt(-nu) t)"
            else:
                k = math.sqrt(nu)
                basis_fns = [np.cos(k * tsel), np.sin(k * tsel)]
                form = "a cos(sqrt(nu) t) + b sin(sqrt(nu) t)"
            A = np.column_stack(basis_fns)
            (a, b), *_ = np.linalg.lstsq(A, hsel, rcond=None)
            residuals["h_form"] = float(np.max(np.abs(A @ [a, b] - hsel)))
            integ = np.array([_integral(h, t0, t, S.params) for t in tsel])
            if len(phis):
                omega = (Phi[:, sel] - np.outer(tau, integ)).mean(axis=1)
                model = np.outer(tau, integ) + omega[:, None]
                residuals["phi_integral"] = float(np.max(np.abs(Phi[:, sel] - model)))
            else:
                omega = np.zeros(0)
            dh0 = float(eval_jet2(h, [t0], S.params).grad[0])
            cond = dh0 * data.psi + (data.Klnf @ omega if omega.size else 0.0)
            residuals["t0_condition"] = float(np.max(np.abs(cond)))
            constants.update(nu=nu, a=float(a), b=float(b), h_form=form, tau=tau.tolist(), omega=omega.tolist())
            notes.append("t0 condition checked pointwise on the fiber samples for the fitted constants")

    verdict = "killing" if all(r <= tol for r in residuals.values()) else "neither"
    raw = check_killing(S.product_metric, assemble_candidate(S, cand), samples, tol, rng)
    return KillingReport(
        "structured",
        verdict,
        tol,
        len(pts),
        residuals,
        case=case,
        constants=constants,
        notes=notes,
        extra={
            "basis_residuals": basis_res,
            "raw_spacetime_residual": raw.residuals["lie_metric"],
        },
    )


def classify_compact_fiber(
    S: StaticSpacetime,
    basis: Sequence[VectorFieldExpr],
    names: Sequence[str] | None = None,
    tol: float = 1e-8,
    samples: int = 64,
    rng=0,
) -> KillingReport:
    """Killing generators of ``I x_f F`` for compact F: d_t plus basis fields with K(f) = 0."""
    if not S.compact:
        raise KillingError("the compact-fiber classification requires a compact fiber (compact flag is false)")
    rng = _rng(rng)
    names = list(names) if names else [f"K{i + 1}" for i in range(len(basis))]
    pts = S.fiber.chart.sample(samples, rng)
    basis_res = {}
    kf = np.zeros((len(pts), len(basis)))
    for b, (name, K) in enumerate(zip(names, basis)):
        r = check_killing(S.fiber, K, samples, tol, rng)
        basis_res[name] = r.residuals["lie_metric"]
        if r.verdict != "killing":
            raise KillingError(f"basis field {name!r} is not Killing on the fiber (residual {basis_res[name]:.3e})")
        for a, p in enumerate(pts):
            kf[a, b] = float(K.values(p) @ S.fiber_point(p).df)
    moves = np.max(np.abs(kf), axis=0) if len(basis) else np.zeros(0)
    survivors = [n for n, m in zip(names, moves) if m <= tol]
    if len(basis):
        sv = np.linalg.svd(kf, compute_uv=False)
        kernel_dim = int(len(basis) - np.sum(sv > tol * math.sqrt(len(pts))))
    else:
        kernel_dim = 0
    return KillingReport(
        "compact_fiber",
        "killing",
        tol,
        len(pts),
        {f"{n}_killing": r for n, r in basis_res.items()},
        case="compact",
        constants={"generators": ["d_t", *survivors]},
        notes=[] if basis else ["empty fiber Killing basis: only multiples of d_t"],
        extra={"max_abs_K(f)": {n: float(m) for n, m in zip(names, moves)}, "kernel_dim": kernel_dim},
    )
