"""Command-line entry point: load a manifest, run checks, write a JSON report.

Exit codes: 0 every verdict conclusive and passing, 1 some conclusive
failure, 2 something inconclusive (and nothing failed), 3 usage or
validation error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .causal import diameter_bound, energy_report, hyperbolicity_classify
from .expr import ExprError
from .geodesic import IntegrationError, integrate_geodesic, jacobi_conjugate
from .geometry import GeometryError
from .killing import (
    KillingError,
    assemble_candidate,
    check_f2grad_killing,
    check_killing,
    check_theorem_static_candidate,
    classify_compact_fiber,
    classify_structured,
)
from .manifest import Manifest, ManifestError, load_manifest
from .warped import ricci_sss_matrix, scalar_sss

SCHEMA_VERSION = 1
TOOL = "staticgeom"
COMMANDS = ("curvature", "killing-check", "killing-classify", "energy", "classify", "geodesic", "full-report")
EXIT_OK, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3
# verdicts that are evidence only and never move the exit code
NEUTRAL = {"info", "not-applicable"}


class UsageError(Exception):
    pass


def _box(m: Manifest) -> list[list[float]]:
    return [list(b) for b in m.fiber.chart.box]


def _check(m: Manifest, name: str, verdict: str, tol: float, samples: int, **evidence) -> dict:
    return {"name": name, "verdict": verdict, "tol": tol, "samples": samples, "domain_box": _box(m), **evidence}


def _rng(m: Manifest) -> np.random.Generator:
    return np.random.default_rng(m.numerics["seed"])


def section_curvature(m: Manifest) -> dict:
    S = m.spacetime
    tol, rng = m.numerics["tol"], _rng(m)
    pts = S.fiber.chart.sample(m.numerics["samples"], rng)
    ts = rng.uniform(*S.t_range, size=len(pts))
    ric_err = scal_err = tt_err = 0.0
    for t, p in zip(ts, pts):
        local = S.product_metric.at(np.concatenate([[t], p]))
        direct, warped = local.ricci, ricci_sss_matrix(S, p).matrix
        ric_err = max(ric_err, float(np.max(np.abs(direct - warped))) / max(1.0, float(np.max(np.abs(direct)))))
        tau_d, tau_w = local.scalar, scalar_sss(S, p)
        scal_err = max(scal_err, abs(tau_d - tau_w) / max(1.0, abs(tau_d)))
        fp = S.fiber_point(p)
        ftt = fp.f * fp.lap_f
        tt_err = max(tt_err, abs(direct[0, 0] - ftt) / max(1.0, abs(ftt)))
    n = len(pts)
    checks = [
        _check(m, "warped_ricci_identity", "pass" if ric_err <= tol else "fail", tol, n, relative_residual=ric_err),
        _check(m, "scalar_identity", "pass" if scal_err <= tol else "fail", tol, n, relative_residual=scal_err),
        _check(m, "ric_tt_equals_f_laplacian_f", "pass" if tt_err <= tol else "fail", tol, n, relative_residual=tt_err),
    ]
    return {"checks": checks, "details": {"time_window": list(S.t_range), "dimension": S.n}}


def _killing_check(m: Manifest, name: str, report, passing=("killing",)) -> dict:
    d = report.to_dict()
    d["killing_verdict"] = d.pop("verdict")
    verdict = "pass" if report.verdict in passing else "fail"
    return _check(m, name, verdict, report.tol, report.samples, **{k: v for k, v in d.items() if k not in ("tol", "samples")})


def section_killing_check(m: Manifest) -> dict:
    spec = m.killing
    if spec is None or (spec.candidate() is None and spec.static_field is None):
        raise UsageError("killing-check needs a [killing] section with h and psi, or h and static_field")
    S = m.spacetime
    tol, samples = m.numerics["tol"], m.numerics["samples"]
    checks, details = [], {}
    cand = spec.candidate()
    if cand is not None:
        X = assemble_candidate(S, cand)
        rep = check_killing(S.product_metric, X, samples, tol, _rng(m))
        checks.append(_killing_check(m, "candidate_lie_derivative", rep))
        details["candidate_components"] = [str(c) for c in X.components]
    if spec.static_field is not None:
        rep = check_theorem_static_candidate(S, spec.h, m.vectors[spec.static_field], tol, samples, _rng(m))
        checks.append(_killing_check(m, "static_candidate_conditions", rep))
    return {"checks": checks, "details": details}


def section_killing_classify(m: Manifest) -> dict:
    spec = m.killing
    S = m.spacetime
    tol, samples = m.numerics["tol"], m.numerics["samples"]
    cand = spec.candidate() if spec else None
    compact = spec is not None and S.compact and len(spec.basis) > 0
    if cand is None and not compact:
        raise UsageError("killing-classify needs [killing] h and psi, or a compact fiber with a basis")
    checks = []
    if cand is not None:
        try:
            rep = classify_structured(S, cand, tol, samples, _rng(m))
            checks.append(_killing_check(m, "structured_classification", rep))
        except KillingError as exc:
            checks.append(_check(m, "structured_classification", "fail", tol, samples, error=str(exc)))
        if not cand.psi.is_constant:
            rep = check_f2grad_killing(S.fiber, S.warp, cand.psi, samples, tol, _rng(m))
            agree = rep.extra.get("verdicts_agree", True)
            checks.append(
                _killing_check(m, "f2_grad_psi_routes_agree", rep, passing=("killing", "neither") if agree else ())
            )
    if compact:
        try:
            rep = classify_compact_fiber(S, spec.basis, spec.basis_names, tol, samples, _rng(m))
            checks.append(_killing_check(m, "compact_fiber_generators", rep))
        except KillingError as exc:
            checks.append(_check(m, "compact_fiber_generators", "fail", tol, samples, error=str(exc)))
    return {"checks": checks, "details": {}}


def section_energy(m: Manifest) -> dict:
    num = m.numerics
    rep = energy_report(m.spacetime, num["samples"], num["causal_samples"], num["tol"], _rng(m))
    checks = [
        _check(m, c["name"], c["verdict"], num["tol"], rep["samples"], **{k: v for k, v in c.items() if k not in ("name", "verdict")})
        for c in rep["checks"]
    ]
    details = {k: v for k, v in rep.items() if k != "checks"}
    return {"checks": checks, "details": details}


def section_hyperbolicity(m: Manifest) -> dict:
    num = m.numerics
    rep = hyperbolicity_classify(m.spacetime, num["samples"], num["tol"], _rng(m))
    verdict = "inconclusive" if rep["classification"] == "inconclusive" else "pass"
    check = _check(
        m, "hyperbolicity", verdict, num["tol"], rep["samples"], classification=rep["classification"], basis=rep["basis"]
    )
    return {"checks": [check], "details": rep}


def section_diameter(m: Manifest) -> dict:
    num = m.numerics
    rep = diameter_bound(m.spacetime, num["samples"], num["tol"], _rng(m))
    verdict = "pass" if rep["bound"] is not None else "not-applicable"
    check = _check(m, "timelike_diameter_bound", verdict, num["tol"], rep["samples"], bound=rep["bound"], c=rep["c"], reasons=rep["reasons"])
    return {"checks": [check], "details": rep}


def section_geodesic(m: Manifest) -> dict:
    spec = m.geodesic
    if spec is None:
        raise UsageError("geodesic needs a [geodesic] section")
    S, num = m.spacetime, m.numerics
    tol = num["tol"]
    trace = integrate_geodesic(S, spec.t0, spec.p0, spec.v0, spec.span, num["step"])
    n_nodes = len(trace.params)
    drift_tol = 1e-8 * (1.0 + abs(trace.norms[0]))
    checks = [
        _check(
            m,
            "velocity_norm_conservation",
            "pass" if trace.norm_drift <= drift_tol else "fail",
            drift_tol,
            n_nodes,
            residual=trace.norm_drift,
        )
    ]
    details = {"trace": trace.to_dict(every=max(1, n_nodes // 50))}
    if trace.character == "spacelike":
        checks.append(_check(m, "conjugate_points", "not-applicable", tol, n_nodes, reason="spacelike geodesic"))
        return {"checks": checks, "details": details}
    conj = jacobi_conjugate(S, trace)
    bound = diameter_bound(S, num["samples"], tol, _rng(m))
    conj.c, conj.bound = bound["c"], bound["bound"]
    details["conjugate"] = conj.to_dict()
    evidence = {"conjugate_params": conj.conjugate_params, "bound": conj.bound, "lorentzian_length": trace.length}
    if conj.bound is not None and trace.character == "timelike" and trace.length >= conj.bound and not conj.truncated:
        # the bound guarantees a conjugate point on this span
        verdict = "pass" if conj.conjugate_params else "fail"
        evidence["expectation"] = "conjugate point required: Lorentzian length exceeds the bound"
    else:
        verdict = "info"
        evidence["expectation"] = "none: bound absent, trace truncated, or span shorter than the bound"
    checks.append(_check(m, "conjugate_points", verdict, conj.tol, n_nodes, **evidence))
    return {"checks": checks, "details": details}


SECTIONS: dict[str, Callable[[Manifest], dict]] = {
    "curvature": section_curvature,
    "killing_check": section_killing_check,
    "killing_classify": section_killing_classify,
    "energy": section_energy,
    "hyperbolicity": section_hyperbolicity,
    "diameter": section_diameter,
    "geodesic": section_geodesic,
}


def sections_for(command: str, m: Manifest) -> list[str]:
    if command == "full-report":
        names = ["curvature", "energy", "hyperbolicity", "diameter"]
        k = m.killing
        if k is not None and (k.candidate() is not None or k.static_field is not None):
            names.append("killing_check")
        if k is not None and (k.candidate() is not None or (m.spacetime.compact and k.basis)):
            names.append("killing_classify")
        if m.geodesic is not None:
            names.append("geodesic")
        return names
    return {
        "curvature": ["curvature"],
        "killing-check": ["killing_check"],
        "killing-classify": ["killing_classify"],
        "energy": ["energy", "hyperbolicity"],
        "classify": ["hyperbolicity", "diameter"],
        "geodesic": ["geodesic"],
    }[command]


def exit_code(checks: list[dict]) -> int:
    verdicts = {c["verdict"] for c in checks} - NEUTRAL
    if "fail" in verdicts:
        return EXIT_FAIL
    if verdicts - {"pass"}:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def jsonable(obj):
    """Plain JSON types only; non-finite floats become 'inf', '-inf' or 'nan'."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def build_report(command: str, m: Manifest) -> dict:
    start = time.perf_counter()
    checks, sections = [], {}
    for name in sections_for(command, m):
        out = SECTIONS[name](m)
        for c in out["checks"]:
            checks.append({"section": name, **c})
        sections[name] = out["details"]
    S = m.spacetime
    counts = {}
    for c in checks:
        counts[c["verdict"]] = counts.get(c["verdict"], 0) + 1
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": TOOL,
        "version": __version__,
        "command": command,
        "manifest": {"path": m.path, "sha256": m.digest},
        "numerics": m.numerics,
        "spacetime": {
            "fiber_coordinates": list(S.fiber.chart.names),
            "fiber_domain_box": _box(m),
            "warp": str(S.warp),
            "interval": [S.t1, S.t2],
            "params": m.params,
        },
        "flags": m.flags,
        "checks": checks,
        "sections": sections,
        "summary": counts,
        "exit_code": exit_code(checks),
    }
    report = jsonable(report)
    report["wall_clock_seconds"] = round(time.perf_counter() - start, 6)
    return report


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog=TOOL, description="Curvature, Killing-field and energy-condition checks for static space-times.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--manifest", required=True, type=Path, help="INI manifest describing the space-time")
    p.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")
    p.add_argument("--samples", type=int, help="fiber sample count")
    p.add_argument("--causal-samples", type=int, help="number of sampled causal vectors")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--step", type=float, help="geodesic integration step")
    p.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    return p


def run(command: str, manifest_path, out=None, overrides: dict | None = None) -> int:
    try:
        m = load_manifest(manifest_path, overrides)
        report = build_report(command, m)
    except (ManifestError, UsageError, ExprError, GeometryError, IntegrationError) as exc:
        print(f"{TOOL}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = dumps(report)
    if out is None:
        sys.stdout.write(text)
    else:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            print(f"{TOOL}: error: cannot write {out}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    return report["exit_code"]


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    overrides = {
        "samples": args.samples,
        "causal_samples": args.causal_samples,
        "seed": args.seed,
        "tol": args.tol,
        "step": args.step,
    }
    return run(args.command, args.manifest, args.out, overrides)


if __name__ == "__main__":
    sys.exit(main())
