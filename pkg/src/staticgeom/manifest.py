"""INI-style manifests describing a static space-time and what to check on it.

Every key is validated; unknown sections or keys are errors so that a typo
never silently falls back to a default. Expressions are parsed at load time
and the warp is checked positive on the sample grid.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .expr import ExprError, Node, evaluate, parse
from .geometry import Chart, GeometryError, MetricField, VectorFieldExpr
from .killing import SpacetimeFieldCandidate
from .warped import SpacetimeVector, StaticSpacetime, WarpError

SECTIONS = ("fiber", "warp", "params", "fields", "killing", "geodesic", "numerics")
FIBER_KEYS = {"coordinates", "margin", "compact", "complete", "ricci_flat", "inf_f", "sup_f"}
WARP_KEYS = {"f", "t1", "t2"}
KILLING_KEYS = {"basis", "h", "psi", "phi", "static_field"}
GEODESIC_KEYS = {"t0", "p0", "u0", "v0", "span"}
NUMERIC_KEYS = {
    "samples": int,
    "causal_samples": int,
    "seed": int,
    "tol": float,
    "step": float,
    "t_window": float,
}
NUMERIC_DEFAULTS = {
    "samples": 64,
    "causal_samples": 10_000,
    "seed": 0,
    "tol": 1e-8,
    "step": 0.01,
    "t_window": 10.0,
}


class ManifestError(ValueError):
    def __init__(self, message: str, section: str | None = None, key: str | None = None):
        where = f"[{section}]" if section else ""
        if key:
            where += f" {key}"
        super().__init__(f"{where}: {message}" if where else message)
        self.section = section
        self.key = key


@dataclass(frozen=True)
class KillingSpec:
    basis_names: tuple[str, ...]
    basis: tuple[VectorFieldExpr, ...]
    h: Node | None
    psi: Node | None
    phis: tuple[Node, ...]
    static_field: str | None

    def candidate(self) -> SpacetimeFieldCandidate | None:
        if self.h is None or self.psi is None:
            return None
        return SpacetimeFieldCandidate(self.h, self.psi, self.phis, self.basis, self.basis_names)


@dataclass(frozen=True)
class GeodesicSpec:
    t0: float
    p0: np.ndarray
    v0: SpacetimeVector
    span: float


@dataclass
class Manifest:
    path: str
    digest: str
    spacetime: StaticSpacetime
    params: dict[str, float]
    vectors: dict[str, VectorFieldExpr]
    scalars: dict[str, Node]
    killing: KillingSpec | None
    geodesic: GeodesicSpec | None
    numerics: dict[str, float | int]
    flags: dict[str, dict] = field(default_factory=dict)

    @property
    def fiber(self) -> MetricField:
        return self.spacetime.fiber


def _bool(value: str, section: str, key: str) -> bool:
    v = value.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ManifestError(f"expected a boolean, got {value!r}", section, key)


def _real(value: str, section: str, key: str, params: dict[str, float]) -> float:
    """Extended real: 'inf', '-inf', or a constant expression such as 'pi/2'."""
    v = value.strip()
    if v.lower() in ("inf", "+inf"):
        return math.inf
    if v.lower() == "-inf":
        return -math.inf
    try:
        return float(evaluate(parse(v, (), params), (), params))
    except ExprError as exc:
        raise ManifestError(str(exc), section, key) from exc


def _split(value: str) -> list[str]:
    return [part.strip() for part in value.split(",")]


def _expr(src: str, names, params, section: str, key: str) -> Node:
    try:
        return parse(src, names, params)
    except ExprError as exc:
        raise ManifestError(str(exc), section, key) from exc


def _read(path: Path) -> tuple[configparser.ConfigParser, str]:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc.strerror or exc}") from exc
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"), default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(raw.decode("utf-8"), source=str(path))
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ManifestError(f"malformed manifest: {exc}") from exc
    return cp, hashlib.sha256(raw).hexdigest()


def load_manifest(path, overrides: dict | None = None) -> Manifest:
    path = Path(path)
    cp, digest = _read(path)
    for section in cp.sections():
        if section not in SECTIONS:
            raise ManifestError(f"unknown section (allowed: {', '.join(SECTIONS)})", section)
    for required in ("fiber", "warp"):
        if not cp.has_section(required):
            raise ManifestError("missing required section", required)

    numerics = dict(NUMERIC_DEFAULTS)
    if cp.has_section("numerics"):
        for key, value in cp.items("numerics"):
            if key not in NUMERIC_KEYS:
                raise ManifestError("unknown key", "numerics", key)
            try:
                numerics[key] = NUMERIC_KEYS[key](value)
            except ValueError as exc:
                raise ManifestError(f"expected {NUMERIC_KEYS[key].__name__}, got {value!r}", "numerics", key) from exc
    for key, value in (overrides or {}).items():
        if value is not None:
            numerics[key] = value
    if numerics["samples"] < 1 or numerics["causal_samples"] < 1:
        raise ManifestError("sample counts must be positive", "numerics")
    if not numerics["tol"] > 0 or not numerics["step"] > 0:
        raise ManifestError("tol and step must be positive", "numerics")

    params: dict[str, float] = {}
    if cp.has_section("params"):
        for key, value in cp.items("params"):
            params[key] = _real(value, "params", key, params)
            if not math.isfinite(params[key]):
                raise ManifestError("parameters must be finite", "params", key)

    fiber, flags = _load_fiber(cp, params)
    spacetime = _load_warp(cp, fiber, flags, params, numerics["t_window"])
    names = fiber.chart.names

    vectors: dict[str, VectorFieldExpr] = {}
    scalars: dict[str, Node] = {}
    if cp.has_section("fields"):
        for key, value in cp.items("fields"):
            kind, _, name = key.partition(".")
            if kind not in ("vector", "scalar") or not name:
                raise ManifestError("fields keys are vector.NAME or scalar.NAME", "fields", key)
            if name in vectors or name in scalars:
                raise ManifestError("duplicate field name", "fields", key)
            if kind == "scalar":
                scalars[name] = _expr(value, names, params, "fields", key)
                continue
            comps = _split(value)
            if len(comps) != len(names):
                raise ManifestError(f"vector field needs {len(names)} components, got {len(comps)}", "fields", key)
            vectors[name] = VectorFieldExpr(
                fiber.chart, tuple(_expr(c, names, params, "fields", key) for c in comps), params
            )

    killing = _load_killing(cp, spacetime, vectors, scalars, params) if cp.has_section("killing") else None
    geodesic = _load_geodesic(cp, spacetime, params) if cp.has_section("geodesic") else None

    rng = np.random.default_rng(numerics["seed"])
    points = fiber.chart.sample(numerics["samples"], rng)
    try:
        spacetime.validate(points)
    except WarpError as exc:
        raise ManifestError(str(exc), "warp", "f") from exc
    except (ExprError, GeometryError) as exc:
        raise ManifestError(str(exc), "fiber") from exc

    return Manifest(str(path), digest, spacetime, params, vectors, scalars, killing, geodesic, numerics, flags)


def _load_fiber(cp, params) -> tuple[MetricField, dict]:
    sec = dict(cp.items("fiber"))
    if "coordinates" not in sec:
        raise ManifestError("missing key", "fiber", "coordinates")
    names = tuple(_split(sec["coordinates"]))
    index = {n: i for i, n in enumerate(names)}
    domain: dict[str, tuple[float, float]] = {}
    comps: dict[tuple[int, int], str] = {}
    for key, value in sec.items():
        if key in FIBER_KEYS:
            continue
        head, _, rest = key.partition(".")
        if head == "domain" and rest in index:
            ends = _split(value)
            if len(ends) != 2:
                raise ManifestError("domain needs two endpoints", "fiber", key)
            domain[rest] = (_real(ends[0], "fiber", key, params), _real(ends[1], "fiber", key, params))
            if not all(map(math.isfinite, domain[rest])):
                raise ManifestError("fiber domain must be bounded", "fiber", key)
        elif head == "g" and rest.count(".") == 1 and all(c in index for c in rest.split(".")):
            a, b = sorted(index[c] for c in rest.split("."))
            if (a, b) in comps:
                raise ManifestError("metric component given twice", "fiber", key)
            comps[(a, b)] = (key, value)
        else:
            raise ManifestError("unknown key", "fiber", key)
    missing = [n for n in names if n not in domain]
    if missing:
        raise ManifestError(f"no domain for coordinate(s) {', '.join(missing)}", "fiber")
    margin = _real(sec.get("margin", "0"), "fiber", "margin", params)
    try:
        chart = Chart(names, tuple(domain[n] for n in names), margin)
        upper = {ij: _expr(src, names, params, "fiber", key) for ij, (key, src) in comps.items()}
        metric = MetricField.from_upper(chart, upper, 0, params)
    except (GeometryError, ExprError) as exc:
        raise ManifestError(str(exc), "fiber") from exc

    flags = {}
    for flag in ("compact", "complete", "ricci_flat"):
        declared = flag in sec
        flags[flag] = {
            "value": _bool(sec[flag], "fiber", flag) if declared else False,
            "source": "declared" if declared else "default",
        }
    for bound in ("inf_f", "sup_f"):
        if bound in sec:
            flags[bound] = {"value": _real(sec[bound], "fiber", bound, params), "source": "declared"}
        else:
            flags[bound] = {"value": None, "source": "not declared"}
    return metric, flags


def _load_warp(cp, fiber: MetricField, flags: dict, params, t_window: float) -> StaticSpacetime:
    sec = dict(cp.items("warp"))
    for key in sec:
        if key not in WARP_KEYS:
            raise ManifestError("unknown key", "warp", key)
    if "f" not in sec:
        raise ManifestError("missing key", "warp", "f")
    f = _expr(sec["f"], fiber.chart.names, params, "warp", "f")
    t1 = _real(sec.get("t1", "-inf"), "warp", "t1", params)
    t2 = _real(sec.get("t2", "inf"), "warp", "t2", params)
    try:
        return StaticSpacetime(
            fiber,
            f,
            t1,
            t2,
            compact=flags["compact"]["value"],
            complete=flags["complete"]["value"],
            ricci_flat=flags["ricci_flat"]["value"],
            inf_f_declared=flags["inf_f"]["value"],
            sup_f_declared=flags["sup_f"]["value"],
            t_window=t_window,
        )
    except GeometryError as exc:
        raise ManifestError(str(exc), "warp") from exc


def _load_killing(cp, S: StaticSpacetime, vectors, scalars, params) -> KillingSpec:
    sec = dict(cp.items("killing"))
    for key in sec:
        if key not in KILLING_KEYS:
            raise ManifestError("unknown key", "killing", key)
    basis_names = tuple(n for n in _split(sec.get("basis", "")) if n)
    for n in basis_names:
        if n not in vectors:
            raise ManifestError(f"basis field {n!r} is not defined in [fields]", "killing", "basis")
    basis = tuple(vectors[n] for n in basis_names)
    h = _expr(sec["h"], (S.time_name,), params, "killing", "h") if "h" in sec else None
    psi = None
    if "psi" in sec:
        src = sec["psi"].strip()
        psi = scalars[src] if src in scalars else _expr(src, S.fiber.chart.names, params, "killing", "psi")
    if (h is None) != (psi is None):
        raise ManifestError("h and psi must be given together", "killing")
    phis: tuple[Node, ...] = ()
    if "phi" in sec:
        srcs = _split(sec["phi"])
        if len(srcs) != len(basis):
            raise ManifestError(f"need one phi per basis field ({len(basis)}), got {len(srcs)}", "killing", "phi")
        phis = tuple(_expr(s, (S.time_name,), params, "killing", "phi") for s in srcs)
    elif h is not None:
        phis = tuple(parse("0", (S.time_name,)) for _ in basis)
    static = sec.get("static_field")
    if static is not None:
        static = static.strip()
        if static not in vectors:
            raise ManifestError(f"field {static!r} is not defined in [fields]", "killing", "static_field")
        if h is None:
            raise ManifestError("static_field needs h", "killing", "static_field")
    return KillingSpec(basis_names, basis, h, psi, phis, static)


def _load_geodesic(cp, S: StaticSpacetime, params) -> GeodesicSpec:
    sec = dict(cp.items("geodesic"))
    for key in sec:
        if key not in GEODESIC_KEYS:
            raise ManifestError("unknown key", "geodesic", key)
    for key in ("p0", "v0", "span"):
        if key not in sec:
            raise ManifestError("missing key", "geodesic", key)

    def vec(key):
        vals = [_real(v, "geodesic", key, params) for v in _split(sec[key])]
        if len(vals) != S.s:
            raise ManifestError(f"needs {S.s} components", "geodesic", key)
        return np.array(vals)

    p0 = vec("p0")
    if not S.fiber.chart.contains(p0):
        raise ManifestError("initial point outside the fiber domain", "geodesic", "p0")
    span = _real(sec["span"], "geodesic", "span", params)
    if not (span > 0 and math.isfinite(span)):
        raise ManifestError("span must be positive and finite", "geodesic", "span")
    return GeodesicSpec(
        _real(sec.get("t0", "0"), "geodesic", "t0", params),
        p0,
        SpacetimeVector(_real(sec.get("u0", "0"), "geodesic", "u0", params), vec("v0")),
        span,
    )
