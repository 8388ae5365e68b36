"""Experiment configuration: a TOML document validated as a whole.

Parsing never stops at the first problem: every semantic error found is
collected and raised together in one :class:`ConfigSemanticError`.
Syntax errors carry the offending line number.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigSemanticError, ConfigSyntaxError, SeglabError
from .forcing import ForcingSpec, make_forcing
from .freeboundary import GAP_THRESHOLD, Variant
from .grid import Grid, check_ball, make_grid
from .grouping import CouplingMatrix, Decomposition, default_coupling, make_decomposition, validate_coupling
from .solver import SolveConfig

BOUNDARY_KINDS = ("edges", "affine", "sine", "ramp")
EDGE_NAMES = ("left", "right", "bottom", "top")
SECTIONS = ("grid", "groups", "coupling", "forcing", "solver", "sweep", "boundary",
            "diagnostics", "classification", "output")


@dataclass(frozen=True)
class BoundarySpec:
    component: int
    kind: str
    params: dict

    def evaluate(self, grid: Grid) -> np.ndarray:
        X = grid.mesh()
        p = self.params
        if self.kind == "edges":
            out = np.zeros(grid.shape)
            # later edges win at corners: left, right, bottom, top
            names = EDGE_NAMES[:2 * grid.dim]
            for ax, (lo_name, hi_name) in enumerate(zip(names[::2], names[1::2])):
                idx = [slice(None)] * grid.dim
                idx[ax] = 0
                out[tuple(idx)] = p.get(lo_name, 0.0)
                idx[ax] = -1
                out[tuple(idx)] = p.get(hi_name, 0.0)
            return out
        lin = p.get("value", 0.0) + sum(g * Xa for g, Xa in zip(p.get("slope", [0.0] * grid.dim), X))
        if self.kind == "affine":
            return lin
        if self.kind == "ramp":
            return np.clip(lin, 0.0, p.get("cap", math.inf))
        phase = sum(2 * math.pi * k * Xa for k, Xa in zip(p.get("wavenumber", [1.0] * grid.dim), X))
        return p.get("offset", 0.0) + p.get("amplitude", 1.0) * np.sin(phase + p.get("phase", 0.0))


@dataclass(frozen=True)
class DiagnosticsRequest:
    alphas: tuple = (0.5,)
    window: tuple | None = None
    probes: tuple = ()
    radii: tuple | None = None
    radii_max: float | None = None
    radii_count: int = 24
    mode: str = "limit"
    C: float | None = None
    pohozaev_radii: tuple = ()
    morrey_radii: tuple = ()
    measure_delta: float = 0.1

    def radii_for(self, grid: Grid) -> list[float]:
        if self.radii is not None:
            return list(self.radii)
        lo = 3 * grid.hmin
        hi = self.radii_max if self.radii_max is not None else 0.3
        return [float(r) for r in np.geomspace(lo, hi, self.radii_count)]


@dataclass(frozen=True)
class ClassificationRequest:
    enabled: bool = True
    delta: float = 0.02
    variant: Variant = Variant.FULL
    points: tuple = ()
    nodal_samples: int = 0
    gap_threshold: float = GAP_THRESHOLD


@dataclass
class ExperimentConfig:
    grid: Grid
    dec: Decomposition
    coupling: CouplingMatrix
    forcing: ForcingSpec
    solver: SolveConfig
    schedule: list[float]
    warm_start: bool
    boundary_specs: list[BoundarySpec]
    diagnostics: DiagnosticsRequest
    classification: ClassificationRequest
    output_dir: str
    plots: bool
    dumps: bool
    seed: int
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def d(self) -> int:
        return self.dec.d

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def boundary(self) -> np.ndarray:
        """Closed-grid boundary data, shape ``(d, *grid.shape)``; unset components are 0."""
        out = np.zeros((self.d,) + self.grid.shape)
        for spec in self.boundary_specs:
            out[spec.component - 1] = spec.evaluate(self.grid)
        return out


class _Collector:
    def __init__(self):
        self.errors: list[str] = []

    def add(self, msg: str):
        self.errors.append(msg)

    def get(self, table: dict, key: str, kind, default=None, where: str = ""):
        if key not in table:
            return default
        val = table[key]
        ok = _is(val, kind)
        if not ok:
            self.add(f"{where}{key}: expected {kind}, got {val!r}")
            return default
        return _coerce(val, kind)


def _is(val, kind) -> bool:
    if kind == "int":
        return isinstance(val, int) and not isinstance(val, bool)
    if kind == "float":
        return isinstance(val, (int, float)) and not isinstance(val, bool)
    if kind == "bool":
        return isinstance(val, bool)
    if kind == "str":
        return isinstance(val, str)
    if kind == "floats":
        return isinstance(val, list) and all(_is(v, "float") for v in val)
    if kind == "ints":
        return isinstance(val, list) and all(_is(v, "int") for v in val)
    if kind == "matrix":
        return isinstance(val, list) and all(_is(r, "floats") for r in val)
    return False


def _coerce(val, kind):
    if kind == "float":
        return float(val)
    if kind == "floats":
        return [float(v) for v in val]
    if kind == "matrix":
        return [[float(v) for v in r] for r in val]
    return val


_LINE = re.compile(r"line (\d+)")


def load_toml(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = _LINE.search(str(exc))
        raise ConfigSyntaxError(str(exc), int(m.group(1)) if m else None) from None


def parse_config(text: str) -> ExperimentConfig:
    """Parse and cross-validate an experiment configuration."""
    raw = load_toml(text)
    c = _Collector()
    for key in raw:
        if key not in SECTIONS and key != "seed":
            c.add(f"unknown section or key {key!r}")

    g = raw.get("grid", {})
    dim = c.get(g, "dim", "int", None, "grid.")
    grid = None
    if dim not in (1, 2):
        c.add(f"grid.dim must be 1 or 2, got {dim!r}")
    else:
        extent = g.get("extent")
        n = g.get("n")
        if isinstance(n, int) and not isinstance(n, bool):
            n = [n] * dim
        if _is(extent, "floats") and len(extent) == 2 and dim == 1:
            extent = [extent]
        if not (_is(extent, "matrix") and len(extent) == dim and all(len(e) == 2 for e in extent)):
            c.add(f"grid.extent must list {dim} [low, high] intervals")
        elif not (_is(n, "ints") and len(n) == dim):
            c.add(f"grid.n must be an integer or a list of {dim} integers")
        else:
            try:
                grid = make_grid(dim, extent, n)
            except SeglabError as exc:
                c.add(f"grid: {exc}")

    grp = raw.get("groups", {})
    dec = None
    bps = c.get(grp, "breakpoints", "ints", None, "groups.")
    if bps is None:
        c.add("groups.breakpoints is required")
    else:
        d = bps[-1] if bps else 0
        d = c.get(grp, "d", "int", d, "groups.")
        try:
            dec = make_decomposition(d, bps)
        except SeglabError as exc:
            c.add(f"groups: {type(exc).__name__}: {exc}")

    coupling = None
    cp = raw.get("coupling", {})
    if dec is not None:
        if "matrix" in cp:
            mat = c.get(cp, "matrix", "matrix", None, "coupling.")
            if mat is not None:
                try:
                    coupling = validate_coupling(dec, mat)
                except SeglabError as exc:
                    c.add(f"coupling: {type(exc).__name__}: {exc}")
        else:
            val = c.get(cp, "value", "float", 1.0, "coupling.")
            if not val > 0:
                c.add(f"coupling.value must be positive, got {val}")
            else:
                coupling = default_coupling(dec, val)

    fc = raw.get("forcing", {})
    forcing = None
    if dec is not None:
        family = c.get(fc, "family", "str", "zero", "forcing.")
        lam = c.get(fc, "lam", "floats", None, "forcing.")
        b = c.get(fc, "b", "matrix", None, "forcing.")
        try:
            forcing = make_forcing(dec, family, lam, b)
        except (SeglabError, ValueError) as exc:
            c.add(f"forcing: {type(exc).__name__}: {exc}")

    sv = raw.get("solver", {})
    omega = sv.get("omega", "auto")
    if omega == "auto":
        omega = None
    elif not _is(omega, "float"):
        c.add(f"solver.omega must be a number in (0, 2) or \"auto\", got {omega!r}")
        omega = None
    seed = c.get(raw, "seed", "int", 0)
    solver = None
    try:
        solver = SolveConfig(
            beta=0.0,
            p=c.get(sv, "p", "float", 1.0, "solver."),
            tol=c.get(sv, "tol", "float", 1e-9, "solver."),
            max_iters=c.get(sv, "max_iters", "int", 50_000, "solver."),
            omega=None if omega is None else float(omega),
            epsilon=c.get(sv, "epsilon", "float", 1e-12, "solver."),
            seed=seed,
            jitter=c.get(sv, "jitter", "float", 0.0, "solver."),
            check_every=c.get(sv, "check_every", "int", 25, "solver."),
        )
    except ValueError as exc:
        c.add(f"solver: {exc}")

    sw = raw.get("sweep", {})
    schedule = c.get(sw, "schedule", "floats", None, "sweep.")
    if schedule is None:
        c.add("sweep.schedule is required")
        schedule = []
    else:
        if len(schedule) < 1:
            c.add("sweep.schedule must not be empty")
        if any(b1 <= b0 for b0, b1 in zip(schedule, schedule[1:])):
            c.add(f"sweep.schedule not ascending: {schedule}")
        if any(b < 0 for b in schedule):
            c.add("sweep.schedule entries must be nonnegative")
    warm = c.get(sw, "warm_start", "bool", True, "sweep.")

    specs = _parse_boundary(raw.get("boundary", []), dec, dim, c)
    diag = _parse_diagnostics(raw.get("diagnostics", {}), grid, c)
    cls = _parse_classification(raw.get("classification", {}), grid, c)

    out = raw.get("output", {})
    out_dir = c.get(out, "dir", "str", "out", "output.")
    plots = c.get(out, "plots", "bool", True, "output.")
    dumps = c.get(out, "dumps", "bool", True, "output.")

    if c.errors:
        raise ConfigSemanticError(c.errors)
    return ExperimentConfig(grid, dec, coupling, forcing, solver, schedule, warm, specs, diag, cls,
                            out_dir, plots, dumps, seed, raw)


def _parse_boundary(entries, dec, dim, c: _Collector) -> list[BoundarySpec]:
    if isinstance(entries, dict):
        entries = [entries]
    specs = []
    seen = set()
    for k, e in enumerate(entries):
        where = f"boundary[{k}]."
        if not isinstance(e, dict):
            c.add(f"boundary[{k}] must be a table")
            continue
        comp = c.get(e, "component", "int", None, where)
        kind = c.get(e, "kind", "str", None, where)
        if comp is None:
            c.add(f"{where}component is required")
            continue
        if dec is not None and not 1 <= comp <= dec.d:
            c.add(f"{where}component {comp} not in 1..{dec.d}")
        if comp in seen:
            c.add(f"{where}component {comp} given twice")
        seen.add(comp)
        if kind not in BOUNDARY_KINDS:
            c.add(f"{where}kind must be one of {', '.join(BOUNDARY_KINDS)}, got {kind!r}")
            continue
        params = {}
        for key, val in e.items():
            if key in ("component", "kind"):
                continue
            vec = key in ("slope", "wavenumber")
            v = c.get(e, key, "floats" if vec else "float", None, where)
            if v is None:
                continue
            if vec and dim is not None and len(v) != dim:
                c.add(f"{where}{key} needs {dim} entries")
                continue
            if kind == "edges" and key not in EDGE_NAMES[:2 * (dim or 2)]:
                c.add(f"{where}unknown edge {key!r}")
                continue
            params[key] = v
        specs.append(BoundarySpec(comp, kind, params))
    return specs


def _points(val, dim, where, c: _Collector):
    if val is None:
        return ()
    if _is(val, "floats") and dim == 1:
        val = [[v] for v in val]
    if not _is(val, "matrix") or (dim is not None and any(len(p) != dim for p in val)):
        c.add(f"{where}: expected a list of {dim}-dimensional points")
        return ()
    return tuple(tuple(float(v) for v in p) for p in val)


def _parse_diagnostics(dg: dict, grid: Grid | None, c: _Collector) -> DiagnosticsRequest:
    dim = grid.dim if grid is not None else None
    alphas = c.get(dg, "alphas", "floats", [0.5], "diagnostics.")
    for a in alphas:
        if not 0 < a < 1:
            c.add(f"diagnostics.alphas: {a} not in (0, 1)")
    window = dg.get("window")
    if window is not None:
        if _is(window, "floats") and len(window) == 2:
            window = [window]
        if not _is(window, "matrix") or (dim is not None and len(window) != dim):
            c.add(f"diagnostics.window must list {dim} [low, high] intervals")
            window = None
        elif grid is not None:
            for (a, b), (lo, hi) in zip(window, grid.extent):
                if not lo <= a < b <= hi:
                    c.add(f"diagnostics.window [{a}, {b}] not inside [{lo}, {hi}]")
        window = tuple(tuple(float(v) for v in w) for w in window) if window else None
    probes = _points(dg.get("probes"), dim, "diagnostics.probes", c)
    radii = c.get(dg, "radii", "floats", None, "diagnostics.")
    if radii is not None and any(b <= a for a, b in zip(radii, radii[1:])):
        c.add("diagnostics.radii must be ascending")
    mode = c.get(dg, "mode", "str", "limit", "diagnostics.")
    if mode not in ("limit", "with_forcing"):
        c.add(f"diagnostics.mode must be 'limit' or 'with_forcing', got {mode!r}")
    req = DiagnosticsRequest(
        alphas=tuple(alphas), window=window, probes=probes,
        radii=tuple(radii) if radii is not None else None,
        radii_max=c.get(dg, "radii_max", "float", None, "diagnostics."),
        radii_count=c.get(dg, "radii_count", "int", 24, "diagnostics."),
        mode=mode, C=c.get(dg, "C", "float", None, "diagnostics."),
        pohozaev_radii=tuple(c.get(dg, "pohozaev_radii", "floats", [], "diagnostics.")),
        morrey_radii=tuple(c.get(dg, "morrey_radii", "floats", [], "diagnostics.")),
        measure_delta=c.get(dg, "measure_delta", "float", 0.1, "diagnostics."),
    )
    if not 0 < req.measure_delta < 0.5:
        c.add(f"diagnostics.measure_delta must lie in (0, 0.5), got {req.measure_delta}")
    if grid is not None:
        for p in probes:
            if not grid.contains(p):
                c.add(f"diagnostics.probes: probe {list(p)} lies outside the domain")
                continue
            rs = list(req.radii_for(grid)) + list(req.pohozaev_radii) + list(req.morrey_radii)
            for r in rs:
                try:
                    check_ball(grid, p, r)
                except SeglabError:
                    c.add(f"diagnostics: ball of radius {r:g} around probe {list(p)} "
                          f"leaves the domain")
                    break
    return req


def _parse_classification(cl: dict, grid: Grid | None, c: _Collector) -> ClassificationRequest:
    dim = grid.dim if grid is not None else None
    variant = c.get(cl, "variant", "str", "full", "classification.")
    try:
        variant = Variant(variant)
    except ValueError:
        c.add(f"classification.variant must be 'full' or 'groupwise', got {variant!r}")
        variant = Variant.FULL
    req = ClassificationRequest(
        enabled=c.get(cl, "enabled", "bool", True, "classification."),
        delta=c.get(cl, "delta", "float", 0.02, "classification."),
        variant=variant,
        points=_points(cl.get("points"), dim, "classification.points", c),
        nodal_samples=c.get(cl, "nodal_samples", "int", 0, "classification."),
        gap_threshold=c.get(cl, "gap_threshold", "float", GAP_THRESHOLD, "classification."),
    )
    if not 0 < req.delta < 0.5:
        c.add(f"classification.delta must lie in (0, 0.5), got {req.delta}")
    if grid is not None:
        for p in req.points:
            if not grid.contains(p):
                c.add(f"classification.points: point {list(p)} lies outside the domain")
    return req


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigSyntaxError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)
