"""Pipeline stages behind the command line: sweep, diagnostics, classification, output."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import svg
from .config import ExperimentConfig
from .diagnostics import (
    DiagnosticsReport,
    frequency_curve,
    holder_seminorm,
    interaction_energy,
    measure_sign_check,
    morrey_quotient,
    pohozaev_residual,
    sample_dict,
    segregation_sup,
)
from .errors import SeglabError
from .forcing import monotonicity_constant
from .freeboundary import BoundaryPointClass, classify_point, extract_nodal_set, group_norms
from .grid import FieldSet, check_ball, read_dump_meta, read_fieldset, write_fieldset
from .solver import SolveResult, SweepEntry, beta_sweep, solve

log = logging.getLogger(__name__)

FAILED_MARKER = "FAILED"


class OutputError(SeglabError):
    """The output directory cannot be created or written."""


def fmt(v) -> str:
    if v is None:
        return "undefined"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.10g}"
    return str(v)


def prepare_output(path) -> Path:
    """Create ``path`` and verify it is writable before any artifact is produced."""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".seglab-write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OutputError(f"output directory {path} is not writable: {exc.strerror}") from None
    return path


# -- solving -----------------------------------------------------------------

def run_sweep(cfg: ExperimentConfig) -> list[SweepEntry]:
    """Solve along the configured schedule (a single solve for a one-entry schedule)."""
    boundary = cfg.boundary()
    if len(cfg.schedule) == 1:
        c = replace(cfg.solver, beta=cfg.schedule[0])
        res = solve(cfg.grid, boundary, c, cfg.dec, cfg.coupling, cfg.forcing)
        return [SweepEntry(c.beta, res, None if res.converged else res.events[-1])]
    return beta_sweep(cfg.grid, boundary, cfg.solver, cfg.dec, cfg.coupling, cfg.forcing,
                      cfg.schedule, warm_start=cfg.warm_start)


def dump_name(k: int, final: bool) -> str:
    return "field_final.txt" if final else f"field_{k:02d}.txt"


def dump_fields(out: Path, entries, cfg: ExperimentConfig, which: str = "all") -> list[Path]:
    """Write field dumps and return the paths (``which`` is ``"all"`` or ``"final"``)."""
    paths = []
    for k, e in enumerate(entries):
        if e.result is None:
            continue
        final = k == len(entries) - 1
        if which == "final" and not final:
            continue
        meta = {"beta": repr(e.beta), "converged": e.converged, "config": cfg.config_hash}
        p = out / (dump_name(k, final))
        write_fieldset(p, e.result.fields, meta)
        paths.append(p)
    return paths


def write_convergence(out: Path, entries) -> None:
    with (out / "convergence.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beta", "iters", "final_residual", "converged"])
        for e in entries:
            r = e.result
            w.writerow([fmt(e.beta), r.iters if r else 0, fmt(r.residual) if r else "nan",
                        str(e.converged).lower()])


# -- diagnostics -------------------------------------------------------------

def _valid_radii(f: FieldSet, x0, radii):
    out = []
    for r in radii:
        try:
            check_ball(f.grid, x0, r)
        except SeglabError:
            continue
        if r >= 3 * f.grid.hmin * (1 - 1e-9):
            out.append(r)
    return out


def sweep_diagnostics(cfg: ExperimentConfig, f: FieldSet, beta: float) -> DiagnosticsReport:
    """The per-beta functionals: Hölder seminorms, interaction energies, segregation."""
    req = cfg.diagnostics
    rep = DiagnosticsReport(beta=float(beta), config_hash=cfg.config_hash)
    for alpha in req.alphas:
        for i in range(1, f.d + 1):
            rep.holder[f"{i}:{alpha:g}"] = holder_seminorm(f, i, alpha, req.window)
    for i, j in cfg.dec.cross_pairs():
        rep.interaction[f"{i},{j}"] = interaction_energy(f, beta, cfg.solver.p, cfg.coupling, i, j,
                                                         req.window, cfg.dec)
    rep.seg_sup = segregation_sup(f, cfg.dec)
    return rep


def final_diagnostics(cfg: ExperimentConfig, f: FieldSet, rep: DiagnosticsReport) -> DiagnosticsReport:
    """Add frequency curves, Pohozaev residuals, Morrey quotients and the measure-sign check."""
    req = cfg.diagnostics
    p = cfg.solver.p
    beta = rep.beta
    C = req.C if req.C is not None else monotonicity_constant(cfg.forcing, f.grid.dim)
    for x0 in req.probes:
        radii = _valid_radii(f, x0, req.radii_for(f.grid))
        if not radii:
            rep.frequency.append({"x0": list(x0), "C": C, "defect": None, "samples": []})
            continue
        curve = frequency_curve(f, x0, radii, req.mode, cfg.forcing, p, C)
        rep.frequency.append({"x0": list(x0), "C": C, "defect": curve.defect,
                              "samples": [sample_dict(s) for s in curve.samples]})
        for r in _valid_radii(f, x0, req.pohozaev_radii):
            rep.pohozaev.append({
                "x0": list(x0), "r": r,
                "residual": pohozaev_residual(f, cfg.forcing, x0, r, p),
                "residual_beta": pohozaev_residual(f, cfg.forcing, x0, r, p, beta, cfg.coupling),
            })
        for r in _valid_radii(f, x0, req.morrey_radii):
            rep.morrey.append({"x0": list(x0), "r": r, "value": morrey_quotient(f, x0, r)})
    ms = measure_sign_check(f, cfg.forcing, cfg.dec, req.measure_delta, p)
    rep.measure_sign = {"violations": ms.violations, "worst": ms.worst, "checked": ms.checked,
                        "tol": ms.tol, "delta": req.measure_delta}
    return rep


def write_sweep_diag(out: Path, reports, cfg: ExperimentConfig) -> None:
    pairs = [f"{i},{j}" for i, j in cfg.dec.cross_pairs()]
    with (out / "sweep_diag.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beta", "alpha", "holder", "seg_sup"]
                   + [f"interaction_{p.replace(',', '_')}" for p in pairs])
        for rep in reports:
            for alpha in cfg.diagnostics.alphas:
                vals = [v for k, v in rep.holder.items() if k.endswith(f":{alpha:g}")]
                w.writerow([fmt(rep.beta), fmt(alpha), fmt(max(vals)), fmt(rep.seg_sup)]
                           + [fmt(rep.interaction[p]) for p in pairs])


def write_frequency(out: Path, rep: DiagnosticsReport, dim: int) -> None:
    with (out / "frequency_curve.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x0", "r", "H", "E", "N"])
        for curve in rep.frequency:
            x0 = ";".join(fmt(float(v)) for v in curve["x0"])
            for s in curve["samples"]:
                w.writerow([x0, fmt(s["r"]), fmt(s["H"]), fmt(s["E"]),
                            s["N"] if s["N"] == "undefined" else fmt(s["N"])])


# -- classification ----------------------------------------------------------

@dataclass
class ClassificationResult:
    points: list[BoundaryPointClass] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    nodal_count: int = 0
    degenerate: bool = False
    nodal_points: np.ndarray | None = None


def interface_nodes(f: FieldSet, dec, nodal) -> np.ndarray:
    """Nodal nodes where the dominant group changes between axis neighbors.

    A thick nodal band would otherwise feed points far from the switch line,
    where one group dominates on both sides.  Falls back to all nodal nodes.
    """
    dom = np.argmax(group_norms(f, dec), axis=0)
    switch = np.zeros(dom.shape, dtype=bool)
    for ax in range(dom.ndim):
        lo = [slice(None)] * dom.ndim
        hi = [slice(None)] * dom.ndim
        lo[ax], hi[ax] = slice(None, -1), slice(1, None)
        diff = dom[tuple(lo)] != dom[tuple(hi)]
        switch[tuple(lo)] |= diff
        switch[tuple(hi)] |= diff
    keep = switch[tuple(nodal.indices.T)]
    return nodal.points[keep] if keep.any() else nodal.points


def classify_field(cfg: ExperimentConfig, f: FieldSet, threads: int = 1) -> ClassificationResult:
    req = cfg.classification
    nodal = extract_nodal_set(f, cfg.dec, req.delta, req.variant)
    out = ClassificationResult(nodal_count=len(nodal), degenerate=nodal.degenerate,
                               nodal_points=nodal.points)
    if nodal.degenerate:
        out.notes.append("field vanishes identically (DegenerateAllZero)")
    if not len(nodal):
        out.notes.append("nodal set is empty: no free-boundary points to classify")
        return out
    candidates = [tuple(p) for p in req.points]
    if req.nodal_samples > 0 and not nodal.degenerate:
        pool_pts = interface_nodes(f, cfg.dec, nodal)
        step = max(1, len(pool_pts) // req.nodal_samples)
        candidates += [tuple(float(v) for v in p) for p in pool_pts[::step][:req.nodal_samples]]

    def one(x0):
        try:
            return classify_point(f, cfg.dec, x0, req.gap_threshold, req.delta, req.variant, nodal,
                                  cfg.diagnostics.mode, cfg.forcing, cfg.solver.p), None
        except SeglabError as exc:
            return None, f"point {list(x0)} skipped: {type(exc).__name__}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, candidates))
    else:
        results = [one(x) for x in candidates]
    for pt, note in results:
        if pt is not None:
            out.points.append(pt)
        if note:
            out.notes.append(note)
    gap = [pt for pt in out.points if 1.1 < pt.N_hat < 1.4]
    if gap:
        out.notes.append(f"{len(gap)} point(s) with N_hat in the gap (1.1, 1.4)")
        log.warning(out.notes[-1])
    return out


CLASS_COLUMNS = ["x", "y", "N_hat", "class", "Gplus", "Gminus", "nu_x", "nu_y"]


def write_classification(out: Path, res: ClassificationResult) -> None:
    with (out / "classification.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CLASS_COLUMNS)
        for pt in res.points:
            row = pt.row()
            w.writerow([row[c] if c == "class" else fmt(float(row[c])) for c in CLASS_COLUMNS])


# -- plots and reports -------------------------------------------------------

def write_plots(out: Path, f: FieldSet, nodal_points, tag: str = "final") -> None:
    grid = f.grid
    if grid.dim == 1:
        x = grid.axes()[0]
        for i in range(f.d):
            svg.line_plot(out / f"component_{i + 1}_{tag}.svg", x, {f"u{i + 1}": f.values[i]},
                          f"component {i + 1}")
        dots = nodal_points[:, 0] if nodal_points is not None and len(nodal_points) else None
        svg.line_plot(out / f"nodal_{tag}.svg", x,
                      {f"u{i + 1}": f.values[i] for i in range(f.d)}, "components and nodal set", dots)
        return
    for i in range(f.d):
        svg.heatmap(out / f"component_{i + 1}_{tag}.svg", grid, f.values[i], f"component {i + 1}")
    svg.heatmap(out / f"nodal_{tag}.svg", grid, np.max(np.abs(f.values), axis=0),
                "max |u_i| and nodal set", nodal_points)


def report_dict(cfg: ExperimentConfig, entries, reports, cls: ClassificationResult | None,
                notes) -> dict:
    doc = {
        "config_hash": cfg.config_hash,
        "grid": {"dim": cfg.grid.dim, "n": list(cfg.grid.n),
                 "extent": [list(e) for e in cfg.grid.extent]},
        "decomposition": cfg.dec.to_dict(),
        "forcing": cfg.forcing.to_dict(),
        "p": cfg.solver.p,
        "solves": [{"beta": e.beta, "iters": e.result.iters if e.result else 0,
                    "residual": e.result.residual if e.result else None,
                    "converged": e.converged,
                    "warm_start": e.result.warm_start if e.result else False,
                    "omega": e.result.omega if e.result else None,
                    "events": e.result.events if e.result else [e.error]} for e in entries],
        "diagnostics": [r.to_dict() for r in reports],
        "notes": list(notes),
    }
    if cls is not None:
        doc["classification"] = {
            "nodal_count": cls.nodal_count, "degenerate": cls.degenerate,
            "points": [dict(pt.row(), note=pt.note, tie=pt.tie,
                            sides=list(pt.sides) if pt.sides else None) for pt in cls.points],
            "notes": cls.notes,
        }
    return doc


def _clean(obj):
    """Replace non-finite floats for JSON output."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_reports(out: Path, doc: dict) -> None:
    (out / "report.json").write_text(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n")
    lines = [f"seglab report  config {doc['config_hash']}",
             f"grid: dim={doc['grid']['dim']} n={doc['grid']['n']} extent={doc['grid']['extent']}",
             f"groups: {doc['decomposition']['breakpoints']}  forcing: {doc['forcing']['family']}"
             f"  p={doc['p']}", ""]
    if doc["solves"]:
        lines.append("solves:")
    for s in doc["solves"]:
        state = "converged" if s["converged"] else "NOT CONVERGED"
        lines.append(f"  beta={s['beta']:g}  iters={s['iters']}  residual={fmt(s['residual'])}  {state}")
    for rep in doc["diagnostics"]:
        lines.append("")
        lines.append(f"diagnostics at beta={rep['beta']:g}:")
        for k, v in rep["holder"].items():
            i, a = k.split(":")
            lines.append(f"  holder u{i} alpha={a}: {fmt(v)}")
        for k, v in rep["interaction"].items():
            lines.append(f"  interaction ({k}): {fmt(v)}")
        lines.append(f"  segregation sup: {fmt(rep['seg_sup'])}")
        for c in rep["frequency"]:
            lines.append(f"  frequency at {c['x0']}: {len(c['samples'])} radii, C={fmt(c['C'])}, "
                         f"monotonicity defect {fmt(c['defect'])}")
        for pz in rep["pohozaev"]:
            lines.append(f"  pohozaev at {pz['x0']} r={fmt(pz['r'])}: limit {fmt(pz['residual'])}, "
                         f"with interaction {fmt(pz['residual_beta'])}")
        for m in rep["morrey"]:
            lines.append(f"  morrey at {m['x0']} r={fmt(m['r'])}: {fmt(m['value'])}")
        if rep["measure_sign"]:
            ms = rep["measure_sign"]
            lines.append(f"  measure sign: {ms['violations']} violation(s) of {ms['checked']} checked "
                         f"(tol {fmt(ms['tol'])})")
    cls = doc.get("classification")
    if cls is not None:
        lines.append("")
        lines.append(f"classification: {cls['nodal_count']} nodal node(s), {len(cls['points'])} point(s)")
        for pt in cls["points"]:
            lines.append(f"  ({fmt(pt['x'])}, {fmt(pt['y'])}) N_hat={fmt(pt['N_hat'])} {pt['class']}")
        for n in cls["notes"]:
            lines.append(f"  note: {n}")
    for n in doc["notes"]:
        lines.append(f"note: {n}")
    (out / "report.txt").write_text("\n".join(lines) + "\n")


def mark_failed(out: Path, reasons) -> None:
    (out / FAILED_MARKER).write_text("\n".join(reasons) + "\n")


def load_dump(cfg: ExperimentConfig, path) -> tuple[FieldSet, float, list[str]]:
    """Read a field dump for analysis; beta comes from its metadata when present."""
    f = read_fieldset(path)
    notes = []
    if f.d != cfg.d:
        raise SeglabError(f"dump has {f.d} components, configuration expects {cfg.d}")
    if f.grid != cfg.grid:
        notes.append(f"dump grid ({f.grid.describe()}) differs from the configured grid")
    meta = read_dump_meta(path)
    beta = float(meta["beta"]) if "beta" in meta else float(cfg.schedule[-1])
    return f, beta, notes


def quantize(f: FieldSet) -> FieldSet:
    """The field as it reads back from a dump (9 significant digits)."""
    flat = f.values.ravel()
    back = np.array(" ".join(f"{v:.8e}" for v in flat).split(), dtype=float)
    return FieldSet(f.grid, back.reshape(f.values.shape))


def cpu_threads(n: int | None) -> int:
    if n is None or n < 1:
        return 1
    return min(n, os.cpu_count() or 1)
