"""Discrete solves of the competing system and beta-continuation sweeps.

The residual of component ``i`` at an interior node is

    R_i = -Lap u_i - f_i(u) + beta * sum_{j != i} a_ij u_i |u_i|^(p-1) |u_j|^(p+1).

Solutions are computed by nonlinear successive over-relaxation: nodes are
visited lexicographically and each component is updated from its frozen
semi-implicit node equation (see ``_kernels.pyx``).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import kernels
from .errors import (
    DivergedToNaN,
    MaxItersExceeded,
    ScheduleNotAscending,
    ScheduleTooShort,
    ShapeMismatch,
    SolveError,
)
from .forcing import ForcingSpec, forcing_values, zero_forcing
from .grid import FieldSet, Grid, laplacian_array
from .grouping import CouplingMatrix, Decomposition

log = logging.getLogger(__name__)

MAX_OMEGA_REDUCTIONS = 4
STALL_CHECKS = 8         # stall window is at least this many checks
STALL_GAIN = 0.99        # a check counts as progress below this fraction of the reference


@dataclass(frozen=True)
class SolveConfig:
    beta: float
    p: float = 1.0
    tol: float = 1e-9
    max_iters: int = 50_000
    omega: Optional[float] = None  # None: SOR-optimal factor for the grid Laplacian
    epsilon: float = 1e-12
    seed: int = 0
    jitter: float = 0.0
    check_every: int = 25
    backend: Optional[str] = None

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if not self.p > 0:
            raise ValueError(f"p must be positive, got {self.p}")
        if not self.tol > 0 or not self.epsilon > 0:
            raise ValueError("tol and epsilon must be positive")
        if self.omega is not None and not 0 < self.omega < 2:
            raise ValueError(f"omega must lie in (0, 2), got {self.omega}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class SolveResult:
    fields: FieldSet
    beta: float
    iters: int
    residual: float
    converged: bool
    omega: float
    events: list = field(default_factory=list)
    warm_start: bool = False

    @property
    def status(self) -> str:
        return "converged" if self.converged else "max_iters"


def optimal_omega(grid: Grid) -> float:
    """SOR factor ``2 / (1 + sqrt(1 - rho_J^2))`` for the grid Laplacian."""
    inv = [1.0 / (h * h) for h in grid.h]
    rho = sum(w * math.cos(math.pi / (n + 1)) for w, n in zip(inv, grid.n)) / sum(inv)
    return 2.0 / (1.0 + math.sqrt(1.0 - rho * rho))


def competition_term(u: np.ndarray, beta: float, p: float, a: np.ndarray) -> np.ndarray:
    """``beta * sum_j a_ij u_i |u_i|^(p-1) |u_j|^(p+1)`` for ``u`` of shape ``(d, ...)``."""
    if beta == 0.0:
        return np.zeros_like(u)
    pw = np.abs(u) ** (p + 1)
    s = np.tensordot(a, pw, axes=(1, 0))
    head = u if p == 1.0 else np.sign(u) * np.abs(u) ** p
    return beta * head * s


def residual_array(grid: Grid, u: np.ndarray, beta: float, p: float, a: np.ndarray,
                   forcing: ForcingSpec) -> np.ndarray:
    """Residual at interior nodes, shape ``(d, *grid.n)``."""
    inner = (slice(None),) + (slice(1, -1),) * grid.dim
    ui = u[inner]
    lap = np.stack([laplacian_array(grid, c) for c in u])
    return -lap - forcing_values(forcing, p, ui) + competition_term(ui, beta, p, a)


def residual(f: FieldSet, cfg: SolveConfig, A: CouplingMatrix, forcing: ForcingSpec) -> FieldSet:
    """Node-wise residual as a FieldSet (zero on the boundary ring)."""
    if A.d != f.d or forcing.d != f.d:
        raise ShapeMismatch(f"field has {f.d} components; coupling has {A.d}, forcing {forcing.d}")
    out = np.zeros_like(f.values)
    out[(slice(None),) + (slice(1, -1),) * f.grid.dim] = residual_array(
        f.grid, f.values, cfg.beta, cfg.p, A.entries, forcing)
    return FieldSet(f.grid, out)


def _boundary_array(grid: Grid, boundary, d: int) -> np.ndarray:
    if isinstance(boundary, FieldSet):
        if boundary.grid != grid:
            raise ShapeMismatch("boundary FieldSet lives on a different grid")
        arr = np.array(boundary.values)
    else:
        arr = np.array(boundary, dtype=float)
    if arr.shape != (d,) + grid.shape:
        raise ShapeMismatch(f"boundary data must have shape {(d,) + grid.shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr[:, grid.boundary_mask()])):
        raise ShapeMismatch("boundary traces must be finite")
    return arr


def _transfinite(grid: Grid, u: np.ndarray) -> np.ndarray:
    """Fill interior nodes by linear (1D) or Coons (2D) interpolation of the trace."""
    out = np.array(u)
    for c in out:
        if grid.dim == 1:
            t = np.linspace(0.0, 1.0, grid.shape[0])
            c[1:-1] = ((1 - t) * c[0] + t * c[-1])[1:-1]
        else:
            s = np.linspace(0.0, 1.0, grid.shape[0])[:, None]
            t = np.linspace(0.0, 1.0, grid.shape[1])[None, :]
            left, right = c[0, :][None, :], c[-1, :][None, :]
            bottom, top = c[:, 0][:, None], c[:, -1][:, None]
            coons = ((1 - s) * left + s * right + (1 - t) * bottom + t * top
                     - ((1 - s) * (1 - t) * c[0, 0] + s * (1 - t) * c[-1, 0]
                        + (1 - s) * t * c[0, -1] + s * t * c[-1, -1]))
            c[1:-1, 1:-1] = coons[1:-1, 1:-1]
    return out


def _relax(grid, u, beta, cfg, a, forcing, omega, label):
    """Run sweeps on ``u`` in place.

    Returns ``(u_best, iters, residual, converged, omega, events)``.  Sweeps
    use ``omega`` until the residual stops improving, then switch to plain
    Gauss-Seidel (``omega = 1``), which removes the high-frequency rounding
    noise that over-relaxation leaves behind.  A second stall ends the solve.
    A residual blow-up restores the best iterate and reduces ``omega``.
    """
    impl = kernels.get_backend(cfg.backend)
    lam = np.array(forcing.lam, dtype=float)
    b = np.array(forcing.b, dtype=float)
    a = np.array(a, dtype=float)
    fam = int(forcing.family)

    def sweep(k, w):
        if grid.dim == 1:
            impl.sweep_1d(u, grid.h[0], a, beta, cfg.p, cfg.epsilon, fam, lam, b, w, k)
        else:
            impl.sweep_2d(u, grid.h[0], grid.h[1], a, beta, cfg.p, cfg.epsilon, fam, lam, b, w, k)

    def measure():
        r = residual_array(grid, u, beta, cfg.p, a, forcing)
        return float(np.max(np.abs(r))) if r.size else 0.0

    events = []
    best_res, best_u = np.inf, u.copy()
    iters = 0
    reductions = 0
    window = max(STALL_CHECKS * cfg.check_every, 2 * max(grid.n))
    ref_res, ref_iter = np.inf, 0
    polish = False
    next_check = 1
    while iters < cfg.max_iters:
        k = min(next_check - iters, cfg.max_iters - iters)
        sweep(k, 1.0 if polish else omega)
        iters += k
        next_check = 2 * iters if 2 * iters <= cfg.check_every else iters + cfg.check_every
        res = measure()
        finite = bool(np.isfinite(res) and np.all(np.isfinite(u)))
        umax = float(np.max(np.abs(u))) if finite else np.inf
        log.debug("%s sweep %d residual %.3e omega %.4f polish %s", label, iters, res, omega, polish)
        if finite and res <= cfg.tol * (1.0 + umax):
            return u, iters, res, True, omega, events
        if finite and res < best_res:
            best_res, best_u = res, u.copy()
            if res < STALL_GAIN * ref_res:
                ref_res, ref_iter = res, iters
        elif not finite or res > 1e3 * best_res:
            if reductions >= MAX_OMEGA_REDUCTIONS:
                if not finite:
                    raise DivergedToNaN(f"{label}: iterate became non-finite after {iters} sweeps",
                                        None)
                u[...] = best_u
                continue
            reductions += 1
            new = 1.0 + 0.5 * (omega - 1.0) if omega > 1.0 else 0.5 * omega
            events.append(f"{label}: residual grew to {res:.3e} at sweep {iters}; "
                          f"omega {omega:.4f} -> {new:.4f}")
            log.info(events[-1])
            omega = new
            u[...] = best_u
            continue
        if iters - ref_iter >= window:
            if polish or omega == 1.0:
                events.append(f"{label}: residual stagnated at {best_res:.3e} after {iters} sweeps")
                break
            polish = True
            ref_res, ref_iter = best_res, iters
    return best_u, iters, best_res, False, omega, events


def harmonic_extension(grid: Grid, boundary, cfg: SolveConfig, d: int) -> FieldSet:
    """Discrete harmonic extension of each component's boundary data."""
    u = _transfinite(grid, _boundary_array(grid, boundary, d))
    cfg0 = replace(cfg, beta=0.0)
    a0 = np.zeros((d, d))
    omega = cfg.omega if cfg.omega is not None else optimal_omega(grid)
    u, iters, res, ok, _, _ = _relax(grid, u, 0.0, cfg0, a0, zero_forcing(d), omega, "harmonic")
    if not ok:
        log.warning("harmonic extension stopped after %d sweeps at residual %.3e", iters, res)
    return FieldSet(grid, u)


def solve(grid: Grid, boundary, cfg: SolveConfig, dec: Decomposition, A: CouplingMatrix,
          forcing: ForcingSpec, init: Union[FieldSet, None] = None,
          raise_on_failure: bool = False) -> SolveResult:
    """Solve the discrete system for one ``beta``.

    ``boundary`` is a FieldSet (or closed-grid array) whose outer ring gives
    the Dirichlet data.  ``init=None`` starts from the harmonic extension of
    that data.  Non-convergence returns the best iterate with
    ``converged=False`` (or raises ``MaxItersExceeded`` when requested).
    """
    d = dec.d
    if A.d != d or forcing.d != d:
        raise ShapeMismatch("decomposition, coupling and forcing disagree on d")
    bnd = _boundary_array(grid, boundary, d)
    mask = grid.boundary_mask()
    warm = init is not None
    if init is None:
        start = np.array(harmonic_extension(grid, bnd, cfg, d).values)
    else:
        if init.grid != grid or init.d != d:
            raise ShapeMismatch("initial guess does not match grid / component count")
        start = np.array(init.values)
    start[:, mask] = bnd[:, mask]
    if cfg.jitter > 0:
        rng = np.random.default_rng(cfg.seed)
        inner = (slice(None),) + (slice(1, -1),) * grid.dim
        start[inner] += cfg.jitter * rng.standard_normal(start[inner].shape)
    u = np.ascontiguousarray(start)
    omega = cfg.omega if cfg.omega is not None else optimal_omega(grid)
    label = f"beta={cfg.beta:g}"
    u, iters, res, ok, omega, events = _relax(grid, u, cfg.beta, cfg, A.entries, forcing,
                                              omega, label)
    result = SolveResult(FieldSet(grid, u), cfg.beta, iters, res, ok, omega, events, warm)
    if not ok:
        msg = f"{label}: not converged after {iters} sweeps (residual {res:.3e})"
        result.events.append(msg)
        log.warning(msg)
        if raise_on_failure:
            raise MaxItersExceeded(msg, result)
    return result


@dataclass
class SweepEntry:
    beta: float
    result: Optional[SolveResult]
    error: Optional[str] = None

    @property
    def converged(self) -> bool:
        return self.result is not None and self.result.converged


def beta_sweep(grid: Grid, boundary, cfg: SolveConfig, dec: Decomposition, A: CouplingMatrix,
               forcing: ForcingSpec, schedule, init: Union[FieldSet, None] = None,
               warm_start: bool = True) -> list[SweepEntry]:
    """Solve along an ascending ``beta`` schedule, warm-starting each solve.

    After a failed solve the next entry restarts from the default
    initialization; the failure is recorded in its entry.
    """
    schedule = [float(b) for b in schedule]
    if len(schedule) < 2:
        raise ScheduleTooShort(f"a sweep needs at least 2 beta values, got {len(schedule)}")
    if any(b1 <= b0 for b0, b1 in zip(schedule, schedule[1:])):
        raise ScheduleNotAscending(f"schedule not ascending: {schedule}")
    out = []
    prev = init
    for beta in schedule:
        c = replace(cfg, beta=beta)
        try:
            res = solve(grid, boundary, c, dec, A, forcing, init=prev if warm_start else init)
        except SolveError as exc:
            out.append(SweepEntry(beta, exc.result, f"{type(exc).__name__}: {exc}"))
            prev = None
            continue
        out.append(SweepEntry(beta, res, None if res.converged else res.events[-1]))
        prev = res.fields if res.converged else None
    return out
