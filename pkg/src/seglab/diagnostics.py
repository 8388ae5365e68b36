"""Measured functionals of discrete solutions.

Hölder seminorms, interaction energies, segregation, the Almgren
quantities ``H``, ``E``, ``N``, Pohozaev residuals, Morrey quotients and a
discrete check of the sign of ``-Δu_i - f_i`` near the common zero set.

Ball integrals of gradients use the cell-centered gradient of the bilinear
interpolant; sphere integrals of gradients interpolate the nodal
(centered-difference) gradient.  ``N`` is ``None`` when ``H`` vanishes.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .errors import AlphaOutOfRange, NotCrossPair, ThresholdOutOfRange, WindowOutsideDomain
from .forcing import ForcingSpec, forcing_values, monotonicity_constant, zero_forcing
from .grid import (
    FieldSet,
    Grid,
    ball_moments,
    ball_weights,
    cell_centers,
    cell_gradient,
    gradient_array,
    interpolant_energy,
    interpolate,
    laplacian_array,
    sphere_points,
    window_cell_weights,
    window_slices,
)
from .grouping import CouplingMatrix, Decomposition

LIMIT = "limit"
WITH_FORCING = "with_forcing"
MIN_WINDOW_NODES = 16


# -- Hölder seminorm ---------------------------------------------------------

def holder_seminorm(f: FieldSet, i: int, alpha: float, window=None) -> float:
    """Discrete ``C^{0,alpha}`` seminorm of component ``i`` over a window.

    In 1D every node pair in the window is enumerated.  In 2D pairs are
    sampled at dyadic separations ``h, 2h, 4h, ...`` along the two axes and
    the two diagonals.
    """
    if not 0.0 < alpha < 1.0:
        raise AlphaOutOfRange(f"alpha must lie in (0, 1), got {alpha}")
    grid = f.grid
    sl = window_slices(grid, window)
    u = f.component(i)[sl]
    if min(u.shape) < MIN_WINDOW_NODES:
        raise WindowOutsideDomain(f"window holds {u.shape} nodes, need {MIN_WINDOW_NODES} per axis")
    coords = [ax[s] for ax, s in zip(grid.axes(), sl)]
    if grid.dim == 1:
        return _holder_1d(u, coords[0], alpha)
    return _holder_2d(u, coords, alpha)


def _holder_1d(u, x, alpha, chunk=512):
    best = 0.0
    for k in range(0, len(u) - 1, chunk):
        ua = u[k:k + chunk, None]
        xa = x[k:k + chunk, None]
        dist = np.abs(x[None, :] - xa)
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.abs(u[None, :] - ua) / dist ** alpha
        q[dist == 0] = 0.0
        best = max(best, float(np.max(q)))
    return best


def _holder_2d(u, coords, alpha):
    x, y = coords
    hx, hy = x[1] - x[0], y[1] - y[0]
    nx, ny = u.shape
    best = 0.0
    for dx, dy in ((1, 0), (0, 1), (1, 1), (1, -1)):
        s = 1
        while s * dx < nx and s * abs(dy) < ny:
            ox, oy = s * dx, s * dy
            ya, yb = (slice(0, ny - oy), slice(oy, ny)) if oy >= 0 else (slice(-oy, ny), slice(0, ny + oy))
            a = u[:nx - ox, ya]
            b = u[ox:, yb]
            dist = math.hypot(ox * hx, oy * hy)
            if a.size:
                best = max(best, float(np.max(np.abs(a - b))) / dist ** alpha)
            s *= 2
    return best


# -- interaction energy and segregation --------------------------------------

def interaction_energy(f: FieldSet, beta: float, p: float, A: CouplingMatrix, i: int, j: int,
                       window=None, dec: Decomposition | None = None) -> float:
    """``beta a_ij ∫_window |u_i|^(p+1) |u_j|^(p+1)`` by the midpoint rule.

    ``(i, j)`` must be a cross-group pair: ``a_ij > 0`` (and, when ``dec``
    is given, the pair must also be classified as cross-group).
    """
    if dec is not None and (i, j) not in dec.k2:
        raise NotCrossPair(f"({i}, {j}) is not a cross-group pair")
    if not A[i, j] > 0:
        raise NotCrossPair(f"a_{i}{j} = 0, ({i}, {j}) is not a cross-group pair")
    grid = f.grid
    if window is None:
        window = list(grid.extent)
    integrand = np.abs(f.component(i)) ** (p + 1) * np.abs(f.component(j)) ** (p + 1)
    sl, w = window_cell_weights(grid, window)
    return float(beta * A[i, j] * np.sum(w * cell_centers(grid, integrand)[sl]))


def segregation_sup(f: FieldSet, dec: Decomposition) -> float:
    """``max_{(i,j) in K2} max_x |u_i u_j|`` (0 when there is a single group)."""
    best = 0.0
    for i, j in dec.cross_pairs():
        best = max(best, float(np.max(np.abs(f.component(i) * f.component(j)))))
    return best


# -- Almgren quantities ------------------------------------------------------

@dataclass(frozen=True)
class AlmgrenSample:
    x0: tuple[float, ...]
    r: float
    H: float
    E: float
    N: float | None

    @property
    def defined(self) -> bool:
        return self.N is not None


def _corners(grid: Grid, a: np.ndarray) -> list[np.ndarray]:
    if grid.dim == 1:
        return [a[:-1], a[1:]]
    return [a[:-1, :-1], a[1:, :-1], a[:-1, 1:], a[1:, 1:]]


def _two_sided_cells(grid: Grid, u: np.ndarray):
    """Cells crossed by an interface between exactly two segregated components.

    Yields ``(mask, w)``: cells where components ``a`` and ``b`` are the only
    ones nonzero at the corners, no corner carries both, and neither changes
    sign; ``w = |u_a| - |u_b|`` is then the continuation of the
    interface-free profile, whose bilinear energy matches the kinked one.
    """
    d = len(u)
    active = [np.logical_or.reduce([c != 0 for c in _corners(grid, ui)]) for ui in u]
    count = np.sum(active, axis=0)
    both = None
    for a in range(d):
        for b in range(a + 1, d):
            clash = np.logical_or.reduce([(ca != 0) & (cb != 0) for ca, cb in
                                         zip(_corners(grid, u[a]), _corners(grid, u[b]))])
            both = clash if both is None else both | clash
    mixed = [np.logical_or.reduce([c > 0 for c in _corners(grid, ui)])
             & np.logical_or.reduce([c < 0 for c in _corners(grid, ui)]) for ui in u]
    for a in range(d):
        for b in range(a + 1, d):
            mask = active[a] & active[b] & (count == 2) & ~both & ~mixed[a] & ~mixed[b]
            if np.any(mask):
                yield mask, np.abs(u[a]) - np.abs(u[b])


def _dirichlet(grid: Grid, u: np.ndarray, x0, r: float) -> float:
    """``Σ_i ∫_{B_r} |∇u_i|^2`` for the bilinear interpolants.

    On cells cut by a two-component interface the interpolant of each
    component smears the kink; there the energy is taken from the
    interpolant of ``|u_a| - |u_b|``, which has the same gradient magnitude
    on either side of the interface.
    """
    sl, m = ball_moments(grid, x0, r)
    cells = [interpolant_energy(grid, ui, sl, m) for ui in u]
    total = np.sum(cells, axis=0)
    if len(u) >= 2:
        for mask, w in _two_sided_cells(grid, u):
            msk = mask[sl]
            if np.any(msk):
                total = np.where(msk, interpolant_energy(grid, w, sl, m), total)
    return float(np.sum(total))


def _forcing_work(grid: Grid, u: np.ndarray, forcing: ForcingSpec, p: float, x0, r: float) -> float:
    sl, w = ball_weights(grid, x0, r)
    uc = np.stack([cell_centers(grid, ui) for ui in u])
    fu = np.sum(forcing_values(forcing, p, uc) * uc, axis=0)
    return float(np.sum(w * fu[sl]))


def almgren(f: FieldSet, forcing: ForcingSpec | None, x0, r: float, mode: str = LIMIT,
            p: float = 1.0, zero_tol: float = 0.0) -> AlmgrenSample:
    """``H``, ``E`` and ``N = E/H`` at ``(x0, r)``.

    ``mode`` is ``"limit"`` (Dirichlet energy only) or ``"with_forcing"``
    (subtracts ``∫ f_i(u) u_i``).  ``N`` is ``None`` when ``H <= zero_tol``.
    """
    grid = f.grid
    u = f.values
    dim = grid.dim
    pts, wts, _ = sphere_points(grid, x0, r)
    mass = sum(np.dot(wts, interpolate(grid, ui, pts) ** 2) for ui in u)
    H = float(mass) / r ** (dim - 1)
    e = _dirichlet(grid, u, x0, r)
    if mode == WITH_FORCING:
        forcing = forcing or zero_forcing(f.d)
        e -= _forcing_work(grid, u, forcing, p, x0, r)
    elif mode != LIMIT:
        raise ValueError(f"unknown Almgren mode {mode!r}")
    E = e / r ** (dim - 2)
    N = E / H if H > zero_tol else None
    return AlmgrenSample(tuple(float(v) for v in np.atleast_1d(x0)), float(r), H, E, N)


@dataclass(frozen=True)
class FrequencyCurve:
    samples: list[AlmgrenSample]
    C: float
    defect: float

    def values(self) -> np.ndarray:
        return np.array([s.N if s.defined else np.nan for s in self.samples])


def monotonicity_defect(samples, C: float) -> float:
    """``max (e^{C r1^2}(N1+1) - e^{C r2^2}(N2+1))_+`` over consecutive defined samples."""
    vals = [(s.r, s.N) for s in samples if s.defined]
    worst = 0.0
    for (r1, n1), (r2, n2) in zip(vals, vals[1:]):
        worst = max(worst, math.exp(C * r1 * r1) * (n1 + 1) - math.exp(C * r2 * r2) * (n2 + 1))
    return worst


def frequency_curve(f: FieldSet, x0, radii, mode: str = LIMIT, forcing: ForcingSpec | None = None,
                    p: float = 1.0, C: float | None = None) -> FrequencyCurve:
    """Almgren samples over ascending ``radii`` plus the monotonicity defect.

    ``C`` defaults to the estimate derived from the forcing bound.
    """
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly ascending")
    samples = [almgren(f, forcing, x0, r, mode, p) for r in radii]
    if C is None:
        C = monotonicity_constant(forcing, f.grid.dim) if forcing is not None else 0.0
    return FrequencyCurve(samples, float(C), monotonicity_defect(samples, C))


# -- Pohozaev and Morrey -----------------------------------------------------

def pohozaev_terms(f: FieldSet, forcing: ForcingSpec | None, x0, r: float, p: float = 1.0,
                   beta: float = 0.0, A: CouplingMatrix | None = None) -> dict:
    """The individual terms of the Pohozaev balance at ``(x0, r)``.

    With ``beta > 0`` the interaction terms satisfied by solutions at finite
    competition are included; the balance is ``lhs = boundary + work +
    interaction``.
    """
    grid = f.grid
    u = f.values
    dim = grid.dim
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    sl, w = ball_weights(grid, x0, r)
    lhs = (2 - dim) * _dirichlet(grid, u, x0, r)

    pts, wts, normals = sphere_points(grid, x0, r)
    flux = 0.0
    for ui in u:
        g = np.stack([interpolate(grid, gk, pts) for gk in gradient_array(grid, ui)], axis=1)
        dnu = np.sum(g * normals, axis=1)
        flux += np.dot(wts, 2 * dnu ** 2 - np.sum(g ** 2, axis=1))
    boundary = r * float(flux)

    work = 0.0
    if forcing is not None:
        uc = np.stack([cell_centers(grid, ui) for ui in u])
        fc = forcing_values(forcing, p, uc)
        centers = np.meshgrid(*[0.5 * (ax[1:] + ax[:-1]) - c for ax, c in zip(grid.axes(), x0)],
                              indexing="ij")
        radial = np.zeros(fc.shape[1:])
        for k in range(f.d):
            gk = cell_gradient(grid, u[k])
            radial += fc[k] * sum(gk[a] * centers[a] for a in range(dim))
        work = 2.0 * float(np.sum(w * radial[sl]))

    interaction = 0.0
    if beta > 0 and A is not None:
        a = A.entries
        pw = np.abs(u) ** (p + 1)
        dens = np.einsum("ij,i...,j...->...", a, pw, pw)  # sum over ordered pairs i != j
        bulk = float(np.sum(w * cell_centers(grid, dens)[sl]))
        surf = float(np.dot(wts, interpolate(grid, dens, pts)))
        interaction = beta / (p + 1) * (dim * bulk - r * surf)
    return {"lhs": lhs, "boundary": boundary, "work": work, "interaction": interaction}


def pohozaev_residual(f: FieldSet, forcing: ForcingSpec | None, x0, r: float, p: float = 1.0,
                      beta: float = 0.0, A: CouplingMatrix | None = None) -> float:
    """``|LHS - RHS|`` of the Pohozaev balance on ``B_r(x0)``.

    By default this is the identity of the segregated limit.  Passing the
    competition strength ``beta`` and coupling ``A`` adds the interaction
    terms that finite-``beta`` solutions carry.
    """
    t = pohozaev_terms(f, forcing, x0, r, p, beta, A)
    return abs(t["lhs"] - t["boundary"] - t["work"] - t["interaction"])


def morrey_quotient(f: FieldSet, x0, r: float) -> float:
    """``r^{-N} Σ_i ∫_{B_r} |∇u_i|^2``."""
    return _dirichlet(f.grid, f.values, x0, r) / r ** f.grid.dim


# -- sign of the Laplacian near the zero set ---------------------------------

@dataclass(frozen=True)
class MeasureSignResult:
    violations: int
    worst: float
    checked: int
    tol: float


def measure_sign_check(f: FieldSet, forcing: ForcingSpec | None, dec: Decomposition,
                       delta: float, p: float = 1.0, tol: float | None = None) -> MeasureSignResult:
    """Count nodes near the zero set where ``-Δ|u_i| - sign(u_i) f_i(u) > tol``.

    Component ``i`` is checked at interior nodes within one node of the
    region where its group sum ``Σ_{j in I_h} |u_j|`` is at most
    ``delta * sup|u|``.  ``tol`` defaults to ``10 h``.
    """
    if not 0.0 < delta < 0.5:
        raise ThresholdOutOfRange(f"delta must lie in (0, 0.5), got {delta}")
    grid = f.grid
    if tol is None:
        tol = 10.0 * grid.hmin
    u = f.values
    scale = f.sup_norm()
    fv = forcing_values(forcing, p, u) if forcing is not None else np.zeros_like(u)
    inner = (slice(1, -1),) * grid.dim
    structure = ndimage.generate_binary_structure(grid.dim, grid.dim)
    violations = 0
    checked = 0
    worst = -math.inf
    for h, members in enumerate(dec.groups, start=1):
        idx = [i - 1 for i in members]
        low = np.sum(np.abs(u[idx]), axis=0) <= delta * scale
        near = ndimage.binary_dilation(low, structure=structure)[inner]
        for i in idx:
            q = -laplacian_array(grid, np.abs(u[i])) - np.sign(u[i][inner]) * fv[i][inner]
            vals = q[near]
            checked += vals.size
            if vals.size:
                worst = max(worst, float(vals.max()))
                violations += int(np.count_nonzero(vals > tol))
    return MeasureSignResult(violations, worst if checked else 0.0, checked, float(tol))


# -- report container --------------------------------------------------------

@dataclass
class DiagnosticsReport:
    """Every functional computed for one field, tagged with ``(beta, config_hash)``."""

    beta: float
    config_hash: str
    holder: dict = field(default_factory=dict)          # "i:alpha" -> value
    interaction: dict = field(default_factory=dict)     # "i,j" -> value
    seg_sup: float | None = None
    frequency: list = field(default_factory=list)       # dicts with x0, C, defect, samples
    pohozaev: list = field(default_factory=list)        # dicts with x0, r, residual
    morrey: list = field(default_factory=list)          # dicts with x0, r, value
    measure_sign: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def sample_dict(s: AlmgrenSample) -> dict:
    return {"x0": list(s.x0), "r": s.r, "H": s.H, "E": s.E,
            "N": s.N if s.defined else "undefined"}
