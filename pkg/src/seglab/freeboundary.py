"""Nodal sets, blow-ups, frequency limits and classification of free-boundary points.

A point of the zero set is graded by the limit of its Almgren frequency:
values near 1 mark regular interface points separating two groups, values
of 3/2 and above mark singular points.  The classifier extrapolates
``N(x0, r)`` linearly to ``r = 0`` from a handful of small radii.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .diagnostics import LIMIT, AlmgrenSample, almgren
from .errors import (
    BallOutsideDomain,
    DimensionMismatch,
    NoRaysFound,
    NotOnNodalSet,
    RadiusBelowResolution,
    ThresholdOutOfRange,
    VanishingSideGradient,
    WrongClass,
    ZeroH,
)
from .forcing import ForcingSpec
from .grid import FieldSet, Grid, check_ball, gradient_array, interpolate, make_grid, sphere_points
from .grouping import Decomposition

FREQUENCY_RADII = (3, 4, 6, 8, 12, 16)   # in units of h
FIT_POINTS = 3
GAP_THRESHOLD = 1.25
DEAD_BAND = 0.05
PRESENCE_RADIUS = 8                      # in units of h
PRESENCE_FRACTION = 0.1
MIN_SIDE_GRADIENT = 1e-8
REFERENCE_N = 127


class Variant(enum.Enum):
    FULL = "full"
    GROUPWISE = "groupwise"


class PointClass(enum.Enum):
    REGULAR = "Regular"
    SINGULAR = "Singular"
    INDETERMINATE = "Indeterminate"


def group_norms(f: FieldSet, dec: Decomposition) -> np.ndarray:
    """``|u^h| = sqrt(sum_{j in I_h} u_j^2)`` for every group, shape ``(m, *grid.shape)``."""
    return np.stack([np.sqrt(np.sum(f.values[s] ** 2, axis=0)) for s in dec.group_slices()])


# -- nodal sets --------------------------------------------------------------

@dataclass(frozen=True)
class NodalSet:
    points: np.ndarray      # (k, dim) coordinates
    indices: np.ndarray     # (k, dim) closed-grid indices
    variant: Variant
    delta: float
    degenerate: bool = False

    def __len__(self):
        return len(self.points)


def nodal_mask(f: FieldSet, dec: Decomposition, delta: float, variant=Variant.FULL) -> np.ndarray:
    if not 0.0 < delta < 0.5:
        raise ThresholdOutOfRange(f"delta must lie in (0, 0.5), got {delta}")
    variant = Variant(variant)
    scale = f.sup_norm()
    if variant is Variant.FULL:
        return np.max(np.abs(f.values), axis=0) <= delta * scale
    structure = ndimage.generate_binary_structure(f.grid.dim, f.grid.dim)
    interior = np.zeros(f.grid.shape, dtype=bool)
    for s in dec.group_slices():
        pos = np.sum(f.values[s] ** 2, axis=0) > (delta * scale) ** 2
        interior |= ndimage.binary_erosion(pos, structure=structure, border_value=1)
    return ~interior


def extract_nodal_set(f: FieldSet, dec: Decomposition, delta: float = 0.02,
                      variant=Variant.FULL) -> NodalSet:
    """Grid nodes of the zero set ``{u = 0}`` (``full``) or of the group-support surrogate.

    ``full`` keeps nodes with ``max_i |u_i| <= delta sup|u|``.  ``groupwise``
    keeps nodes not in the 8-neighbor interior of any region where a group
    sum ``sum_{j in I_h} u_j^2`` exceeds ``(delta sup|u|)^2``.
    """
    mask = nodal_mask(f, dec, delta, variant)
    idx = np.argwhere(mask)
    axes = f.grid.axes()
    pts = np.stack([axes[a][idx[:, a]] for a in range(f.grid.dim)], axis=1) if len(idx) else \
        np.zeros((0, f.grid.dim))
    return NodalSet(pts, idx, Variant(variant), float(delta), degenerate=f.sup_norm() == 0.0)


def _near_nodal(grid: Grid, nodal: NodalSet, x0) -> bool:
    if not len(nodal):
        return False
    h = np.asarray(grid.h)
    return bool(np.any(np.all(np.abs(nodal.points - x0[None, :]) <= h * (1 + 1e-9), axis=1)))


# -- blow-up -----------------------------------------------------------------

def reference_grid(dim: int, n: int = REFERENCE_N) -> Grid:
    return make_grid(dim, [(-2.0, 2.0)] * dim, [n] * dim)


def boundary_mass(f: FieldSet, x0, r: float) -> float:
    """``H(x0, r)`` alone."""
    pts, wts, _ = sphere_points(f.grid, x0, r)
    return float(sum(np.dot(wts, interpolate(f.grid, ui, pts) ** 2) for ui in f.values)
                 / r ** (f.grid.dim - 1))


def blowup(f: FieldSet, x0, t: float, n_ref: int = REFERENCE_N, zero_tol: float = 1e-14) -> FieldSet:
    """``v_i(y) = u_i(x0 + t y) / sqrt(H(x0, t))`` on the reference grid ``[-2, 2]^dim``."""
    grid = f.grid
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    for xi, (lo, hi) in zip(x0, grid.extent):
        if xi - 2 * t < lo - 1e-12 or xi + 2 * t > hi + 1e-12:
            raise BallOutsideDomain(f"blow-up window of half-width {2 * t:g} leaves the domain")
    H = boundary_mass(f, x0, t)
    if H <= zero_tol * max(f.sup_norm() ** 2, 1e-300):
        raise ZeroH(f"H({x0}, {t:g}) = {H:g} vanishes")
    ref = reference_grid(grid.dim, n_ref)
    Y = ref.mesh()
    pts = np.stack([x0[a] + t * Y[a].ravel() for a in range(grid.dim)], axis=1)
    vals = np.stack([interpolate(grid, ui, pts).reshape(ref.shape) for ui in f.values])
    return FieldSet(ref, vals / math.sqrt(H))


# -- frequency limit ---------------------------------------------------------

@dataclass(frozen=True)
class FrequencyEstimate:
    N_hat: float
    samples: list[AlmgrenSample]
    fitted: int


def estimate_frequency_limit(f: FieldSet, x0, mode: str = LIMIT, forcing: ForcingSpec | None = None,
                             p: float = 1.0) -> FrequencyEstimate:
    """Extrapolate ``N(x0, r)`` to ``r = 0``.

    Samples radii ``{3, 4, 6, 8, 12, 16} h`` that fit in the domain and fits
    ``N = N0 + c r`` through the three smallest with defined ``N``.
    """
    grid = f.grid
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    h = grid.hmin
    for xi, (lo, hi), hx in zip(x0, grid.extent, grid.h):
        if xi - lo < 10 * hx * (1 - 1e-9) or hi - xi < 10 * hx * (1 - 1e-9):
            raise RadiusBelowResolution(f"point {x0} is closer than 10h to the boundary")
    samples = []
    for k in FREQUENCY_RADII:
        try:
            check_ball(grid, x0, k * h)
        except BallOutsideDomain:
            continue
        samples.append(almgren(f, forcing, x0, k * h, mode, p))
    defined = [s for s in samples if s.defined]
    if len(defined) < 2:
        raise RadiusBelowResolution(f"fewer than two valid frequency radii at {x0}")
    fit = defined[:FIT_POINTS]
    r = np.array([s.r for s in fit])
    N = np.array([s.N for s in fit])
    slope, intercept = np.polyfit(r, N, 1)
    return FrequencyEstimate(float(intercept), samples, len(fit))


# -- classification ----------------------------------------------------------

@dataclass
class BoundaryPointClass:
    x0: tuple[float, ...]
    N_hat: float
    cls: PointClass
    side_gradients: tuple[float, float] | None = None
    normal: tuple[float, ...] | None = None
    sides: tuple[int, int] | None = None   # dominant groups at +normal / -normal
    tie: bool = False
    note: str = ""
    samples: list = field(default_factory=list)

    def row(self) -> dict:
        x = list(self.x0) + [float("nan")] * (2 - len(self.x0))
        g = self.side_gradients or (float("nan"), float("nan"))
        nu = list(self.normal or ()) + [float("nan")] * (2 - len(self.normal or ()))
        return {"x": x[0], "y": x[1], "N_hat": self.N_hat, "class": self.cls.value,
                "Gplus": g[0], "Gminus": g[1], "nu_x": nu[0], "nu_y": nu[1]}


def _dominant(grid, sums, point):
    vals = np.array([float(interpolate(grid, s, point[None])[0]) for s in sums])
    top = vals.max()
    best = int(np.argmax(vals))
    tie = top > 0 and np.count_nonzero(vals >= top * (1 - 1e-12)) > 1
    return best, tie, vals


def _present_groups(grid, norms, x0, radius):
    X = grid.mesh()
    d2 = sum((Xa - c) ** 2 for Xa, c in zip(X, x0))
    ball = d2 <= radius * radius
    local = np.array([float(n[ball].max()) if np.any(ball) else 0.0 for n in norms])
    top = local.max()
    if top <= 0:
        return []
    return [h for h in range(len(norms)) if local[h] > PRESENCE_FRACTION * top]


def _normal(grid, norms, a, b, x0, nodal):
    diff = norms[a] - norms[b]
    g = np.array([float(interpolate(grid, gk, x0[None])[0]) for gk in gradient_array(grid, diff)])
    size = float(np.linalg.norm(g))
    if size > MIN_SIDE_GRADIENT:
        return g / size
    # principal direction of nearby nodal points; the normal is the minor axis
    h = grid.hmin
    near = nodal.points[np.linalg.norm(nodal.points - x0, axis=1) <= PRESENCE_RADIUS * h]
    if grid.dim == 1 or len(near) < 2:
        return np.eye(grid.dim)[0]
    cov = np.cov((near - near.mean(axis=0)).T)
    w, v = np.linalg.eigh(cov)
    return v[:, 0]


def classify_point(f: FieldSet, dec: Decomposition, x0, gap_threshold: float = GAP_THRESHOLD,
                   delta: float = 0.02, variant=Variant.FULL, nodal: NodalSet | None = None,
                   mode: str = LIMIT, forcing: ForcingSpec | None = None, p: float = 1.0,
                   probe: float | None = None) -> BoundaryPointClass:
    """Grade a zero-set point by its extrapolated frequency.

    ``Regular`` below ``gap_threshold``, ``Singular`` above, ``Indeterminate``
    within ``DEAD_BAND`` of it.  A regular-range point also needs exactly two
    groups present in ``B_{8h}(x0)`` and dominant on opposite sides of the
    normal; otherwise it is reported ``Indeterminate``.
    """
    grid = f.grid
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    nodal = nodal if nodal is not None else extract_nodal_set(f, dec, delta, variant)
    if not _near_nodal(grid, nodal, x0):
        raise NotOnNodalSet(f"point {tuple(x0)} is not on the extracted nodal set")
    est = estimate_frequency_limit(f, x0, mode, forcing, p)
    n_hat = est.N_hat
    out = BoundaryPointClass(tuple(float(v) for v in x0), n_hat, PointClass.INDETERMINATE,
                             samples=est.samples)
    if abs(n_hat - gap_threshold) < DEAD_BAND:
        out.note = "frequency inside the dead band"
        return out
    if n_hat > gap_threshold:
        out.cls = PointClass.SINGULAR
        return out
    norms = group_norms(f, dec)
    present = _present_groups(grid, norms, x0, PRESENCE_RADIUS * grid.hmin)
    if len(present) != 2:
        out.note = f"{len(present)} group(s) present near the point"
        return out
    a, b = present
    nu = _normal(grid, norms, a, b, x0, nodal)
    s = probe if probe is not None else 4 * grid.hmin
    sums = norms ** 2
    plus, tie_p, _ = _dominant(grid, sums, x0 + s * nu)
    minus, tie_m, _ = _dominant(grid, sums, x0 - s * nu)
    out.normal = tuple(float(v) for v in nu)
    out.tie = bool(tie_p or tie_m)
    if plus == minus:
        out.note = "same group dominant on both sides"
        return out
    out.cls = PointClass.REGULAR
    out.sides = (plus + 1, minus + 1)
    out.side_gradients = _side_gradients(f, dec, x0, nu, s, plus, minus)
    return out


def _group_grad_sq(f, dec, h, point):
    grid = f.grid
    total = 0.0
    for i in dec.group(h + 1):
        g = gradient_array(grid, f.component(i))
        total += sum(float(interpolate(grid, gk, point[None])[0]) ** 2 for gk in g)
    return total


def _side_gradients(f, dec, x0, nu, s, plus, minus):
    return (_group_grad_sq(f, dec, plus, x0 + s * nu), _group_grad_sq(f, dec, minus, x0 - s * nu))


def reflection_residual(f: FieldSet, dec: Decomposition, x0, s: float | None = None,
                        point: BoundaryPointClass | None = None, **classify_kw) -> float:
    """``|G+ - G-| / max(G+, G-)`` of the group gradient sums probed at ``x0 +- s nu``."""
    grid = f.grid
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    point = point if point is not None else classify_point(f, dec, x0, **classify_kw)
    if point.cls is not PointClass.REGULAR:
        raise WrongClass(f"reflection law applies to Regular points, got {point.cls.value}")
    h = grid.hmin
    s = 4 * h if s is None else float(s)
    if not 2 * h * (1 - 1e-9) <= s <= 8 * h * (1 + 1e-9):
        raise ValueError(f"probe distance must lie in [2h, 8h], got {s:g}")
    nu = np.asarray(point.normal)
    sums = group_norms(f, dec) ** 2
    plus, _, _ = _dominant(grid, sums, x0 + s * nu)
    minus, _, _ = _dominant(grid, sums, x0 - s * nu)
    gp, gm = _side_gradients(f, dec, x0, nu, s, plus, minus)
    if min(gp, gm) < MIN_SIDE_GRADIENT:
        raise VanishingSideGradient(f"side gradient sums {gp:.3g}, {gm:.3g} at a Regular point")
    return abs(gp - gm) / max(gp, gm)


def gradient_vanishing_check(f: FieldSet, x0, radii, point: BoundaryPointClass) -> list[float]:
    """``max_{B_r(x0)} sum_i |∇u_i|^2`` for each radius, at a Singular point."""
    if point.cls is not PointClass.SINGULAR:
        raise WrongClass(f"gradient vanishing applies to Singular points, got {point.cls.value}")
    grid = f.grid
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    gsq = sum(np.sum(gradient_array(grid, ui) ** 2, axis=0) for ui in f.values)
    X = grid.mesh()
    d2 = sum((Xa - c) ** 2 for Xa, c in zip(X, x0))
    out = []
    for r in radii:
        check_ball(grid, x0, r, margin=0.0)
        out.append(float(gsq[d2 <= r * r].max()))
    return out


@dataclass(frozen=True)
class AngleCheck:
    rays: list[float]
    deviation: float
    radius: float


def equal_angles_check(f: FieldSet, dec: Decomposition, x0, point: BoundaryPointClass | None = None,
                       r: float | None = None, rel_threshold: float = 0.05,
                       samples: int = 2048) -> AngleCheck:
    """Rays of the zero set on ``∂B_r(x0)`` and their deviation from equal spacing.

    A ray is an arc on which every group sum falls below ``rel_threshold``
    times the largest group sum on the circle; its angle is the arc midpoint.
    """
    grid = f.grid
    if grid.dim != 2:
        raise DimensionMismatch("equal-angle check needs a 2D field")
    if point is not None and point.cls is not PointClass.SINGULAR:
        raise WrongClass(f"equal-angle check applies to Singular points, got {point.cls.value}")
    x0 = np.asarray(x0, dtype=float)
    r = 8 * grid.hmin if r is None else float(r)
    check_ball(grid, x0, r)
    theta = 2 * math.pi * np.arange(samples) / samples
    pts = x0[None, :] + r * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    sums = np.stack([interpolate(grid, s, pts) for s in group_norms(f, dec) ** 2])
    top = sums.max()
    if top <= 0:
        raise NoRaysFound("field vanishes on the probe circle")
    low = np.all(sums < rel_threshold * top, axis=0)
    if not low.any() or low.all():
        raise NoRaysFound("no zero-set arcs on the probe circle")
    start = int(np.argmin(low))          # first sample outside every arc
    low = np.roll(low, -start)
    rays = []
    k = 0
    while k < samples:
        if low[k]:
            j = k
            while j < samples and low[j]:
                j += 1
            mid = 0.5 * (k + j - 1) + start
            rays.append(float(np.mod(2 * math.pi * mid / samples, 2 * math.pi)))
            k = j
        else:
            k += 1
    rays.sort()
    gaps = np.diff(rays + [rays[0] + 2 * math.pi])
    dev = float(np.max(np.abs(gaps - 2 * math.pi / len(rays))))
    return AngleCheck(rays, dev, r)
