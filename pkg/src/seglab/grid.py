"""Rectangular grids, nodal fields, finite differences and local quadrature.

Fields are stored on the *closed* grid: every array carries the ``n + 2``
nodes per axis including the Dirichlet trace, with axis order ``(x, y)``.
Interior nodes are ``[1:-1]`` along every axis.

Quadrature over balls uses the primal cells between nodes.  Each cell
contributes ``h**dim * coverage * value(center)``, where ``value(center)``
is the bilinear (linear in 1D) interpolant at the cell center and
``coverage`` is the fraction of the cell inside the ball (exact in 1D,
sub-sampled in 2D).  Spheres are sampled at equally spaced angles with
bilinear interpolation and summed with the trapezoid rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BallOutsideDomain,
    DumpFormatError,
    GridError,
    IndexOutOfRange,
    RadiusBelowResolution,
    ShapeMismatch,
    WindowOutsideDomain,
)

MIN_NODES = 8
BALL_MARGIN = 2.0      # in units of h
MIN_SPHERE_RADIUS = 3.0  # in units of h
_COVERAGE_SAMPLES = 16
_SLOP = 1e-9


@dataclass(frozen=True)
class Grid:
    dim: int
    extent: tuple[tuple[float, float], ...]
    n: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.extent) != self.dim or len(self.n) != self.dim:
            raise GridError("extent and n must have one entry per axis")
        for (lo, hi), n in zip(self.extent, self.n):
            if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
                raise GridError(f"degenerate extent [{lo}, {hi}]")
            if n < MIN_NODES:
                raise GridError(f"need at least {MIN_NODES} interior nodes per axis, got {n}")

    @property
    def h(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (n + 1) for (lo, hi), n in zip(self.extent, self.n))

    @property
    def hmin(self) -> float:
        return min(self.h)

    @property
    def shape(self) -> tuple[int, ...]:
        """Shape of closed-grid arrays (boundary included)."""
        return tuple(n + 2 for n in self.n)

    def axes(self) -> list[np.ndarray]:
        """Node coordinates per axis, boundary nodes included."""
        return [lo + (hi - lo) * np.arange(n + 2) / (n + 1)
                for (lo, hi), n in zip(self.extent, self.n)]

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return all(lo - _SLOP <= xi <= hi + _SLOP for xi, (lo, hi) in zip(x, self.extent))

    def boundary_mask(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        mask[(slice(1, -1),) * self.dim] = False
        return mask

    def describe(self) -> str:
        n = ",".join(str(v) for v in self.n)
        ext = ",".join(f"{lo!r}:{hi!r}" for lo, hi in self.extent)
        return f"dim={self.dim} n={n} extent={ext}"


def make_grid(dim: int, extent, n) -> Grid:
    if np.isscalar(n):
        n = (int(n),) * dim
    extent = tuple((float(lo), float(hi)) for lo, hi in extent)
    return Grid(int(dim), extent, tuple(int(v) for v in n))


class FieldSet:
    """``d`` scalar fields on the closed grid.

    ``values`` has shape ``(d, *grid.shape)``; the outer ring holds the
    Dirichlet trace.  Instances are treated as immutable values: every
    operation returns new arrays.
    """

    def __init__(self, grid: Grid, values):
        values = np.array(values, dtype=float)
        if values.ndim == grid.dim:
            values = values[None]
        if values.shape[1:] != grid.shape:
            raise ShapeMismatch(f"values shape {values.shape[1:]} does not match grid {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ShapeMismatch("field values must be finite")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def interior(self) -> np.ndarray:
        return self.values[(slice(None),) + (slice(1, -1),) * self.grid.dim]

    @property
    def boundary(self) -> np.ndarray:
        """Boundary trace, shape ``(d, n_boundary_nodes)``."""
        return self.values[:, self.grid.boundary_mask()]

    def component(self, i: int) -> np.ndarray:
        if not 1 <= i <= self.d:
            raise IndexOutOfRange(f"component index {i} not in 1..{self.d}")
        return self.values[i - 1]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def scaled(self, c: float) -> "FieldSet":
        return FieldSet(self.grid, c * self.values)

    def __neg__(self):
        return self.scaled(-1.0)

    @classmethod
    def from_functions(cls, grid: Grid, funcs) -> "FieldSet":
        X = grid.mesh()
        return cls(grid, np.stack([np.broadcast_to(np.asarray(f(*X), dtype=float), grid.shape)
                                   for f in funcs]))

    def __repr__(self):
        return f"FieldSet(d={self.d}, grid=({self.grid.describe()}))"


# -- finite differences ------------------------------------------------------

def laplacian_array(grid: Grid, u: np.ndarray) -> np.ndarray:
    """Raw 3/5-point Laplacian of a closed-grid array, at interior nodes."""
    inner = (slice(1, -1),) * grid.dim
    out = np.zeros(tuple(n for n in grid.n))
    for ax, h in enumerate(grid.h):
        lo = list(inner)
        hi = list(inner)
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        out += ((u[tuple(lo)] - u[inner]) + (u[tuple(hi)] - u[inner])) / (h * h)
    return out


def laplacian(f: FieldSet, i: int) -> np.ndarray:
    return laplacian_array(f.grid, f.component(i))


def gradient_array(grid: Grid, u: np.ndarray) -> np.ndarray:
    """Nodal gradient, shape ``(dim, *grid.shape)``.

    Centered differences at interior nodes, second-order one-sided
    differences on the boundary ring.
    """
    parts = np.gradient(u, *grid.h, edge_order=2)
    if grid.dim == 1:
        parts = [parts]
    return np.stack(parts)


def gradient(f: FieldSet, i: int) -> np.ndarray:
    return gradient_array(f.grid, f.component(i))


def cell_centers(grid: Grid, u: np.ndarray) -> np.ndarray:
    """Average of each primal cell's corners (the bilinear value at its center)."""
    if grid.dim == 1:
        return 0.5 * (u[:-1] + u[1:])
    return 0.25 * (u[:-1, :-1] + u[1:, :-1] + u[:-1, 1:] + u[1:, 1:])


def cell_gradient(grid: Grid, u: np.ndarray) -> np.ndarray:
    """Gradient of the bilinear interpolant at cell centers, ``(dim, *cells)``."""
    if grid.dim == 1:
        return ((u[1:] - u[:-1]) / grid.h[0])[None]
    hx, hy = grid.h
    gx = 0.5 * ((u[1:, :-1] - u[:-1, :-1]) + (u[1:, 1:] - u[:-1, 1:])) / hx
    gy = 0.5 * ((u[:-1, 1:] - u[:-1, :-1]) + (u[1:, 1:] - u[1:, :-1])) / hy
    return np.stack([gx, gy])


# -- interpolation -----------------------------------------------------------

def interpolate(grid: Grid, u: np.ndarray, points) -> np.ndarray:
    """Bilinear (linear in 1D) interpolation of ``u`` at ``points`` ``(M, dim)``.

    Points must lie in the closed domain.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, grid.dim)
    idx = []
    frac = []
    for ax, ((lo, hi), n) in enumerate(zip(grid.extent, grid.n)):
        s = (pts[:, ax] - lo) / (hi - lo) * (n + 1)
        if np.any(s < -_SLOP * (n + 1)) or np.any(s > (n + 1) * (1 + _SLOP)):
            raise BallOutsideDomain("interpolation point outside the domain")
        k = np.clip(np.floor(s).astype(int), 0, n)
        idx.append(k)
        frac.append(np.clip(s - k, 0.0, 1.0))
    if grid.dim == 1:
        (k,), (t,) = idx, frac
        return (1 - t) * u[k] + t * u[k + 1]
    (i, j), (tx, ty) = idx, frac
    return ((1 - tx) * (1 - ty) * u[i, j] + tx * (1 - ty) * u[i + 1, j]
            + (1 - tx) * ty * u[i, j + 1] + tx * ty * u[i + 1, j + 1])


# -- ball and sphere quadrature --------------------------------------------

def check_ball(grid: Grid, x0, r: float, margin: float = BALL_MARGIN) -> np.ndarray:
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (grid.dim,):
        raise ShapeMismatch(f"point {x0} has wrong dimension for a {grid.dim}D grid")
    if not r > 0:
        raise BallOutsideDomain(f"radius must be positive, got {r}")
    for xi, (lo, hi), h in zip(x0, grid.extent, grid.h):
        tol = _SLOP * (hi - lo)
        if xi - r < lo + margin * h - tol or xi + r > hi - margin * h + tol:
            raise BallOutsideDomain(
                f"ball B_{r:g}({', '.join(f'{v:g}' for v in x0)}) leaves the domain "
                f"or violates the {margin:g}h margin")
    return x0


def ball_moments(grid: Grid, x0, r: float):
    """Cell slices and the moments of ``B_r(x0)`` restricted to each cell.

    Returns ``(slices, m)`` where ``m["m0"]`` is the covered volume of each
    cell in the block selected by ``slices`` (cell ``k`` spans nodes ``k,
    k+1``) and, in 2D, ``m["mx"]``, ``m["my"]``, ``m["mxx"]``, ``m["myy"]``
    are the first and second moments of the covered part about the cell
    center.  Partial cells are sub-sampled on a regular lattice.
    """
    x0 = check_ball(grid, x0, r)
    slices = []
    edges = []
    for xi, (lo, hi), n, h in zip(x0, grid.extent, grid.n, grid.h):
        k0 = max(int(math.floor((xi - r - lo) / h)), 0)
        k1 = min(int(math.ceil((xi + r - lo) / h)), n + 1)
        slices.append(slice(k0, k1))
        edges.append(lo + (hi - lo) * np.arange(k0, k1 + 1) / (n + 1))
    if grid.dim == 1:
        e = edges[0]
        w = np.clip(np.minimum(e[1:], x0[0] + r) - np.maximum(e[:-1], x0[0] - r), 0.0, None)
        return tuple(slices), {"m0": w}
    ex, ey = edges
    hx, hy = grid.h
    ax0, ax1 = ex[:-1, None] - x0[0], ex[1:, None] - x0[0]
    ay0, ay1 = ey[None, :-1] - x0[1], ey[None, 1:] - x0[1]
    # nearest and farthest point of each cell from x0
    nx = np.where(ax0 > 0, ax0, np.where(ax1 < 0, -ax1, 0.0))
    ny = np.where(ay0 > 0, ay0, np.where(ay1 < 0, -ay1, 0.0))
    fx = np.maximum(np.abs(ax0), np.abs(ax1))
    fy = np.maximum(np.abs(ay0), np.abs(ay1))
    near = np.hypot(nx, ny)
    far = np.hypot(fx, fy)
    cover = np.where(far <= r, 1.0, 0.0)
    mx = np.zeros_like(cover)
    my = np.zeros_like(cover)
    mxx = cover * hx * hx / 12
    myy = cover * hy * hy / 12
    partial = (near < r) & (far > r)
    if np.any(partial):
        s = _COVERAGE_SAMPLES
        t = (np.arange(s) + 0.5) / s
        pi, pj = np.nonzero(partial)
        px = (ex[pi] - x0[0])[:, None, None] + hx * t[None, :, None]
        py = (ey[pj] - x0[1])[:, None, None] + hy * t[None, None, :]
        inside = (px * px + py * py) <= r * r
        ox = np.broadcast_to(hx * (t - 0.5)[None, :, None], inside.shape)
        oy = np.broadcast_to(hy * (t - 0.5)[None, None, :], inside.shape)
        cover[pi, pj] = inside.mean(axis=(1, 2))
        mx[pi, pj] = (inside * ox).mean(axis=(1, 2))
        my[pi, pj] = (inside * oy).mean(axis=(1, 2))
        mxx[pi, pj] = (inside * ox * ox).mean(axis=(1, 2))
        myy[pi, pj] = (inside * oy * oy).mean(axis=(1, 2))
    vol = hx * hy
    return tuple(slices), {"m0": cover * vol, "mx": mx * vol, "my": my * vol,
                           "mxx": mxx * vol, "myy": myy * vol}


def ball_weights(grid: Grid, x0, r: float):
    """Cell slices and coverage-weighted cell volumes for ``B_r(x0)``."""
    sl, m = ball_moments(grid, x0, r)
    return sl, m["m0"]


def bilinear_coefficients(grid: Grid, u: np.ndarray):
    """Center gradient ``(gx, gy)`` and twist ``d = u_xy`` of the bilinear interpolant per cell."""
    g = cell_gradient(grid, u)
    if grid.dim == 1:
        return g, None
    hx, hy = grid.h
    d = (u[1:, 1:] - u[1:, :-1] - u[:-1, 1:] + u[:-1, :-1]) / (hx * hy)
    return g, d


def interpolant_energy(grid: Grid, u: np.ndarray, sl, m) -> np.ndarray:
    """``∫ |∇ I u|^2`` over the covered part of each cell, ``I`` the bilinear interpolant.

    The gradient of the interpolant is affine in each cell, so the moments
    make this exact on fully covered cells.
    """
    g, d = bilinear_coefficients(grid, u)
    if grid.dim == 1:
        return g[0][sl] ** 2 * m["m0"]
    gx, gy, d = g[0][sl], g[1][sl], d[sl]
    return ((gx * gx + gy * gy) * m["m0"] + 2 * d * (gx * m["my"] + gy * m["mx"])
            + d * d * (m["mxx"] + m["myy"]))


def ball_integral_cells(grid: Grid, cellvals: np.ndarray, x0, r: float) -> float:
    """Integrate cell-centered values over ``B_r(x0)``."""
    sl, w = ball_weights(grid, x0, r)
    return float(np.sum(w * cellvals[sl]))


def ball_integral(grid: Grid, field: np.ndarray, x0, r: float) -> float:
    """Midpoint-rule integral of a nodal closed-grid field over ``B_r(x0)``."""
    field = np.asarray(field, dtype=float)
    if field.shape != grid.shape:
        raise ShapeMismatch(f"field shape {field.shape} does not match grid {grid.shape}")
    return ball_integral_cells(grid, cell_centers(grid, field), x0, r)


def sphere_points(grid: Grid, x0, r: float):
    """Quadrature nodes and weights on ``∂B_r(x0)``.

    1D: the two endpoints with unit weight.  2D: ``M`` equally spaced
    angles, ``M >= max(256, 4 * ceil(2 pi r / h))``, trapezoid weights.
    """
    x0 = check_ball(grid, x0, r)
    if r < MIN_SPHERE_RADIUS * grid.hmin * (1 - 1e-9):
        raise RadiusBelowResolution(f"radius {r:g} below {MIN_SPHERE_RADIUS:g}h = "
                                    f"{MIN_SPHERE_RADIUS * grid.hmin:g}")
    if grid.dim == 1:
        return np.array([[x0[0] - r], [x0[0] + r]]), np.ones(2), np.array([[-1.0], [1.0]])
    m = max(256, 4 * math.ceil(2 * math.pi * r / grid.hmin))
    theta = 2 * math.pi * np.arange(m) / m
    normals = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    pts = x0[None, :] + r * normals
    return pts, np.full(m, 2 * math.pi * r / m), normals


def sphere_integral(grid: Grid, field: np.ndarray, x0, r: float) -> float:
    """Integral of a nodal field over ``∂B_r(x0)`` (the endpoint sum in 1D)."""
    field = np.asarray(field, dtype=float)
    if field.shape != grid.shape:
        raise ShapeMismatch(f"field shape {field.shape} does not match grid {grid.shape}")
    pts, w, _ = sphere_points(grid, x0, r)
    return float(np.dot(w, interpolate(grid, field, pts)))


# -- windows -----------------------------------------------------------------

def window_slices(grid: Grid, window) -> tuple[slice, ...]:
    """Closed-grid node slices for nodes inside an axis-aligned window."""
    if window is None:
        return (slice(None),) * grid.dim
    window = [tuple(map(float, w)) for w in np.asarray(window, dtype=float).reshape(-1, 2)]
    if len(window) != grid.dim:
        raise WindowOutsideDomain(f"window needs {grid.dim} intervals, got {len(window)}")
    out = []
    for (a, b), (lo, hi), n, x in zip(window, grid.extent, grid.n, grid.axes()):
        tol = _SLOP * (hi - lo)
        if a < lo - tol or b > hi + tol or b <= a:
            raise WindowOutsideDomain(f"window [{a:g}, {b:g}] not inside [{lo:g}, {hi:g}]")
        idx = np.nonzero((x >= a - tol) & (x <= b + tol))[0]
        out.append(slice(int(idx[0]), int(idx[-1]) + 1))
    return tuple(out)


def window_cell_weights(grid: Grid, window):
    """Cell slices and overlap-weighted volumes for a rectangular window."""
    window = np.asarray(window, dtype=float).reshape(-1, 2)
    window_slices(grid, window)  # validation
    slices = []
    ws = []
    for (a, b), (lo, hi), n in zip(window, grid.extent, grid.n):
        e = lo + (hi - lo) * np.arange(n + 2) / (n + 1)
        w = np.clip(np.minimum(e[1:], b) - np.maximum(e[:-1], a), 0.0, None)
        nz = np.nonzero(w > 0)[0]
        slices.append(slice(int(nz[0]), int(nz[-1]) + 1))
        ws.append(w[nz[0]:nz[-1] + 1])
    w = ws[0] if grid.dim == 1 else np.outer(ws[0], ws[1])
    return tuple(slices), w


# -- field dumps -----------------------------------------------------------

def write_fieldset(path, f: FieldSet, meta: dict | None = None) -> None:
    """Plain-text dump: grid header, then one matrix per component.

    Each matrix has one row per grid line (fixed ``y`` in 2D; a single row
    in 1D) over the closed grid, 9 significant digits.  ``meta`` entries go
    on a ``# meta key=value ...`` comment line.
    """
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# grid {f.grid.describe()}\n")
        fh.write(f"# components d={f.d}\n")
        if meta:
            fh.write("# meta " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        for i in range(f.d):
            fh.write(f"# component {i + 1}\n")
            mat = f.values[i][None] if f.grid.dim == 1 else f.values[i].T
            for row in mat:
                fh.write(" ".join(f"{v:.8e}" for v in row) + "\n")


def _parse_header(line: str) -> Grid:
    fields = dict(tok.split("=", 1) for tok in line.split()[2:])
    try:
        dim = int(fields["dim"])
        n = tuple(int(v) for v in fields["n"].split(","))
        extent = tuple(tuple(float(v) for v in e.split(":")) for e in fields["extent"].split(","))
    except (KeyError, ValueError) as exc:
        raise DumpFormatError(f"bad grid header {line!r}") from exc
    return make_grid(dim, extent, n)


def read_fieldset(path) -> FieldSet:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# grid "):
        raise DumpFormatError(f"{path}: missing '# grid' header")
    grid = _parse_header(lines[0])
    blocks: list[list[list[float]]] = []
    for ln in lines[1:]:
        if ln.startswith("# component "):
            blocks.append([])
        elif ln.startswith("#") or not ln.strip():
            continue
        else:
            if not blocks:
                raise DumpFormatError(f"{path}: data before first component header")
            try:
                blocks[-1].append([float(v) for v in ln.split()])
            except ValueError as exc:
                raise DumpFormatError(f"{path}: non-numeric entry in {ln[:40]!r}") from exc
    values = []
    for b in blocks:
        if len({len(row) for row in b}) != 1:
            raise DumpFormatError(f"{path}: ragged component block")
        mat = np.array(b, dtype=float)
        arr = mat[0] if grid.dim == 1 else mat.T
        if arr.shape != grid.shape:
            raise DumpFormatError(f"{path}: component block shape {arr.shape} != {grid.shape}")
        values.append(arr)
    if not values:
        raise DumpFormatError(f"{path}: no components")
    return FieldSet(grid, np.stack(values))


def read_dump_meta(path) -> dict:
    """Key-value pairs from the ``# meta`` line of a dump (empty if absent)."""
    with Path(path).open() as fh:
        for ln in fh:
            if ln.startswith("# meta "):
                return dict(tok.split("=", 1) for tok in ln.split()[2:] if "=" in tok)
            if not ln.startswith("#"):
                break
    return {}
