"""Homogeneous model fields with known frequency, used by tests and ``seglab synth``.

Every generator returns a :class:`FieldSet` on the given grid.  Angles are
measured from the positive x axis around ``x0``.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatch
from .grid import FieldSet, Grid


def _unit(nu, dim):
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    if nu.shape != (dim,):
        raise DimensionMismatch(f"direction {nu} does not match dim={dim}")
    return nu / np.linalg.norm(nu)


def _polar(grid: Grid, x0):
    if grid.dim != 2:
        raise DimensionMismatch("polar models need a 2D grid")
    X, Y = grid.mesh()
    dx, dy = X - x0[0], Y - x0[1]
    return np.hypot(dx, dy), np.arctan2(dy, dx)


def linear(grid: Grid, nu=None, x0=None, gamma: float = 1.0) -> FieldSet:
    """One component ``gamma (x - x0) . nu`` (degree 1, harmonic)."""
    nu = _unit(nu if nu is not None else np.eye(grid.dim)[0], grid.dim)
    x0 = np.zeros(grid.dim) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    s = sum(c * (X - a) for c, X, a in zip(nu, grid.mesh(), x0))
    return FieldSet(grid, gamma * s)


def kink(grid: Grid, nu=None, x0=None, slopes=(1.0, 1.0)) -> FieldSet:
    """Two components ``s1 ((x-x0).nu)^+`` and ``s2 ((x-x0).nu)^-``."""
    nu = _unit(nu if nu is not None else np.eye(grid.dim)[0], grid.dim)
    x0 = np.zeros(grid.dim) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    s = sum(c * (X - a) for c, X, a in zip(nu, grid.mesh(), x0))
    return FieldSet(grid, np.stack([slopes[0] * np.maximum(s, 0.0), slopes[1] * np.maximum(-s, 0.0)]))


def sector_power(grid: Grid, k: int, x0=(0.0, 0.0), offset: float = math.pi / 2,
                 components=None) -> FieldSet:
    """``k`` equal sectors carrying ``r^(k/2) |sin(k (theta - offset) / 2)|``.

    The sector boundaries (rays) sit at ``offset + 2 pi j / k``; sector
    ``j`` is assigned to component ``components[j]`` (default ``j``).  The
    field is homogeneous of degree ``k/2`` and harmonic inside each sector.
    """
    r, theta = _polar(grid, x0)
    phi = np.mod(theta - offset, 2 * math.pi)
    width = 2 * math.pi / k
    sector = np.minimum((phi // width).astype(int), k - 1)
    components = list(range(k)) if components is None else list(components)
    d = max(components) + 1
    mag = r ** (k / 2) * np.abs(np.sin(k * phi / 2))
    values = np.zeros((d,) + grid.shape)
    for j in range(k):
        values[components[j]] += np.where(sector == j, mag, 0.0)
    return FieldSet(grid, values)


def triple_junction(grid: Grid, x0=(0.0, 0.0), offset: float = math.pi / 2) -> FieldSet:
    """Three components on ``2 pi / 3`` sectors, degree 3/2."""
    return sector_power(grid, 3, x0, offset)


def four_sector(grid: Grid, x0=(0.0, 0.0)) -> FieldSet:
    """``(x1 x2)^+`` and ``(x1 x2)^-``: four quadrants alternating between two components, degree 2."""
    X, Y = grid.mesh()
    q = (X - x0[0]) * (Y - x0[1])
    return FieldSet(grid, np.stack([np.maximum(q, 0.0), np.maximum(-q, 0.0)]))


def saddle(grid: Grid, x0=(0.0, 0.0)) -> FieldSet:
    """One harmonic component ``(x1 - a)(x2 - b)``, degree 2."""
    X, Y = grid.mesh()
    return FieldSet(grid, (X - x0[0]) * (Y - x0[1]))


MODELS = {
    "linear": linear,
    "kink": kink,
    "triple_junction": triple_junction,
    "four_sector": four_sector,
    "saddle": saddle,
}
