"""Brute-force reference quadratures evaluated on analytic integrands.

These sample the exact function on a grid four times finer than the one
under test and sum directly; they share no code with seglab.
"""
import math

import numpy as np


def fine_centers(extent, h):
    axes = [np.arange(lo, hi - 0.5 * h, h) + 0.5 * h for lo, hi in extent]
    return np.meshgrid(*axes, indexing="ij")


def ball(func, x0, r, h):
    """Midpoint sum of ``func`` over the cells whose centers lie in ``B_r(x0)``."""
    ext = [(c - r - h, c + r + h) for c in x0]
    X = fine_centers(ext, h)
    inside = sum((Xa - c) ** 2 for Xa, c in zip(X, x0)) <= r * r
    return float(np.sum(func(*X)[inside]) * h ** len(x0))


def sphere(func, x0, r, m=20000):
    """Trapezoid sum over ``m`` angles (1D: the two endpoints)."""
    if len(x0) == 1:
        return float(func(np.array([x0[0] - r]))[0] + func(np.array([x0[0] + r]))[0])
    t = 2 * math.pi * np.arange(m) / m
    return float(np.sum(func(x0[0] + r * np.cos(t), x0[1] + r * np.sin(t))) * 2 * math.pi * r / m)


def box(func, window, h):
    """Midpoint sum over an axis-aligned window."""
    return float(np.sum(func(*fine_centers(window, h))) * h ** len(window))
