"""Built-in reaction terms ``f_i(x, s)``.

Three x-independent families are provided:

* ``zero``: ``f = 0``;
* ``linear``: ``f_i = -lambda_i s_i``;
* ``grouped_power``: ``f_i = s_i |s_i|^(p-1) sum_j b_ij |s_j|^(p+1) - lambda_i s_i``
  with ``b`` symmetric, nonnegative and zero across groups (cooperation
  inside a group only).

Every family can be written as ``f_i = g_i(s) * s_i``; the solver uses that
factorization for its semi-implicit node update.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ForcingError
from .grouping import Decomposition


class Family(enum.IntEnum):
    ZERO = 0
    LINEAR = 1
    GROUPED_POWER = 2

    @classmethod
    def parse(cls, name: str) -> "Family":
        key = str(name).strip().lower().replace("-", "_")
        aliases = {"zero": cls.ZERO, "linear": cls.LINEAR,
                   "grouped_power": cls.GROUPED_POWER, "groupedpower": cls.GROUPED_POWER}
        if key not in aliases:
            raise ForcingError(f"unknown forcing family {name!r}; expected zero, linear or grouped_power")
        return aliases[key]


@dataclass(frozen=True)
class ForcingSpec:
    family: Family
    lam: np.ndarray
    b: np.ndarray

    @property
    def d(self) -> int:
        return len(self.lam)

    def to_dict(self) -> dict:
        out = {"family": self.family.name.lower()}
        if self.family != Family.ZERO:
            out["lambda"] = self.lam.tolist()
        if self.family == Family.GROUPED_POWER:
            out["b"] = self.b.tolist()
        return out


def make_forcing(dec: Decomposition, family="zero", lam=None, b=None) -> ForcingSpec:
    fam = family if isinstance(family, Family) else Family.parse(family)
    d = dec.d
    lam_arr = np.zeros(d) if lam is None else np.array(lam, dtype=float).reshape(-1)
    b_arr = np.zeros((d, d)) if b is None else np.array(b, dtype=float)
    if lam_arr.shape != (d,):
        raise ForcingError(f"lambda must have {d} entries, got {lam_arr.size}")
    if b_arr.shape != (d, d):
        raise ForcingError(f"b must be {d}x{d}, got {b_arr.shape}")
    if not (np.all(np.isfinite(lam_arr)) and np.all(np.isfinite(b_arr))):
        raise ForcingError("forcing parameters must be finite")
    if fam == Family.ZERO:
        lam_arr = np.zeros(d)
    if fam != Family.GROUPED_POWER:
        b_arr = np.zeros((d, d))
    else:
        if not np.array_equal(b_arr, b_arr.T):
            raise ForcingError("b must be symmetric")
        if np.any(b_arr < 0):
            raise ForcingError("b must be nonnegative")
        if np.any(b_arr[dec.cross_group_mask()] != 0):
            raise ForcingError("b_ij must vanish for cross-group pairs")
    lam_arr.setflags(write=False)
    b_arr.setflags(write=False)
    return ForcingSpec(fam, lam_arr, b_arr)


def zero_forcing(d: int) -> ForcingSpec:
    lam = np.zeros(d)
    b = np.zeros((d, d))
    lam.setflags(write=False)
    b.setflags(write=False)
    return ForcingSpec(Family.ZERO, lam, b)


def evaluate_forcing(forcing: ForcingSpec, p: float, x, s) -> np.ndarray:
    """``(f_1, ..., f_d)`` at one point ``x`` and state ``s``."""
    s = np.asarray(s, dtype=float).reshape(-1)
    if s.shape != (forcing.d,):
        raise ForcingError(f"state must have {forcing.d} entries")
    return forcing_values(forcing, p, s)


def forcing_values(forcing: ForcingSpec, p: float, u: np.ndarray) -> np.ndarray:
    """Vectorized ``f_i(u)`` for ``u`` of shape ``(d, ...)``."""
    u = np.asarray(u, dtype=float)
    if forcing.family == Family.ZERO:
        return np.zeros_like(u)
    lam = forcing.lam.reshape((-1,) + (1,) * (u.ndim - 1))
    out = -lam * u
    if forcing.family == Family.GROUPED_POWER:
        pw = np.abs(u) ** (p + 1)
        coupling = np.tensordot(forcing.b, pw, axes=(1, 0))
        out = out + np.sign(u) * np.abs(u) ** p * coupling
    return out


def lipschitz_constant(forcing: ForcingSpec) -> float:
    """A constant for the bound ``|f_i(s)| <= C sum_{j in group(i)} |s_j|`` on ``[0,1]^d``."""
    if forcing.family == Family.ZERO:
        return 0.0
    c = float(np.max(np.abs(forcing.lam)))
    if forcing.family == Family.GROUPED_POWER:
        c += float(np.max(forcing.b.sum(axis=1)))
    return c


def monotonicity_constant(forcing: ForcingSpec, dim: int) -> float:
    """Constant ``C`` making ``exp(C r^2) (N + 1)`` nondecreasing, from the forcing bound."""
    return 2.0 * lipschitz_constant(forcing) / max(dim - 1, 1)
