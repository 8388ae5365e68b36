"""Group structure of the competing system.

Components ``1..d`` are split into ``m`` consecutive groups by breakpoints
``0 = a_0 < a_1 < ... < a_m = d``; group ``h`` holds ``a_{h-1} < i <= a_h``.
Pairs inside one group do not compete (``a_ij = 0``), pairs across groups do
(``a_ij > 0``).

All component and group indices in this module's public API are 1-based.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EndpointMismatch,
    IndexOutOfRange,
    NegativeEntry,
    NonMonotoneBreakpoints,
    NonzeroIntraGroup,
    NotSymmetric,
    ShapeMismatch,
    ZeroCrossGroup,
)


class PairKind(enum.Enum):
    DIAGONAL = "Diagonal"
    SAME_GROUP = "SameGroup"
    CROSS_GROUP = "CrossGroup"


@dataclass(frozen=True)
class Decomposition:
    d: int
    breakpoints: tuple[int, ...]
    _group: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        bp = self.breakpoints
        group = []
        for h in range(1, len(bp)):
            group.extend([h] * (bp[h] - bp[h - 1]))
        object.__setattr__(self, "_group", tuple(group))

    @property
    def m(self) -> int:
        return len(self.breakpoints) - 1

    def group_of(self, i: int) -> int:
        self._check(i)
        return self._group[i - 1]

    def group(self, h: int) -> tuple[int, ...]:
        """Members of group ``h`` (the set I_h)."""
        if not 1 <= h <= self.m:
            raise IndexOutOfRange(f"group {h} not in 1..{self.m}")
        return tuple(range(self.breakpoints[h - 1] + 1, self.breakpoints[h] + 1))

    @property
    def groups(self) -> list[tuple[int, ...]]:
        return [self.group(h) for h in range(1, self.m + 1)]

    def group_slices(self) -> list[slice]:
        """0-based array slices selecting each group's components."""
        bp = self.breakpoints
        return [slice(bp[h - 1], bp[h]) for h in range(1, self.m + 1)]

    @property
    def k1(self) -> frozenset[tuple[int, int]]:
        return frozenset(
            (i, j)
            for i in range(1, self.d + 1)
            for j in range(1, self.d + 1)
            if i != j and self._group[i - 1] == self._group[j - 1]
        )

    @property
    def k2(self) -> frozenset[tuple[int, int]]:
        return frozenset(
            (i, j)
            for i in range(1, self.d + 1)
            for j in range(1, self.d + 1)
            if self._group[i - 1] != self._group[j - 1]
        )

    def cross_pairs(self) -> list[tuple[int, int]]:
        """K2 pairs with ``i < j``, sorted."""
        return sorted((i, j) for i, j in self.k2 if i < j)

    def same_group_mask(self) -> np.ndarray:
        """Boolean d x d mask of K1 (off-diagonal same-group entries)."""
        g = np.asarray(self._group)
        mask = g[:, None] == g[None, :]
        np.fill_diagonal(mask, False)
        return mask

    def cross_group_mask(self) -> np.ndarray:
        g = np.asarray(self._group)
        return g[:, None] != g[None, :]

    def _check(self, i: int) -> None:
        if not 1 <= i <= self.d:
            raise IndexOutOfRange(f"component index {i} not in 1..{self.d}")

    def to_dict(self) -> dict:
        return {"d": self.d, "breakpoints": list(self.breakpoints),
                "groups": [list(g) for g in self.groups]}


def make_decomposition(d: int, breakpoints) -> Decomposition:
    bp = tuple(int(b) for b in breakpoints)
    if d < 1:
        raise EndpointMismatch(f"d must be positive, got {d}")
    if len(bp) < 2 or bp[0] != 0 or bp[-1] != d:
        raise EndpointMismatch(f"breakpoints must start at 0 and end at d={d}, got {list(bp)}")
    if any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
        raise NonMonotoneBreakpoints(f"breakpoints must be strictly increasing, got {list(bp)}")
    return Decomposition(d, bp)


def classify_pair(dec: Decomposition, i: int, j: int) -> PairKind:
    gi, gj = dec.group_of(i), dec.group_of(j)
    if i == j:
        return PairKind.DIAGONAL
    return PairKind.SAME_GROUP if gi == gj else PairKind.CROSS_GROUP


@dataclass(frozen=True)
class CouplingMatrix:
    """Validated symmetric competition matrix; read-only array in ``entries``."""

    entries: np.ndarray

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    def __getitem__(self, ij):
        i, j = ij
        return float(self.entries[i - 1, j - 1])


def validate_coupling(dec: Decomposition, A) -> CouplingMatrix:
    a = np.array(A, dtype=float)
    if a.shape != (dec.d, dec.d):
        raise ShapeMismatch(f"coupling matrix must be {dec.d}x{dec.d}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NegativeEntry("coupling matrix has non-finite entries")
    if np.any(a < 0):
        i, j = np.argwhere(a < 0)[0] + 1
        raise NegativeEntry(f"a_{i}{j} = {a[i - 1, j - 1]} is negative")
    if not np.array_equal(a, a.T):
        i, j = np.argwhere(a != a.T)[0] + 1
        raise NotSymmetric(f"a_{i}{j} = {a[i - 1, j - 1]} but a_{j}{i} = {a[j - 1, i - 1]}")
    bad = (a != 0) & (dec.same_group_mask() | np.eye(dec.d, dtype=bool))
    if np.any(bad):
        i, j = np.argwhere(bad)[0] + 1
        raise NonzeroIntraGroup(f"a_{i}{j} = {a[i - 1, j - 1]} must vanish (same group or diagonal)")
    zero = (a == 0) & dec.cross_group_mask()
    if np.any(zero):
        i, j = np.argwhere(zero)[0] + 1
        raise ZeroCrossGroup(f"a_{i}{j} must be positive for the cross-group pair ({i},{j})")
    a.setflags(write=False)
    return CouplingMatrix(a)


def default_coupling(dec: Decomposition, value: float = 1.0) -> CouplingMatrix:
    """Uniform competition ``value`` on every cross-group pair."""
    return validate_coupling(dec, value * dec.cross_group_mask().astype(float))
