"""Shared domain types: bounds, evaluated solutions, the archive, dominance and seeded RNG streams.

Everything is minimization. Objective and decision vectors are plain 1-D
``numpy`` arrays; the dataclasses below only add validation and naming.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Iterator, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when array shapes do not agree."""


@dataclass(frozen=True)
class BoxBounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lower = np.asarray(self.lower, dtype=float).ravel()
        upper = np.asarray(self.upper, dtype=float).ravel()
        if lower.shape != upper.shape or lower.size < 1:
            raise DimensionError(f"bounds shapes differ: {lower.shape} vs {upper.shape}")
        if not np.all(lower < upper):
            raise ValueError("every lower bound must be strictly below its upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def unit(cls, n: int) -> "BoxBounds":
        return cls(np.zeros(n), np.ones(n))

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x: np.ndarray, atol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol))

    def to_unit(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lower) / self.width

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=float) * self.width


@dataclass(frozen=True)
class EvaluatedSolution:
    """A decision vector with its true objective values and, optionally, the objective Jacobian."""

    x: np.ndarray
    f: np.ndarray
    grad: np.ndarray | None = None

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float).ravel()
        f = np.asarray(self.f, dtype=float).ravel()
        if not np.all(np.isfinite(f)):
            raise ValueError("objective values must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "f", f)
        if self.grad is not None:
            g = np.asarray(self.grad, dtype=float)
            if g.shape != (f.size, x.size):
                raise DimensionError(f"gradient shape {g.shape} != {(f.size, x.size)}")
            if not np.all(np.isfinite(g)):
                raise ValueError("gradient entries must be finite")
            object.__setattr__(self, "grad", g)


@dataclass
class Archive:
    """Insertion-ordered dataset of evaluated solutions with unique decision vectors.

    One writer appends; readers should treat the arrays returned by
    :meth:`X`, :meth:`F` and :meth:`G` as snapshots.
    """

    entries: list[EvaluatedSolution] = field(default_factory=list)
    _keys: set[bytes] = field(default_factory=set, repr=False)

    def __post_init__(self) -> None:
        initial, self.entries = list(self.entries), []
        self._keys = set()
        self.extend(initial)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[EvaluatedSolution]:
        return iter(self.entries)

    def __contains__(self, x: object) -> bool:
        return _key(np.asarray(x, dtype=float)) in self._keys

    def add(self, sol: EvaluatedSolution) -> None:
        if self.entries:
            ref = self.entries[0]
            if sol.x.size != ref.x.size or sol.f.size != ref.f.size:
                raise DimensionError("solution dimensions differ from the archive")
        k = _key(sol.x)
        if k in self._keys:
            raise ValueError(f"decision vector already in archive: {sol.x}")
        self._keys.add(k)
        self.entries.append(sol)

    def extend(self, sols: Iterable[EvaluatedSolution]) -> None:
        for s in sols:
            self.add(s)

    @property
    def has_gradients(self) -> bool:
        return bool(self.entries) and all(e.grad is not None for e in self.entries)

    def X(self) -> np.ndarray:
        return np.array([e.x for e in self.entries])

    def F(self) -> np.ndarray:
        return np.array([e.f for e in self.entries])

    def G(self) -> np.ndarray:
        """Stacked gradients, shape (N, m, n)."""
        if not self.has_gradients:
            raise ValueError("not every archive entry carries a gradient")
        return np.array([e.grad for e in self.entries])

    def nondominated(self) -> list[EvaluatedSolution]:
        if not self.entries:
            return []
        return [self.entries[i] for i in nondominated_subset(self.F())]


def _key(x: np.ndarray) -> bytes:
    # +0.0 so that -0.0 and 0.0 share a key
    return (np.ascontiguousarray(x, dtype=np.float64) + 0.0).tobytes()


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"cannot compare vectors of shapes {a.shape} and {b.shape}")
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated_subset(points: Sequence[Sequence[float]] | np.ndarray) -> list[int]:
    """Indices of the points not dominated by any other point.

    Duplicated nondominated values are all kept.
    """
    P = np.asarray(points, dtype=float)
    if P.size == 0:
        return []
    if P.ndim != 2:
        raise DimensionError("points must form a 2-D array")
    le = np.all(P[:, None, :] <= P[None, :, :], axis=2)
    lt = np.any(P[:, None, :] < P[None, :, :], axis=2)
    dominated = np.any(le & lt, axis=0)
    return [int(i) for i in np.flatnonzero(~dominated)]


def clamp_to_bounds(x: np.ndarray, bounds: BoxBounds) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != bounds.n:
        raise DimensionError(f"vector length {x.shape[-1]} != bounds dimension {bounds.n}")
    return np.clip(x, bounds.lower, bounds.upper)


def simplex_lattice(m: int, h: int) -> np.ndarray:
    """All vectors (i_1/h, ..., i_m/h) with nonnegative integers summing to h, lexicographic order."""
    if m < 1 or h < 0:
        raise ValueError("need m >= 1 and h >= 0")
    if m == 1:
        return np.ones((1, 1))
    rows: list[list[int]] = []

    def rec(prefix: list[int], left: int, slots: int) -> None:
        if slots == 1:
            rows.append(prefix + [left])
            return
        for i in range(left + 1):
            rec(prefix + [i], left - i, slots - 1)

    rec([], h, m)
    out = np.array(rows, dtype=float) / max(h, 1)
    assert len(out) == comb(h + m - 1, m - 1)
    return out


def even_subsample(n_total: int, count: int) -> np.ndarray:
    """``count`` distinct indices spread evenly over ``range(n_total)``, endpoints included."""
    if count > n_total:
        raise ValueError("cannot pick more indices than available")
    if count == 1:
        return np.array([0])
    return np.round(np.linspace(0, n_total - 1, count)).astype(int)


class RngStream:
    """Seeded random stream; named children are derived from (seed, label) only.

    Deriving a child does not advance the parent, so adding a new labelled
    phase never perturbs the streams of existing ones.
    """

    def __init__(self, seed: int) -> None:
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.generator = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, label: str) -> "RngStream":
        digest = hashlib.sha256(f"{self.seed}/{label}".encode()).digest()
        return RngStream(int.from_bytes(digest[:8], "little"))

    # thin passthroughs for the calls used across the package
    def random(self, size=None, dtype=np.float64) -> np.ndarray:
        return self.generator.random(size, dtype=dtype)

    def uniform(self, low=0.0, high=1.0, size=None) -> np.ndarray:
        return self.generator.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def permutation(self, x):
        return self.generator.permutation(x)

    def choice(self, a, size=None, replace=True):
        return self.generator.choice(a, size=size, replace=replace)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed})"
