"""Batch acquisition: LCB vectors, the batch hypervolume UCB value and greedy k-of-p selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Archive, DimensionError, nondominated_subset
from .indicators import hv_increment, hypervolume
from .moead import CandidateSet
from .surrogate import Prediction

DEDUP_TOL = 1e-9


@dataclass
class BatchSelection:
    X: np.ndarray
    G: np.ndarray
    indices: list[int]
    increments: list[float]
    shortfall: bool = False

    def __len__(self) -> int:
        return len(self.indices)


def lcb(pred: Prediction, beta: float = 1.0) -> np.ndarray:
    """Optimistic objective vector ``mean - beta * std``."""
    return np.asarray(pred.mean) - beta * np.asarray(pred.std)


def reference_point(F: np.ndarray, margin: float = 0.1) -> np.ndarray:
    """Componentwise maximum of ``F`` pushed out by ``margin`` times the observed span."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    hi, lo = F.max(axis=0), F.min(axis=0)
    span = hi - lo
    span = np.where(span > 0, span, np.maximum(np.abs(hi), 1.0))
    return hi + margin * span


def bhucb(candidate_gs, archive_fs, r) -> float:
    """Hypervolume of archive values plus candidate LCB values, minus that of the archive alone."""
    G = np.atleast_2d(np.asarray(candidate_gs, dtype=float))
    r = np.asarray(r, dtype=float)
    F = np.asarray(archive_fs, dtype=float)
    if G.size and G.shape[1] != r.size:
        raise DimensionError("candidate LCB vectors and reference point differ in length")
    if F.size == 0:
        return hypervolume(G, r) if G.size else 0.0
    F = np.atleast_2d(F)
    if F.shape[1] != r.size:
        raise DimensionError("archive objectives and reference point differ in length")
    if G.size == 0:
        return 0.0
    return max(hypervolume(np.vstack([F, G]), r) - hypervolume(F, r), 0.0)


def greedy_select(
    cands: CandidateSet,
    archive: Archive | None,
    k: int,
    r: np.ndarray,
    prune: bool = True,
) -> BatchSelection:
    """Pick ``k`` candidates one at a time, each maximizing the hypervolume gain of its LCB vector.

    The value set starts as the archive's objective vectors and grows by each
    pick's LCB vector. Ties go to the lowest candidate index. Candidates
    within ``DEDUP_TOL`` (max-norm, decision space) of an archive point or of
    an earlier pick are skipped; if fewer than ``k`` remain, all of them are
    returned with ``shortfall`` set.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    X = np.asarray(cands.X, dtype=float)
    G = np.asarray(cands.G, dtype=float)
    r = np.asarray(r, dtype=float)
    known = archive.X() if archive is not None and len(archive) else np.empty((0, X.shape[1]))
    V = archive.F() if archive is not None and len(archive) else np.empty((0, r.size))
    if prune and len(V):
        V = V[nondominated_subset(V)]

    viable = np.ones(len(X), dtype=bool)
    if len(known):
        close = np.max(np.abs(X[:, None, :] - known[None, :, :]), axis=2) <= DEDUP_TOL
        viable &= ~close.any(axis=1)

    chosen: list[int] = []
    gains: list[float] = []
    while len(chosen) < k and viable.any():
        best, best_gain = -1, -np.inf
        for i in np.flatnonzero(viable):
            gain = hv_increment(V, G[i], r)
            if gain > best_gain:
                best, best_gain = int(i), gain
        chosen.append(best)
        gains.append(best_gain)
        V = np.vstack([V, G[best]]) if len(V) else G[best][None, :]
        viable &= np.max(np.abs(X - X[best]), axis=1) > DEDUP_TOL
    return BatchSelection(X[chosen], G[chosen], chosen, gains, shortfall=len(chosen) < k)
