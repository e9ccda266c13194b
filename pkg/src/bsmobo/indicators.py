"""Hypervolume (exact for 2 and 3 objectives), hypervolume increments and IGD."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .core import DimensionError, RngStream

MC_SAMPLES = 200_000


def _prepare(points, r) -> tuple[np.ndarray, np.ndarray]:
    r = np.asarray(r, dtype=float).ravel()
    P = np.asarray(points, dtype=float)
    if P.size == 0:
        return np.empty((0, r.size)), r
    P = np.atleast_2d(P)
    if P.shape[1] != r.size:
        raise DimensionError(f"points have {P.shape[1]} objectives, reference point has {r.size}")
    # points that do not strictly dominate r bound a zero-volume box
    return P[np.all(P < r, axis=1)], r


def _hv2d(P: np.ndarray, r: np.ndarray) -> float:
    order = np.lexsort((P[:, 1], P[:, 0]))
    area = 0.0
    y_cur = r[1]
    for x, y in P[order]:
        if y < y_cur:
            area += (r[0] - x) * (y_cur - y)
            y_cur = y
    return area


def _hv3d(P: np.ndarray, r: np.ndarray) -> float:
    P = P[np.argsort(P[:, 2], kind="stable")]
    z_next = np.r_[P[1:, 2], r[2]]
    vol = 0.0
    for i in range(len(P)):
        depth = z_next[i] - P[i, 2]
        if depth > 0:
            vol += depth * _hv2d(P[: i + 1, :2], r[:2])
    return vol


def _hv_mc(P: np.ndarray, r: np.ndarray, rng: RngStream, samples: int) -> float:
    lo = P.min(axis=0)
    box = np.prod(r - lo)
    hits = 0
    chunk = 50_000
    for start in range(0, samples, chunk):
        size = min(chunk, samples - start)
        u = lo + rng.random((size, r.size)) * (r - lo)
        covered = np.zeros(size, dtype=bool)
        for p in P:
            covered |= np.all(u >= p, axis=1)
        hits += int(covered.sum())
    return float(box * hits / samples)


def hypervolume(points, r, rng: RngStream | None = None, mc_samples: int = MC_SAMPLES) -> float:
    """Lebesgue measure of the union of boxes ``[p, r]`` over the points.

    Exact for 1-3 objectives; a Monte-Carlo estimate for more, drawn from
    ``rng`` (a fixed-seed stream when omitted).
    """
    P, r = _prepare(points, r)
    if len(P) == 0:
        return 0.0
    m = r.size
    if m == 1:
        return float(r[0] - P[:, 0].min())
    if m == 2:
        return float(_hv2d(P, r))
    if m == 3:
        return float(_hv3d(P, r))
    return _hv_mc(P, r, rng or RngStream(0), mc_samples)


def hv_increment(base, candidate, r, rng: RngStream | None = None) -> float:
    """Hypervolume gained by adding ``candidate`` to ``base``; never negative.

    Computed as the candidate's own box minus the part of it already covered
    by ``base``, rather than as a difference of two full hypervolumes.
    """
    c = np.asarray(candidate, dtype=float).ravel()
    r = np.asarray(r, dtype=float).ravel()
    if c.size != r.size:
        raise DimensionError("candidate and reference point differ in length")
    if not np.all(c < r):
        return 0.0
    B, _ = _prepare(base, r)
    if len(B) and np.any(np.all(B <= c, axis=1)):
        return 0.0
    own = float(np.prod(r - c))
    if len(B) == 0:
        return own
    covered = hypervolume(np.maximum(B, c), r, rng=rng)
    return max(own - covered, 0.0)


def igd(front, reference) -> float:
    """Mean Euclidean distance from each reference point to its nearest front point."""
    R = np.atleast_2d(np.asarray(reference, dtype=float))
    A = np.atleast_2d(np.asarray(front, dtype=float))
    if R.size == 0 or A.size == 0:
        raise ValueError("IGD needs nonempty front and reference sets")
    if R.shape[1] != A.shape[1]:
        raise DimensionError("front and reference differ in objective count")
    return float(cdist(R, A).min(axis=1).mean())
