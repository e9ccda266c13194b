"""MOEA/D with Tchebycheff decomposition, used as the inner solver for the LCB surrogate problem."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist

from .core import BoxBounds, RngStream, even_subsample, simplex_lattice
from .sampling import latin_hypercube

BatchObjective = Callable[[np.ndarray], np.ndarray]
"""Maps decision vectors (B, n) to objective vectors (B, m)."""


@dataclass
class MoeadConfig:
    neighborhood: int = 20
    mating_prob: float = 0.9  # chance of mating inside the neighborhood
    max_replace: int = 2
    eta_c: float = 20.0
    crossover_rate: float = 1.0
    eta_m: float = 20.0
    mutation_rate: float | None = None  # None: 1 / n
    ideal_margin: float = 1e-4


@dataclass
class CandidateSet:
    """Final population: one incumbent per subproblem with its cached objective values."""

    X: np.ndarray
    G: np.ndarray
    weights: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    ideal_history: list[np.ndarray] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.X)


def generate_weights(m: int, p: int) -> np.ndarray:
    """``p`` distinct weight vectors on the unit simplex, shape (p, m).

    Two objectives: evenly spaced ``(i/(p-1), 1 - i/(p-1))``. Otherwise the
    smallest simplex lattice with at least ``p`` points, thinned evenly by
    index.
    """
    if m < 2:
        raise ValueError("need at least 2 objectives")
    if p < m:
        raise ValueError(f"population size {p} is smaller than the objective count {m}")
    if m == 2:
        t = np.arange(p) / (p - 1)
        return np.column_stack([t, 1.0 - t])
    h = 1
    while comb(h + m - 1, m - 1) < p:
        h += 1
    lat = simplex_lattice(m, h)
    return lat[even_subsample(len(lat), p)]


def tchebycheff(g: np.ndarray, lam: np.ndarray, z: np.ndarray) -> np.ndarray | float:
    """max_i lam_i * |g_i - z_i|; vectorized over leading axes of ``g`` and ``lam``."""
    v = np.max(np.asarray(lam) * np.abs(np.asarray(g) - np.asarray(z)), axis=-1)
    return float(v) if np.ndim(v) == 0 else v


def neighborhoods(weights: np.ndarray, size: int) -> np.ndarray:
    """Indices of the ``size`` nearest weight vectors (self first), shape (p, size)."""
    size = min(size, len(weights))
    d = cdist(weights, weights)
    return np.argsort(d, axis=1, kind="stable")[:, :size]


def sbx(p1: np.ndarray, p2: np.ndarray, bounds: BoxBounds, eta: float, rate: float, rng: RngStream):
    """Bounded simulated binary crossover, row-wise on (B, n) parent arrays; returns two children."""
    lo, hi = bounds.lower, bounds.upper
    c1, c2 = p1.copy(), p2.copy()
    B, n = p1.shape
    do_row = rng.random(B) < rate
    do_var = (rng.random((B, n)) < 0.5) & do_row[:, None] & (np.abs(p1 - p2) > 1e-14)
    u = rng.random((B, n))
    y1 = np.minimum(p1, p2)
    y2 = np.maximum(p1, p2)
    span = np.where(do_var, y2 - y1, 1.0)

    def beta_q(beta: np.ndarray) -> np.ndarray:
        alpha = 2.0 - beta ** -(eta + 1.0)
        small = u <= 1.0 / alpha
        with np.errstate(invalid="ignore", divide="ignore"):
            a = (u * alpha) ** (1.0 / (eta + 1.0))
            b = (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0))
        return np.where(small, a, b)

    with np.errstate(invalid="ignore", divide="ignore"):
        bq1 = beta_q(1.0 + 2.0 * (y1 - lo) / span)
        bq2 = beta_q(1.0 + 2.0 * (hi - y2) / span)
    ch1 = 0.5 * ((y1 + y2) - bq1 * (y2 - y1))
    ch2 = 0.5 * ((y1 + y2) + bq2 * (y2 - y1))
    ch1 = np.clip(ch1, lo, hi)
    ch2 = np.clip(ch2, lo, hi)
    swap = rng.random((B, n)) < 0.5
    a = np.where(swap, ch2, ch1)
    b = np.where(swap, ch1, ch2)
    c1 = np.where(do_var, a, c1)
    c2 = np.where(do_var, b, c2)
    return c1, c2


def polynomial_mutation(x: np.ndarray, bounds: BoxBounds, eta: float, rate: float, rng: RngStream) -> np.ndarray:
    """Bounded polynomial mutation applied independently per variable with probability ``rate``."""
    lo, hi = bounds.lower, bounds.upper
    width = hi - lo
    y = x.copy()
    mutate = rng.random(x.shape) < rate
    u = rng.random(x.shape)
    d1 = (x - lo) / width
    d2 = (hi - x) / width
    power = 1.0 / (eta + 1.0)
    left = u < 0.5
    xy = np.where(left, 1.0 - d1, 1.0 - d2)
    val = np.where(
        left,
        2.0 * u + (1.0 - 2.0 * u) * xy ** (eta + 1.0),
        2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy ** (eta + 1.0),
    )
    dq = np.where(left, val**power - 1.0, 1.0 - val**power)
    y = np.where(mutate, x + dq * width, y)
    return np.clip(y, lo, hi)


def update_neighbors(
    child_g: np.ndarray,
    child_x: np.ndarray,
    pool: np.ndarray,
    pop_X: np.ndarray,
    pop_G: np.ndarray,
    weights: np.ndarray,
    z: np.ndarray,
    max_replace: int,
) -> int:
    """Replace up to ``max_replace`` incumbents in ``pool`` (visited in order) that the child beats.

    A replacement happens only when the child's Tchebycheff value under the
    incumbent's weight is strictly lower. Returns the number of replacements.
    """
    h_child = tchebycheff(child_g[None, :], weights[pool], z)
    h_old = tchebycheff(pop_G[pool], weights[pool], z)
    better = pool[h_child < h_old][:max_replace]
    pop_X[better] = child_x
    pop_G[better] = child_g
    return len(better)


def solve(
    objective: BatchObjective,
    bounds: BoxBounds,
    p: int,
    generations: int,
    rng: RngStream,
    config: MoeadConfig | None = None,
    initial: np.ndarray | None = None,
) -> CandidateSet:
    """Approximate the Pareto set of ``objective`` over ``bounds`` with ``p`` subproblems.

    ``initial`` rows (at most ``p``) seed the population; the rest is a Latin
    hypercube sample. Every decision vector is evaluated exactly once, in one
    batch per generation, and its objective values are cached with it.
    """
    cfg = config or MoeadConfig()
    if generations < 1:
        raise ValueError("generations must be >= 1")
    n = bounds.n
    pm = cfg.mutation_rate if cfg.mutation_rate is not None else 1.0 / n

    X = latin_hypercube(p, bounds, rng.child("init"))
    if initial is not None and len(initial):
        seeds = np.clip(np.atleast_2d(initial)[:p], bounds.lower, bounds.upper)
        X[: len(seeds)] = seeds
    G = np.asarray(objective(X), dtype=float)
    m = G.shape[1]
    if p < m:
        raise ValueError(f"population size {p} is smaller than the objective count {m}")
    W = generate_weights(m, p)
    B = neighborhoods(W, cfg.neighborhood)
    z_min = G.min(axis=0)
    z = z_min - cfg.ideal_margin
    history = [z.copy()]

    var_rng = rng.child("variation")
    for _ in range(generations):
        local = var_rng.random(p) < cfg.mating_prob
        pools = [B[i] if local[i] else np.arange(p) for i in range(p)]
        parents = np.array([var_rng.choice(pool, 2, replace=False) for pool in pools])
        c1, c2 = sbx(X[parents[:, 0]], X[parents[:, 1]], bounds, cfg.eta_c, cfg.crossover_rate, var_rng)
        pick = var_rng.random(p) < 0.5
        children = np.where(pick[:, None], c1, c2)
        children = polynomial_mutation(children, bounds, cfg.eta_m, pm, var_rng)
        child_G = np.asarray(objective(children), dtype=float)
        for i in range(p):
            z_min = np.minimum(z_min, child_G[i])
            z = np.minimum(z, z_min - cfg.ideal_margin)
            pool = var_rng.permutation(pools[i])
            update_neighbors(child_G[i], children[i], pool, X, G, W, z, cfg.max_replace)
        history.append(z.copy())

    return CandidateSet(X, G, W, history)
