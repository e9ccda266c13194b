"""Latin hypercube design for the initial dataset."""

from __future__ import annotations

import numpy as np

from .core import BoxBounds, RngStream


def latin_hypercube(count: int, bounds: BoxBounds, rng: RngStream) -> np.ndarray:
    """Randomized Latin hypercube sample, shape (count, n).

    Each dimension is cut into ``count`` equal strata; every stratum holds
    exactly one point, placed uniformly inside it. The stratum order is an
    independent permutation per dimension.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    n = bounds.n
    strata = np.column_stack([rng.permutation(count) for _ in range(n)])
    u = (strata + rng.random((count, n))) / count
    # u < 1 always, but guard the upper edge against rounding after the affine map
    return np.minimum(bounds.from_unit(u), bounds.upper)
