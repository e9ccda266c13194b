import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from bsmobo.core import BoxBounds, RngStream
from bsmobo.sampling import latin_hypercube


def assert_stratified(X, bounds):
    count = len(X)
    U = bounds.to_unit(X)
    for i in range(bounds.n):
        cells = np.floor(U[:, i] * count).astype(int)
        assert sorted(cells) == list(range(count))


def test_four_points_one_per_quarter():
    X = latin_hypercube(4, BoxBounds.unit(1), RngStream(0))
    assert_stratified(X, BoxBounds.unit(1))


def test_single_point_inside_box():
    b = BoxBounds([-1, 2], [1, 3])
    X = latin_hypercube(1, b, RngStream(0))
    assert X.shape == (1, 2) and b.contains(X[0])


def test_initial_design_size():
    b = BoxBounds.unit(8)
    X = latin_hypercube(60, b, RngStream(4))
    assert X.shape == (60, 8)
    assert_stratified(X, b)


@given(st.integers(1, 80), st.integers(1, 6), st.integers(0, 2**32))
def test_stratification_property(count, n, seed):
    b = BoxBounds(np.full(n, -5.0), np.full(n, 5.0))
    X = latin_hypercube(count, b, RngStream(seed))
    assert np.all(X >= b.lower) and np.all(X <= b.upper)
    assert_stratified(X, b)


def test_deterministic_by_seed():
    b = BoxBounds.unit(3)
    assert np.array_equal(latin_hypercube(10, b, RngStream(9)), latin_hypercube(10, b, RngStream(9)))
