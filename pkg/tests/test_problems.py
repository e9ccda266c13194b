import numpy as np
import pytest

from bsmobo.core import nondominated_subset
from bsmobo.problems import PROBLEM_NAMES, DomainError, ProblemNotAvailable, get_problem


def zdt1_oracle(x):
    # independent scalar transcription of the textbook definition
    n = len(x)
    f1 = x[0]
    g = 1.0 + 9.0 * sum(x[1:]) / (n - 1)
    return f1, g * (1.0 - (f1 / g) ** 0.5)


def central_difference(fn, x, h=1e-6):
    f0 = fn(x)
    J = np.zeros((f0.size, x.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        J[:, i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return J


def interior_points(problem, count, seed):
    r = np.random.default_rng(seed)
    lo, hi = problem.bounds.lower, problem.bounds.upper
    margin = 0.01 * (hi - lo)
    return lo + margin + r.random((count, problem.n)) * (hi - lo - 2 * margin)


def test_zdt1_examples():
    p = get_problem("zdt1", 8)
    np.testing.assert_allclose(p.evaluate(np.zeros(8)), [0.0, 1.0])
    np.testing.assert_allclose(p.evaluate(np.r_[1.0, np.zeros(7)]), [1.0, 0.0], atol=1e-15)
    x = np.random.default_rng(1).random(8)
    np.testing.assert_allclose(p.evaluate(x), zdt1_oracle(x), rtol=1e-14)


def test_dtlz2_on_unit_sphere_when_tail_is_half():
    p = get_problem("dtlz2", 6, 3)
    x = np.r_[0.3, 0.8, np.full(4, 0.5)]
    assert np.linalg.norm(p.evaluate(x)) == pytest.approx(1.0, abs=1e-14)


def test_zdt1_gradient_of_first_objective():
    p = get_problem("zdt1", 8)
    _, J = p.evaluate_with_gradient(np.r_[0.25, np.zeros(7)])
    np.testing.assert_array_equal(J[0], np.r_[1.0, np.zeros(7)])


@pytest.mark.parametrize("name", PROBLEM_NAMES)
def test_gradient_matches_finite_differences(name):
    p = get_problem(name, 8)
    for x in interior_points(p, 100, seed=PROBLEM_NAMES.index(name)):
        f, J = p.evaluate_with_gradient(x)
        assert J.shape == (p.m, p.n)
        np.testing.assert_allclose(f, p.evaluate(x))
        fd = central_difference(p.evaluate, x)
        scale = np.maximum(np.abs(fd), 1.0)
        assert np.max(np.abs(J - fd) / scale) < 1e-5, name


def test_zdt2_full_jacobian_relative_error():
    p = get_problem("zdt2", 8)
    x = interior_points(p, 1, seed=5)[0]
    _, J = p.evaluate_with_gradient(x)
    fd = central_difference(p.evaluate, x)
    nz = np.abs(fd) > 1e-12
    assert np.max(np.abs(J[nz] - fd[nz]) / np.abs(fd[nz])) < 1e-5


def test_singular_boundary_gradient_is_finite():
    p = get_problem("zdt1", 8)
    _, J = p.evaluate_with_gradient(np.zeros(8))
    assert np.all(np.isfinite(J))


def test_out_of_bounds_rejected():
    p = get_problem("zdt1", 4)
    with pytest.raises(DomainError):
        p.evaluate([1.5, 0, 0, 0])
    with pytest.raises(DomainError):
        p.evaluate([0.5, 0, 0])


def test_names_are_case_insensitive_and_validated():
    assert get_problem("ZDT2", 5).name == "zdt2"
    with pytest.raises(ProblemNotAvailable, match="zdt1"):
        get_problem("nosuch", 5)


def test_zdt4_bounds():
    p = get_problem("zdt4", 5)
    np.testing.assert_array_equal(p.bounds.lower, [0, -5, -5, -5, -5])
    np.testing.assert_array_equal(p.bounds.upper, [1, 5, 5, 5, 5])


def test_zdt1_reference_front():
    front = get_problem("zdt1", 8).reference_front(500)
    assert front.shape == (500, 2)
    np.testing.assert_allclose(front[:, 0], np.arange(500) / 499)
    np.testing.assert_allclose(front[:, 1], 1 - np.sqrt(front[:, 0]))


def test_dtlz2_reference_front_on_sphere():
    front = get_problem("dtlz2", 8, 3).reference_front(990)
    assert front.shape == (990, 3)
    np.testing.assert_allclose(np.linalg.norm(front, axis=1), 1.0, atol=1e-12)


def test_dtlz1_reference_front_on_simplex():
    front = get_problem("dtlz1", 8, 3).reference_front(990)
    np.testing.assert_allclose(front.sum(axis=1), 0.5, atol=1e-12)
    assert len({tuple(r) for r in front}) == 990


@pytest.mark.parametrize("name", PROBLEM_NAMES)
def test_reference_fronts_are_mutually_nondominated(name):
    p = get_problem(name, 8)
    front = p.reference_front(500 if p.m == 2 else 990)
    assert len(nondominated_subset(front)) == len(front)


@pytest.mark.parametrize("name", ["zdt1", "zdt2", "zdt6", "dtlz2"])
def test_reference_front_points_are_attainable(name):
    # points on the Pareto set map onto the sampled front
    p = get_problem(name, 8)
    front = p.reference_front(200 if p.m == 2 else 990)
    r = np.random.default_rng(3)
    for _ in range(20):
        x = r.random(p.n)
        if name.startswith("zdt"):
            x[1:] = 0.0
        else:
            x[p.m - 1 :] = 0.5
        f = p.evaluate(x)
        assert np.min(np.linalg.norm(front - f, axis=1)) < 0.05
