"""Analytic benchmark problems (ZDT1-4, ZDT6, DTLZ1, DTLZ2) with exact Jacobians and Pareto-front samplers.

Singular boundaries
-------------------
ZDT1, ZDT3 and ZDT4 contain ``sqrt(x1 / g)``, whose derivative in ``x1`` is
unbounded as ``x1 -> 0``; ZDT6 contains ``(s / (n - 1)) ** 0.25`` with
``s = sum(x[1:])``, unbounded as ``s -> 0``. Both singular points lie on
the box boundary (and on the Pareto set), so optimizers do visit them. The
Jacobian there is reported at the singular variable floored to
:data:`SINGULAR_FLOOR`; objective values are never modified. Everywhere
else the Jacobian is the exact analytic one.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .core import BoxBounds, even_subsample, nondominated_subset, simplex_lattice

SINGULAR_FLOOR = 1e-4

PROBLEM_NAMES = ("zdt1", "zdt2", "zdt3", "zdt4", "zdt6", "dtlz1", "dtlz2")


class DomainError(ValueError):
    """Decision vector outside the problem's box."""


class ProblemNotAvailable(ValueError):
    """Unknown problem name or an operation the problem does not support."""


ObjFn = Callable[[np.ndarray], np.ndarray]
JacFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class Problem:
    name: str
    n: int
    m: int
    bounds: BoxBounds
    differentiable_everywhere: bool
    _f: ObjFn
    _fg: JacFn

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.n:
            raise DomainError(f"{self.name} expects {self.n} variables, got {x.size}")
        if not self.bounds.contains(x, atol=1e-12):
            raise DomainError(f"{self.name}: x outside bounds")
        return np.clip(x, self.bounds.lower, self.bounds.upper)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self._f(self._check(x))

    def evaluate_with_gradient(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Objectives and the (m, n) Jacobian ``J[j, i] = d f_j / d x_i``."""
        return self._fg(self._check(x))

    def reference_front(self, count: int) -> np.ndarray:
        return reference_front(self, count)

    def hv_reference(self) -> np.ndarray:
        """Fixed reference point for reporting: front maximum plus 10% of the front's span."""
        front = reference_front(self, 200 if self.m == 2 else 210)
        hi, lo = front.max(axis=0), front.min(axis=0)
        return hi + 0.1 * (hi - lo)


# ZDT -----------------------------------------------------------------------


def _zdt_g_linear(x: np.ndarray) -> tuple[float, np.ndarray]:
    n = x.size
    g = 1.0 + 9.0 * x[1:].sum() / (n - 1)
    dg = np.full(n - 1, 9.0 / (n - 1))
    return g, dg


def _zdt_sqrt_front(f1: float, g: float, x1_floor: float) -> tuple[float, float, float]:
    """f2 = g - sqrt(f1 g) with its partials in f1 (floored) and g."""
    f2 = g - np.sqrt(f1 * g)
    d_f1 = -0.5 * np.sqrt(g / x1_floor)
    d_g = 1.0 - 0.5 * np.sqrt(f1 / g)
    return f2, d_f1, d_g


def _zdt1(x: np.ndarray, with_grad: bool):
    g, dg = _zdt_g_linear(x)
    f2, d1, dgf = _zdt_sqrt_front(x[0], g, max(x[0], SINGULAR_FLOOR))
    f = np.array([x[0], f2])
    if not with_grad:
        return f
    J = np.zeros((2, x.size))
    J[0, 0] = 1.0
    J[1, 0] = d1
    J[1, 1:] = dgf * dg
    return f, J


def _zdt2(x: np.ndarray, with_grad: bool):
    g, dg = _zdt_g_linear(x)
    x1 = x[0]
    f = np.array([x1, g - x1 * x1 / g])
    if not with_grad:
        return f
    J = np.zeros((2, x.size))
    J[0, 0] = 1.0
    J[1, 0] = -2.0 * x1 / g
    J[1, 1:] = (1.0 + x1 * x1 / (g * g)) * dg
    return f, J


def _zdt3(x: np.ndarray, with_grad: bool):
    g, dg = _zdt_g_linear(x)
    x1 = x[0]
    s = np.sin(10 * np.pi * x1)
    f2, d1, dgf = _zdt_sqrt_front(x1, g, max(x1, SINGULAR_FLOOR))
    f = np.array([x1, f2 - x1 * s])
    if not with_grad:
        return f
    J = np.zeros((2, x.size))
    J[0, 0] = 1.0
    J[1, 0] = d1 - s - 10 * np.pi * x1 * np.cos(10 * np.pi * x1)
    J[1, 1:] = dgf * dg
    return f, J


def _zdt4(x: np.ndarray, with_grad: bool):
    n = x.size
    t = x[1:]
    g = 1.0 + 10.0 * (n - 1) + np.sum(t * t - 10.0 * np.cos(4 * np.pi * t))
    f2, d1, dgf = _zdt_sqrt_front(x[0], g, max(x[0], SINGULAR_FLOOR))
    f = np.array([x[0], f2])
    if not with_grad:
        return f
    J = np.zeros((2, n))
    J[0, 0] = 1.0
    J[1, 0] = d1
    J[1, 1:] = dgf * (2.0 * t + 40.0 * np.pi * np.sin(4 * np.pi * t))
    return f, J


def _zdt6(x: np.ndarray, with_grad: bool):
    n = x.size
    x1 = x[0]
    e = np.exp(-4.0 * x1)
    s6 = np.sin(6 * np.pi * x1)
    f1 = 1.0 - e * s6**6
    mean_tail = x[1:].sum() / (n - 1)
    g = 1.0 + 9.0 * mean_tail**0.25
    f = np.array([f1, g - f1 * f1 / g])
    if not with_grad:
        return f
    df1 = 4.0 * e * s6**6 - e * 6.0 * s6**5 * np.cos(6 * np.pi * x1) * 6 * np.pi
    dg = 9.0 * 0.25 * max(mean_tail, SINGULAR_FLOOR) ** -0.75 / (n - 1)
    J = np.zeros((2, n))
    J[0, 0] = df1
    J[1, 0] = -2.0 * f1 * df1 / g
    J[1, 1:] = (1.0 + f1 * f1 / (g * g)) * dg
    return f, J


# DTLZ ----------------------------------------------------------------------
# f_i = scale(g) * prod_j phi_ij(x_j) over the m-1 position variables.


def _dtlz_product(phi: np.ndarray, dphi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row products of ``phi`` (m, m-1) and their partials w.r.t. each column variable."""
    prod = phi.prod(axis=1)
    m, k = phi.shape
    dprod = np.empty((m, k))
    for j in range(k):
        others = np.delete(phi, j, axis=1).prod(axis=1)
        dprod[:, j] = dphi[:, j] * others
    return prod, dprod


def _dtlz_factors(pos: np.ndarray, m: int, inner, d_inner, last, d_last):
    """phi[i, j]: inner(x_j) for j < m-1-i, last(x_j) for j == m-1-i, else 1."""
    phi = np.ones((m, m - 1))
    dphi = np.zeros((m, m - 1))
    for i in range(m):
        cut = m - 1 - i
        phi[i, :cut] = inner(pos[:cut])
        dphi[i, :cut] = d_inner(pos[:cut])
        if i > 0:
            phi[i, cut] = last(pos[cut])
            dphi[i, cut] = d_last(pos[cut])
    return phi, dphi


def _make_dtlz1(m: int):
    def fn(x: np.ndarray, with_grad: bool):
        pos, tail = x[: m - 1], x[m - 1 :]
        c = tail - 0.5
        g = 100.0 * (tail.size + np.sum(c * c - np.cos(20 * np.pi * c)))
        phi, dphi = _dtlz_factors(pos, m, lambda v: v, np.ones_like, lambda v: 1.0 - v, lambda v: -1.0)
        prod, dprod = _dtlz_product(phi, dphi)
        f = 0.5 * (1.0 + g) * prod
        if not with_grad:
            return f
        J = np.zeros((m, x.size))
        J[:, : m - 1] = 0.5 * (1.0 + g) * dprod
        dg = 100.0 * (2.0 * c + 20 * np.pi * np.sin(20 * np.pi * c))
        J[:, m - 1 :] = 0.5 * prod[:, None] * dg[None, :]
        return f, J

    return fn


def _make_dtlz2(m: int):
    half_pi = 0.5 * np.pi

    def fn(x: np.ndarray, with_grad: bool):
        pos, tail = x[: m - 1], x[m - 1 :]
        c = tail - 0.5
        g = np.sum(c * c)
        phi, dphi = _dtlz_factors(
            pos,
            m,
            lambda v: np.cos(half_pi * v),
            lambda v: -half_pi * np.sin(half_pi * v),
            lambda v: np.sin(half_pi * v),
            lambda v: half_pi * np.cos(half_pi * v),
        )
        prod, dprod = _dtlz_product(phi, dphi)
        f = (1.0 + g) * prod
        if not with_grad:
            return f
        J = np.zeros((m, x.size))
        J[:, : m - 1] = (1.0 + g) * dprod
        J[:, m - 1 :] = prod[:, None] * (2.0 * c)[None, :]
        return f, J

    return fn


def _wrap(fn) -> tuple[ObjFn, JacFn]:
    return (lambda x: fn(x, False)), (lambda x: fn(x, True))


_ZDT = {"zdt1": _zdt1, "zdt2": _zdt2, "zdt3": _zdt3, "zdt4": _zdt4, "zdt6": _zdt6}


def get_problem(name: str, n: int, m: int | None = None) -> Problem:
    """Build a benchmark by case-insensitive name. ``m`` applies to DTLZ only (default 3)."""
    key = name.lower()
    if key not in PROBLEM_NAMES:
        raise ProblemNotAvailable(f"unknown problem {name!r}; valid names: {', '.join(PROBLEM_NAMES)}")
    if key.startswith("zdt"):
        if m not in (None, 2):
            raise ValueError("ZDT problems have exactly 2 objectives")
        if n < 2:
            raise ValueError("ZDT problems need n >= 2")
        if key == "zdt4":
            bounds = BoxBounds(np.r_[0.0, np.full(n - 1, -5.0)], np.r_[1.0, np.full(n - 1, 5.0)])
        else:
            bounds = BoxBounds.unit(n)
        f, fg = _wrap(_ZDT[key])
        return Problem(key, n, 2, bounds, key == "zdt2", f, fg)
    m = 3 if m is None else m
    if m < 2 or n < m:
        raise ValueError("DTLZ needs m >= 2 and n >= m")
    f, fg = _wrap(_make_dtlz1(m) if key == "dtlz1" else _make_dtlz2(m))
    return Problem(key, n, m, BoxBounds.unit(n), True, f, fg)


# Pareto fronts ---------------------------------------------------------------


def _zdt6_f1_min() -> float:
    h = lambda t: 1.0 - np.exp(-4.0 * t) * np.sin(6 * np.pi * t) ** 6
    grid = np.linspace(0.0, 1.0, 20001)
    t0 = grid[np.argmin(h(grid))]
    res = minimize_scalar(h, bounds=(max(t0 - 1e-4, 0.0), min(t0 + 1e-4, 1.0)), method="bounded",
                          options={"xatol": 1e-14})
    return float(res.fun)


def _zdt3_front(count: int) -> np.ndarray:
    size = 4 * count
    while True:
        f1 = np.linspace(0.0, 1.0, size)
        f2 = 1.0 - np.sqrt(f1) - f1 * np.sin(10 * np.pi * f1)
        pts = np.column_stack([f1, f2])
        keep = pts[nondominated_subset(pts)]
        if len(keep) >= count:
            return keep[even_subsample(len(keep), count)]
        size *= 2


def _lattice(m: int, count: int) -> np.ndarray:
    h = 1
    while comb(h + m - 1, m - 1) < count:
        h += 1
    lat = simplex_lattice(m, h)
    return lat[even_subsample(len(lat), count)]


def reference_front(problem: Problem, count: int) -> np.ndarray:
    """``count`` points on the true Pareto front, shape (count, m)."""
    if count < 2:
        raise ValueError("count must be >= 2")
    name = problem.name
    if name in ("zdt1", "zdt4"):
        f1 = np.linspace(0.0, 1.0, count)
        return np.column_stack([f1, 1.0 - np.sqrt(f1)])
    if name == "zdt2":
        f1 = np.linspace(0.0, 1.0, count)
        return np.column_stack([f1, 1.0 - f1 * f1])
    if name == "zdt3":
        return _zdt3_front(count)
    if name == "zdt6":
        f1 = np.linspace(_zdt6_f1_min(), 1.0, count)
        return np.column_stack([f1, 1.0 - f1 * f1])
    if name == "dtlz1":
        return 0.5 * _lattice(problem.m, count)
    if name == "dtlz2":
        lat = _lattice(problem.m, count)
        return lat / np.linalg.norm(lat, axis=1, keepdims=True)
    raise ProblemNotAvailable(f"no reference front for {name!r}")
