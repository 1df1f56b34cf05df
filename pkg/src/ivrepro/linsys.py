"""Verified square linear-system solving.

LU factorisation with partial pivoting gives an approximate solution, the
residual is accumulated in double-double so cancellation does not destroy
it, iterative refinement polishes the iterate, and a contraction argument
around an approximate inverse turns the final iterate into a certified
interval enclosure of the exact solution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.linalg

from . import _dirvec
from .errors import DivergenceError, DomainError, SingularError
from .fp_core import DOWN, UP, dir_op, exact_dot, round_down, round_up
from .interval import EndpointInterval
from .matmul import DEFAULT_ORDER, FpMatrix, gemm_ordered, order_independent_bound

__all__ = [
    "DoubleDouble",
    "LuFactors",
    "VerifiedSolution",
    "lu_factor",
    "lu_solve_approx",
    "residual_dd",
    "refine",
    "verify_enclosure",
    "solve_verified",
]


@dataclass(frozen=True)
class DoubleDouble:
    """Unevaluated sum hi + lo with hi = fl(hi + lo); about 106 significand bits."""

    hi: float
    lo: float

    def __post_init__(self):
        if not (math.isfinite(self.hi) and math.isfinite(self.lo)):
            raise DomainError("double-double components must be finite")
        if self.hi != self.hi + self.lo:
            raise DomainError(f"unnormalised pair ({self.hi!r}, {self.lo!r})")

    def __float__(self) -> float:
        return self.hi


def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    if abs(a) >= abs(b):
        z = s - a
        return s, b - z
    z = s - b
    return s, a - z


def _two_prod(a: float, b: float) -> tuple[float, float]:
    p = a * b
    c = 134217729.0 * a
    ah = c - (c - a)
    al = a - ah
    c = 134217729.0 * b
    bh = c - (c - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_add(hi: float, lo: float, yhi: float, ylo: float) -> tuple[float, float]:
    s, e = _two_sum(hi, yhi)
    t, f = _two_sum(lo, ylo)
    e += t
    s, e = _two_sum(s, e)
    e += f
    s, e = _two_sum(s, e)
    return s, e


def _as_square_matrix(a) -> np.ndarray:
    m = a.data if isinstance(a, FpMatrix) else np.asarray(a, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise DomainError("matrix entries must be finite")
    return np.array(m, dtype=np.float64)


def _as_vector(b, n: int) -> np.ndarray:
    v = np.asarray(b, dtype=np.float64).reshape(-1)
    if v.shape != (n,):
        raise DomainError(f"vector length {v.shape} does not match system size {n}")
    if not np.isfinite(v).all():
        raise DomainError("vector entries must be finite")
    return v.copy()


@dataclass(frozen=True)
class LuFactors:
    """Retained LU factorisation, reusable across refinement steps."""

    lu: np.ndarray
    piv: np.ndarray

    @property
    def n(self) -> int:
        return self.lu.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return scipy.linalg.lu_solve((self.lu, self.piv), rhs)


def lu_factor(a) -> LuFactors:
    m = _as_square_matrix(a)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu, piv = scipy.linalg.lu_factor(m)
    if (np.diag(lu) == 0.0).any():
        raise SingularError("zero pivot after partial pivoting")
    return LuFactors(lu, piv)


def lu_solve_approx(a, b, factors: Optional[LuFactors] = None) -> np.ndarray:
    """Approximate solution of a x = b via LU with partial pivoting."""
    m = _as_square_matrix(a)
    v = _as_vector(b, m.shape[0])
    f = factors if factors is not None else lu_factor(m)
    return f.solve(v)


def residual_dd(a, x, b) -> list[DoubleDouble]:
    """b - a @ x accumulated componentwise in double-double precision."""
    m = _as_square_matrix(a)
    n = m.shape[0]
    xv = _as_vector(x, n)
    bv = _as_vector(b, n)
    rows = m.tolist()
    xs = xv.tolist()
    out = []
    for i in range(n):
        hi, lo = bv[i], 0.0
        row = rows[i]
        for j in range(n):
            ph, pl = _two_prod(row[j], xs[j])
            hi, lo = _dd_add(hi, lo, -ph, -pl)
        out.append(DoubleDouble(hi, lo))
    return out


def refine(a, b, x0, max_steps: int, factors: Optional[LuFactors] = None
           ) -> tuple[np.ndarray, int]:
    """Iterative refinement with a double-double residual.

    Stops when the correction norm no longer decreases or after max_steps;
    raises DivergenceError (carrying the best iterate) when the correction
    norm grows twice in a row.
    """
    m = _as_square_matrix(a)
    n = m.shape[0]
    x = _as_vector(x0, n)
    bv = _as_vector(b, n)
    if max_steps < 0:
        raise DomainError(f"max_steps must be nonnegative, got {max_steps}")
    f = factors if factors is not None else lu_factor(m)
    prev_norm = math.inf
    growth = 0
    steps = 0
    best = x.copy()
    for _ in range(max_steps):
        r = residual_dd(m, x, bv)
        rf = np.array([dd.hi for dd in r])
        e = f.solve(rf)
        norm_e = float(np.max(np.abs(e))) if n else 0.0
        if norm_e > prev_norm:
            # tolerate one growing correction; two in a row is divergence
            growth += 1
            if growth >= 2:
                raise DivergenceError(
                    "refinement corrections growing", best=best, steps_used=steps
                )
            x = x + e
            steps += 1
            prev_norm = norm_e
            continue
        growth = 0
        x = x + e
        steps += 1
        best = x.copy()
        if norm_e == 0.0 or norm_e == prev_norm:
            break
        prev_norm = norm_e
    return x, steps


@dataclass(frozen=True)
class VerifiedSolution:
    """Interval enclosure of the solution; converged means certified."""

    x: tuple[EndpointInterval, ...]
    iterations: int
    converged: bool


def _abs_upper(diff_down: np.ndarray, diff_up: np.ndarray) -> np.ndarray:
    return np.maximum(np.abs(diff_down), np.abs(diff_up))


def verify_enclosure(a, b, x_approx, factors: Optional[LuFactors] = None,
                     iterations: int = 0) -> VerifiedSolution:
    """Certified interval enclosure around an approximate solution.

    Builds an approximate inverse from the LU factors, encloses the residual
    with directed dot products, and bounds the contraction norm of
    (I - R @ A) from above; if that bound is below one, every exact solution
    component provably lies in the returned interval.
    """
    m = _as_square_matrix(a)
    n = m.shape[0]
    xv = _as_vector(x_approx, n)
    bv = _as_vector(b, n)
    f = factors if factors is not None else lu_factor(m)
    block = DEFAULT_ORDER.block

    # Residual enclosure: correctly rounded directed dot products, one ulp
    # wide.  A directed fold of the raw terms would be ~n ulp of the largest
    # term instead, which the approximate inverse amplifies by ||R||.
    r_lo = np.empty(n)
    r_hi = np.empty(n)
    rows = m.tolist()
    xs = xv.tolist()
    for i in range(n):
        exact = Fraction(bv[i]) - exact_dot(rows[i], xs)
        r_lo[i] = round_down(exact)
        r_hi[i] = round_up(exact)

    # Approximate inverse and a certified bound on ||I - R A||_inf.
    r_mat = f.solve(np.eye(n))
    prod = gemm_ordered(FpMatrix(r_mat), FpMatrix(m)).data
    eye = np.eye(n)
    d_up = _abs_upper(
        _dirvec.dir_sub(eye, prod, True), _dirvec.dir_sub(eye, prod, False)
    )
    err = order_independent_bound(FpMatrix(np.abs(r_mat)), FpMatrix(np.abs(m)), n).data
    slack = _dirvec.dir_add(d_up, err, False)
    row_sums = _dirvec.gemv_directed(slack, np.ones(n), False, block)
    alpha = float(np.max(row_sums))

    if not (alpha < 1.0) or not math.isfinite(alpha):
        whole = tuple(EndpointInterval(-math.inf, math.inf) for _ in range(n))
        return VerifiedSolution(whole, iterations, False)

    # z = R @ [r_lo, r_hi], enclosed with directed endpoint accumulation.
    z_lo = np.zeros(n)
    z_hi = np.zeros(n)
    for k in range(n):
        col = r_mat[:, k]
        t_lo = np.minimum(
            _dirvec.dir_mul(col, r_lo[k], True), _dirvec.dir_mul(col, r_hi[k], True)
        )
        t_hi = np.maximum(
            _dirvec.dir_mul(col, r_lo[k], False), _dirvec.dir_mul(col, r_hi[k], False)
        )
        z_lo = _dirvec.dir_add(z_lo, t_lo, True)
        z_hi = _dirvec.dir_add(z_hi, t_hi, False)

    z_norm = float(np.max(np.maximum(np.abs(z_lo), np.abs(z_hi)))) if n else 0.0
    shrink = dir_op("sub", 1.0, alpha, DOWN)
    mu = dir_op("div", z_norm, shrink, UP)
    pad = dir_op("mul", alpha, mu, UP)

    intervals = []
    for i in range(n):
        lo = dir_op("add", xv[i], dir_op("sub", z_lo[i], pad, DOWN), DOWN)
        hi = dir_op("add", xv[i], dir_op("add", z_hi[i], pad, UP), UP)
        intervals.append(EndpointInterval(lo, hi))
    return VerifiedSolution(tuple(intervals), iterations, True)


def solve_verified(a, b, max_steps: int = 10) -> VerifiedSolution:
    """Factor, refine, and certify in one call."""
    m = _as_square_matrix(a)
    f = lu_factor(m)
    x0 = lu_solve_approx(m, b, factors=f)
    try:
        x, steps = refine(m, b, x0, max_steps, factors=f)
    except DivergenceError as exc:
        x, steps = exc.best, exc.steps_used
    return verify_enclosure(m, b, x, factors=f, iterations=steps)
