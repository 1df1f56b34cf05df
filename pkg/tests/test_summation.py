"""Summation kernels: worked examples, reproducibility contracts, slice
exactness, and accuracy ordering on ill-conditioned data."""

import math
from fractions import Fraction

import numpy as np
import pytest

from ivrepro import summation as sm
from ivrepro.audit import gen_ill_conditioned
from ivrepro.errors import CapacityError, DomainError, PlanError
from ivrepro.fp_core import exact_sum
from ivrepro.interval import EndpointInterval
from ivrepro.summation import ChunkedPlan

TRIPLE = [1.0, 2.0**100, -(2.0**100)]


# ---------------------------------------------------------------------------
# naive
# ---------------------------------------------------------------------------


def test_naive_association_example():
    assert sm.sum_naive(TRIPLE, (0, 1, 2)) == 0.0
    assert sm.sum_naive(TRIPLE, (1, 2, 0)) == 1.0
    assert sm.sum_naive([]) == 0.0


def test_naive_matches_scalar_fold(rng):
    x = rng.standard_normal(257)
    acc = 0.0
    for v in x.tolist():
        acc = acc + v
    assert sm.sum_naive(x) == acc


def test_naive_order_validation():
    with pytest.raises(DomainError):
        sm.sum_naive([1.0, 2.0], (0, 0))
    with pytest.raises(DomainError):
        sm.sum_naive([1.0, math.nan])


# ---------------------------------------------------------------------------
# kahan
# ---------------------------------------------------------------------------


def test_kahan_examples():
    assert exact_sum([1.0, 2.0**-53, 2.0**-53]) == Fraction(1) + Fraction(2) ** -52
    assert sm.sum_kahan([1.0, 2.0**-53, 2.0**-53]) == 1 + 2.0**-52
    assert sm.sum_naive([1.0, 2.0**-53, 2.0**-53]) == 1.0
    assert sm.sum_kahan([2.0**100, -(2.0**100), 1.0]) == 1.0
    assert sm.sum_kahan([-7.25]) == -7.25
    assert sm.sum_kahan([]) == 0.0


def test_kahan_beats_naive_on_cancellation(rng):
    x, _ = gen_ill_conditioned(rng, 400, 1e14)
    exact = exact_sum(x.tolist())
    err_k = abs(Fraction(sm.sum_kahan(x)) - exact)
    err_n = abs(Fraction(sm.sum_naive(x)) - exact)
    assert err_k <= err_n


# ---------------------------------------------------------------------------
# chunked
# ---------------------------------------------------------------------------


def test_plan_boundaries():
    plan = ChunkedPlan(10, 3)
    assert plan.boundaries() == [(0, 4), (4, 7), (7, 10)]
    assert ChunkedPlan(4, 4).boundaries() == [(0, 1), (1, 2), (2, 3), (3, 4)]
    with pytest.raises(PlanError):
        ChunkedPlan(3, 4)
    with pytest.raises(PlanError):
        ChunkedPlan(3, 0)


def test_chunked_degenerate_plans(rng):
    x = rng.standard_normal(100)
    assert sm.sum_chunked(x, ChunkedPlan(100, 1)) == sm.sum_naive(x)
    assert sm.sum_chunked(x, ChunkedPlan(100, 100)) == sm.sum_naive(x)


def test_chunked_worked_example():
    x = [1.0, 2.0**100, -(2.0**100), 1.0]
    got = sm.sum_chunked(x, ChunkedPlan(4, 2))
    assert got == 0.0
    assert exact_sum(x) == 2           # reproducible, not accurate


def test_chunked_schedule_independent(rng):
    x = rng.standard_normal(10_001)
    plan = ChunkedPlan(x.size, 17)
    base = sm.sum_chunked(x, plan)
    for w in (2, 4, 8):
        assert sm.sum_chunked(x, plan, workers=w) == base
    for _ in range(25):
        order = rng.permutation(17).tolist()
        assert sm.sum_chunked(x, plan, _completion_order=order) == base


def test_chunked_length_mismatch(rng):
    with pytest.raises(PlanError):
        sm.sum_chunked(rng.standard_normal(5), ChunkedPlan(6, 2))


# ---------------------------------------------------------------------------
# prerounded
# ---------------------------------------------------------------------------


def test_prerounded_all_ones():
    r = sm.sum_prerounded([1.0] * 1000, 1)
    assert r.sums == (1000.0,)
    assert r.result == 1000.0
    assert r.residual_mass == 0.0


def test_prerounded_dominant_cancellation():
    r = sm.sum_prerounded(TRIPLE, 2)
    assert r.sums[0] == 0.0            # the dominant slice cancels exactly
    assert r.result == 1.0


def test_prerounded_slice_sums_are_exact(rng):
    x = np.concatenate(
        [rng.standard_normal(2000) * 1e10, rng.standard_normal(2000) * 1e-6]
    )
    r = sm.sum_prerounded(x, 3)
    residual = x.copy()
    for k in range(3):
        extracted = (residual + r.shifts[k]) - r.shifts[k]
        assert exact_sum(extracted.tolist()) == Fraction(r.sums[k])
        residual = residual - extracted
    assert math.isclose(float(np.sum(np.abs(residual))), r.residual_mass)


def test_prerounded_permutation_invariance(rng):
    x, _ = gen_ill_conditioned(rng, 5000, 1e12)
    base = sm.sum_prerounded(x, 2)
    for _ in range(100):
        perm = rng.permutation(x.size)
        got = sm.sum_prerounded(x[perm], 2)
        assert got.sums == base.sums
        assert got.shifts == base.shifts
        assert got.result == base.result


def test_prerounded_capacity_and_validation():
    assert sm.max_slice_length() == 2**51 - 1
    with pytest.raises(CapacityError) as err:
        sm._check_capacity(2**51)
    assert err.value.max_n == 2**51 - 1
    with pytest.raises(DomainError):
        sm.sum_prerounded([1.0], 0)


def test_prerounded_anchor_overflow():
    with pytest.raises(OverflowError):
        sm.sum_prerounded([2.0**1020, -(2.0**1020), 1.0], 2)


def test_prerounded_empty_and_zero():
    r = sm.sum_prerounded([], 3)
    assert r.result == 0.0 and math.copysign(1.0, r.result) == 1.0
    r = sm.sum_prerounded([0.0, 0.0], 2)
    assert r.result == 0.0


def test_prerounded_accuracy_vs_naive(rng):
    """On cancellation-heavy inputs two slices beat the naive fold on at
    least 95 percent of trials (an observation, not a guarantee)."""
    wins = 0
    trials = 200
    for _ in range(trials):
        cond = float(10.0 ** rng.uniform(8, 16))
        x, _ = gen_ill_conditioned(rng, 256, cond)
        exact = exact_sum(x.tolist())
        err_pre = abs(Fraction(sm.sum_prerounded(x, 2).result) - exact)
        err_naive = abs(Fraction(sm.sum_naive(x)) - exact)
        if err_pre <= err_naive:
            wins += 1
    assert wins >= 0.95 * trials


# ---------------------------------------------------------------------------
# interval summation
# ---------------------------------------------------------------------------


def test_interval_sum_both_association_orders():
    ivs = [
        EndpointInterval(-(2.0**-53), 2.0**-52),
        EndpointInterval(-1.0, 2.0**-52),
        EndpointInterval(1.0, 2.0),
    ]
    b1 = sm.sum_intervals(ivs, (0, 1, 2))
    b2 = sm.sum_intervals(ivs, (1, 2, 0))
    assert b1.lo == -(2.0**-52) and b1.hi == 2 + 2.0**-51
    assert b2.lo == -(2.0**-53) and b2.hi == 2 + 2.0**-50


def test_interval_sum_encloses_exact(rng):
    vals = rng.standard_normal(40)
    ivs = [EndpointInterval(v, v) for v in vals.tolist()]
    exact = exact_sum(vals.tolist())
    for _ in range(50):
        got = sm.sum_intervals(ivs, rng.permutation(40))
        assert Fraction(got.lo) <= exact <= Fraction(got.hi)
    assert sm.sum_intervals([]).same_bits(EndpointInterval(0.0, 0.0))
