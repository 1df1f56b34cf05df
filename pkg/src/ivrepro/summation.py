"""Floating-point and interval summation kernels across the reproducibility
spectrum: order-dependent naive folding, compensated summation, a fixed
reduction tree over contiguous chunks, and exact pre-rounded slice sums whose
partial results are bitwise invariant under any permutation of the input.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CapacityError, DomainError, PlanError
from .fp_core import PRECISION
from .interval import EndpointInterval, ep_add

__all__ = [
    "ChunkedPlan",
    "SliceSums",
    "max_slice_length",
    "sum_naive",
    "sum_kahan",
    "sum_chunked",
    "sum_prerounded",
    "sum_intervals",
]


def _as_vector(x) -> np.ndarray:
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 1:
        raise DomainError(f"expected a 1-D vector, got shape {a.shape}")
    if a.size and not np.isfinite(a).all():
        raise DomainError("summands must be finite")
    return a


def _as_order(order, n: int) -> Optional[np.ndarray]:
    if order is None:
        return None
    idx = np.asarray(order, dtype=np.intp)
    if idx.shape != (n,) or not np.array_equal(np.sort(idx), np.arange(n)):
        raise DomainError(f"order must be a permutation of 0..{n - 1}")
    return idx


def _fold_left(a: np.ndarray) -> float:
    """Strict left-to-right round-to-nearest fold."""
    if a.size == 0:
        return 0.0
    # ufunc.accumulate is sequential by definition: r[i] = r[i-1] + a[i].
    return float(np.add.accumulate(a)[-1])


@dataclass(frozen=True)
class ChunkedPlan:
    """Fixed reduction tree: K contiguous chunks whose sizes differ by <= 1.

    Boundaries depend only on (n, k), never on scheduling.
    """

    n: int
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise PlanError(f"chunk count must be positive, got {self.k}")
        if self.k > self.n:
            raise PlanError(f"chunk count {self.k} exceeds input length {self.n}")

    def boundaries(self) -> list[tuple[int, int]]:
        base, extra = divmod(self.n, self.k)
        bounds = []
        start = 0
        for i in range(self.k):
            stop = start + base + (1 if i < extra else 0)
            bounds.append((start, stop))
            start = stop
        return bounds


@dataclass(frozen=True)
class SliceSums:
    """Exact slice decomposition of a sum.

    Each entry of ``sums`` is the exact (error-free) total of one vertical
    slice of the summands, so the whole tuple is invariant under any
    permutation of the input.  ``result`` is the ordinary inexact fold of the
    slice sums; ``residual_mass`` estimates what the k slices left behind.
    """

    k: int
    shifts: tuple[float, ...]
    sums: tuple[float, ...]
    result: float
    residual_mass: float


def sum_naive(x, order=None) -> float:
    """Left-to-right fold in the given visit order; the irreproducible baseline."""
    a = _as_vector(x)
    idx = _as_order(order, a.size)
    return _fold_left(a if idx is None else a[idx])


def sum_kahan(x) -> float:
    """Compensated sequential summation with an exact running error term."""
    a = _as_vector(x)
    s = 0.0
    c = 0.0
    for v in a.tolist():
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


def sum_chunked(x, plan: ChunkedPlan, workers: int = 1, _completion_order=None) -> float:
    """Fixed-tree sum: sequential inside each chunk, sequential reduce over
    chunk index.  A pure function of (x, k) whatever the worker count.

    ``_completion_order`` lets tests evaluate chunks in an arbitrary order to
    demonstrate schedule independence; the reduce order never changes.
    """
    a = _as_vector(x)
    if plan.n != a.size:
        raise PlanError(f"plan is for n={plan.n}, input has {a.size}")
    bounds = plan.boundaries()
    partials: list[float] = [0.0] * plan.k

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, s in enumerate(pool.map(lambda se: _fold_left(a[se[0]:se[1]]), bounds)):
                partials[i] = s
    else:
        eval_order = range(plan.k) if _completion_order is None else _completion_order
        for i in eval_order:
            lo, hi = bounds[i]
            partials[i] = _fold_left(a[lo:hi])

    total = partials[0]
    for p in partials[1:]:
        total = total + p
    return float(total)


def max_slice_length() -> int:
    """Largest input length for which slice sums stay exact at p = 53."""
    # Slice width w = p - 1 - ceil(log2(n + 1)) must leave at least one bit.
    return (1 << (PRECISION - 2)) - 1


def _check_capacity(n: int) -> None:
    limit = max_slice_length()
    if n > limit:
        raise CapacityError(
            f"input length {n} exceeds exact-slice capacity {limit}", max_n=limit
        )


def sum_prerounded(x, k: int) -> SliceSums:
    """Split the summands into k exponent-aligned slices with exact sums.

    The slice anchor is a power of two large enough that extracting
    t = fl(fl(x + anchor) - anchor) is error-free to accumulate: n such
    extracted parts add with zero rounding error, so each slice sum is
    independent of evaluation order.  Residuals x - t cascade to the next
    slice.  ``result`` folds the slice sums in index order.
    """
    if k < 1:
        raise DomainError(f"slice count must be positive, got {k}")
    a = _as_vector(x)
    n = a.size
    _check_capacity(n)
    if n == 0:
        return SliceSums(k, (1.0,) * k, (0.0,) * k, 0.0, 0.0)

    scale_bits = (n + 1).bit_length() + 2
    residual = a.copy()
    shifts = []
    sums = []
    for _ in range(k):
        mx = float(np.max(np.abs(residual)))
        if mx == 0.0:
            anchor = 1.0
        else:
            _, e = math.frexp(mx)
            try:
                anchor = math.ldexp(1.0, e + scale_bits)
            except OverflowError:
                anchor = math.inf
            if not math.isfinite(anchor):
                raise OverflowError(
                    f"slice anchor overflows for max magnitude {mx!r}"
                )
        shifted = residual + anchor
        extracted = shifted - anchor
        residual = residual - extracted
        shifts.append(anchor)
        sums.append(float(np.sum(extracted)))        # exact, hence order-free

    result = sums[0]
    for s in sums[1:]:
        result = result + s
    residual_mass = float(np.sum(np.abs(residual)))
    return SliceSums(k, tuple(shifts), tuple(sums), float(result), residual_mass)


def sum_intervals(
    intervals: Sequence[EndpointInterval], order=None
) -> EndpointInterval:
    """Fold interval addition in the given order; every order encloses the
    exact sum, though widths differ."""
    xs = list(intervals)
    idx = _as_order(order, len(xs))
    if idx is not None:
        xs = [xs[i] for i in idx.tolist()]
    total = EndpointInterval.point(0.0)
    if not xs:
        return total
    total = xs[0]
    for item in xs[1:]:
        total = ep_add(total, item)
    return total
