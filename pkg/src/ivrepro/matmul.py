"""Deterministic-order matrix products, verified interval matrix products in
midpoint-radius form, and computable error bounds for floating-point
products.

The accumulation order of every dot product is a pure function of an
:class:`OrderSpec`, so results are bitwise identical across worker counts.
Two interval product algorithms are provided: a four-product scheme whose
midpoint is bracketed by directed products, and a three-product scheme whose
midpoint error is covered by the bound (n+2)*u*G + eta, with G the product of
absolute values accumulated in the same order as the midpoint product.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _dirvec
from .errors import BoundInvalidError, DomainError
from .fp_core import SMALLEST_NORMAL, UNIT_ROUNDOFF

__all__ = [
    "FpMatrix",
    "IntervalMatrixMR",
    "LoopOrder",
    "OrderSpec",
    "DEFAULT_ORDER",
    "gemm_ordered",
    "imm4",
    "imm3",
    "order_independent_bound",
    "rounding_free_bound",
    "upper_nonneg_product",
]


def _as_matrix_array(data) -> np.ndarray:
    a = np.array(data, dtype=np.float64, order="C", copy=True)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise DomainError(f"matrix must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise DomainError(f"matrix dimensions must be >= 1, got {a.shape}")
    if not np.isfinite(a).all():
        raise DomainError("matrix entries must be finite")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FpMatrix:
    """Dense row-major binary64 matrix with finite entries."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _as_matrix_array(self.data))

    @classmethod
    def identity(cls, n: int) -> "FpMatrix":
        return cls(np.eye(n))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "FpMatrix":
        return cls(np.zeros((rows, cols)))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def to_array(self) -> np.ndarray:
        return self.data.copy()

    def abs(self) -> "FpMatrix":
        return FpMatrix(np.abs(self.data))

    def same_bits(self, other: "FpMatrix") -> bool:
        return self.data.shape == other.data.shape and bool(
            (self.data.view(np.uint64) == other.data.view(np.uint64)).all()
        )

    def __repr__(self) -> str:
        return f"FpMatrix({self.rows}x{self.cols})"


@dataclass(frozen=True, eq=False)
class IntervalMatrixMR:
    """Interval matrix as a midpoint matrix and a nonnegative radius matrix."""

    mid: FpMatrix
    rad: FpMatrix

    def __post_init__(self):
        mid = self.mid if isinstance(self.mid, FpMatrix) else FpMatrix(self.mid)
        rad = self.rad if isinstance(self.rad, FpMatrix) else FpMatrix(self.rad)
        if mid.data.shape != rad.data.shape:
            raise DomainError(
                f"midpoint shape {mid.data.shape} != radius shape {rad.data.shape}"
            )
        if (rad.data < 0.0).any():
            raise DomainError("radii must be nonnegative")
        object.__setattr__(self, "mid", mid)
        object.__setattr__(self, "rad", rad)

    def __repr__(self) -> str:
        return f"IntervalMatrixMR({self.mid.rows}x{self.mid.cols})"


class LoopOrder(Enum):
    IJK = "ijk"
    IKJ = "ikj"


@dataclass(frozen=True)
class OrderSpec:
    """Fully determines the sequence of additions inside every dot product.

    Each dot product is accumulated sequentially in ascending k inside blocks
    of ``block`` terms, and the block partials are combined in ascending
    block order.  The loop order only picks the traversal of independent
    output entries, so both choices give bitwise identical results.
    """

    loop_order: LoopOrder = LoopOrder.IKJ
    block: int = 32

    def __post_init__(self):
        if not isinstance(self.loop_order, LoopOrder):
            object.__setattr__(self, "loop_order", LoopOrder(self.loop_order))
        if self.block < 1:
            raise DomainError(f"block size must be positive, got {self.block}")


DEFAULT_ORDER = OrderSpec()


def _gemm_rows(a: np.ndarray, b: np.ndarray, block: int) -> np.ndarray:
    """Round-to-nearest product rows with blocked k-sequential accumulation."""
    total = None
    p = a.shape[1]
    for k0 in range(0, p, block):
        partial = None
        for kk in range(k0, min(k0 + block, p)):
            term = np.multiply.outer(a[:, kk], b[kk, :])
            partial = term if partial is None else partial + term
        total = partial if total is None else total + partial
    return total


def _check_inner(a: FpMatrix, b: FpMatrix) -> None:
    if a.cols != b.rows:
        raise DomainError(
            f"inner dimensions disagree: {a.rows}x{a.cols} @ {b.rows}x{b.cols}"
        )


def gemm_ordered(
    a: FpMatrix, b: FpMatrix, spec: OrderSpec = DEFAULT_ORDER, workers: int = 1
) -> FpMatrix:
    """Round-to-nearest product whose per-entry accumulation order is fixed
    by ``spec``; bitwise identical for any worker count."""
    _check_inner(a, b)
    aa, bb = a.data, b.data
    m = aa.shape[0]
    if workers > 1 and m > 1:
        rows_per = -(-m // workers)
        pieces = [(r0, min(r0 + rows_per, m)) for r0 in range(0, m, rows_per)]
        out = np.empty((m, bb.shape[1]))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = [
                (r0, r1, pool.submit(_gemm_rows, aa[r0:r1], bb, spec.block))
                for r0, r1 in pieces
            ]
            for r0, r1, fut in futs:
                out[r0:r1] = fut.result()
        result = out
    elif spec.loop_order is LoopOrder.IJK:
        result = np.vstack([_gemm_rows(aa[i : i + 1], bb, spec.block) for i in range(m)])
    else:
        result = _gemm_rows(aa, bb, spec.block)
    if not np.isfinite(result).all():
        raise OverflowError("matrix product overflowed the binary64 range")
    return FpMatrix(result)


def _gemm_dir(a: np.ndarray, b: np.ndarray, down: bool, spec: OrderSpec,
              workers: int = 1) -> np.ndarray:
    m = a.shape[0]
    if workers > 1 and m > 1:
        rows_per = -(-m // workers)
        pieces = [(r0, min(r0 + rows_per, m)) for r0 in range(0, m, rows_per)]
        out = np.empty((m, b.shape[1]))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = [
                (r0, r1, pool.submit(_dirvec.gemm_directed, a[r0:r1], b, down, spec.block))
                for r0, r1 in pieces
            ]
            for r0, r1, fut in futs:
                out[r0:r1] = fut.result()
        return out
    return _dirvec.gemm_directed(a, b, down, spec.block)


def upper_nonneg_product(abs_a: FpMatrix, abs_b: FpMatrix,
                         spec: OrderSpec = DEFAULT_ORDER) -> FpMatrix:
    """Entrywise overestimate of a product of nonnegative matrices.

    Every elementary product and accumulation is rounded upward in the
    classic blocked order; valid because no subtraction ever occurs.
    """
    _check_inner(abs_a, abs_b)
    if (abs_a.data < 0.0).any() or (abs_b.data < 0.0).any():
        raise DomainError("upper_nonneg_product requires nonnegative entries")
    return FpMatrix(_gemm_dir(abs_a.data, abs_b.data, False, spec))


def imm4(a: IntervalMatrixMR, b: IntervalMatrixMR,
         spec: OrderSpec = DEFAULT_ORDER, workers: int = 1) -> IntervalMatrixMR:
    """Four-product interval matrix multiply.

    The exact midpoint product is bracketed by downward and upward directed
    products; the radius adds that bracket's spread to the upward-rounded
    radius formula (|Am| + Ar) * Br + Ar * |Bm|.
    """
    _check_inner(a.mid, b.mid)
    am, ar = a.mid.data, a.rad.data
    bm, br = b.mid.data, b.rad.data

    lo = _gemm_dir(am, bm, True, spec, workers)
    hi = _gemm_dir(am, bm, False, spec, workers)
    mid = gemm_ordered(a.mid, b.mid, spec, workers).data

    spread = np.maximum(
        _dirvec.dir_sub(mid, lo, False), _dirvec.dir_sub(hi, mid, False)
    )
    widened = _dirvec.dir_add(np.abs(am), ar, False)
    r1 = _gemm_dir(widened, br, False, spec, workers)
    r2 = _gemm_dir(ar, np.abs(bm), False, spec, workers)
    rad = _dirvec.dir_add(_dirvec.dir_add(r1, r2, False), spread, False)
    return IntervalMatrixMR(FpMatrix(mid), FpMatrix(rad))


def _shared_order_bound(n: int, gamma: np.ndarray) -> np.ndarray:
    """(n+2)*u*gamma + eta, evaluated in round to nearest."""
    return (float(n + 2) * UNIT_ROUNDOFF) * gamma + SMALLEST_NORMAL


def _require_valid_bound_dimension(n: int) -> None:
    if float(n + 2) * UNIT_ROUNDOFF >= 1.0:
        raise BoundInvalidError(f"(n+2)*u >= 1 at n={n}; bound is meaningless")


def imm3(a: IntervalMatrixMR, b: IntervalMatrixMR,
         spec: OrderSpec = DEFAULT_ORDER, workers: int = 1) -> IntervalMatrixMR:
    """Three-product interval matrix multiply.

    Midpoint C = fl(Am*Bm) and G = fl(|Am|*|Bm|) share one accumulation
    order, so |C - Am*Bm| <= fl((n+2)*u*G + eta) entrywise.  The exact radius
    is recovered from the third product (|Am|+Ar)*(|Bm|+Br) minus G, padded
    with the same bound applied to each of the three products.
    """
    _check_inner(a.mid, b.mid)
    n = a.mid.cols
    _require_valid_bound_dimension(n)
    am, ar = a.mid.data, a.rad.data
    bm, br = b.mid.data, b.rad.data

    mid = gemm_ordered(a.mid, b.mid, spec, workers).data
    gamma = gemm_ordered(FpMatrix(np.abs(am)), FpMatrix(np.abs(bm)), spec, workers).data
    widened_a = _dirvec.dir_add(np.abs(am), ar, False)
    widened_b = _dirvec.dir_add(np.abs(bm), br, False)
    outer = gemm_ordered(FpMatrix(widened_a), FpMatrix(widened_b), spec, workers).data

    bound_mid = _shared_order_bound(n, gamma)
    bound_gamma = bound_mid
    bound_outer = _shared_order_bound(n, outer)

    rad = _dirvec.dir_sub(outer, gamma, False)
    rad = _dirvec.dir_add(rad, bound_outer, False)
    rad = _dirvec.dir_add(rad, bound_gamma, False)
    rad = _dirvec.dir_add(rad, bound_mid, False)
    return IntervalMatrixMR(FpMatrix(mid), FpMatrix(rad))


def _scaling_factor(n: int, unit: float) -> float:
    """fl((1 + 3*unit)**n - 1)."""
    base = 1.0 + 3.0 * unit
    grown = base ** n
    if not math.isfinite(grown):
        raise BoundInvalidError(f"(1+3u)**n overflows at n={n}")
    return grown - 1.0


def _order_free_bound(abs_a: FpMatrix, abs_b: FpMatrix, n: int, unit: float,
                      spec: OrderSpec) -> FpMatrix:
    _check_inner(abs_a, abs_b)
    if (abs_a.data < 0.0).any() or (abs_b.data < 0.0).any():
        raise DomainError("bound formulas require nonnegative (absolute value) entries")
    if n < 1:
        raise DomainError(f"inner dimension must be positive, got {n}")
    factor = _scaling_factor(n, unit)
    pad = 1.0 + 2.0 * unit
    sa = FpMatrix(pad * abs_a.data)
    sb = FpMatrix(pad * abs_b.data)
    prod = gemm_ordered(sa, sb, spec).data
    return FpMatrix(factor * prod)


def order_independent_bound(abs_a: FpMatrix, abs_b: FpMatrix, n: int,
                            spec: OrderSpec = DEFAULT_ORDER) -> FpMatrix:
    """Entrywise bound fl(((1+3u)**n - 1) * ((1+2u)|A| * (1+2u)|B|)).

    Valid for a round-to-nearest product accumulated in any order, barring
    underflow.
    """
    return _order_free_bound(abs_a, abs_b, n, UNIT_ROUNDOFF, spec)


def rounding_free_bound(abs_a: FpMatrix, abs_b: FpMatrix, n: int,
                        spec: OrderSpec = DEFAULT_ORDER) -> FpMatrix:
    """The order-independent bound with u replaced by 2u: valid whatever
    rounding mode produced the product."""
    return _order_free_bound(abs_a, abs_b, n, 2.0 * UNIT_ROUNDOFF, spec)
