"""Vectorised directed arithmetic on float64 arrays.

Elementwise equivalents of the scalar software directed operations: each
entry is computed by the same error-free-transform-and-nudge rule, so the
results are bitwise identical to chaining :func:`ivrepro.fp_core.dir_op`.
Entries outside the fast path's safe window (split overflow, products in the
deep subnormal range, sums at the overflow edge) are patched elementwise
through the exact scalar path.

Internal module: assumes finite inputs and a round-to-nearest ambient mode.
"""

from __future__ import annotations

import math

import numpy as np

from .fp_core import DOWN, UP, dir_op

_SPLITTER = 134217729.0                              # 2**27 + 1
_WINDOW_LO = math.ldexp(1.0, -450)
_WINDOW_HI = math.ldexp(1.0, 450)
_INF = np.inf


def _nudge(p: np.ndarray, err: np.ndarray, down: bool) -> np.ndarray:
    if down:
        return np.where(err < 0.0, np.nextafter(p, -_INF), p)
    return np.where(err > 0.0, np.nextafter(p, _INF), p)


def _patch_scalar(out: np.ndarray, mask: np.ndarray, op: str,
                  a: np.ndarray, b: np.ndarray, down: bool) -> None:
    direction = DOWN if down else UP
    for idx in zip(*np.nonzero(mask)):
        x = float(a[idx])
        y = float(b[idx])
        if op == "add" and (math.isinf(x) or math.isinf(y)):
            # Saturated accumulations stay saturated.
            out[idx] = x if math.isinf(x) else y
        else:
            out[idx] = dir_op(op, x, y, direction)


def dir_add(a: np.ndarray, b: np.ndarray, down: bool) -> np.ndarray:
    """Elementwise RD/RU of a + b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.broadcast_to(np.asarray(b, dtype=np.float64), np.broadcast_shapes(a.shape, np.shape(b)))
    a = np.broadcast_to(a, b.shape)
    s = a + b
    bb = s - a
    t = (a - (s - bb)) + (b - bb)
    out = _nudge(s, t, down)
    # Exact zero sums of nonzero operands carry a mode-dependent sign.
    zero = (s == 0.0) & ((a != 0.0) | (b != 0.0) | (np.signbit(a) != np.signbit(b)))
    unsafe = ~np.isfinite(s) | ~np.isfinite(bb) | zero
    if unsafe.any():
        out = np.array(out)
        _patch_scalar(out, unsafe, "add", a, b, down)
    return out


def dir_sub(a: np.ndarray, b: np.ndarray, down: bool) -> np.ndarray:
    return dir_add(a, np.negative(b), down)


def dir_mul(a: np.ndarray, b: np.ndarray, down: bool) -> np.ndarray:
    """Elementwise RD/RU of a * b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.broadcast_to(np.asarray(b, dtype=np.float64), np.broadcast_shapes(a.shape, np.shape(b)))
    a = np.broadcast_to(a, b.shape)
    p = a * b
    ca = _SPLITTER * a
    ah = ca - (ca - a)
    al = a - ah
    cb = _SPLITTER * b
    bh = cb - (cb - b)
    bl = b - bh
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    out = _nudge(p, err, down)
    aa = np.abs(a)
    ab = np.abs(b)
    in_window = (
        (aa >= _WINDOW_LO) & (aa <= _WINDOW_HI) & (ab >= _WINDOW_LO) & (ab <= _WINDOW_HI)
    )
    unsafe = ~in_window & (a != 0.0) & (b != 0.0)
    unsafe |= ~np.isfinite(p)
    exact_zero = (a == 0.0) | (b == 0.0)
    if exact_zero.any():
        out = np.where(exact_zero, p, out)
    if unsafe.any():
        out = np.array(out)
        _patch_scalar(out, unsafe, "mul", a, b, down)
    return out


def gemm_directed(a: np.ndarray, b: np.ndarray, down: bool, block: int) -> np.ndarray:
    """Directed matrix product: every elementary product and accumulation is
    correctly rounded toward the requested direction, in the blocked
    k-sequential order shared with the round-to-nearest product."""
    m, p = a.shape
    p2, n = b.shape
    assert p == p2
    total = None
    for k0 in range(0, p, block):
        k1 = min(k0 + block, p)
        partial = None
        for kk in range(k0, k1):
            term = dir_mul(a[:, kk, None], b[None, kk, :], down)
            partial = term if partial is None else dir_add(partial, term, down)
        total = partial if total is None else dir_add(total, partial, down)
    if total is None:
        total = np.zeros((m, n))
    return total


def gemv_directed(a: np.ndarray, x: np.ndarray, down: bool, block: int) -> np.ndarray:
    """Directed matrix-vector product with the same blocked order."""
    return gemm_directed(a, x.reshape(-1, 1), down, block).reshape(-1)
