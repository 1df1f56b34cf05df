"""Independent exact-arithmetic oracles for the test suite.

Everything here avoids the library's own rounding paths: comparisons and
reference values come from integer or Fraction arithmetic plus
math.nextafter.  Dyadic comparisons work on (mantissa, exponent) integer
pairs so the bulk property tests stay fast.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

__all__ = [
    "frac",
    "rn_ref",
    "rd_ref",
    "ru_ref",
    "scaled",
    "cmp_float_vs_sum",
    "cmp_float_vs_prod",
    "cmp_float_vs_quot",
    "interval_product_oracle",
    "rational_solve",
    "poly_range",
    "exact_condition",
    "hausdorff_exact",
]


def frac(x) -> Fraction:
    return Fraction(float(x))


def rn_ref(q: Fraction) -> float:
    """Round-to-nearest reference via CPython's correctly rounded division."""
    try:
        return q.numerator / q.denominator
    except OverflowError:
        return math.inf if q > 0 else -math.inf


def rd_ref(q: Fraction) -> float:
    f = rn_ref(q)
    if math.isinf(f):
        f = math.copysign(1.7976931348623157e308, f) if f > 0 else f
        if f == -math.inf:
            return f
    if Fraction(f) > q:
        f = math.nextafter(f, -math.inf)
    return f


def ru_ref(q: Fraction) -> float:
    f = rn_ref(q)
    if math.isinf(f):
        if f > 0:
            return f
        f = -1.7976931348623157e308
    if Fraction(f) < q:
        f = math.nextafter(f, math.inf)
    return f


def scaled(x: float) -> tuple[int, int]:
    """x == m * 2**e with integer m."""
    n, d = float(x).as_integer_ratio()
    return n, 1 - d.bit_length()


def _cmp_scaled(m1: int, e1: int, m2: int, e2: int) -> int:
    """Sign of m1*2**e1 - m2*2**e2."""
    g = e1 - e2
    if g >= 0:
        d = (m1 << g) - m2
    else:
        d = m1 - (m2 << -g)
    return (d > 0) - (d < 0)


def cmp_float_vs_sum(f: float, a: float, b: float) -> int:
    """Sign of f - (a + b), exactly."""
    if math.isinf(f):
        return 1 if f > 0 else -1
    mf, ef = scaled(f)
    ma, ea = scaled(a)
    mb, eb = scaled(b)
    g = min(ea, eb)
    return _cmp_scaled(mf, ef, (ma << (ea - g)) + (mb << (eb - g)), g)


def cmp_float_vs_prod(f: float, a: float, b: float) -> int:
    """Sign of f - a * b, exactly."""
    if math.isinf(f):
        return 1 if f > 0 else -1
    mf, ef = scaled(f)
    ma, ea = scaled(a)
    mb, eb = scaled(b)
    return _cmp_scaled(mf, ef, ma * mb, ea + eb)


def cmp_float_vs_quot(f: float, a: float, b: float) -> int:
    """Sign of f - a / b, exactly (b nonzero)."""
    if math.isinf(f):
        return 1 if f > 0 else -1
    na, da = float(a).as_integer_ratio()
    nb, db = float(b).as_integer_ratio()
    nf, df = float(f).as_integer_ratio()
    # f - a/b = (nf*nb*da - na*db*df) / (df*nb*da); denominator sign is sign(nb)
    lhs = nf * nb * da - na * db * df
    if nb < 0:
        lhs = -lhs
    return (lhs > 0) - (lhs < 0)


def interval_product_oracle(am, ar, bm, br):
    """Exact rational endpoint matrices of an interval matrix product."""
    rows, inner = am.shape
    cols = bm.shape[1]
    a_lo = [[Fraction(am[i, k]) - Fraction(ar[i, k]) for k in range(inner)] for i in range(rows)]
    a_hi = [[Fraction(am[i, k]) + Fraction(ar[i, k]) for k in range(inner)] for i in range(rows)]
    b_lo = [[Fraction(bm[k, j]) - Fraction(br[k, j]) for j in range(cols)] for k in range(inner)]
    b_hi = [[Fraction(bm[k, j]) + Fraction(br[k, j]) for j in range(cols)] for k in range(inner)]
    los = [[Fraction(0)] * cols for _ in range(rows)]
    his = [[Fraction(0)] * cols for _ in range(rows)]
    for i in range(rows):
        for j in range(cols):
            lo = Fraction(0)
            hi = Fraction(0)
            for k in range(inner):
                c = (
                    a_lo[i][k] * b_lo[k][j],
                    a_lo[i][k] * b_hi[k][j],
                    a_hi[i][k] * b_lo[k][j],
                    a_hi[i][k] * b_hi[k][j],
                )
                lo += min(c)
                hi += max(c)
            los[i][j] = lo
            his[i][j] = hi
    return los, his


def rational_solve(a, b) -> list[Fraction]:
    """Exact solution of a square system by Gauss-Jordan with partial pivoting."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    n = b.size
    m = [
        [Fraction(float(a[i, j])) for j in range(n)] + [Fraction(float(b[i]))]
        for i in range(n)
    ]
    for c in range(n):
        piv = max(range(c, n), key=lambda r: abs(m[r][c]))
        if m[piv][c] == 0:
            raise ZeroDivisionError("singular matrix in rational solve")
        m[c], m[piv] = m[piv], m[c]
        for r in range(n):
            if r != c and m[r][c]:
                f = m[r][c] / m[c][c]
                m[r] = [m[r][t] - f * m[c][t] for t in range(n + 1)]
    return [m[i][n] / m[i][i] for i in range(n)]


def poly_range(f_frac, crit_points, lo: float, hi: float) -> tuple[Fraction, Fraction]:
    """Exact range of a polynomial over [lo, hi] given its rational critical
    points (roots of the derivative)."""
    flo, fhi = Fraction(lo), Fraction(hi)
    cands = [f_frac(flo), f_frac(fhi)]
    for c in crit_points:
        c = Fraction(c)
        if flo <= c <= fhi:
            cands.append(f_frac(c))
    return min(cands), max(cands)


def exact_condition(x) -> Fraction:
    """sum|x| / |sum x| with exact arithmetic; 1 when the sum is zero."""
    total = Fraction(0)
    mass = Fraction(0)
    for v in np.asarray(x, dtype=np.float64).tolist():
        fv = Fraction(v)
        total += fv
        mass += abs(fv)
    return mass / abs(total) if total else Fraction(1)


def hausdorff_exact(enc_lo: float, enc_hi: float, lo: Fraction, hi: Fraction) -> Fraction:
    """max(inf(exact) - inf(enclosure), sup(enclosure) - sup(exact)) for a
    nested enclosure, in exact arithmetic."""
    return max(lo - Fraction(enc_lo), Fraction(enc_hi) - hi, Fraction(0))
