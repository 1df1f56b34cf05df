"""Expression DAG evaluation, differentiation, and enclosure convergence."""

import math
from fractions import Fraction

import numpy as np
import pytest

from ivrepro import expressions as ex
from ivrepro.errors import DomainError, UnsupportedExpression
from ivrepro.interval import EndpointInterval

import oracles

X = ex.var()

# Fixed polynomial suite: expression, rational evaluator, derivative's
# rational roots, and the centre to evaluate around.
POLY_SUITE = [
    (
        "x^2 - x",
        ex.square(X) - X,
        lambda t: t * t - t,
        [Fraction(1, 2)],
        0.5,
    ),
    (
        "x (1 - x)",
        X * (1 - X),
        lambda t: t * (1 - t),
        [Fraction(1, 2)],
        0.5,
    ),
    (
        "x^3 - 2 x^2 + x",
        X * ex.square(X) - 2 * ex.square(X) + X,
        lambda t: t**3 - 2 * t * t + t,
        [Fraction(1, 3), Fraction(1)],
        1.0,
    ),
    (
        "x^2 + x - 2",
        ex.square(X) + X - 2,
        lambda t: t * t + t - 2,
        [Fraction(-1, 2)],
        -0.5,
    ),
    (
        "x^4 - 2 x^2",
        ex.square(ex.square(X)) - 2 * ex.square(X),
        lambda t: t**4 - 2 * t * t,
        [Fraction(-1), Fraction(0), Fraction(1)],
        1.0,
    ),
]


def test_dependency_example():
    box = EndpointInterval(-1.0, 2.0)
    decorrelated = X * X
    squared = ex.square(X)
    assert ex.enclose_range(decorrelated, box).same_bits(EndpointInterval(-2.0, 4.0))
    assert ex.enclose_range(squared, box).same_bits(EndpointInterval(0.0, 4.0))


def test_constant_and_point_eval():
    f = 2 * X + 1
    out = ex.eval_interval(f, EndpointInterval(3.0, 3.0))
    assert out.same_bits(EndpointInterval(7.0, 7.0))
    with pytest.raises(DomainError):
        ex.const(math.inf)


def test_unsupported_nodes():
    class Alien(ex.Expression):
        pass

    with pytest.raises(UnsupportedExpression):
        ex.eval_interval(Alien(), EndpointInterval(0, 1))
    with pytest.raises(UnsupportedExpression):
        ex.differentiate(Alien())
    with pytest.raises(ValueError):
        ex.enclose_range(X, EndpointInterval(0, 1), method="taylor-3")


def test_mean_value_needs_bounded_input():
    with pytest.raises(DomainError):
        ex.enclose_range(X, EndpointInterval(0.0, math.inf), method=ex.MEAN_VALUE)


def test_differentiate_products():
    # d/dx of x * x * x is 3 x^2: check at several points
    f = X * X * X
    df = ex.differentiate(f)
    for t in (-2.0, 0.25, 3.0):
        got = ex.eval_interval(df, EndpointInterval(t, t))
        want = 3 * t * t
        assert got.lo <= want <= got.hi
        assert got.hi - got.lo <= 4 * math.ulp(abs(want) + 1)


def test_enclosures_contain_exact_range(rng):
    for _, expr, f_frac, crits, centre in POLY_SUITE:
        for _ in range(60):
            r = float(10.0 ** rng.uniform(-6, -0.5))
            box = EndpointInterval(centre - r, centre + r)
            lo, hi = oracles.poly_range(f_frac, crits, box.lo, box.hi)
            for method in (ex.NATURAL, ex.MEAN_VALUE):
                enc = ex.enclose_range(expr, box, method)
                assert Fraction(enc.lo) <= lo, (method, r)
                assert Fraction(enc.hi) >= hi, (method, r)


def _log_slope(ks, qs):
    xs = np.array([-k for k in ks], dtype=float)
    ys = np.log2(np.array(qs, dtype=float))
    return float(np.polyfit(xs, ys, 1)[0])


def measure_slopes(expr, f_frac, crits, centre, ks=range(4, 21)):
    nat, mv = [], []
    for k in ks:
        r = 2.0**-k
        box = EndpointInterval(centre - r, centre + r)
        lo, hi = oracles.poly_range(f_frac, crits, box.lo, box.hi)
        enc_n = ex.enclose_range(expr, box, ex.NATURAL)
        enc_m = ex.enclose_range(expr, box, ex.MEAN_VALUE)
        nat.append(float(oracles.hausdorff_exact(enc_n.lo, enc_n.hi, lo, hi)))
        mv.append(float(oracles.hausdorff_exact(enc_m.lo, enc_m.hi, lo, hi)))
    return _log_slope(list(ks), nat), _log_slope(list(ks), mv)


def test_convergence_orders():
    """Natural extension converges linearly in the radius, the mean-value
    form quadratically: log-log slopes on the fixed polynomial suite."""
    for name, expr, f_frac, crits, centre in POLY_SUITE:
        slope_nat, slope_mv = measure_slopes(expr, f_frac, crits, centre)
        assert slope_nat >= 0.9, (name, slope_nat)
        assert slope_mv >= 1.8, (name, slope_mv)
