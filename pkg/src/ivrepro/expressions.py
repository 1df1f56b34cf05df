"""Single-variable expression DAGs and interval range enclosure.

Supported node kinds: variable, constant, +, -, *, and square.  The two
evaluators are the straightforward recursive interval extension and the
first-order centred form f(m) + f'(X) * (X - m); the centred form converges
quadratically in the input radius where the natural extension is linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, UnsupportedExpression
from .interval import EndpointInterval, ep_add, ep_mul, ep_square, ep_sub

__all__ = [
    "Expression",
    "Var",
    "Const",
    "Add",
    "Sub",
    "Mul",
    "Square",
    "var",
    "const",
    "square",
    "differentiate",
    "eval_interval",
    "enclose_range",
    "NATURAL",
    "MEAN_VALUE",
]

NATURAL = "natural"
MEAN_VALUE = "mean-value"


class Expression:
    """Base node.  Operators build shared DAGs, not trees."""

    def __add__(self, other):
        return Add(self, _wrap(other))

    def __radd__(self, other):
        return Add(_wrap(other), self)

    def __sub__(self, other):
        return Sub(self, _wrap(other))

    def __rsub__(self, other):
        return Sub(_wrap(other), self)

    def __mul__(self, other):
        return Mul(self, _wrap(other))

    def __rmul__(self, other):
        return Mul(_wrap(other), self)

    def __neg__(self):
        return Sub(Const(0.0), self)


@dataclass(frozen=True, eq=False)
class Var(Expression):
    pass


@dataclass(frozen=True, eq=False)
class Const(Expression):
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v):
            raise DomainError(f"constant must be finite, got {v!r}")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True, eq=False)
class Add(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True, eq=False)
class Sub(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True, eq=False)
class Mul(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True, eq=False)
class Square(Expression):
    operand: Expression


def _wrap(x) -> Expression:
    if isinstance(x, Expression):
        return x
    return Const(float(x))


def var() -> Var:
    return Var()


def const(value: float) -> Const:
    return Const(value)


def square(e) -> Square:
    return Square(_wrap(e))


def eval_interval(expr: Expression, x: EndpointInterval) -> EndpointInterval:
    """Natural interval extension, memoised over shared subexpressions."""
    memo: dict[int, EndpointInterval] = {}

    def go(node: Expression) -> EndpointInterval:
        key = id(node)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(node, Var):
            out = x
        elif isinstance(node, Const):
            out = EndpointInterval.point(node.value)
        elif isinstance(node, Add):
            out = ep_add(go(node.left), go(node.right))
        elif isinstance(node, Sub):
            out = ep_sub(go(node.left), go(node.right))
        elif isinstance(node, Mul):
            out = ep_mul(go(node.left), go(node.right))
        elif isinstance(node, Square):
            out = ep_square(go(node.operand))
        else:
            raise UnsupportedExpression(f"unsupported node kind: {type(node).__name__}")
        memo[key] = out
        return out

    return go(expr)


def differentiate(expr: Expression) -> Expression:
    """Forward symbolic derivative with respect to the single variable."""
    memo: dict[int, Expression] = {}

    def go(node: Expression) -> Expression:
        key = id(node)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(node, Var):
            out: Expression = Const(1.0)
        elif isinstance(node, Const):
            out = Const(0.0)
        elif isinstance(node, Add):
            out = Add(go(node.left), go(node.right))
        elif isinstance(node, Sub):
            out = Sub(go(node.left), go(node.right))
        elif isinstance(node, Mul):
            out = Add(Mul(go(node.left), node.right), Mul(node.left, go(node.right)))
        elif isinstance(node, Square):
            out = Mul(Mul(Const(2.0), node.operand), go(node.operand))
        else:
            raise UnsupportedExpression(f"unsupported node kind: {type(node).__name__}")
        memo[key] = out
        return out

    return go(expr)


def enclose_range(
    expr: Expression, x: EndpointInterval, method: str = NATURAL
) -> EndpointInterval:
    """Enclosure of the exact range of expr over x.

    ``method`` is "natural" or "mean-value".  The mean-value form needs a
    bounded input (a finite midpoint).
    """
    if method == NATURAL:
        return eval_interval(expr, x)
    if method != MEAN_VALUE:
        raise ValueError(f"method must be {NATURAL!r} or {MEAN_VALUE!r}, got {method!r}")
    if not x.is_bounded():
        raise DomainError("mean-value form needs a bounded input interval")
    m = x.lo / 2.0 + x.hi / 2.0
    centre = EndpointInterval.point(m)
    f_at_m = eval_interval(expr, centre)             # point eval, outward rounded
    slope = eval_interval(differentiate(expr), x)
    return ep_add(f_at_m, ep_mul(slope, ep_sub(x, centre)))
