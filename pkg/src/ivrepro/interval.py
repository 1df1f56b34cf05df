"""Interval types and arithmetic with the inclusion property.

Endpoint form ``[lo, hi]`` and midpoint-radius form ``<m; r>`` over binary64,
with all outward rounding routed through :func:`ivrepro.fp_core.dir_op`.
Every operation returns an interval that contains the exact result set.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Union

from .errors import (
    BisectError,
    ContainsZeroError,
    DomainError,
    EmptyIntervalError,
    WidenedToReals,
)
from .fp_core import DOWN, UP, dir_op

__all__ = [
    "EndpointInterval",
    "MidRadInterval",
    "EMPTY",
    "ep_add",
    "ep_sub",
    "ep_mul",
    "ep_div",
    "ep_square",
    "intersect",
    "to_endpoints",
    "to_midrad",
    "hausdorff_q",
    "bisect",
    "format_interval",
    "format_midrad",
    "parse_literal",
]


class _EmptyInterval:
    """Distinguished empty interval (never represented as [NaN, NaN])."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EMPTY"

    def is_empty(self) -> bool:
        return True


EMPTY = _EmptyInterval()


def _check_endpoint(x: float, name: str) -> float:
    x = float(x)
    if math.isnan(x):
        raise DomainError(f"{name} endpoint is NaN")
    return x


@dataclass(frozen=True)
class EndpointInterval:
    """Closed interval [lo, hi]; unbounded sides use -inf / +inf."""

    lo: float
    hi: float

    def __post_init__(self):
        lo = _check_endpoint(self.lo, "lower")
        hi = _check_endpoint(self.hi, "upper")
        if not lo <= hi:
            raise DomainError(f"invalid interval: lo={lo!r} > hi={hi!r}")
        if lo == math.inf or hi == -math.inf:
            raise DomainError("interval must contain at least one real point")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x: float) -> "EndpointInterval":
        return cls(x, x)

    def is_empty(self) -> bool:
        return False

    def is_bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def width(self) -> float:
        """Upper bound on hi - lo (outward rounded); +inf when unbounded."""
        if not self.is_bounded():
            return math.inf
        return dir_op("sub", self.hi, self.lo, UP)

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def contains_interval(self, other: "EndpointInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def same_bits(self, other: "EndpointInterval") -> bool:
        """Bitwise equality of endpoints (distinguishes -0.0 from 0.0)."""
        return (
            math.copysign(1.0, self.lo) == math.copysign(1.0, other.lo)
            and self.lo == other.lo
            and math.copysign(1.0, self.hi) == math.copysign(1.0, other.hi)
            and self.hi == other.hi
        )

    def __add__(self, other):
        return ep_add(self, _coerce(other))

    def __radd__(self, other):
        return ep_add(_coerce(other), self)

    def __sub__(self, other):
        return ep_sub(self, _coerce(other))

    def __rsub__(self, other):
        return ep_sub(_coerce(other), self)

    def __mul__(self, other):
        return ep_mul(self, _coerce(other))

    def __rmul__(self, other):
        return ep_mul(_coerce(other), self)

    def __truediv__(self, other):
        return ep_div(self, _coerce(other))

    def __repr__(self) -> str:
        return f"EndpointInterval({self.lo!r}, {self.hi!r})"


@dataclass(frozen=True)
class MidRadInterval:
    """Midpoint-radius pair <m; r> for the set of x with |m - x| <= r."""

    m: float
    r: float

    def __post_init__(self):
        m = _check_endpoint(self.m, "midpoint")
        r = _check_endpoint(self.r, "radius")
        if not math.isfinite(m):
            raise DomainError(f"midpoint must be finite, got {m!r}")
        if r < 0.0:
            raise DomainError(f"radius must be nonnegative, got {r!r}")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "r", r)

    def __repr__(self) -> str:
        return f"MidRadInterval({self.m!r}, {self.r!r})"


IntervalLike = Union[EndpointInterval, float, int]


def _coerce(x: IntervalLike) -> EndpointInterval:
    if isinstance(x, EndpointInterval):
        return x
    if isinstance(x, _EmptyInterval):
        raise EmptyIntervalError("arithmetic on the empty interval")
    return EndpointInterval.point(float(x))


def _require_nonempty(*xs) -> None:
    for x in xs:
        if isinstance(x, _EmptyInterval):
            raise EmptyIntervalError("arithmetic on the empty interval")


# ---------------------------------------------------------------------------
# Directed endpoint primitives tolerant of infinite endpoints
# ---------------------------------------------------------------------------


def _dadd(x: float, y: float, direction: str) -> float:
    if math.isinf(x):
        return x
    if math.isinf(y):
        return y
    return dir_op("add", x, y, direction)


def _dsub(x: float, y: float, direction: str) -> float:
    if math.isinf(x):
        return x
    if math.isinf(y):
        return -y
    return dir_op("sub", x, y, direction)


def _dmul(x: float, y: float, direction: str) -> float:
    # Endpoint convention: a zero factor annihilates an infinite one.
    if x == 0.0 or y == 0.0:
        return 0.0
    if math.isinf(x) or math.isinf(y):
        return math.inf if (x > 0) == (y > 0) else -math.inf
    return dir_op("mul", x, y, direction)


def _ddiv(x: float, y: float, direction: str):
    if math.isinf(x) and math.isinf(y):
        return None                                  # ambiguous corner; extremes lie elsewhere
    if math.isinf(x):
        return math.inf if (x > 0) == (y > 0) else -math.inf
    if math.isinf(y):
        return 0.0
    return dir_op("div", x, y, direction)


# ---------------------------------------------------------------------------
# Interval arithmetic
# ---------------------------------------------------------------------------


def ep_add(x: EndpointInterval, y: EndpointInterval) -> EndpointInterval:
    """[RD(x.lo + y.lo), RU(x.hi + y.hi)]."""
    _require_nonempty(x, y)
    return EndpointInterval(_dadd(x.lo, y.lo, DOWN), _dadd(x.hi, y.hi, UP))


def ep_sub(x: EndpointInterval, y: EndpointInterval) -> EndpointInterval:
    _require_nonempty(x, y)
    return EndpointInterval(_dsub(x.lo, y.hi, DOWN), _dsub(x.hi, y.lo, UP))


def ep_mul(x: EndpointInterval, y: EndpointInterval) -> EndpointInterval:
    """Directed min/max over the four endpoint products."""
    _require_nonempty(x, y)
    pairs = ((x.lo, y.lo), (x.lo, y.hi), (x.hi, y.lo), (x.hi, y.hi))
    lo = min(_dmul(a, b, DOWN) for a, b in pairs)
    hi = max(_dmul(a, b, UP) for a, b in pairs)
    return EndpointInterval(lo, hi)


def ep_div(x: EndpointInterval, y: EndpointInterval) -> EndpointInterval:
    _require_nonempty(x, y)
    if y.lo <= 0.0 <= y.hi:
        raise ContainsZeroError(f"divisor interval {y!r} contains zero")
    pairs = ((x.lo, y.lo), (x.lo, y.hi), (x.hi, y.lo), (x.hi, y.hi))
    los = [q for q in (_ddiv(a, b, DOWN) for a, b in pairs) if q is not None]
    his = [q for q in (_ddiv(a, b, UP) for a, b in pairs) if q is not None]
    return EndpointInterval(min(los), max(his))


def ep_square(x: EndpointInterval) -> EndpointInterval:
    """Range of t**2 for t in x; tighter than ep_mul(x, x) when 0 is inside."""
    _require_nonempty(x)
    if x.lo >= 0.0:
        return EndpointInterval(_dmul(x.lo, x.lo, DOWN), _dmul(x.hi, x.hi, UP))
    if x.hi <= 0.0:
        return EndpointInterval(_dmul(x.hi, x.hi, DOWN), _dmul(x.lo, x.lo, UP))
    big = max(_dmul(x.lo, x.lo, UP), _dmul(x.hi, x.hi, UP))
    return EndpointInterval(0.0, big)


def intersect(x: EndpointInterval, y: EndpointInterval):
    """Set intersection; returns EMPTY when disjoint."""
    _require_nonempty(x, y)
    lo = max(x.lo, y.lo)
    hi = min(x.hi, y.hi)
    if lo > hi:
        return EMPTY
    return EndpointInterval(lo, hi)


# ---------------------------------------------------------------------------
# Representation conversions
# ---------------------------------------------------------------------------


def to_endpoints(x: MidRadInterval) -> EndpointInterval:
    """[RD(m - r), RU(m + r)]; always contains <m; r>."""
    if math.isinf(x.r):
        return EndpointInterval(-math.inf, math.inf)
    return EndpointInterval(
        dir_op("sub", x.m, x.r, DOWN), dir_op("add", x.m, x.r, UP)
    )


def to_midrad(x: EndpointInterval) -> MidRadInterval:
    """Enclosing <m; r>.  An unbounded input widens to the whole real line."""
    _require_nonempty(x)
    if not x.is_bounded():
        warnings.warn(
            "unbounded interval has no bounded mid-rad enclosure; widened to the reals",
            WidenedToReals,
            stacklevel=2,
        )
        return MidRadInterval(0.0, math.inf)
    m = x.lo / 2.0 + x.hi / 2.0
    r = max(dir_op("sub", m, x.lo, UP), dir_op("sub", x.hi, m, UP))
    return MidRadInterval(m, r)


# ---------------------------------------------------------------------------
# Distance, bisection
# ---------------------------------------------------------------------------


def _abs_diff_up(a: float, b: float) -> float:
    if a == b:
        return 0.0
    if math.isinf(a) or math.isinf(b):
        return math.inf
    return dir_op("sub", a, b, UP) if a > b else dir_op("sub", b, a, UP)


def hausdorff_q(x: EndpointInterval, y: EndpointInterval) -> float:
    """Hausdorff distance, upward rounded so it is a certified overestimate.

    For nested x >= y this is max(y.lo - x.lo, x.hi - y.hi).
    """
    _require_nonempty(x, y)
    return max(_abs_diff_up(x.lo, y.lo), _abs_diff_up(x.hi, y.hi))


def bisect(x: EndpointInterval) -> tuple[EndpointInterval, EndpointInterval]:
    """Split at the rounded midpoint; requires a strictly interior point."""
    _require_nonempty(x)
    if not x.is_bounded():
        raise BisectError(f"cannot bisect unbounded interval {x!r}")
    if not x.lo < x.hi:
        raise BisectError(f"cannot bisect degenerate interval {x!r}")
    m = x.lo / 2.0 + x.hi / 2.0
    if not (x.lo < m < x.hi):
        raise BisectError(f"no interior split point in {x!r}")
    return EndpointInterval(x.lo, m), EndpointInterval(m, x.hi)


# ---------------------------------------------------------------------------
# Bit-exact text literals: [lo,hi] and <m;r> with hexadecimal-float fields
# ---------------------------------------------------------------------------


def _hex_field(x: float) -> str:
    return float(x).hex()


def _parse_hex_field(s: str) -> float:
    try:
        return float.fromhex(s.strip())
    except ValueError as exc:
        raise ValueError(f"bad hexadecimal float field: {s!r}") from exc


def format_interval(x: EndpointInterval) -> str:
    return f"[{_hex_field(x.lo)},{_hex_field(x.hi)}]"


def format_midrad(x: MidRadInterval) -> str:
    return f"<{_hex_field(x.m)};{_hex_field(x.r)}>"


def parse_literal(text: str):
    """Parse '[lo,hi]' into EndpointInterval or '<m;r>' into MidRadInterval."""
    s = text.strip()
    if s.startswith("[") and s.endswith("]"):
        body = s[1:-1]
        if body.count(",") != 1:
            raise ValueError(f"bad interval literal: {text!r}")
        lo, hi = body.split(",")
        return EndpointInterval(_parse_hex_field(lo), _parse_hex_field(hi))
    if s.startswith("<") and s.endswith(">"):
        body = s[1:-1]
        if body.count(";") != 1:
            raise ValueError(f"bad mid-rad literal: {text!r}")
        m, r = body.split(";")
        return MidRadInterval(_parse_hex_field(m), _parse_hex_field(r))
    raise ValueError(f"unrecognised interval literal: {text!r}")
