"""Binary64 building blocks everything else trusts.

Error-free transforms, ulp / neighbour stepping, software-emulated directed
rounding, a runtime probe of the environment's rounding-mode behaviour, and
exact rational reference arithmetic.

The software directed operations never read or write the process rounding
state.  They defend themselves against a hostile ambient rounding mode by
sensing it arithmetically and falling back to pure integer rounding, so
``dir_op`` is bitwise deterministic no matter what the FPU is set to.
Hardware rounding is available only as an explicitly probed, opt-in backend.
"""

from __future__ import annotations

import ctypes
import ctypes.util
import math
import platform
import struct
import threading
import warnings
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .errors import DomainError, ProbeFailedError, UnderflowWarning

__all__ = [
    "PRECISION",
    "UNIT_ROUNDOFF",
    "SMALLEST_NORMAL",
    "SMALLEST_SUBNORMAL",
    "LARGEST_FINITE",
    "FpConstants",
    "CONSTANTS",
    "DOWN",
    "UP",
    "two_sum",
    "two_prod",
    "ulp",
    "succ",
    "pred",
    "dir_op",
    "float_to_ordinal",
    "ulp_distance",
    "exact_sum",
    "exact_dot",
    "round_nearest",
    "round_down",
    "round_up",
    "ProbeReport",
    "probe_rounding_support",
    "BackendKind",
    "EftSoftwareBackend",
    "HardwareFenvBackend",
    "get_active_backend",
    "set_active_backend",
]

# ---------------------------------------------------------------------------
# Format constants
# ---------------------------------------------------------------------------

PRECISION = 53
UNIT_ROUNDOFF = math.ldexp(1.0, 1 - PRECISION)      # 2**-52, convention of the bound formulas
SMALLEST_NORMAL = math.ldexp(1.0, -1022)
SMALLEST_SUBNORMAL = math.ldexp(1.0, -1074)
LARGEST_FINITE = math.ldexp(2.0 - math.ldexp(1.0, -52), 1023)

DOWN = "down"
UP = "up"

_OPS = ("add", "sub", "mul", "div")


@dataclass(frozen=True)
class FpConstants:
    """Unit roundoff, smallest positive normal, and significand width."""

    u: float = UNIT_ROUNDOFF
    eta: float = SMALLEST_NORMAL
    p: int = PRECISION


CONSTANTS = FpConstants()


def _as_float(x) -> float:
    try:
        return float(x)
    except (TypeError, OverflowError) as exc:
        raise DomainError(f"not representable as binary64: {x!r}") from exc


def _require_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise DomainError(f"operand must be finite, got {v!r}")


# ---------------------------------------------------------------------------
# Ambient-rounding-mode sentinel
# ---------------------------------------------------------------------------
# 2**-53 + 2**-106 sits just above the halfway point between 1 and succ(1),
# so round-to-nearest is the only IEEE direction sending both probes outward.
_PROBE_IN = float.fromhex("0x1.0000000000001p-53")
_PROBE_OUT = float.fromhex("0x1.0000000000001p+0")


def _ambient_round_to_nearest() -> bool:
    return (1.0 + _PROBE_IN == _PROBE_OUT) and (-1.0 - _PROBE_IN == -_PROBE_OUT)


# ---------------------------------------------------------------------------
# Exact integer-grid rounding (mode independent)
# ---------------------------------------------------------------------------


def _scaled_from_float(x: float) -> tuple[int, int]:
    """Return (m, e) with x == m * 2**e exactly."""
    n, d = x.as_integer_ratio()
    return n, 1 - d.bit_length()


def _ldexp_checked(sig: int, exp: int, away_overflows: bool) -> float:
    """Exact sig * 2**exp for 0 < sig <= 2**53, saturating by magnitude check.

    The magnitude test (not an OverflowError handler) matters: C ldexp obeys
    the ambient rounding mode at the overflow boundary.
    """
    if sig.bit_length() - 1 + exp > 1023:
        return math.inf if away_overflows else LARGEST_FINITE
    return math.ldexp(float(sig), exp)


def _round_to_grid_ex(m: int, e: int, mode: str) -> tuple[float, bool]:
    """Round the exact value m * 2**e under mode 'n', 'd', or 'u'.

    Returns (value, exact).  Pure integer arithmetic: immune to the ambient
    FPU rounding mode.
    """
    if m == 0:
        return 0.0, True
    neg = m < 0
    am = -m if neg else m
    ebit = am.bit_length() - 1 + e                  # value in [2**ebit, 2**(ebit+1))
    grid = ebit - 52
    if grid < -1074:
        grid = -1074
    drop = grid - e
    away = mode == "n" or (mode == "u") != neg
    if drop <= 0:
        return (-1.0 if neg else 1.0) * _ldexp_checked(am, e, away), True
    keep, rem = divmod(am, 1 << drop)
    exact = rem == 0
    if rem:
        if mode == "n":
            half = 1 << (drop - 1)
            if rem > half or (rem == half and (keep & 1)):
                keep += 1
        elif (mode == "u") != neg:                  # rounding away from zero
            keep += 1
    val = 0.0 if keep == 0 else _ldexp_checked(keep, grid, away)
    return (-val if neg else val), exact


def _round_to_grid(m: int, e: int, mode: str) -> float:
    return _round_to_grid_ex(m, e, mode)[0]


def _dir_ratio(num: int, den: int, down: bool) -> float:
    """Correctly rounded num/den toward -inf (down) or +inf.  den > 0, num != 0."""
    neg = num < 0
    a = -num if neg else num
    ebit = a.bit_length() - den.bit_length()
    if ebit >= 0:
        ge = a >= (den << ebit)
    else:
        ge = (a << -ebit) >= den
    if not ge:
        ebit -= 1                                    # 2**ebit <= a/den < 2**(ebit+1)
    grid = ebit - 52
    if grid < -1074:
        grid = -1074
    if grid >= 0:
        q, r = divmod(a, den << grid)
    else:
        q, r = divmod(a << -grid, den)
    away = down == neg
    if r and away:
        q += 1
    val = 0.0 if q == 0 else _ldexp_checked(q, grid, away)
    return -val if neg else val


# ---------------------------------------------------------------------------
# Error-free transforms
# ---------------------------------------------------------------------------


def _two_sum_fast(a: float, b: float) -> tuple[float, float]:
    """Branch-ordered exact addition.  Caller guarantees finite s = a + b."""
    s = a + b
    if abs(a) < abs(b):
        a, b = b, a
    z = s - a
    return s, b - z


def two_sum(a, b) -> tuple[float, float]:
    """Exact addition: returns (s, t) with s = fl(a+b) and s + t = a + b.

    Raises OverflowError when the rounded sum leaves the finite range.
    """
    a = _as_float(a)
    b = _as_float(b)
    _require_finite(a, b)
    s = a + b
    if math.isinf(s):
        raise OverflowError(f"two_sum overflow: {a!r} + {b!r}")
    if abs(a) < abs(b):
        a, b = b, a
    z = s - a
    return s, b - z


_SPLITTER = 134217729.0                              # 2**27 + 1
_DEKKER_LO = math.ldexp(1.0, -450)
_DEKKER_HI = math.ldexp(1.0, 450)


def _dekker_err(a: float, b: float, p: float) -> float:
    ca = _SPLITTER * a
    ah = ca - (ca - a)
    al = a - ah
    cb = _SPLITTER * b
    bh = cb - (cb - b)
    bl = b - bh
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _in_dekker_window(x: float) -> bool:
    ax = abs(x)
    return _DEKKER_LO <= ax <= _DEKKER_HI


def _prod_error_exact(a: float, b: float, p: float) -> tuple[float, bool]:
    """Exact a*b - p via integers.  Second field: error term representable."""
    na, ea = _scaled_from_float(a)
    nb, eb = _scaled_from_float(b)
    np_, ep = _scaled_from_float(p)
    e = ea + eb
    g = min(e, ep)
    diff = (na * nb << (e - g)) - (np_ << (ep - g))
    return _round_to_grid_ex(diff, g, "n")


def two_prod(a, b) -> tuple[float, float]:
    """Exact multiplication: returns (p, e) with p = fl(a*b) and p + e = a * b.

    In the deep subnormal range the error term may not be representable; the
    closest value is returned and an UnderflowWarning is issued.
    """
    a = _as_float(a)
    b = _as_float(b)
    _require_finite(a, b)
    p = a * b
    if math.isinf(p):
        raise OverflowError(f"two_prod overflow: {a!r} * {b!r}")
    if a == 0.0 or b == 0.0:
        return p, 0.0
    if _in_dekker_window(a) and _in_dekker_window(b):
        return p, _dekker_err(a, b, p)
    err, exact = _prod_error_exact(a, b, p)
    if not exact:
        warnings.warn(
            "product error term not exactly representable; nearest value used",
            UnderflowWarning,
            stacklevel=2,
        )
    return p, err


# ---------------------------------------------------------------------------
# ulp and neighbours
# ---------------------------------------------------------------------------


def ulp(x) -> float:
    """Spacing 2**(e - p + 1) for |x| in [2**e, 2**(e+1)); ulp(-x) == ulp(x)."""
    x = _as_float(x)
    if x == 0.0 or not math.isfinite(x):
        raise DomainError(f"ulp undefined for {x!r}")
    ax = abs(x)
    if ax < SMALLEST_NORMAL:
        return SMALLEST_SUBNORMAL
    _, e = math.frexp(ax)
    return math.ldexp(1.0, e - PRECISION)


def succ(x) -> float:
    """Smallest binary64 strictly greater than x."""
    x = _as_float(x)
    if math.isnan(x) or x == math.inf:
        raise DomainError(f"succ undefined for {x!r}")
    return math.nextafter(x, math.inf)


def pred(x) -> float:
    """Largest binary64 strictly less than x."""
    x = _as_float(x)
    if math.isnan(x) or x == -math.inf:
        raise DomainError(f"pred undefined for {x!r}")
    return math.nextafter(x, -math.inf)


def float_to_ordinal(x: float) -> int:
    """Monotone integer index of a float on the binary64 number line."""
    if math.isnan(x):
        raise DomainError("ordinal undefined for NaN")
    (bits,) = struct.unpack("<Q", struct.pack("<d", x))
    if bits & 0x8000000000000000:
        return -(bits ^ 0x8000000000000000)
    return bits


def ulp_distance(a: float, b: float) -> int:
    """Number of representable steps between a and b."""
    return abs(float_to_ordinal(a) - float_to_ordinal(b))


# ---------------------------------------------------------------------------
# Software directed rounding
# ---------------------------------------------------------------------------


def _saturate(inf_val: float, down: bool) -> float:
    if inf_val > 0:
        return LARGEST_FINITE if down else math.inf
    return -math.inf if down else -LARGEST_FINITE


def _zero_sum_sign(a: float, b: float, down: bool) -> float:
    # IEEE sign rules for an exactly zero sum.
    if a == 0.0 and b == 0.0:
        if math.copysign(1.0, a) == math.copysign(1.0, b):
            return a
    return -0.0 if down else 0.0


def _dir_add(a: float, b: float, down: bool) -> float:
    s = a + b
    if math.isinf(s):
        return _saturate(s, down)
    x, y = (a, b) if abs(a) >= abs(b) else (b, a)
    z = s - x
    t = y - z
    if t == 0.0:
        if s == 0.0:
            return _zero_sum_sign(a, b, down)
        return s
    if down:
        return math.nextafter(s, -math.inf) if t < 0.0 else s
    return math.nextafter(s, math.inf) if t > 0.0 else s


def _dir_mul(a: float, b: float, down: bool) -> float:
    p = a * b
    if math.isinf(p):
        return _saturate(p, down)
    if a == 0.0 or b == 0.0:
        return p                                     # exact signed zero
    if _in_dekker_window(a) and _in_dekker_window(b):
        e = _dekker_err(a, b, p)
        if e == 0.0:
            return p
        if down:
            return math.nextafter(p, -math.inf) if e < 0.0 else p
        return math.nextafter(p, math.inf) if e > 0.0 else p
    na, ea = _scaled_from_float(a)
    nb, eb = _scaled_from_float(b)
    return _round_to_grid(na * nb, ea + eb, "d" if down else "u")


def _dir_div(a: float, b: float, down: bool) -> float:
    if b == 0.0:
        raise DomainError("division by zero")
    q = a / b
    if math.isinf(q):
        return _saturate(q, down)
    if a == 0.0:
        return q                                     # exact signed zero
    # Sign of the residual a - q*b decides the nudge, computed exactly.
    na, da = a.as_integer_ratio()
    nb, db = b.as_integer_ratio()
    nq, dq = q.as_integer_ratio()
    rs = na * db * dq - nq * nb * da
    if rs == 0:
        return q
    q_high = (rs < 0) == (b > 0.0)                   # q overestimates the quotient
    if down:
        return math.nextafter(q, -math.inf) if q_high else q
    return q if q_high else math.nextafter(q, math.inf)


def _int_dir_op(op: str, a: float, b: float, down: bool) -> float:
    """Directed op on the integer grid; correct under any ambient mode."""
    mode = "d" if down else "u"
    if op in ("add", "sub"):
        bb = -b if op == "sub" else b
        if a == 0.0 and bb == 0.0:
            return _zero_sum_sign(a, bb, down)
        na, ea = _scaled_from_float(a)
        nb, eb = _scaled_from_float(bb)
        g = min(ea, eb)
        m = (na << (ea - g)) + (nb << (eb - g))
        if m == 0:
            return -0.0 if down else 0.0
        return _round_to_grid(m, g, mode)
    if op == "mul":
        if a == 0.0 or b == 0.0:
            return a * b
        na, ea = _scaled_from_float(a)
        nb, eb = _scaled_from_float(b)
        return _round_to_grid(na * nb, ea + eb, mode)
    if b == 0.0:
        raise DomainError("division by zero")
    if a == 0.0:
        return a / b
    na, da = a.as_integer_ratio()
    nb, db = b.as_integer_ratio()
    num = na * db
    den = da * nb
    if den < 0:
        num, den = -num, -den
    return _dir_ratio(num, den, down)


def _as_down(direction) -> bool:
    if isinstance(direction, str):
        d = direction.lower()
        if d == DOWN:
            return True
        if d == UP:
            return False
    raise ValueError(f"direction must be {DOWN!r} or {UP!r}, got {direction!r}")


# ---------------------------------------------------------------------------
# Rounding backends
# ---------------------------------------------------------------------------


class BackendKind(Enum):
    EFT_SOFTWARE = "eft"
    HARDWARE_FENV = "fenv"


@dataclass(frozen=True)
class ProbeReport:
    """What the executing environment actually did with directed modes."""

    division_respects_rd_ru: bool
    mode_survives_library_call: bool
    per_thread_isolation: bool
    no_fenv: bool = False

    def all_true(self) -> bool:
        return (
            not self.no_fenv
            and self.division_respects_rd_ru
            and self.mode_survives_library_call
            and self.per_thread_isolation
        )


class _FenvControl:
    """ctypes wrapper around fesetround/fegetround, if available."""

    _MODES_BY_MACHINE = {
        # (nearest, downward, upward)
        "x86_64": (0x000, 0x400, 0x800),
        "i686": (0x000, 0x400, 0x800),
        "i386": (0x000, 0x400, 0x800),
        "aarch64": (0x000, 0x800000, 0x400000),
        "arm64": (0x000, 0x800000, 0x400000),
    }

    def __init__(self, libm, nearest: int, downward: int, upward: int):
        self._libm = libm
        self.nearest = nearest
        self.downward = downward
        self.upward = upward

    @classmethod
    def load(cls) -> Optional["_FenvControl"]:
        try:
            name = ctypes.util.find_library("m")
            if name is None:
                return None
            libm = ctypes.CDLL(name)
            libm.fesetround.argtypes = [ctypes.c_int]
            libm.fesetround.restype = ctypes.c_int
            libm.fegetround.restype = ctypes.c_int
        except (OSError, AttributeError):
            return None
        modes = cls._MODES_BY_MACHINE.get(platform.machine().lower())
        if modes is None:
            modes = cls._MODES_BY_MACHINE["x86_64"]    # sentinel checks validate the guess
        return cls(libm, *modes)

    def set_mode(self, mode: int) -> bool:
        return self._libm.fesetround(mode) == 0

    def set_nearest(self) -> None:
        self._libm.fesetround(self.nearest)


_THIRD_DOWN = float.fromhex("0x1.5555555555555p-2")
_THIRD_UP = float.fromhex("0x1.5555555555556p-2")


def _divide_once() -> float:
    one, three = 1.0, 3.0
    return one / three


def _probe_division(ctl: _FenvControl) -> bool:
    try:
        ok = ctl.set_mode(ctl.downward)
        d = _divide_once()
        ok = ctl.set_mode(ctl.upward) and ok
        u = _divide_once()
    finally:
        ctl.set_nearest()
    return ok and d == _THIRD_DOWN and u == _THIRD_UP


def _probe_library_call(ctl: _FenvControl, library_call: Callable[[], object]) -> bool:
    try:
        if not ctl.set_mode(ctl.upward):
            return False
        library_call()
        u = _divide_once()
    finally:
        ctl.set_nearest()
    return u == _THIRD_UP


def _probe_thread_isolation(ctl: _FenvControl) -> bool:
    barrier = threading.Barrier(2, timeout=5.0)
    results = [False, False]

    def worker(idx: int, mode: int, expected: float) -> None:
        try:
            ok = ctl.set_mode(mode)
            barrier.wait()
            v1 = _divide_once()
            barrier.wait()
            v2 = _divide_once()                       # after the peer set its own mode
            results[idx] = ok and v1 == expected and v2 == expected
        except threading.BrokenBarrierError:
            results[idx] = False
        finally:
            ctl.set_nearest()

    t1 = threading.Thread(target=worker, args=(0, ctl.downward, _THIRD_DOWN))
    t2 = threading.Thread(target=worker, args=(1, ctl.upward, _THIRD_UP))
    t1.start()
    t2.start()
    t1.join(timeout=10.0)
    t2.join(timeout=10.0)
    main_unaffected = _divide_once() == _THIRD_DOWN   # nearest and downward agree on 1/3
    return results[0] and results[1] and main_unaffected


def _default_library_call() -> object:
    return math.log(2.0)


def probe_rounding_support(library_call: Optional[Callable[[], object]] = None) -> ProbeReport:
    """Execute sentinel computations and report what the environment honoured.

    Nothing is assumed and nothing is cached: every call re-runs the
    sentinels.  ``library_call`` is invoked between setting a mode and using
    it, so tests can inject a routine that clobbers the mode.
    """
    ctl = _FenvControl.load()
    if ctl is None:
        return ProbeReport(False, False, False, no_fenv=True)
    call = library_call if library_call is not None else _default_library_call
    try:
        division = _probe_division(ctl)
        survives = _probe_library_call(ctl, call)
        isolation = _probe_thread_isolation(ctl)
    finally:
        ctl.set_nearest()
    return ProbeReport(division, survives, isolation)


class EftSoftwareBackend:
    """Default backend: directed rounding emulated with error-free transforms.

    Never touches process-global rounding state.
    """

    kind = BackendKind.EFT_SOFTWARE
    probe_result: Optional[ProbeReport] = None

    def dir_op_raw(self, op: str, a: float, b: float, down: bool) -> float:
        if not _ambient_round_to_nearest():
            return _int_dir_op(op, a, b, down)
        if op == "add":
            return _dir_add(a, b, down)
        if op == "sub":
            return _dir_add(a, -b, down)
        if op == "mul":
            return _dir_mul(a, b, down)
        return _dir_div(a, b, down)

    def __repr__(self) -> str:
        return "EftSoftwareBackend()"


class HardwareFenvBackend:
    """Opt-in backend that switches the FPU mode around each operation.

    Construction fails unless a probe establishes that directed division,
    mode survival across library calls, and per-thread isolation all hold.
    """

    kind = BackendKind.HARDWARE_FENV

    def __init__(self, probe_report: Optional[ProbeReport] = None):
        report = probe_report if probe_report is not None else probe_rounding_support()
        if not report.all_true():
            raise ProbeFailedError(
                f"hardware rounding backend refused: {report}", report=report
            )
        self.probe_result = report
        ctl = _FenvControl.load()
        if ctl is None:
            raise ProbeFailedError("fenv control unavailable", report=report)
        self._ctl = ctl

    def dir_op_raw(self, op: str, a: float, b: float, down: bool) -> float:
        ctl = self._ctl
        try:
            ctl.set_mode(ctl.downward if down else ctl.upward)
            if op == "add":
                r = a + b
            elif op == "sub":
                r = a - b
            elif op == "mul":
                r = a * b
            else:
                if b == 0.0:
                    raise DomainError("division by zero")
                r = a / b
        finally:
            ctl.set_nearest()
        return r

    def __repr__(self) -> str:
        return f"HardwareFenvBackend(probe_result={self.probe_result})"


_active_backend = EftSoftwareBackend()


def get_active_backend():
    return _active_backend


def set_active_backend(backend) -> None:
    global _active_backend
    if not hasattr(backend, "dir_op_raw"):
        raise TypeError(f"not a rounding backend: {backend!r}")
    _active_backend = backend


def dir_op(op: str, a, b, direction, backend=None) -> float:
    """Correctly rounded a op b toward -inf ('down') or +inf ('up').

    op is one of 'add', 'sub', 'mul', 'div'.  Overflow saturates with
    directed semantics (rounding a positive overflow down gives the largest
    finite value).  NaN or infinite operands raise DomainError.
    """
    if op not in _OPS:
        raise ValueError(f"op must be one of {_OPS}, got {op!r}")
    a = _as_float(a)
    b = _as_float(b)
    _require_finite(a, b)
    down = _as_down(direction)
    be = backend if backend is not None else _active_backend
    return be.dir_op_raw(op, a, b, down)


# ---------------------------------------------------------------------------
# Exact rational reference arithmetic
# ---------------------------------------------------------------------------

_GRID_SUM = 1 << 1074
_GRID_DOT = 1 << 2148


def exact_sum(values: Sequence[float]) -> Fraction:
    """Exact sum of binary64 values as an arbitrary-precision rational."""
    total = 0
    for v in values:
        v = _as_float(v)
        if not math.isfinite(v):
            raise DomainError(f"exact_sum needs finite values, got {v!r}")
        n, d = v.as_integer_ratio()
        total += n * (_GRID_SUM // d)
    return Fraction(total, _GRID_SUM)


def exact_dot(a: Sequence[float], b: Sequence[float]) -> Fraction:
    """Exact dot product of binary64 vectors as a rational."""
    if len(a) != len(b):
        raise DomainError(f"length mismatch: {len(a)} vs {len(b)}")
    total = 0
    for x, y in zip(a, b):
        x = _as_float(x)
        y = _as_float(y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise DomainError("exact_dot needs finite values")
        nx, dx = x.as_integer_ratio()
        ny, dy = y.as_integer_ratio()
        total += nx * ny * (_GRID_DOT // (dx * dy))
    return Fraction(total, _GRID_DOT)


def round_nearest(q) -> float:
    """Correctly rounded binary64 (ties to even) of an exact rational."""
    return _round_rational(Fraction(q), "n")


def round_down(q) -> float:
    """Largest binary64 <= q (or -inf when q is below the finite range)."""
    return _round_rational(Fraction(q), "d")


def round_up(q) -> float:
    """Smallest binary64 >= q (or +inf when q is above the finite range)."""
    return _round_rational(Fraction(q), "u")


_RN_OVERFLOW_THRESHOLD = Fraction((1 << 1024) - (1 << 970))


def _round_rational(q: Fraction, mode: str) -> float:
    num, den = q.numerator, q.denominator
    if num == 0:
        return 0.0
    if den & (den - 1) == 0:                         # dyadic: exact grid rounding
        return _round_to_grid(num, 1 - den.bit_length(), mode)
    if mode != "n":
        return _dir_ratio(num, den, mode == "d")
    # Round to nearest for a non-dyadic rational: bracket with the two
    # directed roundings and compare against their midpoint.  A non-dyadic
    # value can never land exactly on a halfway point, so no tie rule needed.
    d = _dir_ratio(num, den, True)
    u = _dir_ratio(num, den, False)
    if math.isinf(u):
        return math.inf if q > _RN_OVERFLOW_THRESHOLD else LARGEST_FINITE
    if math.isinf(d):
        return -math.inf if q < -_RN_OVERFLOW_THRESHOLD else -LARGEST_FINITE
    mid = (Fraction(d) + Fraction(u)) / 2
    return d if q < mid else u
