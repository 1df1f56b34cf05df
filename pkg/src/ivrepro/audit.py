"""Reproducibility auditing of the library kernels.

A seeded configuration fully determines the generated inputs and the
per-trial permutations or worker counts, so the audit itself is
reproducible.  Each kernel declares what it promises: bitwise equality of
repeated runs, containment of the exact result, both, or neither.  A report
records per-trial output digests, verdicts, the ulp spread between trials,
and interval width statistics; reports serialise bit-exactly to JSON or CSV
through hexadecimal floats.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from csv import reader as csv_reader, writer as csv_writer
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from . import dataio, summation
from .errors import SingularError
from .fp_core import exact_sum, probe_rounding_support, ProbeReport
from .interval import EndpointInterval, to_endpoints
from .linsys import solve_verified
from .matmul import FpMatrix, IntervalMatrixMR, gemm_ordered, imm3, imm4
from .summation import ChunkedPlan

__all__ = [
    "Kernel",
    "TrialConfig",
    "ReproReport",
    "AuditRun",
    "KernelAdapter",
    "KERNELS",
    "register_kernel",
    "gen_ill_conditioned",
    "run_audit",
    "run_audit_detailed",
    "emit_report",
    "parse_report",
    "probe_command",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1


class Kernel(Enum):
    SUM_NAIVE = "sum-naive"
    SUM_KAHAN = "sum-kahan"
    SUM_CHUNKED = "sum-chunked"
    SUM_PREROUNDED = "sum-prerounded"
    SUM_INTERVALS = "sum-intervals"
    GEMM = "gemm"
    IMM3 = "imm3"
    IMM4 = "imm4"
    LINSOLVE = "linsolve"


@dataclass(frozen=True)
class TrialConfig:
    """Seed-determined audit configuration."""

    kernel: str
    trials: int
    seed: int
    n: int
    workers: tuple[int, ...] = (1,)
    k: Optional[int] = None
    cond: Optional[float] = None
    input_path: Optional[str] = None

    def __post_init__(self):
        kernel = self.kernel.value if isinstance(self.kernel, Kernel) else str(self.kernel)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "workers", tuple(int(w) for w in self.workers))
        if self.trials < 0:
            raise ValueError(f"trials must be nonnegative, got {self.trials}")
        if not self.workers or any(w < 1 for w in self.workers):
            raise ValueError(f"worker counts must be positive, got {self.workers}")


@dataclass(frozen=True)
class ReproReport:
    """Audit outcome with bit-level digests and verdicts."""

    schema_version: int
    kernel: str
    n: int
    trials: int
    seed: int
    k: Optional[int]
    workers: tuple[int, ...]
    cond: Optional[float]
    promises_bitwise: bool
    promises_inclusion: bool
    digests: tuple[str, ...]
    bitwise_reproducible: bool
    inclusion_held: Optional[bool]
    spread_ulps: int
    width_min: Optional[float]
    width_max: Optional[float]
    width_mean: Optional[float]
    contract_violated: bool


@dataclass
class KernelData:
    """Raw per-trial outputs backing a report (also feeds the figures)."""

    trial_values: list
    trial_inclusion: list
    widths: Optional[np.ndarray]


@dataclass(frozen=True)
class AuditRun:
    report: ReproReport
    data: KernelData


@dataclass(frozen=True)
class KernelAdapter:
    name: str
    promises_bitwise: bool
    promises_inclusion: bool
    runner: Callable[[TrialConfig, np.random.Generator], KernelData]


# ---------------------------------------------------------------------------
# Input generators
# ---------------------------------------------------------------------------


def gen_ill_conditioned(
    rng: np.random.Generator, n: int, target_cond: float
) -> tuple[np.ndarray, Fraction]:
    """Cancellation-dominated summands near a target condition number.

    Pairs (v, -v) cancel exactly; a small surplus sets the true sum.  The
    achieved condition sum|x| / |sum x| is computed exactly and returned.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if target_cond < 1.0:
        raise ValueError(f"condition target must be >= 1, got {target_cond}")
    if n < 3:
        x = rng.uniform(0.5, 1.0, size=n)
    else:
        m = (n - 1) // 2
        rest = n - 2 * m
        v = rng.uniform(0.5, 1.0, size=m)
        total_abs = 2.0 * float(np.sum(v))
        surplus = np.full(rest, total_abs / (target_cond * rest))
        x = np.concatenate([v, -v, surplus])
        x = x[rng.permutation(n)]
    abs_mass = exact_sum(np.abs(x).tolist())
    signed = exact_sum(x.tolist())
    cond = abs_mass / abs(signed) if signed != 0 else Fraction(1)
    return x, cond


def _gen_matrix(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=(rows, cols))


def _gen_conditioned_system(
    rng: np.random.Generator, n: int, cond: float
) -> tuple[np.ndarray, np.ndarray]:
    if n == 1:
        return np.array([[1.0]]), rng.standard_normal(1)
    q1, _ = np.linalg.qr(rng.standard_normal((n, n)))
    q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
    sv = np.logspace(0.0, -math.log10(max(cond, 1.0)), n)
    a = q1 @ np.diag(sv) @ q2
    return a, rng.standard_normal(n)


def _load_vector(cfg: TrialConfig) -> Optional[np.ndarray]:
    if cfg.input_path is None:
        return None
    if cfg.input_path.endswith(".bin"):
        return dataio.read_vector_binary(cfg.input_path)
    return dataio.read_vector_hex(cfg.input_path)


def _sum_input(cfg: TrialConfig, rng: np.random.Generator) -> np.ndarray:
    loaded = _load_vector(cfg)
    if loaded is not None:
        return loaded
    x, _ = gen_ill_conditioned(rng, cfg.n, cfg.cond if cfg.cond else 1e12)
    return x


def _cycle_workers(cfg: TrialConfig, t: int) -> int:
    return cfg.workers[t % len(cfg.workers)]


# ---------------------------------------------------------------------------
# Kernel adapters
# ---------------------------------------------------------------------------


def _run_sum_naive(cfg: TrialConfig, rng: np.random.Generator) -> KernelData:
    x = _sum_input(cfg, rng)
    values = [
        np.array([summation.sum_naive(x, rng.permutation(x.size))])
        for _ in range(cfg.trials)
    ]
    return KernelData(values, [None] * cfg.trials, None)


def _run_sum_kahan(cfg: TrialConfig, rng: np.random.Generator) -> KernelData:
    x = _sum_input(cfg, rng)
    values = [
        np.array([summation.sum_kahan(x[rng.permutation(x.size)])])
        for _ in range(cfg.trials)
    ]
    return KernelData(values, [None] * cfg.trials, None)


def _run_sum_chunked(cfg: TrialConfig, rng: np.random.Generator) -> KernelData:
    x = _sum_input(cfg, rng)
    k = cfg.k if cfg.k else max(1, min(x.size, 64))
    plan = ChunkedPlan(x.size, k)
    values = []
    for t in range(cfg.trials):
        order = rng.permutation(k).tolist()
        w = _cycle_workers(cfg, t)
        if w > 1:
            s = summation.sum_chunked(x, plan, workers=w)
        else:
            s = summation.sum_chunked(x, plan, _completion_order=order)
        values.append(np.array([s]))
    return KernelData(values, [None] * cfg.trials, None)


def _run_sum_prerounded(cfg: TrialConfig, rng: np.random.Generator) -> KernelData:
    x = _sum_input(cfg, rng)
    k = cfg.k if cfg.k else 2
    values = []
    for _ in range(cfg.trials):
        r = summation.sum_prerounded(x[rng.permutation(x.size)], k)
        values.append(np.array(list(r.shifts) + list(r.sums) + [r.result]))
    return KernelData(values, [None] * cfg.trials, None)


def _gen_intervals(cfg: TrialConfig, rng: np.random.Generator) -> list:
    if cfg.input_path is not None:
        loaded = dataio.read_intervals_text(cfg.input_path)
        out = []
        for item in loaded:
            if isinstance(item, EndpointInterval):
                out.append(item)
            else:
                out.append(to_endpoints(item))
        return out
    mids = rng.uniform(-1.0, 1.0, size=cfg.n)
    rads = np.abs(rng.uniform(0.0, 1e-6, size=cfg.n))
    return [
        EndpointInterval(m - r, m + r) for m, r in zip(mids.tolist(), rads.tolist())
    ]


def _run_sum_intervals(cfg: TrialConfig, rng: np.random.Generator) -> KernelData:
    ivs = _gen_intervals(cfg, rng)
    exact_lo = exact_sum([iv.lo for iv in ivs])
    exact_hi = exact_sum([iv.hi for iv in ivs])
    values, inclusion, widths = [], [], []
    for _ in range(cfg.trials):
        got = summation.sum_intervals(ivs, rng.permutation(len(ivs)))
        values.append(np.array([got.lo, got.hi]))
        inclusion.append(
            Fraction(got.lo) <= exact_lo and exact_hi <= Fraction(got.hi)
        )
        widths.append(got.width())
    return KernelData(values, inclusion, np.array(widths))


def _run_gemm(cfg: TrialConfig, rng: np.random.Generator) -> KernelData:
    a = FpMatrix(_gen_matrix(rng, cfg.n, cfg.n))
    b = FpMatrix(_gen_matrix(rng, cfg.n, cfg.n))
    values = [
        gemm_ordered(a, b, workers=_cycle_workers(cfg, t)).data.reshape(-1)
        for t in range(cfg.trials)
    ]
    return KernelData(values, [None] * cfg.trials, None)


def _oracle_interval_product(am, ar, bm, br):
    """Exact rational endpoints of the interval matrix product."""
    rows, inner = am.shape
    cols = bm.shape[1]
    los = [[Fraction(0)] * cols for _ in range(rows)]
    his = [[Fraction(0)] * cols for _ in range(rows)]
    fa_lo = [[Fraction(am[i, k]) - Fraction(ar[i, k]) for k in range(inner)] for i in range(rows)]
    fa_hi = [[Fraction(am[i, k]) + Fraction(ar[i, k]) for k in range(inner)] for i in range(rows)]
    fb_lo = [[Fraction(bm[k, j]) - Fraction(br[k, j]) for j in range(cols)] for k in range(inner)]
    fb_hi = [[Fraction(bm[k, j]) + Fraction(br[k, j]) for j in range(cols)] for k in range(inner)]
    for i in range(rows):
        for j in range(cols):
            lo = Fraction(0)
            hi = Fraction(0)
            for k in range(inner):
                cands = (
                    fa_lo[i][k] * fb_lo[k][j],
                    fa_lo[i][k] * fb_hi[k][j],
                    fa_hi[i][k] * fb_lo[k][j],
                    fa_hi[i][k] * fb_hi[k][j],
                )
                lo += min(cands)
                hi += max(cands)
            los[i][j] = lo
            his[i][j] = hi
    return los, his


def _run_interval_mm(alg) -> Callable[[TrialConfig, np.random.Generator], KernelData]:
    def run(cfg: TrialConfig, rng: np.random.Generator) -> KernelData:
        am = _gen_matrix(rng, cfg.n, cfg.n)
        bm = _gen_matrix(rng, cfg.n, cfg.n)
        ar = np.abs(_gen_matrix(rng, cfg.n, cfg.n)) * 1e-3
        br = np.abs(_gen_matrix(rng, cfg.n, cfg.n)) * 1e-3
        a = IntervalMatrixMR(FpMatrix(am), FpMatrix(ar))
        b = IntervalMatrixMR(FpMatrix(bm), FpMatrix(br))
        los, his = _oracle_interval_product(am, ar, bm, br)
        values, inclusion, widths = [], [], []
        for t in range(cfg.trials):
            got = alg(a, b, workers=_cycle_workers(cfg, t))
            mid, rad = got.mid.data, got.rad.data
            values.append(np.concatenate([mid.reshape(-1), rad.reshape(-1)]))
            ok = True
            for i in range(cfg.n):
                for j in range(cfg.n):
                    glo = Fraction(mid[i, j]) - Fraction(rad[i, j])
                    ghi = Fraction(mid[i, j]) + Fraction(rad[i, j])
                    if not (glo <= los[i][j] and his[i][j] <= ghi):
                        ok = False
            inclusion.append(ok)
            widths.append(2.0 * rad.reshape(-1))
        return KernelData(values, inclusion, np.concatenate(widths) if widths else None)

    return run


def _rational_solve(a: np.ndarray, b: np.ndarray) -> list:
    n = b.size
    m = [
        [Fraction(float(a[i, j])) for j in range(n)] + [Fraction(float(b[i]))]
        for i in range(n)
    ]
    for c in range(n):
        piv = max(range(c, n), key=lambda r: abs(m[r][c]))
        if m[piv][c] == 0:
            raise ZeroDivisionError("singular system in rational solve")
        m[c], m[piv] = m[piv], m[c]
        for r in range(n):
            if r != c and m[r][c]:
                f = m[r][c] / m[c][c]
                m[r] = [m[r][t] - f * m[c][t] for t in range(n + 1)]
    return [m[i][n] / m[i][i] for i in range(n)]


def _run_linsolve(cfg: TrialConfig, rng: np.random.Generator) -> KernelData:
    a, b = _gen_conditioned_system(rng, cfg.n, cfg.cond if cfg.cond else 1e8)
    exact = _rational_solve(a, b)
    values, inclusion, widths = [], [], []
    for _ in range(cfg.trials):
        try:
            vs = solve_verified(a, b)
        except SingularError:
            # singular at working precision: record an uncertified trial
            values.append(
                np.concatenate([np.full(cfg.n, -np.inf), np.full(cfg.n, np.inf), [0.0]])
            )
            inclusion.append(None)
            continue
        lo = np.array([iv.lo for iv in vs.x])
        hi = np.array([iv.hi for iv in vs.x])
        values.append(np.concatenate([lo, hi, [float(vs.iterations)]]))
        if vs.converged:
            inclusion.append(
                all(
                    Fraction(iv.lo) <= xe <= Fraction(iv.hi)
                    for iv, xe in zip(vs.x, exact)
                )
            )
            widths.append(hi - lo)
        else:
            inclusion.append(None)
    return KernelData(
        values, inclusion, np.concatenate(widths) if widths else None
    )


KERNELS: dict[str, KernelAdapter] = {}


def register_kernel(adapter: KernelAdapter) -> None:
    KERNELS[adapter.name] = adapter


for _adapter in [
    KernelAdapter(Kernel.SUM_NAIVE.value, False, False, _run_sum_naive),
    KernelAdapter(Kernel.SUM_KAHAN.value, False, False, _run_sum_kahan),
    KernelAdapter(Kernel.SUM_CHUNKED.value, True, False, _run_sum_chunked),
    KernelAdapter(Kernel.SUM_PREROUNDED.value, True, False, _run_sum_prerounded),
    KernelAdapter(Kernel.SUM_INTERVALS.value, False, True, _run_sum_intervals),
    KernelAdapter(Kernel.GEMM.value, True, False, _run_gemm),
    KernelAdapter(Kernel.IMM3.value, True, True, _run_interval_mm(imm3)),
    KernelAdapter(Kernel.IMM4.value, True, True, _run_interval_mm(imm4)),
    KernelAdapter(Kernel.LINSOLVE.value, False, True, _run_linsolve),
]:
    register_kernel(_adapter)


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------


def _digest(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr, dtype="<f8").tobytes()).hexdigest()


def _ordinals(arr: np.ndarray) -> np.ndarray:
    bits = np.ascontiguousarray(arr, dtype="<f8").view(np.uint64)
    neg = (bits >> 63).astype(bool)
    mag = (bits & np.uint64(0x7FFFFFFFFFFFFFFF)).astype(np.int64)
    return np.where(neg, -mag, mag)


def _spread_ulps(values: Sequence[np.ndarray]) -> int:
    if len(values) < 2:
        return 0
    stacked = np.vstack([_ordinals(v) for v in values])
    return int(np.max(stacked.max(axis=0) - stacked.min(axis=0)))


def run_audit_detailed(cfg: TrialConfig) -> AuditRun:
    adapter = KERNELS.get(cfg.kernel)
    if adapter is None:
        raise ValueError(f"unknown kernel {cfg.kernel!r}")
    rng = np.random.default_rng(cfg.seed)
    data = adapter.runner(cfg, rng)

    digests = tuple(_digest(v) for v in data.trial_values)
    bitwise = len(set(digests)) <= 1
    applicable = [v for v in data.trial_inclusion if v is not None]
    inclusion: Optional[bool] = all(applicable) if applicable else None
    spread = _spread_ulps(data.trial_values)
    if data.widths is not None and data.widths.size:
        wmin = float(np.min(data.widths))
        wmax = float(np.max(data.widths))
        wmean = float(np.mean(data.widths))
    else:
        wmin = wmax = wmean = None
    violated = (adapter.promises_bitwise and not bitwise) or (
        adapter.promises_inclusion and inclusion is False
    )
    report = ReproReport(
        schema_version=SCHEMA_VERSION,
        kernel=cfg.kernel,
        n=cfg.n,
        trials=cfg.trials,
        seed=cfg.seed,
        k=cfg.k,
        workers=cfg.workers,
        cond=cfg.cond,
        promises_bitwise=adapter.promises_bitwise,
        promises_inclusion=adapter.promises_inclusion,
        digests=digests,
        bitwise_reproducible=bitwise,
        inclusion_held=inclusion,
        spread_ulps=spread,
        width_min=wmin,
        width_max=wmax,
        width_mean=wmean,
        contract_violated=violated,
    )
    return AuditRun(report, data)


def run_audit(cfg: TrialConfig) -> ReproReport:
    """Run the configured audit and return its report."""
    return run_audit_detailed(cfg).report


# ---------------------------------------------------------------------------
# Report serialisation (bit-exact: floats as hexadecimal strings)
# ---------------------------------------------------------------------------

_FIELD_ORDER = [
    "schema_version",
    "kernel",
    "n",
    "trials",
    "seed",
    "k",
    "workers",
    "cond",
    "promises_bitwise",
    "promises_inclusion",
    "digests",
    "bitwise_reproducible",
    "inclusion_held",
    "spread_ulps",
    "width_min",
    "width_max",
    "width_mean",
    "contract_violated",
]

_FLOAT_FIELDS = {"cond", "width_min", "width_max", "width_mean"}


def _report_to_dict(r: ReproReport) -> dict:
    out = {}
    for name in _FIELD_ORDER:
        value = getattr(r, name)
        if name in _FLOAT_FIELDS and value is not None:
            value = float(value).hex()
        elif name == "workers":
            value = list(value)
        elif name == "digests":
            value = list(value)
        out[name] = value
    return out


def _report_from_dict(d: dict) -> ReproReport:
    def fl(name):
        v = d[name]
        return None if v is None else float.fromhex(v)

    return ReproReport(
        schema_version=int(d["schema_version"]),
        kernel=d["kernel"],
        n=int(d["n"]),
        trials=int(d["trials"]),
        seed=int(d["seed"]),
        k=None if d["k"] is None else int(d["k"]),
        workers=tuple(int(w) for w in d["workers"]),
        cond=fl("cond"),
        promises_bitwise=bool(d["promises_bitwise"]),
        promises_inclusion=bool(d["promises_inclusion"]),
        digests=tuple(d["digests"]),
        bitwise_reproducible=bool(d["bitwise_reproducible"]),
        inclusion_held=d["inclusion_held"],
        spread_ulps=int(d["spread_ulps"]),
        width_min=fl("width_min"),
        width_max=fl("width_max"),
        width_mean=fl("width_mean"),
        contract_violated=bool(d["contract_violated"]),
    )


def _csv_cell(value) -> str:
    if value is None:
        return "none"
    if value is True:
        return "true"
    if value is False:
        return "false"
    return str(value)


def _csv_uncell(name: str, cell: str):
    if cell == "none":
        return None
    if name in ("promises_bitwise", "promises_inclusion", "bitwise_reproducible",
                "inclusion_held", "contract_violated"):
        return cell == "true"
    return cell


def emit_report(r: ReproReport, fmt: str) -> bytes:
    """Serialise with stable field order; floats as hexadecimal strings."""
    d = _report_to_dict(r)
    if fmt == "json":
        return (json.dumps(d, indent=2) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv_writer(buf)
        w.writerow(["field", "value"])
        for name in _FIELD_ORDER:
            value = d[name]
            if name == "workers":
                w.writerow([name, "|".join(str(x) for x in value)])
            elif name == "digests":
                for i, dig in enumerate(value):
                    w.writerow([f"digest.{i}", dig])
                w.writerow(["digest.count", str(len(value))])
            else:
                w.writerow([name, _csv_cell(value)])
        return buf.getvalue().encode()
    raise ValueError(f"format must be 'json' or 'csv', got {fmt!r}")


def parse_report(blob, fmt: str) -> ReproReport:
    text = blob.decode() if isinstance(blob, (bytes, bytearray)) else blob
    if fmt == "json":
        return _report_from_dict(json.loads(text))
    if fmt == "csv":
        rows = list(csv_reader(io.StringIO(text)))
        if not rows or rows[0] != ["field", "value"]:
            raise ValueError("bad CSV report header")
        plain: dict = {}
        digests: dict[int, str] = {}
        count = 0
        for name, cell in rows[1:]:
            if name == "digest.count":
                count = int(cell)
            elif name.startswith("digest."):
                digests[int(name.split(".", 1)[1])] = cell
            elif name == "workers":
                plain[name] = [int(x) for x in cell.split("|")] if cell else []
            else:
                plain[name] = _csv_uncell(name, cell)
        if len(digests) != count:
            raise ValueError("CSV report digest count mismatch")
        plain["digests"] = [digests[i] for i in range(count)]
        return _report_from_dict(plain)
    raise ValueError(f"format must be 'json' or 'csv', got {fmt!r}")


def probe_command(library_call=None) -> tuple[int, ProbeReport]:
    """Run the rounding-environment probe and print one line per field.

    Exit status 0 always: the software backend needs no hardware support.
    """
    report = probe_rounding_support(library_call)
    if report.no_fenv:
        print("fenv access:                 unavailable (NoFenv)")
    else:
        print("fenv access:                 available")
    print(f"division respects RD/RU:     {report.division_respects_rd_ru}")
    print(f"mode survives library call:  {report.mode_survives_library_call}")
    print(f"per-thread isolation:        {report.per_thread_isolation}")
    print(f"hardware backend usable:     {report.all_true()}")
    print("software EFT backend usable: True")
    return 0, report
