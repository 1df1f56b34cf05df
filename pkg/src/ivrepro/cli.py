"""Command-line reproducibility auditor.

    audit sum --method {naive|kahan|chunked|prerounded|interval} --n N
              [--k K] [--trials T] [--seed S] [--workers 1,2,8]
              [--format json|csv] [--out FILE] [--input VEC] [--no-plot]
    audit matmul --algo {gemm|imm3|imm4} --n N [--trials T] [--seed S] ...
    audit linsolve --n N [--cond C] [--seed S] ...
    audit probe

Exit codes: 0 when every promised contract held, 2 when a kernel violated
its contract, 1 on usage or I/O errors.  AUDIT_BACKEND={eft|fenv} selects
the rounding backend for scalar directed operations; fenv is refused when
the environment probe fails.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

from . import audit
from .errors import ProbeFailedError
from .fp_core import EftSoftwareBackend, HardwareFenvBackend, set_active_backend

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VIOLATION = 2

_SUM_METHODS = {
    "naive": audit.Kernel.SUM_NAIVE,
    "kahan": audit.Kernel.SUM_KAHAN,
    "chunked": audit.Kernel.SUM_CHUNKED,
    "prerounded": audit.Kernel.SUM_PREROUNDED,
    "interval": audit.Kernel.SUM_INTERVALS,
}

_MATMUL_ALGOS = {
    "gemm": audit.Kernel.GEMM,
    "imm3": audit.Kernel.IMM3,
    "imm4": audit.Kernel.IMM4,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; this CLI reserves 2 for
    # contract violations, so usage problems surface as exceptions instead.
    def error(self, message):
        raise _UsageError(message)


def _parse_workers(text: str) -> tuple[int, ...]:
    try:
        workers = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise _UsageError(f"bad --workers list: {text!r}") from exc
    if not workers:
        raise _UsageError("--workers needs at least one count")
    return workers


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--trials", type=int, default=20)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--workers", type=str, default="1")
    sub.add_argument("--format", choices=("json", "csv"), default="json")
    sub.add_argument("--out", type=str, default=None,
                     help="write the report here (stdout otherwise)")
    sub.add_argument("--no-plot", action="store_true",
                     help="skip the companion figure when writing --out")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="audit", description="Kernel reproducibility auditor")
    subs = parser.add_subparsers(dest="command", required=True)

    p_sum = subs.add_parser("sum", parents=[], help="audit a summation kernel")
    p_sum.add_argument("--method", required=True,
                       help="naive|kahan|chunked|prerounded|interval or a registered kernel name")
    p_sum.add_argument("--n", type=int, required=True)
    p_sum.add_argument("--k", type=int, default=None)
    p_sum.add_argument("--cond", type=float, default=None,
                       help="target condition number for generated summands")
    p_sum.add_argument("--input", type=str, default=None,
                       help="read summands from a .bin (raw float64) or hex text file")
    _add_common(p_sum)

    p_mm = subs.add_parser("matmul", help="audit a matrix product kernel")
    p_mm.add_argument("--algo", required=True, choices=sorted(_MATMUL_ALGOS))
    p_mm.add_argument("--n", type=int, required=True)
    _add_common(p_mm)

    p_ls = subs.add_parser("linsolve", help="audit the verified linear solver")
    p_ls.add_argument("--n", type=int, required=True)
    p_ls.add_argument("--cond", type=float, default=1e8)
    _add_common(p_ls)

    subs.add_parser("probe", help="probe the environment's rounding-mode support")
    return parser


def _select_backend() -> None:
    choice = os.environ.get("AUDIT_BACKEND", "eft").strip().lower()
    if choice in ("", "eft"):
        set_active_backend(EftSoftwareBackend())
        return
    if choice == "fenv":
        set_active_backend(HardwareFenvBackend())    # raises ProbeFailedError if unsafe
        return
    raise _UsageError(f"AUDIT_BACKEND must be 'eft' or 'fenv', got {choice!r}")


def _kernel_for(args) -> str:
    if args.command == "sum":
        kernel = _SUM_METHODS.get(args.method)
        if kernel is not None:
            return kernel.value
        if args.method in audit.KERNELS:                # registered extensions
            return args.method
        raise _UsageError(f"unknown sum method {args.method!r}")
    if args.command == "matmul":
        return _MATMUL_ALGOS[args.algo].value
    return audit.Kernel.LINSOLVE.value


def _emit(run: audit.AuditRun, args) -> None:
    blob = audit.emit_report(run.report, args.format)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(blob)
        if not args.no_plot:
            from .figures import figure_path_for, render_report_figure

            fig_path = render_report_figure(run, figure_path_for(args.out))
            print(f"report: {args.out}\nfigure: {fig_path}", file=sys.stderr)
        else:
            print(f"report: {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(blob.decode())


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _select_backend()
        if args.command == "probe":
            status, _ = audit.probe_command()
            return status
        cfg = audit.TrialConfig(
            kernel=_kernel_for(args),
            trials=args.trials,
            seed=args.seed,
            n=args.n,
            workers=_parse_workers(args.workers),
            k=getattr(args, "k", None),
            cond=getattr(args, "cond", None),
            input_path=getattr(args, "input", None),
        )
        run = audit.run_audit_detailed(cfg)
        _emit(run, args)
        report = run.report
        verdict = "violated" if report.contract_violated else "held"
        print(
            f"kernel={report.kernel} bitwise={report.bitwise_reproducible} "
            f"inclusion={report.inclusion_held} contracts {verdict}",
            file=sys.stderr,
        )
        return EXIT_VIOLATION if report.contract_violated else EXIT_OK
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProbeFailedError as exc:
        print(f"backend refused: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
