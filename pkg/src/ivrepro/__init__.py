"""Interval arithmetic over binary64 with software directed rounding,
reproducible summation kernels, verified matrix products, and a
bitwise-reproducibility audit toolkit."""

__version__ = "0.1.0"

from . import fp_core, interval, expressions, summation, matmul, linsys, dataio, audit

__all__ = [
    "fp_core",
    "interval",
    "expressions",
    "summation",
    "matmul",
    "linsys",
    "dataio",
    "audit",
    "__version__",
]
