"""Figure rendering for audit runs.

When the CLI writes a delimited report to disk, a companion PNG lands next
to it: per-trial deviation from the first trial in ulps, and the interval
width distribution where the kernel produces intervals.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .audit import AuditRun, _ordinals

__all__ = ["render_report_figure", "figure_path_for"]


def figure_path_for(report_path) -> Path:
    return Path(report_path).with_suffix(".png")


def render_report_figure(run: AuditRun, path) -> Path:
    """Render the audit summary figure to ``path`` and return it."""
    report = run.report
    values = run.data.trial_values
    has_widths = run.data.widths is not None and run.data.widths.size > 0

    fig, axes = plt.subplots(
        1, 2 if has_widths else 1, figsize=(9 if has_widths else 5.5, 3.4)
    )
    ax0 = axes[0] if has_widths else axes

    if len(values) >= 1:
        base = _ordinals(values[0])
        devs = [int(np.max(np.abs(_ordinals(v) - base))) for v in values]
        ax0.plot(range(len(devs)), devs, drawstyle="steps-mid", lw=1.2)
        ax0.set_yscale("symlog")
    ax0.set_xlabel("trial")
    ax0.set_ylabel("max |ulp distance| from trial 0")
    verdict = "bitwise reproducible" if report.bitwise_reproducible else "outputs differ"
    ax0.set_title(f"{report.kernel}: {verdict}", fontsize=10)

    if has_widths:
        ax1 = axes[1]
        w = run.data.widths
        positive = w[w > 0]
        if positive.size:
            bins = np.logspace(
                np.log10(positive.min()), np.log10(max(positive.max(), positive.min() * 10)), 30
            )
            ax1.hist(positive, bins=bins, color="#4878a8")
            ax1.set_xscale("log")
        ax1.set_xlabel("interval width")
        ax1.set_ylabel("count")
        held = report.inclusion_held
        label = "n/a" if held is None else ("held" if held else "VIOLATED")
        ax1.set_title(f"widths (inclusion: {label})", fontsize=10)

    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
