"""Figure rendering.  Output is a pure function of the input files and style
options: fixed figure geometry, salted SVG ids, no embedded dates (an
optional timestamp footer can be switched on explicitly).
"""

from __future__ import annotations

import datetime
import math
import os
import warnings

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .jobs import PlotJob, load_inputs

plt.rcParams["svg.hashsalt"] = "plotkit"

TIME_LABEL = "t  (units of 1/J)"


def _finite(rows, key):
    return np.array([r[key] for r in rows if not math.isnan(r[key])])


def _save(fig, output: str):
    os.makedirs(os.path.dirname(output) or ".", exist_ok=True)
    png = output + ".png"
    svg = output + ".svg"
    fig.savefig(png, dpi=150, metadata={"Software": "plotkit"})
    fig.savefig(svg, metadata={"Date": None})
    plt.close(fig)
    return png, svg


def _footer(fig, style):
    if style.get("timestamp_footer", False):
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        fig.text(0.99, 0.01, stamp, ha="right", va="bottom", fontsize=6)


def _green_panels(rows, header, job: PlotJob):
    rows = sorted(rows, key=lambda r: r["t"])
    t = np.array([r["t"] for r in rows])
    have_est = any(not math.isnan(r["estimate_re"]) for r in rows)
    if not have_est:
        warnings.warn("no estimate values present; drawing the analytic curve only")

    fig, (ax_im, ax_re) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 5.4))
    max_dev = math.nan
    for ax, part in ((ax_im, "im"), (ax_re, "re")):
        ana = np.array([r[f"analytic_{part}"] for r in rows])
        ax.plot(t, ana, "k-", lw=1.2, label="analytic")
        if have_est:
            est = np.array([r[f"estimate_{part}"] for r in rows])
            err = 2.0 * np.array([r[f"stderr_{part}"] for r in rows])
            ax.errorbar(t, est, yerr=err, fmt="o", ms=3.5, lw=0.8, capsize=2,
                        color="C0", label="protocol (2 sigma)")
            dev = np.nanmax(np.abs(est - ana))
            max_dev = dev if math.isnan(max_dev) else max(max_dev, dev)
        ax.set_ylabel(f"{'Im' if part == 'im' else 'Re'} G")
        ax.legend(loc="upper right", fontsize=8)
    ax_re.set_xlabel(job.style.get("xlabel", TIME_LABEL))
    title = job.style.get("title", "retarded Green's function")
    ax_im.set_title(title)
    if have_est:
        ax_im.annotate(f"max |estimate - analytic| = {max_dev:.3e}",
                       xy=(0.02, 0.03), xycoords="axes fraction", fontsize=8)
    _footer(fig, job.style)
    png, svg = _save(fig, job.output)
    return {"png": png, "svg": svg, "max_deviation": float(max_dev)}


def _scaling(rows, header, job: PlotJob):
    def row_err(r):
        vals = [r["stderr_re"], r["stderr_im"]]
        return max(v for v in vals if not math.isnan(v)) if any(
            not math.isnan(v) for v in vals) else math.nan

    shots = np.array([r["shots"] for r in rows])
    stderr = np.array([row_err(r) for r in rows])
    keep = (shots > 0) & (stderr > 0) & np.isfinite(stderr)
    shots, stderr = shots[keep], stderr[keep]
    if len(shots) < 2:
        raise ValueError("scaling figure needs at least two rows with "
                         "positive shots and stderr")
    order = np.argsort(shots)
    shots, stderr = shots[order], stderr[order]
    slope, intercept = np.polyfit(np.log10(shots), np.log10(stderr), 1)

    fig, ax = plt.subplots(figsize=(5.4, 4.0))
    ax.loglog(shots, stderr, "o", color="C0", label="estimator std error")
    ax.loglog(shots, 10**intercept * shots**slope, "k--", lw=1.0,
              label=f"fit: slope {slope:.3f}")
    ax.set_xlabel("shots")
    ax.set_ylabel("std error")
    ax.set_title(job.style.get("title", "shot-noise scaling"))
    ax.legend(fontsize=8)
    ax.annotate(f"slope = {slope:.3f}", xy=(0.05, 0.08),
                xycoords="axes fraction", fontsize=9)
    _footer(fig, job.style)
    png, svg = _save(fig, job.output)
    return {"png": png, "svg": svg, "slope": float(slope)}


def _convergence(rows, header, job: PlotJob):
    dt = np.array([r["t"] for r in rows])
    err = np.array([r["estimate_re"] for r in rows])
    keep = (dt > 0) & (err > 0)
    dt, err = dt[keep], err[keep]
    if len(dt) < 2:
        raise ValueError("convergence figure needs at least two step sizes")
    order = np.argsort(dt)
    dt, err = dt[order], err[order]
    slope, intercept = np.polyfit(np.log10(dt), np.log10(err), 1)

    fig, ax = plt.subplots(figsize=(5.4, 4.0))
    ax.loglog(dt, err, "s", color="C1", label="max abs error")
    ax.loglog(dt, 10**intercept * dt**slope, "k--", lw=1.0,
              label=f"fit: order {slope:.2f}")
    ax.set_xlabel("step size dt  (units of 1/J)")
    ax.set_ylabel("max |estimate - analytic|")
    ax.set_title(job.style.get("title", "step-size convergence"))
    ax.legend(fontsize=8)
    ax.annotate(f"order = {slope:.2f}", xy=(0.05, 0.08),
                xycoords="axes fraction", fontsize=9)
    _footer(fig, job.style)
    png, svg = _save(fig, job.output)
    return {"png": png, "svg": svg, "order": float(slope)}


_RENDERERS = {
    "green_panels": _green_panels,
    "scaling": _scaling,
    "convergence": _convergence,
}


def render(job: PlotJob) -> dict:
    """Render a job to <output>.png and <output>.svg; returns the paths plus
    the figure's headline statistic (max deviation, fitted slope/order)."""
    rows, header = load_inputs(job)
    missing = [c for c in ("t", "estimate_re", "analytic_re", "stderr_re", "shots")
               if rows and c not in rows[0]]
    if missing:
        raise ValueError(f"input is missing columns {missing}")
    if not rows:
        raise ValueError("no data rows in inputs")
    return _RENDERERS[job.kind](rows, header, job)
