"""Figure rendering for CLI report paths.

Every report-producing subcommand can render matplotlib figures to files next
to its delimited output; these helpers keep the plotting conventions in one
place.  All figures are written with the Agg backend.
"""

from __future__ import annotations

import math

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

DPI = 140


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return str(path)


def plot_mollifier(tf, path):
    """Profile and first derivative of a 1D test function."""
    lo, hi = tf.axis_support(0)
    pad = 0.1 * (hi - lo)
    xs = np.linspace(lo - pad, hi + pad, 801)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, tf.values(xs[:, None]), label="phi")
    ax.plot(xs, tf.axis_derivative(0).values(xs[:, None]), "--",
            label="phi'", lw=1)
    ax.axhline(0, color="k", lw=0.5)
    q = tf.moment_order
    ax.set_title(f"mollifier (q={q}, parity={tf.parity})")
    ax.set_xlabel("x")
    ax.legend()
    return _save(fig, path)


def plot_classification(report, path, title=""):
    """Log-log sup sweeps with their tail fits, one line per alpha."""
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for alpha, samples in report.sweeps.items():
        eps = np.array([s.eps for s in samples])
        sup = np.array([s.sup for s in samples])
        finite = np.isfinite(sup) & (sup > 0)
        label = "alpha=" + ",".join(map(str, alpha))
        fit = report.fits.get(alpha)
        if fit is not None and math.isfinite(fit.exponent):
            label += f" (order {fit.exponent:.2f})"
        ax.loglog(eps[finite], sup[finite], "o-", ms=3, label=label)
    ax.set_xlabel("eps")
    ax.set_ylabel("sup over box")
    ax.set_title(title or f"verdict: {report.verdict}")
    ax.legend(fontsize=7)
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_association(result, path, title=""):
    """Pairing sequences against eps with extrapolated limits."""
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for rec in result.records:
        line, = ax.semilogx(rec.eps, rec.pairings, "o-", ms=3,
                            label=f"{rec.psi_id} -> {rec.limit:.4g}")
        if rec.converged:
            ax.axhline(rec.limit, color=line.get_color(), lw=0.5, ls=":")
    ax.set_xlabel("eps")
    ax.set_ylabel("pairing")
    ax.set_title(title or f"verdict: {result.verdict}")
    ax.legend(fontsize=7)
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_net_values(net, box, eps_list, path, title="net values"):
    """1D net values over the box for a few eps."""
    (lo, hi), = box.intervals
    xs = np.linspace(lo, hi, 601)
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for eps in eps_list:
        ax.plot(xs, net.eval(eps, xs[:, None]), lw=1, label=f"eps={eps:g}")
    ax.set_xlabel("x")
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_geodesics(solutions, path):
    """Transverse and v trajectories for a family of solutions."""
    fig, axes = plt.subplots(3, 1, figsize=(6.5, 7), sharex=True)
    for sol in solutions:
        for ax, name in zip(axes, ("x", "y", "v")):
            ax.plot(sol.u, sol.column(name), lw=1,
                    label=f"eps={sol.eps:.3g}" if name == "x" else None)
    for ax, name in zip(axes, ("x", "y", "v")):
        ax.set_ylabel(name)
        ax.axvline(0.0, color="k", lw=0.5, ls=":")
    axes[0].legend(fontsize=7)
    axes[-1].set_xlabel("u")
    return _save(fig, path)


def plot_gt_report(report, path):
    """Boundedness sweeps and the derivative L2 integral, log-log."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    for label, rows in report.sup_sweeps.items():
        eps = [e for e, _ in rows]
        sup = [s for _, s in rows]
        fit = report.sup_fits.get(label)
        tag = label if fit is None else f"{label} ({fit.exponent:.2f})"
        ax1.loglog(eps, sup, "o-", ms=3, label=tag)
    ax1.set_xlabel("eps")
    ax1.set_ylabel("sup over box")
    ax1.set_title("component bounds")
    ax1.legend(fontsize=7)
    ax1.grid(True, which="both", alpha=0.3)
    if report.l2_values:
        eps = [e for e, _ in report.l2_values]
        vals = [v for _, v in report.l2_values]
        positive = [(e, v) for e, v in zip(eps, vals) if v > 0]
        if positive:
            tag = "sum |dg|^2"
            if report.l2_fit is not None:
                tag += f" ({report.l2_fit.exponent:.2f})"
            ax2.loglog(*zip(*positive), "s-", ms=3, color="C3", label=tag)
            ax2.legend(fontsize=8)
    ax2.set_xlabel("eps")
    ax2.set_ylabel("L2 integral")
    ax2.set_title(f"verdict: {report.verdict}")
    ax2.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_test_object(report, path):
    """Condition summaries: pairing deficits and smooth-convergence orders."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    data = report.weak_identity.data
    if data:
        names = list(data)
        deficits = [max(d["deficit"], 1e-16) for d in data.values()]
        ax1.barh(range(len(names)), deficits, log=True)
        ax1.set_yticks(range(len(names)))
        ax1.set_yticklabels(names, fontsize=6)
        ax1.axvline(1e-3, color="r", lw=0.8, ls="--")
    ax1.set_title(f"(i) deficits: {'pass' if report.weak_identity.passed else 'FAIL'}")
    orders = report.smooth_order.data.get("orders", {})
    target = report.smooth_order.data.get("target_order")
    if orders:
        names = list(orders)
        vals = [orders[n] if orders[n] is not None and math.isfinite(orders[n])
                else 0.0 for n in names]
        ax2.bar(range(len(names)), vals)
        ax2.set_xticks(range(len(names)))
        ax2.set_xticklabels(names, fontsize=7)
        if target:
            ax2.axhline(target, color="r", lw=0.8, ls="--",
                        label=f"target {target}")
            ax2.legend(fontsize=8)
    ax2.set_title(f"(ii) orders: {'pass' if report.smooth_order.passed else 'FAIL'}"
                  f" / (iii) {'pass' if report.moderateness.passed else 'FAIL'}")
    return _save(fig, path)
