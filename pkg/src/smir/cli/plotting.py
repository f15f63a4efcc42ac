"""SVG figures for experiment and trace output.

matplotlib is driven through the Agg canvas with a fixed hash salt and no
date metadata, so the SVG bytes depend only on the data.
"""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..matcore import EPS  # noqa: E402

_RC = {
    "svg.hashsalt": "smir",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}
_MARKERS = {"SM-LU": "o", "SM-QR": "s", "SM-LU-IR": "^", "BEC": "x", "GEPP-on-B": "d"}


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _floats(rows, key):
    out = []
    for r in rows:
        v = r.get(key)
        try:
            f = float(v)
        except (TypeError, ValueError):
            continue
        if math.isfinite(f):
            out.append((float(r["kappa_A"]), f))
    return out


def scatter_vs_kappa(rows: list[dict], metric: str, path, title: str, logy: bool = True,
                     eps_line: float | None = None) -> None:
    """One series per method: ``metric`` against kappa(A) on log axes."""
    methods = list(dict.fromkeys(r["method"] for r in rows))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 4))
        for i, m in enumerate(methods):
            pts = _floats([r for r in rows if r["method"] == m], metric)
            if not pts:
                continue
            # small deterministic horizontal offset keeps methods apart
            shift = 1.0 + 0.06 * (i - (len(methods) - 1) / 2)
            xs = [p[0] * shift for p in pts]
            ys = [max(p[1], 1e-20) if logy else p[1] for p in pts]
            ax.scatter(xs, ys, label=m, marker=_MARKERS.get(m, "o"), s=18, alpha=0.75)
        if eps_line is not None:
            ax.axhline(eps_line, color="k", lw=0.8, ls="--", label=f"{eps_line / EPS:g} eps")
        ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel("kappa(A)")
        ax.set_ylabel(metric.replace("_", " "))
        ax.set_title(title)
        ax.legend(loc="best", fontsize=7)
        fig.tight_layout()
        _save(fig, path)


def experiment_figures(rows: list[dict], outdir, tag: str) -> list[str]:
    import os

    made = []
    specs = [
        ("normwise_berr", "normwise backward error", 5 * EPS, True),
        ("componentwise_berr", "componentwise backward error", 5 * EPS, True),
        ("forward_err", "forward error", None, True),
    ]
    for metric, label, line, logy in specs:
        path = os.path.join(outdir, f"{metric}.svg")
        scatter_vs_kappa(rows, metric, path, f"{label}, case {tag}", logy, line)
        made.append(path)
    if any(r.get("ir_steps") not in (None, "") for r in rows):
        path = os.path.join(outdir, "ir_steps.svg")
        scatter_vs_kappa([r for r in rows if r.get("ir_steps") not in (None, "")], "ir_steps", path,
                         f"refinement steps, case {tag}", logy=False)
        made.append(path)
    return made


def trace_figure(rows: list[dict], path, title: str) -> None:
    """Residual norm and both backward errors against the refinement step."""
    steps = [int(r["step"]) for r in rows]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.6))
        for key, label, mk in (("residual_norm", "||r||", "o"), ("normwise_berr", "normwise berr", "s"),
                               ("componentwise_berr", "componentwise berr", "^")):
            ax.semilogy(steps, [max(float(r[key]), 1e-20) for r in rows], marker=mk, label=label)
        ax.axhline(5 * EPS, color="k", lw=0.8, ls="--", label="5 eps")
        ax.set_xlabel("refinement step")
        ax.set_title(title)
        ax.legend(loc="best", fontsize=7)
        fig.tight_layout()
        _save(fig, path)
