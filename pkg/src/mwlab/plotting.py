"""Figures for the report path.

Each experiment's rows can be drawn to an image next to its table.  The
table stays the primary output; figures are a convenience and are not part
of the byte-for-byte determinism guarantee.
"""
from __future__ import annotations

import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .exactnum import LogReal  # noqa: E402

GOLDEN = (math.sqrt(5) - 1) / 2


def new_figure(width: float = 6.0):
    fig, ax = plt.subplots(figsize=(width, width * GOLDEN))
    ax.grid(True, alpha=0.3)
    return fig, ax


def _ln(value: Any) -> float:
    if isinstance(value, LogReal):
        return value.ln_magnitude
    if isinstance(value, Fraction):
        return math.log(value) if value > 0 else float("-inf")
    return float(value)


def _log10(value: Any) -> float:
    return _ln(value) / math.log(10)


def plot_sweep(rows: Sequence[dict], ax) -> None:
    by_alpha: dict[Fraction, list[tuple[int, float]]] = {}
    for r in rows:
        if r["maverick_mass"] is None:
            continue
        by_alpha.setdefault(r["alpha"], []).append((r["n"], _log10(r["maverick_mass"])))
    for alpha, pts in sorted(by_alpha.items()):
        ns, ys = zip(*sorted(pts))
        ax.plot(ns, ys, marker="o", label=f"alpha = {alpha}")
    hb = sorted({(r["n"], _log10(r["hoeffding_bound"])) for r in rows if r["hoeffding_bound"] is not None})
    if hb:
        ns, ys = zip(*hb)
        ax.plot(ns, ys, ls="--", color="grey", label="Hoeffding bound")
    ax.set_xlabel("number of spins n")
    ax.set_ylabel("log10 maverick mass")
    ax.legend(frameon=False)


def plot_decoherence(rows: Sequence[dict], ax) -> None:
    ns = [r["n_env"] for r in rows]
    ax.plot(ns, [_ln(r["overlap"]) for r in rows], marker="o", label="ln overlap")
    ax.plot(ns, [_ln(r["visibility_ln"]) for r in rows], marker="s", label="ln visibility")
    ax.set_xlabel("environment degrees of freedom N")
    ax.set_ylabel("natural log")
    ax.legend(frameon=False)


def plot_ratefn(rows: Sequence[dict], ax) -> None:
    for n in sorted({r["n"] for r in rows}):
        sub = sorted((r for r in rows if r["n"] == n), key=lambda r: r["a"])
        a = [float(r["a"]) for r in sub]
        ax.plot(a, [-r["counting_rate"] * math.log(2) for r in sub], color="C0", label="counting, limit")
        ax.plot(a, [-r["counting_rate_empirical"] * math.log(2) for r in sub], "o", color="C0", label=f"counting, n={n}")
        ax.plot(a, [r["born_rate"] for r in sub], color="C1", label="Born, limit")
        ax.plot(a, [r["born_rate_empirical"] for r in sub], "s", color="C1", label=f"Born, n={n}")
    ax.set_xlabel("plus frequency a")
    ax.set_ylabel("decay rate (nats per spin)")
    ax.legend(frameon=False)


PLOTTERS = {
    "maverick": plot_sweep,
    "sweep": plot_sweep,
    "decoherence": plot_decoherence,
    "ratefn": plot_ratefn,
}


def render_figure(cfg, rows: Sequence[dict], path: str | Path) -> Path:
    plotter = PLOTTERS.get(cfg.experiment)
    if plotter is None:
        raise ValueError(f"no figure for experiment {cfg.experiment!r}")
    fig, ax = new_figure()
    try:
        plotter(rows, ax)
        fig.tight_layout()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=120)
    finally:
        plt.close(fig)
    return path
