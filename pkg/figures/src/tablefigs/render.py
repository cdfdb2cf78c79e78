"""Figure rendering for the CSV tables the opquery CLI writes.

This package never imports the solver library. Its only input surface is
the published CSV schemas, so figures can be rebuilt from archived runs
without the code that produced them.

Determinism contract: render() returns the exact arrays it drew, and two
calls on the same file return identical arrays. Raster bytes are left to
matplotlib; reproducibility is asserted on the plot data, not the image.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "SchemaMismatch", "KIND_COLUMNS", "render"]

# Required header names per figure kind, in published order.
KIND_COLUMNS: dict[str, tuple[str, ...]] = {
    "convergence": ("n", "lambda_next", "err", "m_norm", "bound"),
    "mnorm": ("n", "lambda_next", "err", "m_norm", "bound"),
    "greens-heatmap": ("x", "y", "g_approx", "g_exact"),
    "sweep": ("c_mag", "err_at_n", "m_norm_final"),
}


class SchemaMismatch(Exception):
    """Input CSV does not carry the columns the requested kind needs."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure request: which table, which plot, where to write it."""

    input_csv: str
    kind: str
    output_image: str


def _load_columns(path: str) -> dict[str, np.ndarray]:
    """Read a headered numeric CSV into {column name: float array}."""
    with open(path, newline="") as fh:
        header = [name.strip() for name in fh.readline().strip().split(",")]
        body = fh.read()
    if not body.strip():
        raise ValueError(f"{path} has a header but no data rows")
    data = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
    if data.shape[1] != len(header):
        raise SchemaMismatch(
            f"{path}: header lists {len(header)} columns but rows have {data.shape[1]}"
        )
    return {name: data[:, i] for i, name in enumerate(header)}


def _require(columns: dict[str, np.ndarray], kind: str, path: str) -> None:
    missing = [name for name in KIND_COLUMNS[kind] if name not in columns]
    if missing:
        raise SchemaMismatch(
            f"{path} is missing columns required for kind {kind!r}: "
            + ", ".join(missing)
        )


def _fig_convergence(cols: dict[str, np.ndarray]) -> tuple[plt.Figure, dict]:
    n, err, bound = cols["n"], cols["err"], cols["bound"]
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    ax.loglog(n, bound, "-", color="tab:orange", label="certificate bound")
    ax.loglog(n, err, "o", color="tab:blue", markersize=5, label="recovery error")
    ax.set_xlabel("queries n")
    ax.set_ylabel("spectral norm")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return fig, {"n": n, "err": err, "bound": bound}


def _fig_mnorm(cols: dict[str, np.ndarray]) -> tuple[plt.Figure, dict]:
    n, m_norm = cols["n"], cols["m_norm"]
    # bound = estimate / lambda_next holds row by row, so any row recovers
    # the final weighted-norm estimate; the last row is the converged one.
    final = float(cols["bound"][-1] * cols["lambda_next"][-1])
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    ax.loglog(n, m_norm, "o-", color="tab:blue", markersize=5, label="weighted norm")
    ax.axhline(final, linestyle="--", color="tab:gray", label=f"final {final:.4g}")
    ax.set_xlabel("queries n")
    ax.set_ylabel("weighted response norm")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return fig, {"n": n, "m_norm": m_norm, "final": final}


def _pivot(cols: dict[str, np.ndarray], name: str) -> tuple[np.ndarray, ...]:
    xs = np.unique(cols["x"])
    ys = np.unique(cols["y"])
    grid = np.full((xs.size, ys.size), np.nan)
    gi = np.searchsorted(xs, cols["x"])
    gj = np.searchsorted(ys, cols["y"])
    grid[gi, gj] = cols[name]
    if np.isnan(grid).any():
        raise ValueError("kernel sample does not cover a full x-y grid")
    return xs, ys, grid


def _fig_heatmap(cols: dict[str, np.ndarray]) -> tuple[plt.Figure, dict]:
    xs, ys, approx = _pivot(cols, "g_approx")
    _, _, exact = _pivot(cols, "g_exact")
    diff = np.abs(approx - exact)
    extent = (float(xs[0]), float(xs[-1]), float(ys[0]), float(ys[-1]))
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.8), constrained_layout=True)
    panels = (("recovered", approx), ("exact", exact), ("abs diff", diff))
    for ax, (title, grid) in zip(axes, panels):
        # grid is indexed [x, y]; imshow wants rows = y, so transpose.
        im = ax.imshow(grid.T, origin="lower", extent=extent, aspect="auto")
        ax.set_title(title)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        fig.colorbar(im, ax=ax, shrink=0.85)
    return fig, {"x": xs, "y": ys, "approx": approx, "exact": exact, "diff": diff}


def _fig_sweep(cols: dict[str, np.ndarray]) -> tuple[plt.Figure, dict]:
    c, err = cols["c_mag"], cols["err_at_n"]
    slope, intercept = np.polyfit(c, err, 1)
    fit = slope * c + intercept
    ss_res = float(np.sum((err - fit) ** 2))
    ss_tot = float(np.sum((err - np.mean(err)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    ax.plot(c, err, "o", color="tab:blue", markersize=6, label="relative error")
    ax.plot(c, fit, "-", color="tab:orange", label="least squares")
    ax.annotate(
        f"slope = {slope:.6g}\nR$^2$ = {r2:.4f}",
        xy=(0.05, 0.95),
        xycoords="axes fraction",
        va="top",
        fontsize=10,
        bbox={"boxstyle": "round", "facecolor": "white", "alpha": 0.8},
    )
    ax.set_xlabel("advection magnitude")
    ax.set_ylabel("relative error at fixed n")
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig, {
        "c_mag": c,
        "err_at_n": err,
        "fit": fit,
        "slope": float(slope),
        "intercept": float(intercept),
        "r2": float(r2),
    }


_BUILDERS = {
    "convergence": _fig_convergence,
    "mnorm": _fig_mnorm,
    "greens-heatmap": _fig_heatmap,
    "sweep": _fig_sweep,
}


def render(spec: FigureSpec) -> dict:
    """Render one figure to spec.output_image and return the plotted data.

    Raises SchemaMismatch when the CSV lacks required columns for the kind,
    listing every missing name. The returned dict holds the arrays (and fit
    scalars, where applicable) exactly as drawn.
    """
    if spec.kind not in KIND_COLUMNS:
        raise ValueError(f"unknown figure kind {spec.kind!r}")
    columns = _load_columns(spec.input_csv)
    _require(columns, spec.kind, spec.input_csv)
    fig, plot_data = _BUILDERS[spec.kind](columns)
    try:
        fig.savefig(spec.output_image)
    finally:
        plt.close(fig)
    return plot_data
