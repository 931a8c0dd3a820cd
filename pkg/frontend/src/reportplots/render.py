"""Render the report figures from the chain's plot-ready CSV directory.

Inputs follow the report-data contract: partitions.csv, rho_series.csv,
trace_scalars.csv, ri_matrix.csv, dispersion_flags.csv, autocorr.csv,
rate_fit.csv, and adjacency.csv for map figures.  Rendering never mutates
inputs, and each figure's plotted data series is returned alongside the file
path so tests can check the data pixel-independently.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .layout import force_layout, load_coordinates

ALL_FIGURES = (
    "partition_map",
    "trace",
    "rho_series",
    "autocorr",
    "ri_heatmap",
    "dispersion_map",
    "rate_fit",
)


class RenderError(Exception):
    pass


@dataclass
class PlotSpec:
    """What to render, from where, to where."""

    in_dir: str | Path
    out_dir: str | Path
    coords_path: str | Path | None = None
    figures: tuple[str, ...] = ALL_FIGURES
    image_format: str = "png"
    layout_seed: int = 0
    max_rate_areas: int = 4

    def __post_init__(self):
        unknown = set(self.figures) - set(ALL_FIGURES)
        if unknown:
            raise RenderError(f"unknown figures requested: {sorted(unknown)}")


@dataclass
class RenderResult:
    """Paths and the exact data series drawn in each figure."""

    figures: dict = field(default_factory=dict)

    def path(self, name: str) -> Path:
        return self.figures[name]["path"]

    def series(self, name: str) -> dict:
        return self.figures[name]["series"]


def _read_csv(in_dir: Path, name: str, required_cols) -> pd.DataFrame:
    path = in_dir / name
    if not path.exists():
        raise RenderError(f"missing input CSV: {path}")
    df = pd.read_csv(path)
    missing = [c for c in required_cols if c not in df.columns]
    if missing:
        raise RenderError(f"{name} is missing column(s) {missing}")
    return df


def _positions(spec: PlotSpec, in_dir: Path, n_areas: int) -> tuple[np.ndarray, np.ndarray]:
    adjacency = _read_csv(in_dir, "adjacency.csv", ("area_a", "area_b"))
    edges = adjacency[["area_a", "area_b"]].to_numpy(dtype=int)
    if spec.coords_path is not None:
        return load_coordinates(spec.coords_path, n_areas), edges
    return force_layout(n_areas, edges, seed=spec.layout_seed), edges


def _save(fig, spec: PlotSpec, name: str) -> Path:
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.{spec.image_format}"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def _map_panel(ax, pos, edges, colors, title):
    for a, b in edges:
        ax.plot(
            [pos[a, 0], pos[b, 0]], [pos[a, 1], pos[b, 1]],
            color="0.85", linewidth=0.6, zorder=1,
        )
    ax.scatter(pos[:, 0], pos[:, 1], c=colors, s=60, zorder=2, edgecolors="0.3", linewidths=0.4)
    ax.set_title(title, fontsize=9)
    ax.set_xticks([])
    ax.set_yticks([])


def render_partition_map(spec: PlotSpec, in_dir: Path) -> dict:
    parts = _read_csv(in_dir, "partitions.csv", ("season", "area", "cluster"))
    seasons = sorted(parts["season"].unique())
    n_areas = int(parts["area"].max()) + 1
    pos, edges = _positions(spec, in_dir, n_areas)
    ncol = min(4, len(seasons))
    nrow = int(np.ceil(len(seasons) / ncol))
    fig, axes = plt.subplots(nrow, ncol, figsize=(3.1 * ncol, 2.9 * nrow), squeeze=False)
    cmap = plt.get_cmap("tab20")
    labels = {}
    for idx, s in enumerate(seasons):
        ax = axes[idx // ncol][idx % ncol]
        block = parts[parts["season"] == s].sort_values("area")
        lab = block["cluster"].to_numpy()
        labels[int(s)] = lab
        _map_panel(ax, pos, edges, [cmap(int(c) % 20) for c in lab], f"season {s} (k={lab.max() + 1})")
    for idx in range(len(seasons), nrow * ncol):
        axes[idx // ncol][idx % ncol].axis("off")
    path = _save(fig, spec, "partition_map")
    return {"path": path, "series": {"labels": labels}}


def render_trace(spec: PlotSpec, in_dir: Path) -> dict:
    trace = _read_csv(in_dir, "trace_scalars.csv", ("draw",))
    cols = [c for c in trace.columns if c != "draw"]
    ncol = min(3, len(cols))
    nrow = int(np.ceil(len(cols) / ncol))
    fig, axes = plt.subplots(nrow, ncol, figsize=(3.4 * ncol, 2.2 * nrow), squeeze=False)
    series = {}
    for idx, col in enumerate(cols):
        ax = axes[idx // ncol][idx % ncol]
        ax.plot(trace["draw"], trace[col], linewidth=0.7)
        ax.set_title(col, fontsize=9)
        series[col] = trace[col].to_numpy()
    for idx in range(len(cols), nrow * ncol):
        axes[idx // ncol][idx % ncol].axis("off")
    path = _save(fig, spec, "trace")
    return {"path": path, "series": series}


def render_rho_series(spec: PlotSpec, in_dir: Path) -> dict:
    rho = _read_csv(in_dir, "rho_series.csv", ("season", "mean", "lo", "hi")).sort_values("season")
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.fill_between(rho["season"], rho["lo"], rho["hi"], alpha=0.25, label="credible band")
    ax.plot(rho["season"], rho["mean"], marker="o", linewidth=1.2, label="posterior mean")
    ax.set_xlabel("season")
    ax.set_ylabel("edge-removal probability")
    ax.legend(fontsize=8)
    path = _save(fig, spec, "rho_series")
    return {
        "path": path,
        "series": {
            "season": rho["season"].to_numpy(),
            "mean": rho["mean"].to_numpy(),
            "lo": rho["lo"].to_numpy(),
            "hi": rho["hi"].to_numpy(),
        },
    }


def render_autocorr(spec: PlotSpec, in_dir: Path) -> dict:
    ac = _read_csv(in_dir, "autocorr.csv", ("lag", "corr")).sort_values("lag")
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.stem(ac["lag"], ac["corr"])
    ax.set_xlabel("lag (seasons)")
    ax.set_ylabel("autocorrelation")
    ax.set_ylim(-0.05, 1.0)
    path = _save(fig, spec, "autocorr")
    return {"path": path, "series": {"lag": ac["lag"].to_numpy(), "corr": ac["corr"].to_numpy()}}


def render_ri_heatmap(spec: PlotSpec, in_dir: Path) -> dict:
    path_in = Path(spec.in_dir) / "ri_matrix.csv"
    if not path_in.exists():
        raise RenderError(f"missing input CSV: {path_in}")
    mat = pd.read_csv(path_in).to_numpy(dtype=float)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(mat, vmin=0, vmax=1, cmap="viridis")
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_xlabel("season")
    ax.set_ylabel("season")
    path = _save(fig, spec, "ri_heatmap")
    return {"path": path, "series": {"matrix": mat}}


def render_dispersion_map(spec: PlotSpec, in_dir: Path) -> dict:
    flags = _read_csv(in_dir, "dispersion_flags.csv", ("area", "season", "flag"))
    seasons = sorted(flags["season"].unique())
    n_areas = int(flags["area"].max()) + 1
    pos, edges = _positions(spec, in_dir, n_areas)
    ncol = min(4, len(seasons))
    nrow = int(np.ceil(len(seasons) / ncol))
    fig, axes = plt.subplots(nrow, ncol, figsize=(3.1 * ncol, 2.9 * nrow), squeeze=False)
    series = {}
    for idx, s in enumerate(seasons):
        ax = axes[idx // ncol][idx % ncol]
        block = flags[flags["season"] == s].sort_values("area")
        flagged = block["flag"].to_numpy(dtype=bool)
        series[int(s)] = flagged
        colors = ["0.45" if f else "white" for f in flagged]
        _map_panel(ax, pos, edges, colors, f"season {s}")
    for idx in range(len(seasons), nrow * ncol):
        axes[idx // ncol][idx % ncol].axis("off")
    path = _save(fig, spec, "dispersion_map")
    return {"path": path, "series": series}


def render_rate_fit(spec: PlotSpec, in_dir: Path) -> dict:
    fit = _read_csv(in_dir, "rate_fit.csv", ("area", "week", "observed", "fitted_mean", "lo", "hi"))
    totals = fit.groupby("area")["observed"].sum().sort_values(ascending=False)
    areas = totals.index[: spec.max_rate_areas].tolist()
    fig, axes = plt.subplots(len(areas), 1, figsize=(7, 2.2 * len(areas)), squeeze=False)
    series = {}
    for idx, area in enumerate(areas):
        ax = axes[idx][0]
        block = fit[fit["area"] == area].sort_values("week")
        ax.fill_between(block["week"], block["lo"], block["hi"], alpha=0.25)
        ax.plot(block["week"], block["fitted_mean"], linewidth=1.1)
        ax.plot(block["week"], block["observed"], ".", markersize=3.5, color="0.2")
        ax.set_ylabel(f"area {area}", fontsize=8)
        series[int(area)] = {
            "fitted_mean": block["fitted_mean"].to_numpy(),
            "observed": block["observed"].to_numpy(),
        }
    axes[-1][0].set_xlabel("week")
    path = _save(fig, spec, "rate_fit")
    return {"path": path, "series": series}


_RENDERERS = {
    "partition_map": render_partition_map,
    "trace": render_trace,
    "rho_series": render_rho_series,
    "autocorr": render_autocorr,
    "ri_heatmap": render_ri_heatmap,
    "dispersion_map": render_dispersion_map,
    "rate_fit": render_rate_fit,
}


def render(spec: PlotSpec) -> RenderResult:
    """Produce every requested figure; returns paths plus plotted series."""
    in_dir = Path(spec.in_dir)
    if not in_dir.exists():
        raise RenderError(f"input directory not found: {in_dir}")
    result = RenderResult()
    for name in spec.figures:
        result.figures[name] = _RENDERERS[name](spec, in_dir)
    return result
