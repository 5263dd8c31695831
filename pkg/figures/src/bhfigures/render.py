"""Figure rendering from the simulation CSV outputs.

Four figure kinds:

  phase_heatmap   order-parameter map over (Omega, J) with the lobe contour
  observable_cut  1-D sweep curves (density, order parameter, purity, ...)
  dispersion      two-panel Re/Im collective-mode bands with branch colors
  response_map    (k, omega) colormap of one response column; DoS-like maps
                  use a diverging palette whose neutral gray sits exactly
                  at the zero (or otherwise specified) center

Rendering is deterministic for identical inputs and never mutates them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import theme
from .csvio import SchemaError, Table, read_table

__all__ = ["FigureSpec", "RenderInfo", "render", "load_spec"]

KINDS = ("phase_heatmap", "observable_cut", "dispersion", "response_map")


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    csv: str
    out: str
    value_column: str = ""
    curve_columns: tuple = ()
    x_column: str = ""
    center: float | None = None       # diverging-normalization center
    omega_star: float | None = None   # horizontal reference line
    x_range: tuple | None = None
    y_range: tuple | None = None
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"figure kind must be one of {KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class RenderInfo:
    """Where the drawing landed: output path, data extent of the main axes
    and its pixel bounding box (for downstream tooling and pixel tests)."""

    path: str
    extent: tuple
    axes_pixel_bbox: tuple
    image_height: int


def load_spec(path) -> FigureSpec:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    raw.setdefault("curve_columns", [])
    raw["curve_columns"] = tuple(raw["curve_columns"])
    if "x_range" in raw and raw["x_range"] is not None:
        raw["x_range"] = tuple(raw["x_range"])
    if "y_range" in raw and raw["y_range"] is not None:
        raw["y_range"] = tuple(raw["y_range"])
    return FigureSpec(**raw)


def _grid_from_columns(x, y, v):
    xs = np.unique(x)
    ys = np.unique(y)
    grid = np.full((ys.size, xs.size), np.nan)
    xi = np.searchsorted(xs, x)
    yi = np.searchsorted(ys, y)
    grid[yi, xi] = v
    return xs, ys, grid


def _finish(fig, ax, spec: FigureSpec) -> RenderInfo:
    if spec.x_range:
        ax.set_xlim(*spec.x_range)
    if spec.y_range:
        ax.set_ylim(*spec.y_range)
    if spec.title:
        ax.set_title(spec.title)
    fig.savefig(spec.out, dpi=theme.DPI)
    bbox = ax.get_window_extent()
    x0, x1 = ax.get_xlim()
    y0, y1 = ax.get_ylim()
    height = int(round(fig.get_figheight() * theme.DPI))
    plt.close(fig)
    return RenderInfo(path=spec.out, extent=(x0, x1, y0, y1),
                      axes_pixel_bbox=(bbox.x0, bbox.y0, bbox.x1, bbox.y1),
                      image_height=height)


def _render_phase_heatmap(spec: FigureSpec, table: Table) -> RenderInfo:
    value = spec.value_column or "abs_psi0"
    table.require("Omega", "J", value)
    xs, ys, grid = _grid_from_columns(table.column("J"), table.column("Omega"),
                                      table.column(value))
    fig, ax = plt.subplots(figsize=theme.FIGSIZE_SINGLE, layout="constrained")
    pm = ax.pcolormesh(xs, ys, grid, cmap=theme.SEQUENTIAL, shading="nearest")
    with np.errstate(invalid="ignore"):
        # lobe boundary; drawable only on a genuinely 2-D grid
        if grid.shape[0] >= 2 and grid.shape[1] >= 2 and np.nanmax(grid) > 1e-4:
            ax.contour(xs, ys, grid, levels=[1e-4], colors="w", linewidths=0.8)
    fig.colorbar(pm, ax=ax, label=value)
    ax.set_xlabel("J")
    ax.set_ylabel("Omega")
    return _finish(fig, ax, spec)


def _render_observable_cut(spec: FigureSpec, table: Table) -> RenderInfo:
    x_col = spec.x_column or "J"
    curves = spec.curve_columns or ("n0", "abs_psi0", "purity")
    table.require(x_col, *curves)
    x = table.column(x_col)
    order = np.argsort(x)
    fig, ax = plt.subplots(figsize=theme.FIGSIZE_SINGLE, layout="constrained")
    for name in curves:
        ax.plot(x[order], table.column(name)[order], label=name)
    ax.set_xlabel(x_col)
    ax.legend(frameon=False)
    return _finish(fig, ax, spec)


def _render_dispersion(spec: FigureSpec, table: Table) -> RenderInfo:
    table.require("k_index", "branch_label", "Re_omega", "Im_omega")
    k_cols = [c for c in table.header if c.startswith("k_") and c != "k_index"]
    if k_cols:
        comps = np.stack([table.column(c) for c in k_cols], axis=1)
        kmag = np.linalg.norm(comps, axis=1)
    else:
        kmag = table.column("k_index")
    labels = table.strings("branch_label")
    re = table.column("Re_omega")
    im = table.column("Im_omega")
    fig, (ax_re, ax_im) = plt.subplots(
        2, 1, figsize=theme.FIGSIZE_TWO_PANEL, sharex=True, layout="constrained")
    seen = set()
    for label in sorted(set(labels)):
        if label == "trace":
            continue
        sel = np.array([lb == label for lb in labels])
        order = np.argsort(kmag[sel])
        color = theme.BRANCH_COLORS.get(label, theme.BRANCH_COLORS["other"])
        kw = {"color": color}
        if label not in seen:
            kw["label"] = label
            seen.add(label)
        ax_re.plot(kmag[sel][order], re[sel][order], **kw)
        ax_im.plot(kmag[sel][order], im[sel][order], color=color)
    ax_re.set_ylabel("Re omega")
    ax_im.set_ylabel("Im omega")
    ax_im.set_xlabel("|k|")
    ax_re.legend(frameon=False, fontsize=theme.FONT_SIZE - 1)
    if spec.title:
        ax_re.set_title(spec.title)
    fig.savefig(spec.out, dpi=theme.DPI)
    bbox = ax_re.get_window_extent()
    info = RenderInfo(path=spec.out,
                      extent=(*ax_re.get_xlim(), *ax_re.get_ylim()),
                      axes_pixel_bbox=(bbox.x0, bbox.y0, bbox.x1, bbox.y1),
                      image_height=int(round(fig.get_figheight() * theme.DPI)))
    plt.close(fig)
    return info


def _render_response_map(spec: FigureSpec, table: Table) -> RenderInfo:
    value = spec.value_column or "A"
    table.require("k_index", "omega", value)
    xs, ys, grid = _grid_from_columns(table.column("k_index"),
                                      table.column("omega"),
                                      table.column(value))
    fig, ax = plt.subplots(figsize=theme.FIGSIZE_SINGLE, layout="constrained")
    center = spec.center
    if center is None and value in ("A", "ReG", "ImG", "sumrule_violation"):
        center = 0.0
    if center is None and value == "absR2":
        center = 1.0
    if center is not None:
        norm = theme.symmetric_norm(grid, center)
        pm = ax.pcolormesh(xs, ys, grid, cmap=theme.DIVERGING_GRAY, norm=norm,
                           shading="nearest")
    else:
        pm = ax.pcolormesh(xs, ys, grid, cmap=theme.SEQUENTIAL, shading="nearest")
    if spec.omega_star is not None:
        ax.axhline(spec.omega_star, color="w", lw=0.9)
    fig.colorbar(pm, ax=ax, label=value)
    ax.set_xlabel("k index")
    ax.set_ylabel("omega")
    return _finish(fig, ax, spec)


_RENDERERS = {
    "phase_heatmap": _render_phase_heatmap,
    "observable_cut": _render_observable_cut,
    "dispersion": _render_dispersion,
    "response_map": _render_response_map,
}


def render(spec: FigureSpec) -> RenderInfo:
    """Render one figure; deterministic for identical inputs and spec."""
    with plt.rc_context(theme.rc_params()):
        table = read_table(spec.csv)
        return _RENDERERS[spec.kind](spec, table)
