"""Styling constants: fonts, sizes, branch colors, colormaps.

Scientific content (data, ranges) never lives here; figures read it from
the CSVs and the figure spec.
"""

from __future__ import annotations

from matplotlib.colors import LinearSegmentedColormap, Normalize, TwoSlopeNorm

FIGSIZE_SINGLE = (4.2, 3.2)
FIGSIZE_TWO_PANEL = (4.2, 5.2)
DPI = 150
FONT_SIZE = 9
LINE_WIDTH = 1.4

# branch colors keyed by the spectrum CSV branch_label column
BRANCH_COLORS = {
    "QP": "#c23b22",
    "QH": "#c23b22",
    "G": "#c23b22",
    "A": "#7a9e3b",
    "D": "#1f5fa8",
    "trace": "#bbbbbb",
    "other": "#999999",
    "unlabeled": "#999999",
}

NEUTRAL_GRAY = (0.5, 0.5, 0.5)

# diverging map whose center is the neutral gray tone; zero-centered
# normalization puts vanishing spectral weight exactly on the gray
# (odd level count pins the midpoint to an exact lookup bin)
DIVERGING_GRAY = LinearSegmentedColormap.from_list(
    "diverging_gray",
    [(0.0, (0.13, 0.25, 0.66)), (0.5, NEUTRAL_GRAY), (1.0, (0.70, 0.09, 0.11))],
    N=257,
)

SEQUENTIAL = "magma"


def symmetric_norm(data, center: float = 0.0) -> TwoSlopeNorm:
    """Diverging normalization symmetric about center (DoS maps: center 0,
    reflectivity maps: center 1)."""
    import numpy as np

    span = float(np.nanmax(np.abs(np.asarray(data) - center)))
    if span == 0.0:
        span = 1.0
    return TwoSlopeNorm(vcenter=center, vmin=center - span, vmax=center + span)


def rc_params() -> dict:
    return {
        "font.size": FONT_SIZE,
        "axes.linewidth": 0.8,
        "lines.linewidth": LINE_WIDTH,
        "figure.dpi": DPI,
        "savefig.dpi": DPI,
    }
