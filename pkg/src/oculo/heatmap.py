"""Gaussian-kernel gaze heatmaps and their PGM/PPM rendering."""
from __future__ import annotations

import enum
import math
import re
import unicodedata
from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np

DEFAULT_BANDWIDTH_PX = 25.0
DEFAULT_TRUNCATION = 3.0

# cell value -> RGB; linear interpolation between stops
THERMAL_STOPS = (
    (0.00, (0, 0, 0)),
    (0.25, (0, 0, 255)),
    (0.50, (0, 255, 0)),
    (0.75, (255, 255, 0)),
    (1.00, (255, 0, 0)),
)


class EmptyFrame(ValueError):
    pass


class UnnormalizedGrid(ValueError):
    pass


class Normalization(str, enum.Enum):
    NONE = "none"
    MAX = "max"
    SUM = "sum"


class Palette(str, enum.Enum):
    GRAYSCALE = "gray"
    THERMAL = "thermal"


@dataclass(frozen=True)
class HeatmapGrid:
    """Dense density grid; ``cells[y, x]`` is the cell at pixel column x, row y."""

    width_px: int
    height_px: int
    cells: np.ndarray
    bandwidth_px: float
    point_count: int
    normalization: Normalization = Normalization.NONE

    def value_at(self, x: int, y: int) -> float:
        return float(self.cells[y, x])

    def argmax(self) -> tuple[int, int]:
        y, x = np.unravel_index(int(np.argmax(self.cells)), self.cells.shape)
        return int(x), int(y)


def build_heatmap(
    points: Iterable[tuple[float, float]],
    width: int,
    height: int,
    bandwidth_px: float = DEFAULT_BANDWIDTH_PX,
    truncation_radius: float = DEFAULT_TRUNCATION,
) -> HeatmapGrid:
    """Accumulate an unnormalized Gaussian kernel at every gaze point.

    Points outside the frame are clamped to the nearest edge pixel. Kernel
    mass farther than ``truncation_radius * bandwidth_px`` from a point is
    dropped; pass ``math.inf`` for the untruncated sum.
    """
    if width <= 0 or height <= 0:
        raise EmptyFrame(f"frame {width}x{height} has no pixels")
    if bandwidth_px <= 0:
        raise ValueError("bandwidth must be > 0")
    cells = np.zeros((height, width), dtype=np.float64)
    cutoff = truncation_radius * bandwidth_px
    two_s2 = 2.0 * bandwidth_px * bandwidth_px
    n = 0
    for px, py in points:
        px = min(max(float(px), 0.0), width - 1.0)
        py = min(max(float(py), 0.0), height - 1.0)
        n += 1
        if math.isfinite(cutoff):
            x0, x1 = max(0, math.ceil(px - cutoff)), min(width - 1, math.floor(px + cutoff))
            y0, y1 = max(0, math.ceil(py - cutoff)), min(height - 1, math.floor(py + cutoff))
        else:
            x0, x1, y0, y1 = 0, width - 1, 0, height - 1
        dx2 = (np.arange(x0, x1 + 1) - px) ** 2
        dy2 = (np.arange(y0, y1 + 1) - py) ** 2
        d2 = dy2[:, None] + dx2[None, :]
        kernel = np.exp(-d2 / two_s2)
        if math.isfinite(cutoff):
            kernel[d2 > cutoff * cutoff] = 0.0
        cells[y0:y1 + 1, x0:x1 + 1] += kernel
    return HeatmapGrid(width, height, cells, float(bandwidth_px), n)


def normalize_heatmap(grid: HeatmapGrid, mode: Normalization = Normalization.MAX) -> HeatmapGrid:
    mode = Normalization(mode)
    if mode == Normalization.NONE:
        return grid
    denom = grid.cells.max() if mode == Normalization.MAX else math.fsum(grid.cells.ravel())
    if denom == 0:
        return replace(grid, cells=grid.cells.copy(), normalization=mode)
    return replace(grid, cells=grid.cells / denom, normalization=mode)


def _thermal_rgb(cells: np.ndarray) -> np.ndarray:
    stops = np.array([s for s, _ in THERMAL_STOPS])
    colors = np.array([c for _, c in THERMAL_STOPS], dtype=np.float64)
    rgb = np.stack([np.interp(cells, stops, colors[:, k]) for k in range(3)], axis=-1)
    return np.rint(rgb).astype(np.uint8)


def pnm_header(magic: str, width: int, height: int) -> bytes:
    return f"{magic}\n{width} {height}\n255\n".encode("ascii")


def render_colormap(grid: HeatmapGrid, palette: Palette = Palette.THERMAL) -> bytes:
    """Render a max-normalized grid as binary PGM (grayscale) or PPM (thermal)."""
    if grid.cells.size and (grid.cells.max() > 1.0 or grid.cells.min() < 0.0):
        raise UnnormalizedGrid("cell values must lie in [0, 1]; normalize with Max mode first")
    if Palette(palette) == Palette.GRAYSCALE:
        body = np.rint(grid.cells * 255.0).astype(np.uint8)
        return pnm_header("P5", grid.width_px, grid.height_px) + body.tobytes()
    return pnm_header("P6", grid.width_px, grid.height_px) + _thermal_rgb(grid.cells).tobytes()


def sidecar_text(grid: HeatmapGrid, palette: Optional[Palette] = None) -> str:
    lines = [
        f"width={grid.width_px}",
        f"height={grid.height_px}",
        f"bandwidth_px={grid.bandwidth_px!r}",
        f"point_count={grid.point_count}",
        f"normalization={grid.normalization.value}",
    ]
    if palette is not None:
        lines.append(f"palette={Palette(palette).value}")
    return "\n".join(lines) + "\n"


def slugify(name: str) -> str:
    """Filesystem-safe alias for a scene name; keeps non-ASCII letters."""
    text = unicodedata.normalize("NFC", name).lower()
    text = re.sub(r"[^\w]+", "_", text, flags=re.UNICODE)
    return text.strip("_") or "scene"
