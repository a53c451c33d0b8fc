"""Grid-mask features over a region-of-interest spectrogram.

The band of interest is cut into a 6x6 grid of cell means. Cells are
addressed ``(x, y)`` with ``x`` the time column (1 = earliest) and ``y`` the
frequency row counted from the top of the displayed image (1 = highest
frequency), so an up-sweep runs from lower-left to upper-right, i.e. along
cells with constant ``x + y``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .spectrogram import Spectrogram

GRID = 6
DEFAULT_BAND_HZ = (0.0, 500.0)
N_DIAGONALS = 9
# mask anchors kept after dropping the first and last anchor columns
MASK_COLUMNS = (2, 3, 4)
MASK_ROWS = (1, 2, 3, 4, 5)


class FeatureMode(str, Enum):
    DIAGONAL5 = "diagonal5"
    MASK15 = "mask15"
    COMBINED20 = "combined20"

    @property
    def length(self) -> int:
        return {"diagonal5": 5, "mask15": 15, "combined20": 20}[self.value]


MODE_ORDER = (FeatureMode.COMBINED20, FeatureMode.DIAGONAL5, FeatureMode.MASK15)


@dataclass(frozen=True)
class GridMeans:
    """Cell means; ``means[y - 1, x - 1]`` holds cell (x, y)."""

    means: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.means, dtype=np.float64)
        if m.shape != (GRID, GRID):
            raise ValueError(f"grid must be {GRID}x{GRID}, got {m.shape}")
        object.__setattr__(self, "means", m)

    def mean(self, x: int, y: int) -> float:
        return float(self.means[y - 1, x - 1])


@dataclass(frozen=True)
class FeatureVector:
    mode: FeatureMode
    values: np.ndarray

    def __post_init__(self) -> None:
        mode = FeatureMode(self.mode)
        v = np.array(self.values, dtype=np.float64)
        if v.shape != (mode.length,):
            raise ValueError(f"{mode.value} needs {mode.length} values, got {v.shape}")
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)


def partition(n: int, parts: int) -> list[tuple[int, int]]:
    """Split ``range(n)`` into ``parts`` runs of ``n // parts``; the last run takes the remainder."""
    if n < parts:
        raise ValueError(f"cannot split {n} pixels into {parts} cells")
    size = n // parts
    edges = [i * size for i in range(parts)] + [n]
    return list(zip(edges[:-1], edges[1:]))


def band_rows(spec: Spectrogram, band: tuple[float, float]) -> tuple[int, int]:
    """Row range whose bin frequencies fall in ``[lo, hi)``."""
    freqs = spec.bin_freqs()
    idx = np.nonzero((freqs >= band[0]) & (freqs < band[1]))[0]
    if idx.size == 0:
        raise ValueError(f"band {band} Hz selects no spectrogram rows")
    return int(idx[0]), int(idx[-1]) + 1


def grid_means(
    spec: Spectrogram,
    grid: tuple[int, int] = (GRID, GRID),
    band: tuple[float, float] = DEFAULT_BAND_HZ,
) -> GridMeans:
    if tuple(grid) != (GRID, GRID):
        raise ValueError(f"only a {GRID}x{GRID} grid is supported")
    r0, r1 = band_rows(spec, band)
    sub = spec.values[r0:r1]
    if sub.shape[0] < GRID or sub.shape[1] < GRID:
        raise ValueError(f"band {band} Hz leaves {sub.shape} pixels, too few for the grid")
    means = np.empty((GRID, GRID))
    for i, (a, b) in enumerate(partition(sub.shape[0], GRID)):
        for j, (c, d) in enumerate(partition(sub.shape[1], GRID)):
            means[i, j] = sub[a:b, c:d].mean()
    # matrix rows run low -> high frequency; grid rows run top (high) -> bottom
    return GridMeans(means[::-1])


def diagonal_cells(k: int) -> list[tuple[int, int]]:
    """Cells (x, y) on diagonal ``k`` (1..9).

    Diagonal ``k`` holds the cells with ``x + y == 12 - k``: diagonal 1 sits
    next to the late/low corner cell (6, 6) and diagonal 9 next to the
    early/high corner cell (1, 1); both corners are excluded.
    """
    if not 1 <= k <= N_DIAGONALS:
        raise ValueError(f"diagonal index must be in 1..{N_DIAGONALS}, got {k}")
    s = 2 * GRID - k
    return [(x, s - x) for x in range(1, GRID + 1) if 1 <= s - x <= GRID]


def diagonal_features(g: GridMeans, count: int = 5) -> np.ndarray:
    if not 1 <= count <= N_DIAGONALS:
        raise ValueError(f"count must be in 1..{N_DIAGONALS}, got {count}")
    out = np.empty(count)
    for k in range(1, count + 1):
        cells = diagonal_cells(k)
        out[k - 1] = sum(g.mean(x, y) for x, y in cells) / len(cells)
    return out


def mask_responses(g: GridMeans, x: int, y: int) -> tuple[float, float, float]:
    right, below = g.mean(x + 1, y), g.mean(x, y + 1)
    m1 = (right + below + g.mean(x + 1, y + 1)) / 3.0
    m2 = (right + below) / 2.0
    m3 = (g.mean(x, y) + below) / 2.0
    return m1, m2, m3


def mask_features(g: GridMeans) -> np.ndarray:
    """Max of the three mask responses per anchor, column-major over x in 2..4, y in 1..5."""
    return np.array([max(mask_responses(g, x, y)) for x in MASK_COLUMNS for y in MASK_ROWS])


def feature_names(mode: FeatureMode | str) -> list[str]:
    mode = FeatureMode(mode)
    diag = [f"d{k}" for k in range(1, 6)]
    mask = [f"m_{x}_{y}" for x in MASK_COLUMNS for y in MASK_ROWS]
    return {
        FeatureMode.DIAGONAL5: diag,
        FeatureMode.MASK15: mask,
        FeatureMode.COMBINED20: diag + mask,
    }[mode]


def features_from_grid(g: GridMeans, mode: FeatureMode | str) -> FeatureVector:
    mode = FeatureMode(mode)
    if mode is FeatureMode.DIAGONAL5:
        values = diagonal_features(g, 5)
    elif mode is FeatureMode.MASK15:
        values = mask_features(g)
    else:
        values = np.concatenate([diagonal_features(g, 5), mask_features(g)])
    return FeatureVector(mode, values)


def extract_features(
    spec: Spectrogram,
    mode: FeatureMode | str = FeatureMode.COMBINED20,
    band: tuple[float, float] = DEFAULT_BAND_HZ,
) -> FeatureVector:
    return features_from_grid(grid_means(spec, band=band), mode)
