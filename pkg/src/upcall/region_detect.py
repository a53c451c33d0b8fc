"""Continuous-region extraction on a conditioned spectrogram.

The image is binarized at a small fraction of its mean, every connected
object is traced with Moore-neighbor boundary following (Jacob's stopping
rule), measured, and screened against up-call shape limits. Surviving
objects keep their original (non-binary) values in the output.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .spectrogram import Spectrogram

Pixel = tuple[int, int]

# clockwise Moore neighborhood in (row, col), starting west
_MOORE = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
_NEIGHBORS_8 = _MOORE
_NEIGHBORS_4 = ((0, -1), (-1, 0), (0, 1), (1, 0))

PIXEL_INERTIA = 1.0 / 12.0


@dataclass(frozen=True)
class BinaryImage:
    pixels: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


@dataclass(frozen=True)
class Region:
    pixel_set: frozenset[Pixel]
    boundary: tuple[Pixel, ...]
    perimeter_px: int
    area_px: int
    bbox: tuple[int, int, int, int]  # row_min, row_max, col_min, col_max
    height_hz: float
    width_s: float
    ellipse_orientation_deg: float
    ellipse_axes_ratio: float
    freq_min_hz: float
    freq_max_hz: float

    @property
    def height_px(self) -> int:
        return self.bbox[1] - self.bbox[0] + 1

    @property
    def width_px(self) -> int:
        return self.bbox[3] - self.bbox[2] + 1

    @property
    def hw_ratio(self) -> float:
        """Bounding-box height over width, in pixels."""
        return self.height_px / self.width_px


@dataclass(frozen=True)
class RegionCriteria:
    """Shape limits for an up-call segment; ``None`` disables a bound."""

    min_perimeter_px: float | None = 15
    min_area_px: float | None = 15
    min_height_hz: float | None = 14.0
    max_height_hz: float | None = 250.0
    min_width_s: float | None = 0.1
    max_width_s: float | None = 2.0
    min_orientation_deg: float | None = 1.0
    max_orientation_deg: float | None = 88.0
    min_hw_ratio: float | None = 0.05
    max_hw_ratio: float | None = 3.0
    min_freq_hz: float | None = 50.0
    max_freq_hz: float | None = 400.0
    max_axes_ratio: float | None = 3.5

    def __post_init__(self) -> None:
        for lo, hi in self._pairs():
            a, b = getattr(self, lo), getattr(self, hi)
            if a is not None and b is not None and a > b:
                raise ValueError(f"{lo}={a} exceeds {hi}={b}")

    @staticmethod
    def _pairs() -> list[tuple[str, str]]:
        return [
            ("min_height_hz", "max_height_hz"),
            ("min_width_s", "max_width_s"),
            ("min_orientation_deg", "max_orientation_deg"),
            ("min_hw_ratio", "max_hw_ratio"),
            ("min_freq_hz", "max_freq_hz"),
        ]

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]


# criterion name -> (region attribute, bound kind)
_CHECKS = (
    ("min_perimeter_px", "perimeter_px", "min"),
    ("min_area_px", "area_px", "min"),
    ("min_height_hz", "height_hz", "min"),
    ("max_height_hz", "height_hz", "max"),
    ("min_width_s", "width_s", "min"),
    ("max_width_s", "width_s", "max"),
    ("min_orientation_deg", "ellipse_orientation_deg", "min"),
    ("max_orientation_deg", "ellipse_orientation_deg", "max"),
    ("min_hw_ratio", "hw_ratio", "min"),
    ("max_hw_ratio", "hw_ratio", "max"),
    ("min_freq_hz", "freq_min_hz", "min"),
    ("max_freq_hz", "freq_max_hz", "max"),
    ("max_axes_ratio", "ellipse_axes_ratio", "max"),
)


def binarize(spec: Spectrogram | np.ndarray, threshold_fraction: float = 0.10) -> BinaryImage:
    """True where a pixel exceeds ``threshold_fraction`` times the image mean."""
    if threshold_fraction <= 0:
        raise ValueError("threshold_fraction must be positive")
    values = spec.values if isinstance(spec, Spectrogram) else np.asarray(spec, dtype=float)
    return BinaryImage(values > threshold_fraction * values.mean())


def flood_fill(img: np.ndarray, start: Pixel, connectivity: int = 8) -> set[Pixel]:
    steps = _NEIGHBORS_8 if connectivity == 8 else _NEIGHBORS_4
    rows, cols = img.shape
    seen = {start}
    queue = deque([start])
    while queue:
        r, c = queue.popleft()
        for dr, dc in steps:
            q = (r + dr, c + dc)
            if q not in seen and 0 <= q[0] < rows and 0 <= q[1] < cols and img[q]:
                seen.add(q)
                queue.append(q)
    return seen


def moore_trace(pixels: set[Pixel] | frozenset[Pixel], start: Pixel) -> list[Pixel]:
    """Outer boundary of a pixel set, walked clockwise from ``start``.

    ``start`` must have its west neighbor outside the set (true for the first
    pixel of a row-major scan). Tracing stops when the start pixel is entered
    again from the same backtrack position it began with. Pixels visited more
    than once (thin parts) appear once, at their first visit.
    """
    if start not in pixels:
        raise ValueError(f"start pixel {start} not in the region")
    s_back = (start[0], start[1] - 1)
    if s_back in pixels:
        raise ValueError(f"start pixel {start} has a west neighbor inside the region")
    order = [start]
    seen = {start}
    p, back = start, s_back
    first_move = None
    # each boundary pixel is entered at most once per neighbor direction
    for _ in range(8 * len(pixels) + 8):
        d = _MOORE.index((back[0] - p[0], back[1] - p[1]))
        prev = back
        for k in range(1, 9):
            dr, dc = _MOORE[(d + k) % 8]
            cand = (p[0] + dr, p[1] + dc)
            if cand in pixels:
                break
            prev = cand
        else:
            return order  # isolated pixel
        # on thin shapes the start pixel is re-entered with a different
        # backtrack; repeating the first move out of it closes the loop too
        if p == start and (cand, prev) == first_move:
            return order
        p, back = cand, prev
        if first_move is None:
            first_move = (p, back)
        if p == start and back == s_back:
            return order
        if p not in seen:
            seen.add(p)
            order.append(p)
    raise RuntimeError("Moore tracing failed to terminate")


def _moments(pixel_set: Iterable[Pixel]) -> tuple[float, float, float]:
    pts = np.array(sorted(pixel_set), dtype=np.float64)
    y, x = pts[:, 0], pts[:, 1]  # y = frequency row, x = time column
    dx, dy = x - x.mean(), y - y.mean()
    return float(np.mean(dx * dx)), float(np.mean(dy * dy)), float(np.mean(dx * dy))


def ellipse_params(pixel_set: Iterable[Pixel]) -> tuple[float, float]:
    """Orientation (degrees in [0, 90] from the time axis) and axes ratio."""
    mu20, mu02, mu11 = _moments(pixel_set)
    if mu20 == 0 and mu02 == 0:
        orientation = 0.0
    else:
        orientation = abs(math.degrees(0.5 * math.atan2(2.0 * mu11, mu20 - mu02)))
    half_trace = 0.5 * (mu20 + mu02)
    root = math.sqrt(0.25 * (mu20 - mu02) ** 2 + mu11 * mu11)
    lam_max = half_trace + root
    lam_min = max(half_trace - root, PIXEL_INERTIA)
    lam_max = max(lam_max, PIXEL_INERTIA)
    return orientation, math.sqrt(lam_max / lam_min)


def measure_region(
    pixels: Iterable[Pixel],
    spec_axes: tuple[float, float, float],
    boundary: Sequence[Pixel] | None = None,
) -> Region:
    """Measure bounding box, physical extent and moment ellipse of a pixel set.

    ``spec_axes`` is ``(bin_hz, frame_s, f0_hz)``. Without an explicit
    boundary the set is traced from its first row-major pixel.
    """
    pixel_set = frozenset(pixels)
    if not pixel_set:
        raise ValueError("cannot measure an empty pixel set")
    bin_hz, frame_s, f0_hz = spec_axes
    if boundary is None:
        boundary = moore_trace(pixel_set, min(pixel_set))
    rows = [p[0] for p in pixel_set]
    cols = [p[1] for p in pixel_set]
    r0, r1, c0, c1 = min(rows), max(rows), min(cols), max(cols)
    orientation, axes_ratio = ellipse_params(pixel_set)
    return Region(
        pixel_set=pixel_set,
        boundary=tuple(boundary),
        perimeter_px=len(boundary),
        area_px=len(pixel_set),
        bbox=(r0, r1, c0, c1),
        height_hz=(r1 - r0 + 1) * bin_hz,
        width_s=(c1 - c0 + 1) * frame_s,
        ellipse_orientation_deg=orientation,
        ellipse_axes_ratio=axes_ratio,
        freq_min_hz=f0_hz + r0 * bin_hz,
        freq_max_hz=f0_hz + r1 * bin_hz,
    )


def label_components(img: BinaryImage | np.ndarray, connectivity: int = 8) -> list[tuple[Pixel, set[Pixel]]]:
    """(first pixel, pixel set) per component, in row-major order of first pixel."""
    mask = img.pixels if isinstance(img, BinaryImage) else np.asarray(img, dtype=bool)
    labeled = np.zeros(mask.shape, dtype=bool)
    out = []
    for r, c in zip(*np.nonzero(mask)):
        if labeled[r, c]:
            continue
        start = (int(r), int(c))
        comp = flood_fill(mask, start, connectivity)
        for q in comp:
            labeled[q] = True
        out.append((start, comp))
    return out


def trace_regions(
    img: BinaryImage | np.ndarray,
    spec_axes: tuple[float, float, float] = (1.0, 1.0, 0.0),
    connectivity: int = 8,
) -> list[Region]:
    """One measured region per connected component, in scan order."""
    return [
        measure_region(comp, spec_axes, moore_trace(comp, start))
        for start, comp in label_components(img, connectivity)
    ]


def first_failure(region: Region, criteria: RegionCriteria) -> str | None:
    """Name of the first violated criterion, or None if the region passes."""
    for name, attr, kind in _CHECKS:
        bound = getattr(criteria, name)
        if bound is None:
            continue
        value = getattr(region, attr)
        if (kind == "min" and value < bound) or (kind == "max" and value > bound):
            return name
    return None


def filter_regions(regions: Sequence[Region], criteria: RegionCriteria | None = None) -> list[Region]:
    criteria = criteria or RegionCriteria()
    return [r for r in regions if first_failure(r, criteria) is None]


def region_mask(shape: tuple[int, int], regions: Iterable[Region]) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for region in regions:
        if region.pixel_set:
            rr, cc = zip(*region.pixel_set)
            mask[list(rr), list(cc)] = True
    return mask


def roi_spectrogram(spec: Spectrogram, kept: Iterable[Region]) -> Spectrogram:
    """Keep spectrogram values on kept-region pixels, zero elsewhere."""
    mask = region_mask(spec.shape, kept)
    return spec.with_values(np.where(mask, spec.values, 0.0))


@dataclass(frozen=True)
class Detection:
    binary: BinaryImage
    regions: list[Region]
    failures: list[str | None]
    roi: Spectrogram

    @property
    def kept(self) -> list[Region]:
        return [r for r, f in zip(self.regions, self.failures) if f is None]


def detect(
    spec: Spectrogram,
    criteria: RegionCriteria | None = None,
    threshold_fraction: float = 0.10,
    connectivity: int = 8,
) -> Detection:
    """Binarize, trace, screen and mask a preprocessed spectrogram."""
    criteria = criteria or RegionCriteria()
    img = binarize(spec, threshold_fraction)
    regions = trace_regions(img, (spec.bin_hz, spec.frame_s, spec.f0_hz), connectivity)
    failures = [first_failure(r, criteria) for r in regions]
    kept = [r for r, f in zip(regions, failures) if f is None]
    return Detection(img, regions, failures, roi_spectrogram(spec, kept))
