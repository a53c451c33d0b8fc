"""Spectrogram conditioning: adaptive Wiener denoising, per-band zero-meaning
and hard-limit equalization."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .spectrogram import Spectrogram

STD_UNITS = "std"
ABSOLUTE_UNITS = "absolute"
PLAIN_SCALE = "std"
ROBUST_SCALE = "mad"
# converts a median absolute deviation to a Gaussian standard deviation
MAD_TO_STD = 1.4826


@dataclass(frozen=True)
class PreprocessConfig:
    """Denoise window and clamp bounds.

    With ``bounds_unit="std"`` the floor and ceiling are multiples of the
    standard deviation of the zero-meaned matrix, resolved per clip;
    ``scale_estimator="mad"`` swaps in a median-absolute-deviation estimate.
    """

    wiener_window: int = 5
    s_floor: float = 0.75
    s_ceiling: float = 3.0
    bounds_unit: str = STD_UNITS
    scale_estimator: str = PLAIN_SCALE

    def __post_init__(self) -> None:
        if self.wiener_window < 3 or self.wiener_window % 2 == 0:
            raise ValueError(f"wiener_window must be odd and >= 3, got {self.wiener_window}")
        if not self.s_ceiling > self.s_floor:
            raise ValueError(f"s_ceiling ({self.s_ceiling}) must exceed s_floor ({self.s_floor})")
        if self.bounds_unit not in (STD_UNITS, ABSOLUTE_UNITS):
            raise ValueError(f"bounds_unit must be 'std' or 'absolute', got {self.bounds_unit!r}")
        if self.scale_estimator not in (PLAIN_SCALE, ROBUST_SCALE):
            raise ValueError(f"scale_estimator must be 'std' or 'mad', got {self.scale_estimator!r}")


def local_stats(values: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance over each pixel's window, truncated at the borders."""
    r = window // 2
    padded = np.pad(np.asarray(values, dtype=np.float64), r, constant_values=np.nan)
    win = sliding_window_view(padded, (window, window))
    mean = np.nanmean(win, axis=(2, 3))
    var = np.nanmean((win - mean[:, :, None, None]) ** 2, axis=(2, 3))
    return mean, var


def wiener_values(values: np.ndarray, window: int = 5) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    mu, var = local_stats(x, window)
    noise = var.mean()
    denom = np.maximum(var, noise)
    gain = np.divide(
        np.maximum(var - noise, 0.0), denom, out=np.zeros_like(var), where=denom > 0
    )
    return mu + gain * (x - mu)


def wiener_denoise(spec: Spectrogram, window: int = 5) -> Spectrogram:
    """Adaptive 2-D Wiener filter; noise power is the mean local variance."""
    return spec.with_values(wiener_values(spec.values, window))


def zero_mean_values(values: np.ndarray) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    out = x - x.mean(axis=1, keepdims=True)
    # rows flat to within rounding (e.g. after unequal edge windows) are
    # constant tonals and must vanish exactly
    flat = np.ptp(x, axis=1) <= 16 * np.finfo(float).eps * np.abs(x).max(axis=1)
    out[flat] = 0.0
    return out


def zero_mean_bands(spec: Spectrogram) -> Spectrogram:
    """Subtract each frequency row's temporal mean."""
    return spec.with_values(zero_mean_values(spec.values))


def hard_limit_values(values: np.ndarray, floor: float, ceiling: float) -> np.ndarray:
    return np.maximum(floor, np.minimum(ceiling, values)) - floor


def hard_limit(spec: Spectrogram, cfg: PreprocessConfig) -> Spectrogram:
    """Clamp to [floor, ceiling] and shift by -floor; bounds taken as absolute."""
    return spec.with_values(hard_limit_values(spec.values, cfg.s_floor, cfg.s_ceiling))


def robust_std(values: np.ndarray) -> float:
    v = np.asarray(values, dtype=np.float64)
    return MAD_TO_STD * float(np.median(np.abs(v - np.median(v))))


def resolve_bounds(values: np.ndarray, cfg: PreprocessConfig) -> tuple[float, float]:
    if cfg.bounds_unit == ABSOLUTE_UNITS:
        return cfg.s_floor, cfg.s_ceiling
    sd = robust_std(values) if cfg.scale_estimator == ROBUST_SCALE else float(np.std(values))
    return cfg.s_floor * sd, cfg.s_ceiling * sd


def preprocess(spec: Spectrogram, cfg: PreprocessConfig | None = None) -> Spectrogram:
    cfg = cfg or PreprocessConfig()
    normalized = zero_mean_bands(wiener_denoise(spec, cfg.wiener_window))
    floor, ceiling = resolve_bounds(normalized.values, cfg)
    absolute = replace(cfg, bounds_unit=ABSOLUTE_UNITS)
    if ceiling <= floor:
        # flat input: std is zero and every value is already 0
        return normalized.with_values(np.zeros(normalized.shape))
    return hard_limit(normalized, replace(absolute, s_floor=floor, s_ceiling=ceiling))
