"""Short-time Fourier magnitude spectrogram and PGM rendering."""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .audio_ingest import AudioClip


class Scale(str, Enum):
    MAGNITUDE = "magnitude"
    POWER = "power"


@dataclass(frozen=True)
class Spectrogram:
    """Matrix of shape ``(n_bins, n_frames)``; row 0 is the lowest frequency."""

    values: np.ndarray
    bin_hz: float
    frame_s: float
    f0_hz: float = 0.0

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"spectrogram must be 2-D, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> Spectrogram:
        return replace(self, values=values)

    def bin_freqs(self) -> np.ndarray:
        return self.f0_hz + self.bin_hz * np.arange(self.n_bins)


def hann(length: int) -> np.ndarray:
    """Symmetric Hann window, ``0.5 * (1 - cos(2*pi*n / (L - 1)))``."""
    if length == 1:
        return np.ones(1)
    n = np.arange(length)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * n / (length - 1)))


def frame_signal(x: np.ndarray, window_len: int, hop: int) -> np.ndarray:
    n_frames = (len(x) - window_len) // hop + 1
    idx = np.arange(window_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx]


def stft_spectrogram(
    clip: AudioClip | np.ndarray,
    window_len: int = 256,
    hop: int = 128,
    scale: Scale | str = Scale.MAGNITUDE,
    sample_rate_hz: int | None = None,
) -> Spectrogram:
    """Hann-windowed STFT magnitude, frames tiled from sample 0 without padding."""
    if isinstance(clip, AudioClip):
        x, rate = clip.samples, clip.sample_rate_hz
    else:
        x, rate = np.asarray(clip, dtype=np.float64), sample_rate_hz or 2000
    if window_len < 2 or window_len % 2:
        raise ValueError(f"window_len must be even, got {window_len}")
    if hop < 1:
        raise ValueError(f"hop must be >= 1, got {hop}")
    if len(x) < window_len:
        raise ValueError(f"clip of {len(x)} samples is shorter than one window ({window_len})")
    frames = frame_signal(x, window_len, hop) * hann(window_len)
    mag = np.abs(np.fft.rfft(frames, axis=1)).T
    if Scale(scale) is Scale.POWER:
        mag = mag**2
    return Spectrogram(mag, bin_hz=rate / window_len, frame_s=hop / rate)


def to_gray(values: np.ndarray) -> np.ndarray:
    """Min-max scale to uint8 and flip so low frequencies sit on the bottom row."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        g = np.round((v - lo) / (hi - lo) * 255.0)
    else:
        g = np.zeros_like(v)
    return np.flipud(g.astype(np.uint8))


def write_pgm(path: str | os.PathLike, gray: np.ndarray) -> None:
    gray = np.ascontiguousarray(gray, dtype=np.uint8)
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(gray.tobytes())


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM supported")
    return np.frombuffer(data[pos + 1 : pos + 1 + w * h], dtype=np.uint8).reshape(h, w)


def render(spec: Spectrogram | np.ndarray, path: str | os.PathLike) -> None:
    values = spec.values if isinstance(spec, Spectrogram) else spec
    write_pgm(path, to_gray(values))
