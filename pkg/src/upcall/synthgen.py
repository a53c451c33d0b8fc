"""Seeded synthetic up-call benchmark.

Positives carry a linear up-sweep with a Hann amplitude envelope; every clip
carries white Gaussian noise and, with the configured probabilities, one of
three distractors (steady tonal, broadband burst, short down-sweep).
SNR is the ratio of chirp power (over its duration) to the power of the
clip's own noise realization inside the chirp's swept band.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_ingest import (
    CLIP_SAMPLES,
    POSITIVE,
    SAMPLE_RATE_HZ,
    AudioClip,
    LabeledClip,
    ManifestEntry,
    write_manifest,
    write_wav,
)

# 4473 up-calls out of 20000 training clips
REFERENCE_POSITIVE_FRACTION = 4473 / 20000
NOISE_STD = 0.05


@dataclass(frozen=True)
class SynthSpec:
    n_clips: int = 2000
    positive_fraction: float = REFERENCE_POSITIVE_FRACTION
    snr_db_range: tuple[float, float] = (0.0, 15.0)
    f_start_hz: tuple[float, float] = (50.0, 150.0)
    f_end_hz: tuple[float, float] = (150.0, 250.0)
    duration_s: tuple[float, float] = (0.5, 1.5)
    p_tonal: float = 0.3
    p_burst: float = 0.15
    p_downsweep: float = 0.15
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_clips < 0:
            raise ValueError("n_clips must be >= 0")
        if not 0.0 <= self.positive_fraction <= 1.0:
            raise ValueError("positive_fraction must lie in [0, 1]")
        probs = (self.p_tonal, self.p_burst, self.p_downsweep)
        if min(probs) < 0 or sum(probs) > 1.0 + 1e-12:
            raise ValueError("distractor probabilities must be >= 0 and sum to <= 1")
        for name in ("snr_db_range", "f_start_hz", "f_end_hz", "duration_s"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} low end exceeds high end")
        if self.f_start_hz[1] > self.f_end_hz[0]:
            raise ValueError("start-frequency range must lie below end-frequency range")
        if self.duration_s[0] <= 0 or self.duration_s[1] > CLIP_SAMPLES / SAMPLE_RATE_HZ:
            raise ValueError("chirp duration must fit inside the clip")

    @property
    def n_positive(self) -> int:
        return int(round(self.n_clips * self.positive_fraction))


@dataclass(frozen=True)
class ClipParams:
    label: int
    noise_seed: int
    snr_db: float | None = None
    f_start_hz: float | None = None
    f_end_hz: float | None = None
    onset_s: float | None = None
    duration_s: float | None = None
    distractor: str | None = None
    distractor_args: dict = field(default_factory=dict)


def chirp(f_start: float, f_end: float, duration_s: float, phase: float = 0.0) -> np.ndarray:
    """Linear sweep with a Hann envelope, unit peak amplitude."""
    n = int(round(duration_s * SAMPLE_RATE_HZ))
    t = np.arange(n) / SAMPLE_RATE_HZ
    k = (f_end - f_start) / duration_s
    env = np.hanning(n) if n > 1 else np.ones(n)
    return env * np.sin(2 * np.pi * (f_start * t + 0.5 * k * t * t) + phase)


def band_fraction(f_lo: float, f_hi: float) -> float:
    return (f_hi - f_lo) / (SAMPLE_RATE_HZ / 2.0)


def band_power(x: np.ndarray, f_lo: float, f_hi: float) -> float:
    """Mean-square of ``x`` after an ideal band-pass to ``[f_lo, f_hi)`` Hz."""
    spectrum = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(len(x), 1.0 / SAMPLE_RATE_HZ)
    keep = (freqs >= f_lo) & (freqs < f_hi)
    return float(np.mean(np.fft.irfft(np.where(keep, spectrum, 0.0), len(x)) ** 2))


def draw_params(rng: np.random.Generator, spec: SynthSpec, label: int) -> ClipParams:
    kw = {"label": label, "noise_seed": int(rng.integers(2**63 - 1))}
    if label == POSITIVE:
        dur = rng.uniform(*spec.duration_s)
        kw.update(
            snr_db=float(rng.uniform(*spec.snr_db_range)),
            f_start_hz=float(rng.uniform(*spec.f_start_hz)),
            f_end_hz=float(rng.uniform(*spec.f_end_hz)),
            duration_s=float(dur),
            onset_s=float(rng.uniform(0.0, CLIP_SAMPLES / SAMPLE_RATE_HZ - dur)),
        )
    u = rng.uniform()
    if u < spec.p_tonal:
        kw["distractor"] = "tonal"
        kw["distractor_args"] = {
            "freq_hz": float(rng.uniform(30.0, 450.0)),
            "amp": float(rng.uniform(0.5, 3.0) * NOISE_STD),
        }
    elif u < spec.p_tonal + spec.p_burst:
        kw["distractor"] = "burst"
        kw["distractor_args"] = {
            "onset_s": float(rng.uniform(0.0, 1.9)),
            "duration_s": float(rng.uniform(0.02, 0.08)),
            "amp": float(rng.uniform(2.0, 6.0) * NOISE_STD),
        }
    elif u < spec.p_tonal + spec.p_burst + spec.p_downsweep:
        dur = float(rng.uniform(0.3, 0.8))
        kw["distractor"] = "downsweep"
        kw["distractor_args"] = {
            "f_start_hz": float(rng.uniform(180.0, 300.0)),
            "f_end_hz": float(rng.uniform(60.0, 150.0)),
            "duration_s": dur,
            "onset_s": float(rng.uniform(0.0, 2.0 - dur)),
            "amp": float(rng.uniform(1.0, 3.0) * NOISE_STD),
        }
    return ClipParams(**kw)


def _place(out: np.ndarray, piece: np.ndarray, onset_s: float) -> None:
    start = int(round(onset_s * SAMPLE_RATE_HZ))
    end = min(start + len(piece), len(out))
    out[start:end] += piece[: end - start]


def render_components(p: ClipParams) -> dict[str, np.ndarray]:
    """Noise, call and distractor waveforms of one clip, before summation."""
    rng = np.random.Generator(np.random.PCG64(p.noise_seed))
    noise = rng.normal(0.0, NOISE_STD, CLIP_SAMPLES)
    call = np.zeros(CLIP_SAMPLES)
    if p.label == POSITIVE:
        wave = chirp(p.f_start_hz, p.f_end_hz, p.duration_s, rng.uniform(0, 2 * np.pi))
        # calibrate against this clip's noise, not its expectation: narrow
        # bands hold few FFT bins and their power scatters by >1 dB
        target = band_power(noise, p.f_start_hz, p.f_end_hz) * 10.0 ** (p.snr_db / 10.0)
        wave *= np.sqrt(target / np.mean(wave**2))
        _place(call, wave, p.onset_s)
    clutter = np.zeros(CLIP_SAMPLES)
    a = p.distractor_args
    if p.distractor == "tonal":
        t = np.arange(CLIP_SAMPLES) / SAMPLE_RATE_HZ
        clutter += a["amp"] * np.sin(2 * np.pi * a["freq_hz"] * t + rng.uniform(0, 2 * np.pi))
    elif p.distractor == "burst":
        n = int(round(a["duration_s"] * SAMPLE_RATE_HZ))
        _place(clutter, a["amp"] * np.hanning(n) * rng.normal(0.0, 1.0, n), a["onset_s"])
    elif p.distractor == "downsweep":
        wave = a["amp"] * chirp(a["f_start_hz"], a["f_end_hz"], a["duration_s"], rng.uniform(0, 2 * np.pi))
        _place(clutter, wave, a["onset_s"])
    return {"noise": noise, "call": call, "clutter": clutter}


def render(p: ClipParams) -> np.ndarray:
    parts = render_components(p)
    return np.clip(parts["noise"] + parts["call"] + parts["clutter"], -1.0, 1.0)


def draw_all(spec: SynthSpec) -> list[ClipParams]:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    labels = np.zeros(spec.n_clips, dtype=int)
    labels[: spec.n_positive] = POSITIVE
    labels = rng.permutation(labels)
    return [draw_params(rng, spec, int(lab)) for lab in labels]


def generate(spec: SynthSpec | None = None) -> list[LabeledClip]:
    """Deterministic labeled clips; exactly ``round(n_clips * positive_fraction)`` positives."""
    spec = spec or SynthSpec()
    return [
        LabeledClip(AudioClip(render(p), source_id=f"synth_{spec.seed}_{i:05d}"), p.label)
        for i, p in enumerate(draw_all(spec))
    ]


def write_dataset(
    spec: SynthSpec, out_dir: str | os.PathLike, manifest_name: str = "manifest.csv"
) -> Path:
    """Write one 16-bit WAV per clip plus a manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, p in enumerate(draw_all(spec)):
        name = f"clip_{i:05d}.wav"
        write_wav(out / name, render(p))
        entries.append(ManifestEntry(name, p.label, 0.0))
    manifest = out / manifest_name
    write_manifest(manifest, entries)
    return manifest
