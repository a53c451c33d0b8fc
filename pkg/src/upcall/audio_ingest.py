"""WAV ingestion, fixed-length clip slicing and labeled manifests."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from scipy.io import wavfile

SAMPLE_RATE_HZ = 2000
CLIP_SECONDS = 2.0
CLIP_SAMPLES = int(SAMPLE_RATE_HZ * CLIP_SECONDS)

POSITIVE = 1
NEGATIVE = 0
LABEL_TOKENS = {"upcall": POSITIVE, "noise": NEGATIVE}


class AudioError(ValueError):
    """Raised for unreadable or unsupported audio input."""


class ManifestError(ValueError):
    """Raised for malformed manifest lines."""


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE_HZ
    source_id: str = ""
    offset_s: float = 0.0
    padded: int = 0  # number of trailing zeros appended

    def __post_init__(self) -> None:
        x = np.array(self.samples, dtype=np.float64)
        if x.ndim != 1 or x.size != CLIP_SAMPLES:
            raise AudioError(f"clip must hold {CLIP_SAMPLES} samples, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise AudioError("clip contains non-finite samples")
        if self.sample_rate_hz != SAMPLE_RATE_HZ:
            raise AudioError(f"sample rate {self.sample_rate_hz} Hz != {SAMPLE_RATE_HZ} Hz")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    @property
    def clip_id(self) -> str:
        return f"{self.source_id}@{self.offset_s:.3f}"


@dataclass(frozen=True)
class LabeledClip:
    clip: AudioClip
    label: int

    def __post_init__(self) -> None:
        if self.label not in (POSITIVE, NEGATIVE):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: int
    offset_s: float | None = None


@dataclass
class Manifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    root: Path = Path(".")

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() else self.root / p

    def __len__(self) -> int:
        return len(self.entries)


def _to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        # scipy left-justifies 24-bit samples into int32
        return data.astype(np.float64) / 2147483648.0
    if data.dtype == np.float32:
        return data.astype(np.float64)
    raise AudioError(f"unsupported sample encoding {data.dtype}")


def load_wav(path: str | os.PathLike) -> tuple[np.ndarray, int]:
    """Return channel-0 samples scaled to [-1, 1] and the file's sample rate."""
    try:
        rate, data = wavfile.read(os.fspath(path))
    except FileNotFoundError:
        raise AudioError(f"no such file: {path}") from None
    except (ValueError, OSError) as exc:
        raise AudioError(f"cannot read {path}: {exc}") from exc
    if data.ndim == 2:
        data = data[:, 0]
    return _to_float(data), int(rate)


def slice_clips(samples: np.ndarray, source_id: str = "") -> list[AudioClip]:
    """Cut a signal into disjoint 2 s clips; the tail is zero-padded."""
    samples = np.asarray(samples, dtype=np.float64)
    clips = []
    for start in range(0, max(len(samples), 1), CLIP_SAMPLES):
        chunk = samples[start : start + CLIP_SAMPLES]
        pad = CLIP_SAMPLES - len(chunk)
        if pad:
            chunk = np.concatenate([chunk, np.zeros(pad)])
        clips.append(
            AudioClip(chunk, source_id=source_id, offset_s=start / SAMPLE_RATE_HZ, padded=pad)
        )
    return clips


def read_audio(path: str | os.PathLike) -> Iterator[AudioClip]:
    """Yield consecutive 2 s clips of a 2 kHz WAV file in source order."""
    samples, rate = load_wav(path)
    if rate != SAMPLE_RATE_HZ:
        raise AudioError(f"{path}: sample rate {rate} Hz != {SAMPLE_RATE_HZ} Hz")
    yield from slice_clips(samples, source_id=str(path))


def read_clip_at(path: str | os.PathLike, offset_s: float) -> AudioClip:
    samples, rate = load_wav(path)
    if rate != SAMPLE_RATE_HZ:
        raise AudioError(f"{path}: sample rate {rate} Hz != {SAMPLE_RATE_HZ} Hz")
    start = int(round(offset_s * SAMPLE_RATE_HZ))
    if start < 0 or start >= len(samples):
        raise AudioError(f"{path}: offset {offset_s} s outside the file")
    chunk = samples[start : start + CLIP_SAMPLES]
    pad = CLIP_SAMPLES - len(chunk)
    if pad:
        chunk = np.concatenate([chunk, np.zeros(pad)])
    return AudioClip(chunk, source_id=str(path), offset_s=start / SAMPLE_RATE_HZ, padded=pad)


def write_wav(path: str | os.PathLike, samples: np.ndarray, rate: int = SAMPLE_RATE_HZ) -> None:
    """Write mono 16-bit PCM; samples are clipped to [-1, 1 - 1 LSB]."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 32767 / 32768)
    wavfile.write(os.fspath(path), rate, np.round(x * 32768.0).astype("<i2"))


def parse_label(token: str) -> int:
    try:
        return LABEL_TOKENS[token.strip().lower()]
    except KeyError:
        raise ManifestError(f"unknown label {token.strip()!r}") from None


def read_manifest(path: str | os.PathLike) -> Manifest:
    """Parse ``path,label[,offset_s]`` lines; ``#`` lines and blanks are skipped.

    Relative audio paths resolve against the manifest's directory.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) not in (2, 3) or not parts[0]:
            raise ManifestError(f"{path}:{lineno}: expected 'path,label[,offset_s]', got {raw!r}")
        try:
            label = parse_label(parts[1])
        except ManifestError as exc:
            raise ManifestError(f"{path}:{lineno}: {exc}") from None
        offset = None
        if len(parts) == 3 and parts[2]:
            try:
                offset = float(parts[2])
            except ValueError:
                raise ManifestError(f"{path}:{lineno}: bad offset {parts[2]!r}") from None
        entries.append(ManifestEntry(parts[0], label, offset))
    return Manifest(entries, root=path.parent)


def write_manifest(path: str | os.PathLike, entries: list[ManifestEntry]) -> None:
    names = {POSITIVE: "upcall", NEGATIVE: "noise"}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# path,label[,offset_s]\n")
        for e in entries:
            tail = "" if e.offset_s is None else f",{e.offset_s:g}"
            fh.write(f"{e.path},{names[e.label]}{tail}\n")


def load_labeled(manifest: Manifest) -> Iterator[LabeledClip]:
    """Expand manifest entries into labeled clips.

    An entry with an offset yields the single clip starting there; an entry
    without one yields every 2 s clip of the file.
    """
    for entry in manifest.entries:
        path = manifest.resolve(entry)
        if entry.offset_s is None:
            for clip in read_audio(path):
                yield LabeledClip(clip, entry.label)
        else:
            yield LabeledClip(read_clip_at(path, entry.offset_s), entry.label)
