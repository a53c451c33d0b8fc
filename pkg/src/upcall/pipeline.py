"""Pipeline configuration and the per-clip audio -> features path."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .audio_ingest import AudioClip
from .classifier import TrainConfig
from .features import DEFAULT_BAND_HZ, FeatureMode, FeatureVector, GridMeans, features_from_grid, grid_means
from .preprocess import PreprocessConfig, preprocess
from .region_detect import Detection, RegionCriteria, detect
from .spectrogram import Scale, Spectrogram, stft_spectrogram


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    window_len: int = 256
    hop: int = 128
    spectrogram_scale: str = Scale.MAGNITUDE.value
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    threshold_fraction: float = 0.10
    connectivity: int = 8
    criteria: RegionCriteria = field(default_factory=RegionCriteria)
    band_lo_hz: float = DEFAULT_BAND_HZ[0]
    band_hi_hz: float = DEFAULT_BAND_HZ[1]
    features: str = FeatureMode.COMBINED20.value
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        Scale(self.spectrogram_scale)
        FeatureMode(self.features)
        if self.connectivity not in (4, 8):
            raise ConfigError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if not self.threshold_fraction > 0:
            raise ConfigError("threshold_fraction must be positive")
        if not self.band_hi_hz > self.band_lo_hz:
            raise ConfigError("band_hi_hz must exceed band_lo_hz")

    @property
    def band(self) -> tuple[float, float]:
        return (self.band_lo_hz, self.band_hi_hz)

    @property
    def mode(self) -> FeatureMode:
        return FeatureMode(self.features)

    def flat(self) -> dict[str, Any]:
        """All settings as one flat key -> value mapping."""
        out: dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in _NESTED:
                out.update(asdict(value))
            else:
                out[f.name] = value
        return out

    def to_text(self) -> str:
        return "".join(f"{k}={_fmt(v)}\n" for k, v in self.flat().items())

    def with_overrides(self, overrides: Mapping[str, Any]) -> PipelineConfig:
        return config_from_mapping({**self.flat(), **overrides})


_NESTED = {"preprocess": PreprocessConfig, "criteria": RegionCriteria, "train": TrainConfig}


def _fmt(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def _coerce(raw: Any, annotation: str, key: str) -> Any:
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if "None" in annotation and text.lower() == "none":
            return None
        if annotation.startswith("int"):
            return int(text)
        if annotation.startswith("float"):
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return text


def _field_types(cls) -> dict[str, str]:
    return {f.name: str(f.type) for f in fields(cls)}


def config_keys() -> list[str]:
    keys = [f.name for f in fields(PipelineConfig) if f.name not in _NESTED]
    for cls in _NESTED.values():
        keys.extend(f.name for f in fields(cls))
    return keys


def config_from_mapping(values: Mapping[str, Any]) -> PipelineConfig:
    """Build a config from flat keys; unknown keys are rejected."""
    unknown = set(values) - set(config_keys())
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    top_types = _field_types(PipelineConfig)
    kwargs: dict[str, Any] = {}
    for name, cls in _NESTED.items():
        types = _field_types(cls)
        sub = {k: _coerce(values[k], types[k], k) for k in types if k in values}
        try:
            kwargs[name] = cls(**sub)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    for k, v in values.items():
        if k in top_types:
            kwargs[k] = _coerce(v, top_types[k], k)
    try:
        return PipelineConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_key_values(text: str, source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def load_config(path: str | os.PathLike | None = None, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    """Defaults < config file < overrides."""
    values: dict[str, Any] = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            values.update(parse_key_values(fh.read(), str(path)))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config_from_mapping(values)


@dataclass(frozen=True)
class ClipAnalysis:
    raw: Spectrogram
    conditioned: Spectrogram
    detection: Detection
    grid: GridMeans

    def features(self, mode: FeatureMode | str) -> FeatureVector:
        return features_from_grid(self.grid, mode)


def analyze(clip: AudioClip, cfg: PipelineConfig) -> ClipAnalysis:
    raw = stft_spectrogram(clip, cfg.window_len, cfg.hop, cfg.spectrogram_scale)
    conditioned = preprocess(raw, cfg.preprocess)
    det = detect(conditioned, cfg.criteria, cfg.threshold_fraction, cfg.connectivity)
    return ClipAnalysis(raw, conditioned, det, grid_means(det.roi, band=cfg.band))


def clip_features(clip: AudioClip, cfg: PipelineConfig) -> dict[FeatureMode, np.ndarray]:
    """Feature values of one clip for every mode."""
    a = analyze(clip, cfg)
    return {m: a.features(m).values for m in FeatureMode}


def _grid_job(args: tuple[AudioClip, PipelineConfig]) -> np.ndarray:
    clip, cfg = args
    return analyze(clip, cfg).grid.means


def clip_grids(clips: Sequence[AudioClip], cfg: PipelineConfig, jobs: int = 1) -> list[GridMeans]:
    """Grid means per clip, in input order; ``jobs > 1`` fans out to processes."""
    work = [(c, cfg) for c in clips]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            means = list(pool.map(_grid_job, work, chunksize=16))
    else:
        means = [_grid_job(w) for w in work]
    return [GridMeans(m) for m in means]


def feature_matrix(grids: Iterable[GridMeans], mode: FeatureMode | str) -> np.ndarray:
    rows = [features_from_grid(g, mode).values for g in grids]
    return np.array(rows).reshape(len(rows), FeatureMode(mode).length)


def config_metadata(cfg: PipelineConfig) -> dict[str, str]:
    return {k: _fmt(v) for k, v in cfg.flat().items()}


def config_from_metadata(meta: Mapping[str, str]) -> PipelineConfig:
    return config_from_mapping({k: v for k, v in meta.items() if k in set(config_keys())})


def with_mode(cfg: PipelineConfig, mode: FeatureMode | str) -> PipelineConfig:
    return replace(cfg, features=FeatureMode(mode).value)
