import numpy as np
import pytest

from upcall.audio_ingest import AudioClip
from upcall.features import FeatureMode
from upcall.pipeline import (
    ConfigError,
    PipelineConfig,
    analyze,
    clip_features,
    clip_grids,
    config_from_mapping,
    config_from_metadata,
    config_keys,
    config_metadata,
    load_config,
    parse_key_values,
)
from upcall.synthgen import SynthSpec, generate


def test_defaults_roundtrip_through_text():
    cfg = PipelineConfig()
    back = config_from_mapping(parse_key_values(cfg.to_text()))
    assert back == cfg


def test_none_disables_a_bound(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("# relax one criterion\nmax_axes_ratio = none\nepochs=7\n")
    cfg = load_config(path)
    assert cfg.criteria.max_axes_ratio is None
    assert cfg.train.epochs == 7
    assert config_from_mapping(parse_key_values(cfg.to_text())) == cfg


def test_precedence_defaults_file_flags(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("seed = 3\nfeatures = mask15\n")
    assert load_config(path).train.seed == 3
    cfg = load_config(path, {"seed": 9, "features": None})
    assert cfg.train.seed == 9 and cfg.mode is FeatureMode.MASK15


def test_unknown_and_bad_values_rejected(tmp_path):
    with pytest.raises(ConfigError, match="unknown"):
        config_from_mapping({"window": "5"})
    with pytest.raises(ConfigError):
        config_from_mapping({"epochs": "many"})
    with pytest.raises(ConfigError):
        config_from_mapping({"s_floor": "2", "s_ceiling": "1"})
    with pytest.raises(ConfigError):
        config_from_mapping({"features": "all"})
    with pytest.raises(ConfigError, match=":2:"):
        parse_key_values("a=1\nnot a pair\n")


def test_metadata_roundtrip_ignores_extra_keys():
    cfg = PipelineConfig().with_overrides({"features": "diagonal5", "s_floor": 1.25})
    meta = config_metadata(cfg) | {"operating_threshold": "0.4"}
    assert config_from_metadata(meta) == cfg


def test_keys_are_unique():
    keys = config_keys()
    assert len(keys) == len(set(keys))


def test_silence_gives_zero_features():
    feats = clip_features(AudioClip(np.zeros(4000)), PipelineConfig())
    assert all(np.all(v == 0) for v in feats.values())
    assert {len(v) for v in feats.values()} == {5, 15, 20}


def test_analysis_stages_line_up():
    clip = generate(SynthSpec(n_clips=1, positive_fraction=1.0, snr_db_range=(15, 15), seed=2))[0].clip
    a = analyze(clip, PipelineConfig())
    assert a.raw.shape == a.conditioned.shape == a.detection.roi.shape == (129, 30)
    assert a.conditioned.values.min() >= 0
    roi = a.detection.roi.values
    assert np.all((roi == 0) | (roi == a.conditioned.values))


def test_parallel_grids_match_serial():
    clips = [lc.clip for lc in generate(SynthSpec(n_clips=8, seed=3))]
    serial = clip_grids(clips, PipelineConfig(), jobs=1)
    parallel = clip_grids(clips, PipelineConfig(), jobs=2)
    assert all(a.means.tobytes() == b.means.tobytes() for a, b in zip(serial, parallel))
