"""Right-whale up-call detection: spectrogram conditioning, region screening,
grid features and a small neural classifier."""

from .audio_ingest import AudioClip, LabeledClip, read_audio, read_manifest
from .classifier import Network, TrainConfig, load_model, predict, save_model, train
from .evaluate import evaluate_model, fpr_at_tpr, roc
from .features import FeatureMode, extract_features
from .pipeline import PipelineConfig, analyze, load_config
from .preprocess import PreprocessConfig, preprocess
from .region_detect import RegionCriteria, detect, trace_regions
from .spectrogram import Spectrogram, stft_spectrogram
from .synthgen import SynthSpec, generate

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "FeatureMode",
    "LabeledClip",
    "Network",
    "PipelineConfig",
    "PreprocessConfig",
    "RegionCriteria",
    "Spectrogram",
    "SynthSpec",
    "TrainConfig",
    "analyze",
    "detect",
    "evaluate_model",
    "extract_features",
    "fpr_at_tpr",
    "generate",
    "load_config",
    "load_model",
    "predict",
    "preprocess",
    "read_audio",
    "read_manifest",
    "roc",
    "save_model",
    "stft_spectrogram",
    "trace_regions",
    "train",
]
