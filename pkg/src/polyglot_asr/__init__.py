"""Multilingual speech recognition by routing each utterance to a monolingual,
accent-specific model chosen by a language -> accent LSTM identification cascade."""

from .audio_io import AudioClip, FloatClip, decode_wav, encode_wav
from .dsp import PreprocessConfig, log_mel_features, prepare_for_asr, prepare_for_id
from .identification import Identifier, IdOutcome, IdPolicy, resolve_model_key
from .nn import ClassScores, WeightSet, classify, load_weights, save_weights
from .registry import ModelHandle, ModelKey, ModelManifest, ModelRegistry

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "ClassScores",
    "FloatClip",
    "IdOutcome",
    "IdPolicy",
    "Identifier",
    "ModelHandle",
    "ModelKey",
    "ModelManifest",
    "ModelRegistry",
    "PreprocessConfig",
    "WeightSet",
    "classify",
    "decode_wav",
    "encode_wav",
    "load_weights",
    "log_mel_features",
    "prepare_for_asr",
    "prepare_for_id",
    "resolve_model_key",
    "save_weights",
]
