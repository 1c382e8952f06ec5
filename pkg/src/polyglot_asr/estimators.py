"""scikit-learn compatible wrappers so the front end and classifiers compose in Pipelines.

Training is out of scope: ``fit`` on the classifiers loads and validates a
pre-trained weight bundle (or an in-memory :class:`WeightSet`) instead of
learning parameters, which keeps ``get_params``/``clone``/``Pipeline`` working.

    >>> from sklearn.pipeline import make_pipeline
    >>> lid = make_pipeline(AudioPreprocessor(), LogMelFeatures(), LSTMClassifier(bundle="weights/lid"))
    >>> lid.fit(clips).predict(clips)  # doctest: +SKIP
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_is_fitted

from .audio_io import AudioClip, decode_wav
from .dsp import PreprocessConfig, log_mel_features, prepare_for_asr, prepare_for_id
from .identification import IdentificationConfig, Identifier, IdPolicy
from .nn import WeightSet, classify, load_weights


def _as_clips(X) -> list:
    if isinstance(X, (AudioClip, bytes, bytearray)):
        X = [X]
    clips = []
    for item in X:
        if isinstance(item, (bytes, bytearray)):
            item = decode_wav(item)
        if not isinstance(item, AudioClip):
            raise TypeError(f"expected AudioClip or WAV bytes, got {type(item).__name__}")
        clips.append(item)
    return clips


def _as_sequences(X, n_features=None) -> list:
    """Validate a batch of (T, F) feature matrices of possibly different lengths."""
    if isinstance(X, np.ndarray) and X.ndim == 3:
        X = list(X)
    elif isinstance(X, np.ndarray) and X.ndim == 2 or hasattr(X, "frames"):
        X = [X]
    out = []
    for x in X:
        x = check_array(getattr(x, "frames", x), dtype=np.float64, ensure_min_samples=1)
        if n_features is not None and x.shape[1] != n_features:
            raise ValueError(f"X has {x.shape[1]} features per frame, estimator expects {n_features}")
        out.append(x)
    return out


class AudioPreprocessor(TransformerMixin, BaseEstimator):
    """Clip-level conditioning for the identification (``target="id"``) or ASR branch."""

    def __init__(self, target="id", silence_threshold_db=-40.0, silence_window_ms=20.0,
                 normalize_peak=0.95, id_min_duration_s=10.0, asr_rate=16000, id_rate=8000):
        self.target = target
        self.silence_threshold_db = silence_threshold_db
        self.silence_window_ms = silence_window_ms
        self.normalize_peak = normalize_peak
        self.id_min_duration_s = id_min_duration_s
        self.asr_rate = asr_rate
        self.id_rate = id_rate

    def fit(self, X=None, y=None):
        if self.target not in ("id", "asr"):
            raise ValueError(f"target must be 'id' or 'asr', got {self.target!r}")
        self.config_ = PreprocessConfig(
            silence_threshold_db=self.silence_threshold_db,
            silence_window_ms=self.silence_window_ms,
            normalize_peak=self.normalize_peak,
            id_min_duration_s=self.id_min_duration_s,
            asr_rate=self.asr_rate,
            id_rate=self.id_rate,
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        prepare = prepare_for_id if self.target == "id" else prepare_for_asr
        return [prepare(clip, self.config_) for clip in _as_clips(X)]


class LogMelFeatures(TransformerMixin, BaseEstimator):
    """Stateless 8 kHz log-mel front end; returns one (T, 40) array per clip."""

    def fit(self, X=None, y=None):
        self.fitted_ = True
        return self

    def transform(self, X):
        return [log_mel_features(clip).frames for clip in _as_clips(X)]

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.requires_fit = False
        return tags


class LSTMClassifier(ClassifierMixin, BaseEstimator):
    """Sequence classifier backed by a pre-trained weight bundle."""

    def __init__(self, bundle=None, weights=None):
        self.bundle = bundle
        self.weights = weights

    def fit(self, X=None, y=None):
        if self.weights is not None:
            if not isinstance(self.weights, WeightSet):
                raise TypeError("weights must be a WeightSet")
            ws = self.weights
        elif self.bundle is not None:
            ws = load_weights(self.bundle)
        else:
            raise ValueError("LSTMClassifier needs either bundle= or weights=")
        if y is not None:
            missing = set(np.unique(np.asarray(y, dtype=object))) - set(ws.labels)
            if missing:
                raise ValueError(f"labels {sorted(missing)} are not classes of the loaded weights")
        self.weights_ = ws
        self.classes_ = np.array(ws.labels, dtype=object)
        self.n_features_in_ = ws.input_dim
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "weights_")
        seqs = _as_sequences(X, self.n_features_in_)
        return np.vstack([classify(self.weights_, x).probs for x in seqs])

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "weights_")
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


class CascadeRouter(ClassifierMixin, BaseEstimator):
    """Language -> accent cascade; predicts ``"language/accent"`` model keys.

    ``score`` on labeled clips is therefore the fully-correct selection rate.
    """

    def __init__(self, lid=None, accents=None, policy=None, languages=None, accent_labels=None):
        self.lid = lid
        self.accents = accents
        self.policy = policy
        self.languages = languages
        self.accent_labels = accent_labels

    def fit(self, X=None, y=None):
        if self.lid is None:
            raise ValueError("CascadeRouter needs a fitted-or-fittable lid classifier")
        lid = _fitted(self.lid)
        accents = {lang: _fitted(est) for lang, est in (self.accents or {}).items()}
        languages = tuple(self.languages or lid.weights_.labels)
        labels = dict(self.accent_labels or {})
        for lang, est in accents.items():
            labels.setdefault(lang, est.weights_.labels)
        cfg = IdentificationConfig(
            languages=languages,
            accents={lang: labels.get(lang, ("default",)) for lang in languages},
            policy=self.policy or IdPolicy(),
        )
        self.identifier_ = Identifier(lid.weights_, {k: v.weights_ for k, v in accents.items()}, cfg)
        self.classes_ = np.array(
            [f"{lang}/{acc}" for lang in languages for acc in cfg.accents[lang]], dtype=object
        )
        return self

    def identify(self, X) -> list:
        check_is_fitted(self, "identifier_")
        items = X if isinstance(X, list) else [X]
        return [self.identifier_.identify(item) for item in items]

    def predict(self, X) -> np.ndarray:
        return np.array([str(o.model_key) for o in self.identify(X)], dtype=object)


def _fitted(est):
    try:
        check_is_fitted(est, "weights_")
    except NotFittedError:
        est.fit()
    return est
