"""Two-stage language -> accent identification cascade resolving to a ModelKey."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .audio_io import AudioClip
from .dsp import FRONTEND_DESCRIPTOR, log_mel_features
from .errors import ConfigError, FrontendMismatch, LowLidConfidence, NoAccentModel
from .nn import ClassScores, WeightSet, classify, load_weights
from .registry import ModelKey

DEFAULT_ACCENT = "default"

DEFAULT_LANGUAGES = ("en", "ta", "cmn")
DEFAULT_ACCENTS = {
    "en": ("scotland", "australia", "england", "india", "usa", "china", "malaysia", "other"),
    "ta": (DEFAULT_ACCENT,),
    "cmn": ("mainland", "taiwan", "hongkong"),
}
DEFAULT_FALLBACKS = {"en": "other", "ta": DEFAULT_ACCENT, "cmn": "mainland"}


@dataclass(frozen=True)
class IdPolicy:
    lid_confidence_threshold: float = 0.0
    accent_fallback: dict = field(default_factory=lambda: dict(DEFAULT_FALLBACKS))
    accent_confidence_threshold: float = 0.0

    def fallback_for(self, language: str) -> str:
        return self.accent_fallback.get(language, DEFAULT_ACCENT)


@dataclass(frozen=True)
class IdOutcome:
    language: str
    accent: str
    lid_scores: ClassScores
    accent_scores: ClassScores | None
    model_key: ModelKey

    @property
    def accent_from_fallback(self) -> bool:
        return self.accent_scores is None or self.accent_scores.label != self.accent


def resolve_model_key(lid: ClassScores, accent: ClassScores | None, policy: IdPolicy = IdPolicy()) -> IdOutcome:
    language = lid.label
    if lid.confidence < policy.lid_confidence_threshold:
        raise LowLidConfidence(language, lid.confidence, policy.lid_confidence_threshold)
    if accent is not None and accent.confidence >= policy.accent_confidence_threshold:
        accent_tag = accent.label
    else:
        accent_tag = policy.fallback_for(language)
    return IdOutcome(language, accent_tag, lid, accent, ModelKey(language, accent_tag))


@dataclass(frozen=True)
class IdentificationConfig:
    languages: tuple = DEFAULT_LANGUAGES
    accents: dict = field(default_factory=lambda: dict(DEFAULT_ACCENTS))
    lid_bundle: Path | None = None
    accent_bundles: dict = field(default_factory=dict)
    policy: IdPolicy = field(default_factory=IdPolicy)

    def __post_init__(self):
        object.__setattr__(self, "languages", tuple(self.languages))
        accents = {lang: tuple(self.accents.get(lang, (DEFAULT_ACCENT,))) for lang in self.languages}
        object.__setattr__(self, "accents", accents)
        for lang in self.accent_bundles:
            if lang not in self.languages:
                raise ConfigError(f"accent model for unregistered language {lang!r}")
        for lang in self.languages:
            fb = self.policy.fallback_for(lang)
            if fb not in accents[lang]:
                raise ConfigError(f"fallback accent {fb!r} is not registered for {lang!r}")


class Identifier:
    """Runs the LID classifier, then at most one accent classifier, per utterance."""

    def __init__(self, lid_weights: WeightSet, accent_weights: dict | None = None,
                 config: IdentificationConfig | None = None):
        self.config = config or IdentificationConfig(languages=lid_weights.labels)
        self.lid_weights = lid_weights
        self.accent_weights = dict(accent_weights or {})
        self._validate()

    @classmethod
    def from_config(cls, config: IdentificationConfig) -> "Identifier":
        if config.lid_bundle is None:
            raise ConfigError("identification config has no LID bundle")
        lid = load_weights(config.lid_bundle)
        accents = {lang: load_weights(path) for lang, path in config.accent_bundles.items()}
        return cls(lid, accents, config)

    def _validate(self):
        cfg = self.config
        if set(self.lid_weights.labels) != set(cfg.languages):
            raise ConfigError(
                f"LID labels {self.lid_weights.labels} do not match languages {cfg.languages}"
            )
        for lang, ws in self.accent_weights.items():
            if lang not in cfg.languages:
                raise ConfigError(f"accent model for unregistered language {lang!r}")
            if set(ws.labels) != set(cfg.accents[lang]):
                raise ConfigError(f"{lang} accent labels {ws.labels} do not match {cfg.accents[lang]}")
        for name, ws in [("lid", self.lid_weights), *self.accent_weights.items()]:
            if ws.frontend != FRONTEND_DESCRIPTOR:
                raise FrontendMismatch(
                    f"{name} weights were built for front end {ws.frontend!r}, runtime is {FRONTEND_DESCRIPTOR!r}"
                )

    @property
    def policy(self) -> IdPolicy:
        return self.config.policy

    @staticmethod
    def features(id_audio):
        return log_mel_features(id_audio) if isinstance(id_audio, AudioClip) else id_audio

    def identify_language(self, id_audio) -> ClassScores:
        return classify(self.lid_weights, self.features(id_audio))

    def identify_accent(self, id_audio, language: str) -> ClassScores:
        try:
            weights = self.accent_weights[language]
        except KeyError:
            raise NoAccentModel(f"no accent model registered for language {language!r}") from None
        return classify(weights, self.features(id_audio))

    def identify(self, id_audio) -> IdOutcome:
        feats = self.features(id_audio)
        lid = self.identify_language(feats)
        if lid.confidence < self.policy.lid_confidence_threshold:
            raise LowLidConfidence(lid.label, lid.confidence, self.policy.lid_confidence_threshold)
        try:
            accent = self.identify_accent(feats, lid.label)
        except NoAccentModel:
            accent = None
        return resolve_model_key(lid, accent, self.policy)
