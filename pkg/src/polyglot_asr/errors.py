"""Exception hierarchy shared by every stage of the pipeline."""


class PolyglotError(Exception):
    """Base class for all errors raised by this package."""


# audio decoding
class AudioError(PolyglotError, ValueError):
    pass


class MalformedWav(AudioError):
    pass


class UnsupportedEncoding(AudioError):
    pass


class EmptyAudio(AudioError):
    pass


class InvalidAudio(AudioError):
    pass


# pre-processing
class AudioAllSilent(AudioError):
    pass


class ClipTooShort(AudioError):
    pass


# neural runtime
class WeightError(PolyglotError):
    pass


class ManifestMissing(WeightError, FileNotFoundError):
    pass


class TensorShapeMismatch(WeightError, ValueError):
    pass


class NonFiniteWeight(WeightError, ValueError):
    pass


class FrontendMismatch(WeightError, ValueError):
    pass


class DimensionMismatch(PolyglotError, ValueError):
    pass


# identification
class NoAccentModel(PolyglotError, LookupError):
    pass


class LowLidConfidence(PolyglotError):
    def __init__(self, label, confidence, threshold):
        super().__init__(
            f"language {label!r} identified with confidence {confidence:.4f} "
            f"below threshold {threshold:.4f}"
        )
        self.label = label
        self.confidence = confidence
        self.threshold = threshold


# model registry
class RegistryError(PolyglotError):
    pass


class DuplicateKey(RegistryError, KeyError):
    pass


class ModelLargerThanBudget(RegistryError, ValueError):
    pass


class ArtifactMissing(RegistryError, FileNotFoundError):
    pass


class UnknownModel(RegistryError, KeyError):
    pass


class BudgetExhausted(RegistryError):
    pass


class LoadFailed(RegistryError):
    pass


# recognizer backends
class BackendError(PolyglotError):
    pass


class BackendTimeout(BackendError, TimeoutError):
    pass


class BackendCrashed(BackendError):
    pass


class InvalidBackendOutput(BackendError):
    pass


# configuration / evaluation
class ConfigError(PolyglotError, ValueError):
    pass


class EmptyReference(PolyglotError, ValueError):
    pass


class InvalidMatrix(PolyglotError, ValueError):
    pass


class EmptyWorkload(PolyglotError, ValueError):
    pass


class TargetUnreachable(PolyglotError, ConnectionError):
    pass


class IoFailure(PolyglotError, OSError):
    pass
