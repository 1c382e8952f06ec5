"""Pre-processing chain: normalize, trim silence, resample, repeat-pad, log-mel."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import signal

from .audio_io import AudioClip, FloatClip, downmix_mono, from_float, to_float
from .errors import AudioAllSilent, ClipTooShort, ConfigError, InvalidAudio

# Log-mel front end. Changing any of these changes FRONTEND_DESCRIPTOR, which
# weight bundles are checked against.
MEL_RATE = 8000
MEL_WIN = 200  # 25 ms
MEL_HOP = 80  # 10 ms
MEL_NFFT = 256
MEL_BANDS = 40
MEL_FMIN = 0.0
MEL_FMAX = 4000.0
LOG_FLOOR = 1e-10
VAR_FLOOR = 1e-8
FRONTEND_DESCRIPTOR = "logmel-v1:rate=8000,win=200,hop=80,nfft=256,mels=40,fmin=0,fmax=4000,log_floor=1e-10,cmvn"

KAISER_BETA = 8.6
ZERO_CROSSINGS = 32


@dataclass(frozen=True)
class PreprocessConfig:
    silence_threshold_db: float = -40.0
    silence_window_ms: float = 20.0
    normalize_peak: float = 0.95
    id_min_duration_s: float = 10.0
    asr_rate: int = 16000
    id_rate: int = 8000

    def __post_init__(self):
        if not self.silence_threshold_db < 0:
            raise ConfigError("silence_threshold_db must be negative")
        if not 0 < self.normalize_peak <= 1.0:
            raise ConfigError("normalize_peak must lie in (0, 1]")
        if not self.id_min_duration_s > 0:
            raise ConfigError("id_min_duration_s must be positive")
        if not self.silence_window_ms > 0:
            raise ConfigError("silence_window_ms must be positive")
        if self.asr_rate <= 0 or self.id_rate <= 0:
            raise ConfigError("target rates must be positive")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    frames: np.ndarray  # (T, F)
    frame_hop_ms: float = 10.0

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise ClipTooShort("feature matrix needs at least one frame")
        if not np.all(np.isfinite(frames)):
            raise ValueError("feature matrix contains non-finite entries")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


def _require_mono(clip):
    if clip.channels != 1:
        raise InvalidAudio(f"expected mono audio, got {clip.channels} channels")


def peak_normalize(clip: FloatClip, target: float = 0.95) -> FloatClip:
    if clip.samples.size == 0:
        raise InvalidAudio("cannot normalize an empty clip")
    peak = np.max(np.abs(clip.samples))
    if peak == 0.0:
        return clip
    return FloatClip(clip.samples * (target / peak), clip.sample_rate, clip.channels)


def window_rms(samples: np.ndarray, window: int) -> np.ndarray:
    """RMS of consecutive non-overlapping windows; the last one may be partial."""
    n = samples.size
    n_win = -(-n // window)
    padded = np.zeros(n_win * window)
    padded[:n] = samples
    sq = (padded * padded).reshape(n_win, window).sum(axis=1)
    counts = np.full(n_win, window, dtype=np.float64)
    counts[-1] = n - (n_win - 1) * window
    return np.sqrt(sq / counts)


def trim_silence(clip: FloatClip, cfg: PreprocessConfig = PreprocessConfig()) -> FloatClip:
    """Drop leading/trailing windows whose RMS falls below the dBFS threshold.

    Windows tile the clip from its first sample, so removing whole windows
    from the front keeps the grid aligned and the operation idempotent.
    """
    _require_mono(clip)
    if clip.samples.size == 0:
        raise AudioAllSilent("empty clip")
    window = max(1, int(round(cfg.silence_window_ms * clip.sample_rate / 1000.0)))
    rms = window_rms(clip.samples, window)
    threshold = 10.0 ** (cfg.silence_threshold_db / 20.0)
    loud = np.flatnonzero(rms >= threshold)
    if loud.size == 0:
        raise AudioAllSilent("every window is below the silence threshold")
    start = loud[0] * window
    stop = min(clip.samples.size, (loud[-1] + 1) * window)
    if start == 0 and stop == clip.samples.size:
        return clip
    return FloatClip(clip.samples[start:stop], clip.sample_rate, 1)


@lru_cache(maxsize=32)
def _resample_filter(up: int, down: int) -> np.ndarray:
    m = max(up, down)
    half = ZERO_CROSSINGS * m
    n = np.arange(-half, half + 1, dtype=np.float64)
    h = np.sinc(n / m) * np.kaiser(2 * half + 1, KAISER_BETA)
    # unit DC gain; resample_poly applies the factor ``up`` itself
    h /= h.sum()
    h.setflags(write=False)
    return h


def resampled_length(n: int, source_rate: int, target_rate: int) -> int:
    # round-half-away of n * target / source in exact integer arithmetic
    return (2 * n * target_rate + source_rate) // (2 * source_rate)


def resample(clip: FloatClip, target_rate: int) -> FloatClip:
    """Polyphase Kaiser-windowed-sinc resampling (beta 8.6, 32 zero crossings/side)."""
    _require_mono(clip)
    if target_rate <= 0:
        raise InvalidAudio("target rate must be positive")
    if target_rate == clip.sample_rate:
        return clip
    g = math.gcd(target_rate, clip.sample_rate)
    up, down = target_rate // g, clip.sample_rate // g
    n_out = resampled_length(clip.samples.size, clip.sample_rate, target_rate)
    if clip.samples.size == 0:
        return FloatClip(np.zeros(0), target_rate, 1)
    y = signal.resample_poly(clip.samples, up, down, window=_resample_filter(up, down))
    if y.size < n_out:
        y = np.concatenate([y, np.zeros(n_out - y.size)])
    return FloatClip(y[:n_out], target_rate, 1)


def repeat_pad(clip: FloatClip, min_duration_s: float = 10.0) -> FloatClip:
    """Concatenate whole copies of the clip until it lasts at least ``min_duration_s``."""
    n = clip.n_frames
    if n == 0:
        raise InvalidAudio("cannot repeat an empty clip")
    # guard against float noise in e.g. 10.0 * 8000
    needed = math.ceil(round(min_duration_s * clip.sample_rate, 6))
    copies = max(1, -(-needed // n))
    if copies == 1:
        return clip
    return FloatClip(np.tile(clip.samples, copies), clip.sample_rate, clip.channels)


def _condition(clip: AudioClip, cfg: PreprocessConfig, rate: int) -> FloatClip:
    x = to_float(downmix_mono(clip))
    x = peak_normalize(x, cfg.normalize_peak)
    x = trim_silence(x, cfg)
    return resample(x, rate)


def prepare_for_asr(clip: AudioClip, cfg: PreprocessConfig = PreprocessConfig()) -> AudioClip:
    """Mono, normalized, edge-trimmed 16-bit audio at the recognizer rate."""
    return from_float(_condition(clip, cfg, cfg.asr_rate))


def prepare_for_id(clip: AudioClip, cfg: PreprocessConfig = PreprocessConfig()) -> AudioClip:
    """Same chain as :func:`prepare_for_asr` at the identification rate, repeat-padded."""
    x = _condition(clip, cfg, cfg.id_rate)
    return from_float(repeat_pad(x, cfg.id_min_duration_s))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=1)
def mel_filterbank() -> np.ndarray:
    """(MEL_BANDS, MEL_NFFT // 2 + 1) triangular filters on the HTK mel scale."""
    edges = mel_to_hz(np.linspace(hz_to_mel(MEL_FMIN), hz_to_mel(MEL_FMAX), MEL_BANDS + 2))
    freqs = np.arange(MEL_NFFT // 2 + 1) * (MEL_RATE / MEL_NFFT)
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (center - lower)
    falling = (upper - freqs) / (upper - center)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    return fb


def n_feature_frames(n_samples: int) -> int:
    if n_samples < MEL_WIN:
        return 0
    return (n_samples - MEL_WIN) // MEL_HOP + 1


def log_mel_features(clip: AudioClip) -> FeatureMatrix:
    """40-band log-mel features with per-utterance mean/variance normalization."""
    _require_mono(clip)
    if clip.sample_rate != MEL_RATE:
        raise InvalidAudio(f"log-mel front end expects {MEL_RATE} Hz, got {clip.sample_rate}")
    x = clip.samples.astype(np.float64) / 32768.0
    t = n_feature_frames(x.size)
    if t == 0:
        raise ClipTooShort(f"need at least {MEL_WIN} samples, got {x.size}")
    frames = np.lib.stride_tricks.sliding_window_view(x, MEL_WIN)[::MEL_HOP][:t]
    spec = np.fft.rfft(frames * signal.get_window("hann", MEL_WIN), n=MEL_NFFT, axis=1)
    power = spec.real ** 2 + spec.imag ** 2
    logmel = np.log(np.maximum(power @ mel_filterbank().T, LOG_FLOOR))
    mean = logmel.mean(axis=0)
    var = logmel.var(axis=0)
    return FeatureMatrix((logmel - mean) / np.sqrt(np.maximum(var, VAR_FLOOR)), MEL_HOP * 1000.0 / MEL_RATE)
