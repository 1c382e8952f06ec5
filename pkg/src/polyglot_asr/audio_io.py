"""PCM WAV decoding/encoding and integer <-> float sample conversion.

All rounding in this module is half-away-from-zero so that conversions are
symmetric around zero and reproducible bit-for-bit.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import EmptyAudio, InvalidAudio, MalformedWav, UnsupportedEncoding

SUPPORTED_RATES = frozenset({8000, 16000, 22050, 44100, 48000})

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_EXTENSIBLE = 0xFFFE
# KSDATAFORMAT_SUBTYPE_PCM
_PCM_SUBFORMAT_GUID = b"\x01\x00\x00\x00\x00\x00\x10\x00\x80\x00\x00\xaa\x00\x38\x9b\x71"

INT16_MIN = -32768
INT16_MAX = 32767


def round_half_away(x):
    """Round to the nearest integer, ties away from zero."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Interleaved signed 16-bit PCM samples."""

    samples: np.ndarray
    sample_rate: int
    channels: int = 1

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise InvalidAudio("samples must be a flat interleaved sequence")
        if samples.size and samples.dtype != np.int16:
            if np.any(samples < INT16_MIN) or np.any(samples > INT16_MAX):
                raise InvalidAudio("samples outside the signed 16-bit range")
        object.__setattr__(self, "samples", _readonly(samples.astype(np.int16, copy=False)))
        if int(self.channels) < 1:
            raise InvalidAudio(f"channel count must be >= 1, got {self.channels}")
        if int(self.sample_rate) not in SUPPORTED_RATES:
            raise InvalidAudio(f"unsupported sample rate {self.sample_rate}")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))
        object.__setattr__(self, "channels", int(self.channels))
        if self.samples.size % self.channels:
            raise InvalidAudio("sample count is not a multiple of the channel count")

    @property
    def n_frames(self) -> int:
        return self.samples.size // self.channels

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.sample_rate

    def frames(self) -> np.ndarray:
        """Samples as an (n_frames, channels) view."""
        return self.samples.reshape(-1, self.channels)

    def __eq__(self, other):
        if not isinstance(other, AudioClip):
            return NotImplemented
        return (
            self.sample_rate == other.sample_rate
            and self.channels == other.channels
            and np.array_equal(self.samples, other.samples)
        )

    def __repr__(self):
        return (
            f"AudioClip(n_frames={self.n_frames}, sample_rate={self.sample_rate}, "
            f"channels={self.channels})"
        )


@dataclass(frozen=True, eq=False)
class FloatClip:
    """Floating-point samples nominally in [-1, 1]; the internal DSP domain."""

    samples: np.ndarray
    sample_rate: int
    channels: int = 1

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidAudio("samples must be a flat interleaved sequence")
        if not np.all(np.isfinite(samples)):
            raise InvalidAudio("float samples must be finite")
        if int(self.sample_rate) <= 0:
            raise InvalidAudio("sample rate must be positive")
        if int(self.channels) < 1 or samples.size % int(self.channels):
            raise InvalidAudio("sample count is not a multiple of the channel count")
        object.__setattr__(self, "samples", _readonly(samples))
        object.__setattr__(self, "sample_rate", int(self.sample_rate))
        object.__setattr__(self, "channels", int(self.channels))

    @property
    def n_frames(self) -> int:
        return self.samples.size // self.channels

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.sample_rate

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, FloatClip):
            return NotImplemented
        return (
            self.sample_rate == other.sample_rate
            and self.channels == other.channels
            and np.array_equal(self.samples, other.samples)
        )


def _iter_chunks(data: bytes, start: int):
    pos = start
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body_start = pos + 8
        yield chunk_id, body_start, size
        pos = body_start + size + (size & 1)


def _parse_fmt(body: bytes):
    if len(body) < 16:
        raise MalformedWav("fmt chunk shorter than 16 bytes")
    fmt_code, channels, rate, _byte_rate, block_align, bits = struct.unpack_from("<HHIIHH", body)
    if fmt_code == WAVE_FORMAT_EXTENSIBLE:
        if len(body) < 40:
            raise MalformedWav("truncated WAVE_FORMAT_EXTENSIBLE fmt chunk")
        if body[24:40] != _PCM_SUBFORMAT_GUID:
            raise UnsupportedEncoding("extensible WAV with non-PCM sub-format")
        fmt_code = WAVE_FORMAT_PCM
    if fmt_code != WAVE_FORMAT_PCM:
        raise UnsupportedEncoding(f"WAV format code {fmt_code:#06x} is not integer PCM")
    if bits not in (8, 16, 24, 32):
        raise UnsupportedEncoding(f"unsupported PCM bit depth {bits}")
    if channels < 1:
        raise MalformedWav("fmt chunk declares zero channels")
    if block_align != channels * (bits // 8):
        raise MalformedWav("block_align inconsistent with channels and bit depth")
    return channels, rate, bits


def _to_int16(raw: bytes, bits: int) -> np.ndarray:
    if bits == 16:
        return np.frombuffer(raw, dtype="<i2").astype(np.int16)
    if bits == 8:
        # 8-bit WAV is unsigned with a 128 offset
        u = np.frombuffer(raw, dtype=np.uint8).astype(np.int32)
        return ((u - 128) * 256).astype(np.int16)
    if bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        wide = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        wide = np.where(wide & 0x800000, wide - (1 << 24), wide)
        scaled = wide / 256.0
    else:
        scaled = np.frombuffer(raw, dtype="<i4").astype(np.float64) / 65536.0
    return np.clip(round_half_away(scaled), INT16_MIN, INT16_MAX).astype(np.int16)


def decode_wav(data: bytes) -> AudioClip:
    """Parse a RIFF/WAVE PCM byte string into an :class:`AudioClip`.

    8-, 24- and 32-bit integer PCM are converted to 16-bit; every other
    encoding raises :class:`UnsupportedEncoding`.
    """
    data = bytes(data)
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedWav("missing RIFF/WAVE magic")
    fmt = None
    pcm = None
    for chunk_id, start, size in _iter_chunks(data, 12):
        body = data[start:start + size]
        if chunk_id == b"fmt ":
            fmt = _parse_fmt(body)
        elif chunk_id == b"data":
            if fmt is None:
                raise MalformedWav("data chunk precedes fmt chunk")
            pcm = body  # sizes past EOF (streamed writers) are clamped by slicing
            break
    if fmt is None:
        raise MalformedWav("no fmt chunk")
    if pcm is None:
        raise MalformedWav("no data chunk")
    channels, rate, bits = fmt
    if rate not in SUPPORTED_RATES:
        raise UnsupportedEncoding(f"unsupported sample rate {rate} Hz")
    frame_bytes = channels * (bits // 8)
    usable = len(pcm) - len(pcm) % frame_bytes
    if usable == 0:
        raise EmptyAudio("WAV data chunk holds no complete frame")
    return AudioClip(_to_int16(pcm[:usable], bits), rate, channels)


def encode_wav(clip: AudioClip) -> bytes:
    """Serialize a clip as a canonical 44-byte-header 16-bit PCM WAV file."""
    payload = clip.samples.astype("<i2").tobytes()
    block_align = clip.channels * 2
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        WAVE_FORMAT_PCM,
        clip.channels,
        clip.sample_rate,
        clip.sample_rate * block_align,
        block_align,
        16,
        b"data",
        len(payload),
    )
    return header + payload


def to_float(clip: AudioClip) -> FloatClip:
    return FloatClip(clip.samples.astype(np.float64) / 32768.0, clip.sample_rate, clip.channels)


def from_float(clip: FloatClip) -> AudioClip:
    scaled = np.clip(clip.samples, -1.0, 1.0) * INT16_MAX
    return AudioClip(round_half_away(scaled).astype(np.int16), clip.sample_rate, clip.channels)


def downmix_mono(clip: AudioClip) -> AudioClip:
    """Average channels per frame, rounding the mean half away from zero."""
    if clip.channels == 1:
        return clip
    c = clip.channels
    total = clip.frames().astype(np.int64).sum(axis=1)
    # exact integer form of round_half_away(total / c)
    mean = np.sign(total) * ((2 * np.abs(total) + c) // (2 * c))
    return AudioClip(mean.astype(np.int16), clip.sample_rate, 1)
