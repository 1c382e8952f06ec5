"""Recognizer backends behind a loaded model handle.

``mock`` returns a fixed transcript per model key. ``external`` runs a child
process per request: WAV bytes on stdin, UTF-8 transcript on stdout, exit 0.
"""
from __future__ import annotations

import os
import shlex
import signal
import subprocess
import threading
import time
from dataclasses import dataclass, field

from .audio_io import AudioClip, encode_wav
from .errors import BackendCrashed, BackendTimeout, ConfigError, InvalidAudio, InvalidBackendOutput
from .registry import ModelKey, ModelManifest

ASR_RATE = 16000


@dataclass(frozen=True)
class Transcript:
    text: str
    decode_time_ms: float = 0.0


@dataclass(frozen=True)
class BackendSpec:
    kind: str = "mock"
    mock: dict = field(default_factory=dict)  # ModelKey -> text
    command: tuple = ()
    timeout_ms: int = 30000

    def __post_init__(self):
        if self.kind not in ("mock", "external"):
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        object.__setattr__(self, "mock", {ModelKey(*k): str(v) for k, v in self.mock.items()})
        cmd = self.command
        if isinstance(cmd, str):
            cmd = shlex.split(cmd)
        object.__setattr__(self, "command", tuple(cmd))
        if self.timeout_ms <= 0:
            raise ConfigError("external backend timeout_ms must be positive")


class MockModel:
    def __init__(self, key: ModelKey, text: str):
        self.key = key
        self.text = text

    def transcribe(self, audio: AudioClip) -> str:
        return self.text


class ExternalModel:
    """One child process per request; requests on the same model are serialized."""

    def __init__(self, key: ModelKey, argv: list, timeout_ms: int):
        self.key = key
        self.argv = argv
        self.timeout_s = timeout_ms / 1000.0
        self._lock = threading.Lock()

    def transcribe(self, audio: AudioClip) -> str:
        payload = encode_wav(audio)
        with self._lock:
            return self._run(payload)

    def _run(self, payload: bytes) -> str:
        try:
            proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                start_new_session=True,
            )
        except OSError as exc:
            raise BackendCrashed(f"cannot start {self.argv[0]!r}: {exc}") from exc
        try:
            out, err = proc.communicate(payload, timeout=self.timeout_s)
        except subprocess.TimeoutExpired:
            _kill_group(proc)
            raise BackendTimeout(
                f"backend for {self.key} exceeded {self.timeout_s * 1000:.0f} ms"
            ) from None
        if proc.returncode != 0:
            detail = err.decode("utf-8", "replace").strip()[-500:]
            raise BackendCrashed(f"backend for {self.key} exited with {proc.returncode}: {detail}")
        try:
            return out.decode("utf-8").strip()
        except UnicodeDecodeError as exc:
            raise InvalidBackendOutput(f"backend for {self.key} wrote non-UTF-8 output") from exc


def _kill_group(proc: subprocess.Popen):
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()
    try:
        proc.communicate(timeout=0.05)
    except subprocess.TimeoutExpired:
        pass


def _fill(part: str, fields: dict) -> str:
    # plain replacement so other braces in the command survive untouched
    for name, value in fields.items():
        part = part.replace("{" + name + "}", value)
    return part


class BackendFactory:
    """Builds per-model recognizer instances; used as the registry loader."""

    def __init__(self, spec: BackendSpec = BackendSpec()):
        self.spec = spec

    def __call__(self, manifest: ModelManifest):
        return self.load(manifest)

    def load(self, manifest: ModelManifest):
        key = manifest.key
        if manifest.backend_kind == "mock":
            return MockModel(key, self.spec.mock.get(key, ""))
        if not self.spec.command:
            raise ConfigError("external backend requested but no command configured")
        fields = {
            "artifact": str(manifest.artifact_path),
            "language": key.language,
            "accent": key.accent,
        }
        argv = [_fill(part, fields) for part in self.spec.command]
        return ExternalModel(key, argv, self.spec.timeout_ms)


def recognize(handle, asr_audio: AudioClip) -> Transcript:
    """Decode prepared 16 kHz mono audio with the model behind ``handle``."""
    if asr_audio.channels != 1 or asr_audio.sample_rate != ASR_RATE:
        raise InvalidAudio(f"recognizers take mono {ASR_RATE} Hz audio")
    if handle.released:
        raise ValueError(f"{handle!r} was already released")
    start = time.perf_counter()
    text = handle.instance.transcribe(asr_audio)
    return Transcript(text, (time.perf_counter() - start) * 1000.0)
