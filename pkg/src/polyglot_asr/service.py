"""End-to-end recognition pipeline and its HTTP front end."""
from __future__ import annotations

import json
import logging
import threading
import time
from bisect import bisect_left
from dataclasses import dataclass
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import errors
from .audio_io import decode_wav
from .backend import BackendFactory, recognize
from .config import ServiceConfig
from .dsp import PreprocessConfig, prepare_for_asr, prepare_for_id
from .identification import Identifier
from .registry import MB, ModelKey, ModelRegistry

log = logging.getLogger(__name__)

# closed error taxonomy: category -> (HTTP status, CLI exit code)
ERROR_CATEGORIES = {
    "BadAudio": (HTTPStatus.BAD_REQUEST, 3),
    "AllSilent": (HTTPStatus.UNPROCESSABLE_ENTITY, 4),
    "LowConfidence": (HTTPStatus.UNPROCESSABLE_ENTITY, 5),
    "NoModel": (HTTPStatus.NOT_FOUND, 6),
    "BackendFailure": (HTTPStatus.BAD_GATEWAY, 7),
}

LATENCY_BUCKETS_MS = (50, 100, 250, 500, 1000, 2500, 5000, 10000)


class RequestError(errors.PolyglotError):
    def __init__(self, category: str, message: str):
        if category not in ERROR_CATEGORIES:
            raise ValueError(f"unknown error category {category!r}")
        super().__init__(message)
        self.category = category

    @property
    def http_status(self) -> int:
        return int(ERROR_CATEGORIES[self.category][0])

    @property
    def exit_code(self) -> int:
        return ERROR_CATEGORIES[self.category][1]

    def to_document(self) -> dict:
        return {"error": self.category, "message": str(self)}


def categorize(exc: BaseException) -> str:
    if isinstance(exc, errors.AudioAllSilent):
        return "AllSilent"
    if isinstance(exc, (errors.AudioError, errors.DimensionMismatch)):
        return "BadAudio"
    if isinstance(exc, errors.LowLidConfidence):
        return "LowConfidence"
    if isinstance(exc, errors.UnknownModel):
        return "NoModel"
    return "BackendFailure"


@dataclass(frozen=True)
class RecognitionResult:
    transcript: str
    language: str
    accent: str
    model_key: ModelKey
    confidences: dict
    timings_ms: dict
    cache_hit: bool

    def to_document(self) -> dict:
        return {
            "transcript": self.transcript,
            "language": self.language,
            "accent": self.accent,
            "model_key": {"language": self.model_key.language, "accent": self.model_key.accent},
            "confidences": dict(self.confidences),
            "timings_ms": dict(self.timings_ms),
            "cache_hit": self.cache_hit,
        }

    def to_json(self) -> str:
        return dump_document(self.to_document())


def dump_document(doc) -> str:
    return json.dumps(doc, ensure_ascii=False)


class Metrics:
    def __init__(self):
        self._lock = threading.Lock()
        self.requests = 0
        self.errors = {c: 0 for c in ERROR_CATEGORIES}
        self.latency_counts = [0] * (len(LATENCY_BUCKETS_MS) + 1)
        self.latency_sum_ms = 0.0

    def observe(self, total_ms: float | None, category: str | None = None):
        with self._lock:
            self.requests += 1
            if category is not None:
                self.errors[category] += 1
            if total_ms is not None:
                self.latency_counts[bisect_left(LATENCY_BUCKETS_MS, total_ms)] += 1
                self.latency_sum_ms += total_ms

    def snapshot(self) -> dict:
        with self._lock:
            buckets = {f"le_{b}": n for b, n in zip(LATENCY_BUCKETS_MS, self.latency_counts)}
            buckets["le_inf"] = self.latency_counts[-1]
            return {
                "requests": self.requests,
                "errors": dict(self.errors),
                "latency_ms": {"buckets": buckets, "count": sum(self.latency_counts),
                               "sum": round(self.latency_sum_ms, 3)},
            }


class Pipeline:
    """decode -> prepare(id) -> identify -> acquire -> prepare(asr) -> recognize -> release.

    ``clock`` returns seconds; inject a fake one to make timings reproducible.
    """

    def __init__(self, identifier: Identifier, registry: ModelRegistry, preprocess=None,
                 latency_slo_ms: float = 1000.0, clock=time.perf_counter):
        self.identifier = identifier
        self.registry = registry
        self.preprocess = preprocess or PreprocessConfig()
        self.latency_slo_ms = latency_slo_ms
        self.clock = clock
        self.metrics = Metrics()
        self.config = None

    @classmethod
    def from_config(cls, config: ServiceConfig, clock=time.perf_counter) -> "Pipeline":
        identifier = Identifier.from_config(config.identify)
        registry = ModelRegistry(config.registry.budget_bytes, loader=BackendFactory(config.backend))
        for manifest in config.models:
            registry.register(manifest)
        if config.registry.mode == "preload":
            registry.preload(config.registry.preload or [m.key for m in config.models])
        pipeline = cls(identifier, registry, config.preprocess, config.latency_slo_ms, clock)
        pipeline.config = config
        return pipeline

    def recognize_utterance(self, wav_bytes: bytes) -> RecognitionResult:
        t0 = self.clock()
        try:
            result = self._run(wav_bytes, t0)
        except RequestError as exc:
            self.metrics.observe(None, exc.category)
            raise
        self.metrics.observe(result.timings_ms["total"])
        return result

    def _run(self, wav_bytes: bytes, t0: float) -> RecognitionResult:
        clock = self.clock
        stage = "preprocess"
        try:
            clip = decode_wav(wav_bytes)
            id_audio = prepare_for_id(clip, self.preprocess)
            t1 = clock()
            stage = "identify"
            outcome = self.identifier.identify(id_audio)
            t2 = clock()
            stage = "model_load"
            handle = self.registry.acquire(outcome.model_key)
        except Exception as exc:
            raise RequestError(categorize(exc), f"{stage}: {exc}") from exc
        t3 = clock()
        try:
            with handle:
                stage = "preprocess"
                asr_audio = prepare_for_asr(clip, self.preprocess)
                t4 = clock()
                stage = "decode"
                transcript = recognize(handle, asr_audio)
                t5 = clock()
        except Exception as exc:
            raise RequestError(categorize(exc), f"{stage}: {exc}") from exc
        raw = {
            "preprocess": (t1 - t0) + (t4 - t3),
            "identify": t2 - t1,
            "model_load": t3 - t2,
            "decode": t5 - t4,
        }
        timings = {k: round(v * 1000.0, 3) for k, v in raw.items()}
        # rounding must not push a stage above the total
        timings["total"] = max(round((t5 - t0) * 1000.0, 3), *timings.values())
        accent_conf = None
        if outcome.accent_scores is not None and not outcome.accent_from_fallback:
            accent_conf = outcome.accent_scores.confidence
        return RecognitionResult(
            transcript=transcript.text,
            language=outcome.language,
            accent=outcome.accent,
            model_key=outcome.model_key,
            confidences={"language": outcome.lid_scores.confidence, "accent": accent_conf},
            timings_ms=timings,
            cache_hit=handle.cache_hit,
        )

    def models_document(self) -> list:
        loaded = self.registry.stats().loaded_keys
        return [
            {
                "language": m.key.language,
                "accent": m.key.accent,
                "path": str(m.artifact_path),
                "size_mb": m.declared_size_bytes / MB,
                "backend": m.backend_kind,
                "loaded": m.key in loaded,
            }
            for m in self.registry.manifests()
        ]

    def metrics_document(self) -> dict:
        state = self.registry.stats()
        doc = self.metrics.snapshot()
        doc["registry"] = {
            "budget_bytes": state.budget_bytes,
            "used_bytes": state.used_bytes,
            "loaded": [str(m.key) for m in state.loaded],
            "loads": state.loads,
            "evictions": state.evictions,
            "hits": state.hits,
            "misses": state.misses,
        }
        return doc


class _Handler(BaseHTTPRequestHandler):
    server_version = "polyglot-asr/0.1"
    protocol_version = "HTTP/1.1"

    @property
    def pipeline(self) -> Pipeline:
        return self.server.pipeline

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _send(self, status: int, body: str, content_type="application/json"):
        payload = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", f"{content_type}; charset=utf-8")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self):
        if self.path == "/v1/health":
            self._send(200, "ok", "text/plain")
        elif self.path == "/v1/models":
            self._send(200, dump_document(self.pipeline.models_document()))
        elif self.path == "/v1/metrics":
            self._send(200, dump_document(self.pipeline.metrics_document()))
        else:
            self._send(404, dump_document({"error": "NotFound", "message": self.path}))

    def do_POST(self):
        if self.path != "/v1/recognize":
            self._send(404, dump_document({"error": "NotFound", "message": self.path}))
            return
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        try:
            result = self.pipeline.recognize_utterance(body)
        except RequestError as exc:
            self._send(exc.http_status, dump_document(exc.to_document()))
            return
        self._send(200, result.to_json())


class RecognitionServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, pipeline: Pipeline):
        super().__init__(address, _Handler)
        self.pipeline = pipeline

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"


def make_server(pipeline: Pipeline, host="127.0.0.1", port=0) -> RecognitionServer:
    return RecognitionServer((host, port), pipeline)


def serve(config: ServiceConfig):
    """Build the pipeline from ``config`` and serve until interrupted."""
    pipeline = Pipeline.from_config(config)
    server = make_server(pipeline, config.host, config.port)
    log.info("listening on %s", server.url)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
