"""Latency, CPU and resident-memory measurement over a directory of WAV files."""
from __future__ import annotations

import os
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import psutil

from ..errors import EmptyWorkload, TargetUnreachable

MEMORY_NOTE = (
    "peak_resident_memory_bytes is the highest RSS sampled during the run; "
    "incremental_memory_bytes is that peak minus the RSS sampled just before the run"
)


@dataclass(frozen=True)
class RunSeries:
    latency_ms: tuple
    cpu_core_seconds: float | None
    peak_resident_memory_bytes: int | None
    baseline_resident_memory_bytes: int | None
    wall_seconds: float
    failures: int = 0

    @property
    def incremental_memory_bytes(self) -> int | None:
        if self.peak_resident_memory_bytes is None or self.baseline_resident_memory_bytes is None:
            return None
        return self.peak_resident_memory_bytes - self.baseline_resident_memory_bytes

    @property
    def cores_utilized(self) -> float | None:
        if self.cpu_core_seconds is None or self.wall_seconds <= 0:
            return None
        return self.cpu_core_seconds / self.wall_seconds


def latency_summary(latencies) -> dict:
    """mean/p50/p95/max in ms; every field is None for an empty series."""
    lat = np.asarray(list(latencies), dtype=np.float64)
    if lat.size == 0:
        return {"count": 0, "mean_ms": None, "p50_ms": None, "p95_ms": None, "max_ms": None}
    return {
        "count": int(lat.size),
        "mean_ms": float(lat.mean()),
        "p50_ms": float(np.percentile(lat, 50)),
        "p95_ms": float(np.percentile(lat, 95)),
        "max_ms": float(lat.max()),
    }


@dataclass(frozen=True)
class ResourceReport:
    runs: tuple
    target: str = "inproc"
    workload: str = ""
    notes: tuple = field(default=(MEMORY_NOTE,))

    @property
    def latencies(self) -> list:
        return [x for run in self.runs for x in run.latency_ms]

    def summary(self) -> dict:
        s = latency_summary(self.latencies)
        peaks = [r.peak_resident_memory_bytes for r in self.runs if r.peak_resident_memory_bytes is not None]
        s["peak_resident_memory_bytes"] = max(peaks) if peaks else None
        cpu = [r.cpu_core_seconds for r in self.runs if r.cpu_core_seconds is not None]
        s["cpu_core_seconds"] = sum(cpu) if cpu else None
        return s

    def to_document(self) -> dict:
        return {
            "target": self.target,
            "workload": self.workload,
            "runs": [
                {
                    "run": i,
                    "latency_ms": list(r.latency_ms),
                    "cpu_core_seconds": r.cpu_core_seconds,
                    "cores_utilized": r.cores_utilized,
                    "peak_resident_memory_bytes": r.peak_resident_memory_bytes,
                    "baseline_resident_memory_bytes": r.baseline_resident_memory_bytes,
                    "incremental_memory_bytes": r.incremental_memory_bytes,
                    "wall_seconds": r.wall_seconds,
                    "failures": r.failures,
                    **{f"latency_{k}": v for k, v in latency_summary(r.latency_ms).items()},
                }
                for i, r in enumerate(self.runs)
            ],
            "summary": self.summary(),
            "notes": list(self.notes),
        }

    def to_rows(self):
        header = ["run", "utterances", "failures", "cpu_core_seconds", "peak_resident_memory_bytes",
                  "incremental_memory_bytes", "mean_latency_ms", "p50_latency_ms", "p95_latency_ms"]
        rows = []
        for i, r in enumerate(self.runs):
            s = latency_summary(r.latency_ms)
            rows.append([i, s["count"], r.failures, r.cpu_core_seconds, r.peak_resident_memory_bytes,
                         r.incremental_memory_bytes, s["mean_ms"], s["p50_ms"], s["p95_ms"]])
        s = self.summary()
        rows.append(["all", s["count"], sum(r.failures for r in self.runs), s["cpu_core_seconds"],
                     s["peak_resident_memory_bytes"], None, s["mean_ms"], s["p50_ms"], s["p95_ms"]])
        return header, rows


class _RssSampler(threading.Thread):
    def __init__(self, proc: psutil.Process, hz: float):
        super().__init__(daemon=True)
        self.proc = proc
        self.interval = 1.0 / hz
        self.peak = proc.memory_info().rss
        self._stop_event = threading.Event()

    def run(self):
        while not self._stop_event.wait(self.interval):
            self._sample()

    def _sample(self):
        try:
            self.peak = max(self.peak, self.proc.memory_info().rss)
        except psutil.Error:
            pass

    def stop(self) -> int:
        self._stop_event.set()
        self.join()
        self._sample()
        return self.peak


def _cpu_seconds(proc: psutil.Process) -> float:
    t = proc.cpu_times()
    return t.user + t.system + getattr(t, "children_user", 0.0) + getattr(t, "children_system", 0.0)


def load_workload(workload) -> list:
    directory = Path(workload)
    if not directory.is_dir():
        raise EmptyWorkload(f"workload directory {directory} does not exist")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() == ".wav" and p.is_file())
    if not files:
        raise EmptyWorkload(f"no .wav files in {directory}")
    return [(p.name, p.read_bytes()) for p in files]


def _http_caller(url: str, timeout: float):
    base = url.rstrip("/")
    try:
        with urllib.request.urlopen(f"{base}/v1/health", timeout=timeout) as resp:
            resp.read()
    except (urllib.error.URLError, OSError) as exc:
        raise TargetUnreachable(f"{base} is not reachable: {exc}") from exc

    def call(wav: bytes) -> bool:
        req = urllib.request.Request(
            f"{base}/v1/recognize", data=wav, headers={"Content-Type": "audio/wav"}, method="POST"
        )
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                resp.read()
                return True
        except urllib.error.HTTPError as exc:
            exc.read()
            return False
        except (urllib.error.URLError, OSError) as exc:
            raise TargetUnreachable(f"{base} stopped responding: {exc}") from exc

    return call


def _inproc_caller(pipeline):
    from ..service import RequestError

    def call(wav: bytes) -> bool:
        try:
            pipeline.recognize_utterance(wav)
            return True
        except RequestError:
            return False

    return call


def measure_resources(workload, target, repetitions: int = 1, sample_hz: float = 20.0,
                      pid: int | None = None, timeout_s: float = 60.0) -> ResourceReport:
    """Run every WAV in ``workload`` through ``target`` ``repetitions`` times.

    ``target`` is an in-process pipeline or a service base URL. CPU and memory
    are read from ``pid`` (default: this process for in-process targets;
    unmeasured for URLs unless a pid is given). Latency is wall-clock per call.
    """
    if sample_hz < 10:
        raise ValueError("memory must be sampled at 10 Hz or faster")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    items = load_workload(workload)
    if isinstance(target, str):
        call = _http_caller(target, timeout_s)
        label = target
    else:
        call = _inproc_caller(target)
        label = "inproc"
        pid = os.getpid() if pid is None else pid
    proc = psutil.Process(pid) if pid is not None else None
    runs = []
    for _ in range(repetitions):
        sampler = None
        cpu0 = baseline = None
        if proc is not None:
            baseline = proc.memory_info().rss
            cpu0 = _cpu_seconds(proc)
            sampler = _RssSampler(proc, sample_hz)
            sampler.start()
        latencies = []
        failures = 0
        wall0 = time.perf_counter()
        for _name, wav in items:
            t0 = time.perf_counter()
            ok = call(wav)
            latencies.append((time.perf_counter() - t0) * 1000.0)
            failures += not ok
        wall = time.perf_counter() - wall0
        peak = cpu = None
        if sampler is not None:
            peak = sampler.stop()
            cpu = _cpu_seconds(proc) - cpu0
        runs.append(RunSeries(tuple(latencies), cpu, peak, baseline, wall, failures))
    return ResourceReport(tuple(runs), label, str(workload))
