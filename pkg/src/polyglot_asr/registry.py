"""Memory-budgeted catalog of per-(language, accent) recognizer models.

Accounting uses each manifest's declared size, never live process memory, so
the budget invariant is exact and testable: the bytes of loaded models plus
the bytes reserved by in-flight loads never exceed ``budget_bytes``.
"""
from __future__ import annotations

import itertools
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, NamedTuple

from .errors import (
    ArtifactMissing,
    BudgetExhausted,
    DuplicateKey,
    LoadFailed,
    ModelLargerThanBudget,
    UnknownModel,
)

log = logging.getLogger(__name__)

MB = 1_000_000  # decimal megabytes, as catalog sizes are quoted


class ModelKey(NamedTuple):
    language: str
    accent: str

    def __str__(self):
        return f"{self.language}/{self.accent}"


@dataclass(frozen=True)
class ModelManifest:
    key: ModelKey
    artifact_path: Path
    declared_size_bytes: int
    backend_kind: str = "mock"

    def __post_init__(self):
        object.__setattr__(self, "key", ModelKey(*self.key))
        object.__setattr__(self, "artifact_path", Path(self.artifact_path))
        if int(self.declared_size_bytes) <= 0:
            raise ValueError("declared_size_bytes must be positive")
        if self.backend_kind not in ("mock", "external"):
            raise ValueError(f"unknown backend kind {self.backend_kind!r}")


@dataclass
class _Entry:
    manifest: ModelManifest
    order: int
    instance: Any = None
    loaded: bool = False
    loading: bool = False
    last_used: int = -1
    leases: set = field(default_factory=set)


@dataclass(frozen=True)
class LoadedModel:
    key: ModelKey
    size_bytes: int
    last_used_at: int
    active_leases: int


@dataclass(frozen=True)
class RegistryState:
    budget_bytes: int
    used_bytes: int
    loaded: tuple  # of LoadedModel, least recently used first
    registered: tuple  # of ModelKey, registration order
    loads: int
    evictions: int
    hits: int
    misses: int

    @property
    def loaded_keys(self) -> frozenset:
        return frozenset(m.key for m in self.loaded)


class ModelHandle:
    """A lease on a loaded model; valid until released."""

    def __init__(self, registry, key: ModelKey, lease_id: int, instance):
        self._registry = registry
        self.key = key
        self.lease_id = lease_id
        self.instance = instance
        self.cache_hit = False

    @property
    def released(self) -> bool:
        return not self._registry._is_live(self)

    def release(self):
        self._registry.release(self)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.release()

    def __repr__(self):
        return f"ModelHandle({self.key}, lease={self.lease_id})"


def _noop_loader(manifest: ModelManifest):
    return manifest


class ModelRegistry:
    """Thread-safe LRU model cache under a byte budget with single-flight loads.

    ``loader(manifest)`` builds the in-memory model instance. It runs outside
    the registry lock, so loads of distinct keys proceed in parallel.
    """

    def __init__(self, budget_bytes: int, loader: Callable[[ModelManifest], Any] = _noop_loader,
                 unloader: Callable[[Any], None] | None = None, check_artifacts: bool = True):
        if int(budget_bytes) <= 0:
            raise ValueError("budget must be positive")
        self.budget_bytes = int(budget_bytes)
        self._loader = loader
        self._unloader = unloader
        self._check_artifacts = check_artifacts
        self._cond = threading.Condition()
        self._entries: dict[ModelKey, _Entry] = {}
        self._clock = itertools.count()
        self._lease_ids = itertools.count(1)
        self._reserved = 0
        self.loads = self.evictions = self.hits = self.misses = 0

    def register(self, manifest: ModelManifest, preload: bool = False):
        with self._cond:
            if manifest.key in self._entries:
                raise DuplicateKey(f"model {manifest.key} already registered")
            if manifest.declared_size_bytes > self.budget_bytes:
                raise ModelLargerThanBudget(
                    f"model {manifest.key} declares {manifest.declared_size_bytes} bytes, "
                    f"budget is {self.budget_bytes}"
                )
            if self._check_artifacts and not manifest.artifact_path.exists():
                raise ArtifactMissing(f"artifact {manifest.artifact_path} for {manifest.key} not found")
            self._entries[manifest.key] = _Entry(manifest, len(self._entries))
        if preload:
            self.acquire(manifest.key).release()

    def preload(self, keys):
        """Load ``keys`` up front; later acquires of them are hits."""
        for key in keys:
            self.acquire(ModelKey(*key)).release()

    def __contains__(self, key) -> bool:
        return ModelKey(*key) in self._entries

    def manifests(self):
        with self._cond:
            return [e.manifest for e in sorted(self._entries.values(), key=lambda e: e.order)]

    def _used_bytes(self) -> int:
        return sum(e.manifest.declared_size_bytes for e in self._entries.values() if e.loaded)

    def _lease(self, entry: _Entry) -> ModelHandle:
        lease_id = next(self._lease_ids)
        entry.leases.add(lease_id)
        entry.last_used = next(self._clock)
        return ModelHandle(self, entry.manifest.key, lease_id, entry.instance)

    def _plan_evictions(self, size: int) -> list:
        free = self.budget_bytes - self._used_bytes() - self._reserved
        if free >= size:
            return []
        idle = sorted(
            (e for e in self._entries.values() if e.loaded and not e.leases),
            key=lambda e: (e.last_used, e.order),
        )
        victims = []
        for e in idle:
            victims.append(e)
            free += e.manifest.declared_size_bytes
            if free >= size:
                return victims
        return None

    def acquire(self, key) -> ModelHandle:
        key = ModelKey(*key)
        with self._cond:
            entry = self._entries.get(key)
            if entry is None:
                raise UnknownModel(f"no model registered for {key}")
            while True:
                if entry.loaded:
                    # callers that waited on another thread's load count as hits
                    self.hits += 1
                    handle = self._lease(entry)
                    handle.cache_hit = True
                    return handle
                if not entry.loading:
                    break
                self._cond.wait()
            size = entry.manifest.declared_size_bytes
            victims = self._plan_evictions(size)
            if victims is None:
                raise BudgetExhausted(
                    f"cannot fit {key} ({size} bytes): budget {self.budget_bytes}, "
                    f"leased or loading models occupy the rest"
                )
            evicted = []
            for v in victims:
                v.loaded = False
                evicted.append(v.instance)
                v.instance = None
                self.evictions += 1
                log.info("evicted %s", v.manifest.key)
            self.misses += 1
            entry.loading = True
            self._reserved += size
        for instance in evicted:
            if self._unloader is not None:
                self._unloader(instance)
        try:
            instance = self._loader(entry.manifest)
        except Exception as exc:
            with self._cond:
                entry.loading = False
                self._reserved -= size
                self._cond.notify_all()
            raise LoadFailed(f"loading {key} failed: {exc}") from exc
        with self._cond:
            entry.instance = instance
            entry.loading = False
            entry.loaded = True
            self._reserved -= size
            self.loads += 1
            handle = self._lease(entry)
            self._cond.notify_all()
            log.info("loaded %s (%d bytes)", key, size)
            return handle

    def release(self, handle: ModelHandle):
        with self._cond:
            entry = self._entries.get(handle.key)
            if entry is not None:
                entry.leases.discard(handle.lease_id)

    def _is_live(self, handle: ModelHandle) -> bool:
        with self._cond:
            entry = self._entries.get(handle.key)
            return entry is not None and handle.lease_id in entry.leases

    def active_leases(self) -> int:
        with self._cond:
            return sum(len(e.leases) for e in self._entries.values())

    def stats(self) -> RegistryState:
        with self._cond:
            loaded = sorted(
                (e for e in self._entries.values() if e.loaded),
                key=lambda e: (e.last_used, e.order),
            )
            return RegistryState(
                budget_bytes=self.budget_bytes,
                used_bytes=self._used_bytes(),
                loaded=tuple(
                    LoadedModel(e.manifest.key, e.manifest.declared_size_bytes, e.last_used, len(e.leases))
                    for e in loaded
                ),
                registered=tuple(e.manifest.key for e in sorted(self._entries.values(), key=lambda e: e.order)),
                loads=self.loads,
                evictions=self.evictions,
                hits=self.hits,
                misses=self.misses,
            )
