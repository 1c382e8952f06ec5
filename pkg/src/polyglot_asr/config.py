"""Service configuration loaded from TOML.

Sections: ``[service]``, ``[preprocess]``, ``[identify]``, ``[registry]``,
``[backend]`` and one ``[[models]]`` table per recognizer model. Relative
paths resolve against the config file's directory.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import tomli

from .backend import BackendSpec
from .dsp import PreprocessConfig
from .errors import ConfigError
from .identification import (
    DEFAULT_ACCENT,
    DEFAULT_ACCENTS,
    DEFAULT_FALLBACKS,
    IdentificationConfig,
    IdPolicy,
)
from .registry import MB, ModelKey, ModelManifest


@dataclass(frozen=True)
class RegistryConfig:
    budget_mb: float = 775.0
    mode: str = "lazy"
    preload: tuple = ()

    def __post_init__(self):
        if self.mode not in ("lazy", "preload"):
            raise ConfigError(f"registry mode must be 'lazy' or 'preload', got {self.mode!r}")
        if self.budget_mb <= 0:
            raise ConfigError("registry budget_mb must be positive")

    @property
    def budget_bytes(self) -> int:
        return int(round(self.budget_mb * MB))


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    latency_slo_ms: float = 1000.0
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    identify: IdentificationConfig = field(default_factory=IdentificationConfig)
    models: tuple = ()  # of ModelManifest
    registry: RegistryConfig = field(default_factory=RegistryConfig)
    backend: BackendSpec = field(default_factory=BackendSpec)
    source: Path | None = None


def parse_key(text) -> ModelKey:
    if isinstance(text, (list, tuple)) and len(text) == 2:
        return ModelKey(str(text[0]), str(text[1]))
    lang, sep, accent = str(text).partition("/")
    if not sep or not lang or not accent:
        raise ConfigError(f"model key must look like 'language/accent', got {text!r}")
    return ModelKey(lang, accent)


def _section(doc: dict, name: str) -> dict:
    value = doc.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    return value


def _pick(cls, table: dict, section: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    return cls(**table)


def config_from_dict(doc: dict, base_dir: Path | str = ".") -> ServiceConfig:
    base = Path(base_dir)

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    service = dict(_section(doc, "service"))
    pre = _pick(PreprocessConfig, _section(doc, "preprocess"), "preprocess")

    ident = dict(_section(doc, "identify"))
    languages = tuple(ident.pop("languages", ("en", "ta", "cmn")))
    accents = ident.pop("accents", {})
    fallback = dict(ident.pop("fallback", {}))
    for lang in languages:
        fallback.setdefault(lang, DEFAULT_FALLBACKS.get(lang, DEFAULT_ACCENT))
    policy = IdPolicy(
        lid_confidence_threshold=float(ident.pop("lid_confidence_threshold", 0.0)),
        accent_fallback=fallback,
        accent_confidence_threshold=float(ident.pop("accent_confidence_threshold", 0.0)),
    )
    lid_bundle = ident.pop("lid_bundle", None)
    accent_bundles = {k: resolve(v) for k, v in ident.pop("accent_bundles", {}).items()}
    if ident:
        raise ConfigError(f"unknown keys in [identify]: {sorted(ident)}")
    if not accents:
        accents = {lang: DEFAULT_ACCENTS.get(lang, (DEFAULT_ACCENT,)) for lang in languages}
    identify = IdentificationConfig(
        languages=languages,
        accents=accents,
        lid_bundle=resolve(lid_bundle) if lid_bundle else None,
        accent_bundles=accent_bundles,
        policy=policy,
    )

    reg = dict(_section(doc, "registry"))
    reg["preload"] = tuple(parse_key(k) for k in reg.get("preload", ()))
    registry = _pick(RegistryConfig, reg, "registry")

    be = dict(_section(doc, "backend"))
    mock = {parse_key(k): v for k, v in be.pop("mock", {}).items()}
    backend = _pick(BackendSpec, {**be, "mock": mock}, "backend")

    models = []
    for i, m in enumerate(doc.get("models", [])):
        try:
            key = ModelKey(str(m["language"]), str(m["accent"]))
            manifest = ModelManifest(
                key=key,
                artifact_path=resolve(m["path"]),
                declared_size_bytes=int(round(float(m["size_mb"]) * MB)),
                backend_kind=m.get("backend", backend.kind),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"[[models]] entry {i}: {exc}") from exc
        if key.language not in identify.languages or key.accent not in identify.accents[key.language]:
            raise ConfigError(f"[[models]] entry {i}: {key} is not a registered language/accent pair")
        models.append(manifest)

    host = str(service.pop("host", "127.0.0.1"))
    port = int(service.pop("port", 8080))
    slo = float(service.pop("latency_slo_ms", 1000.0))
    if service:
        raise ConfigError(f"unknown keys in [service]: {sorted(service)}")
    return ServiceConfig(
        host=host,
        port=port,
        latency_slo_ms=slo,
        preprocess=pre,
        identify=identify,
        models=tuple(models),
        registry=registry,
        backend=backend,
    )


def load_config(path) -> ServiceConfig:
    path = Path(path)
    try:
        doc = tomli.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return replace(config_from_dict(doc, path.parent), source=path)
