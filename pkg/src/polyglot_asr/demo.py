"""Self-contained demo deployment: stub classifier bundles, placeholder models, config.

The stub classifiers have random LSTM weights at full size (2 x 200 units) and
a dense head biased toward one label, so the whole pipeline runs at realistic
cost while routing deterministically.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .audio_io import AudioClip, encode_wav
from .identification import DEFAULT_ACCENTS, DEFAULT_LANGUAGES
from .nn import init_weights, save_weights


def synth_utterance(duration_s: float = 10.0, sample_rate: int = 16000, seed: int = 0,
                    edge_silence_s: float = 0.3, channels: int = 1) -> AudioClip:
    """Speech-like test signal: voiced harmonic bursts with pauses, silent edges."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    f0 = 110.0 + 40.0 * rng.random() + 15.0 * np.sin(2 * np.pi * 0.7 * t)
    phase = 2 * np.pi * np.cumsum(f0) / sample_rate
    voiced = sum((0.6 / k) * np.sin(k * phase + rng.random() * 6.28) for k in range(1, 9))
    syllable = 0.5 * (1 + np.sin(2 * np.pi * (3.0 + rng.random()) * t + rng.random() * 6.28))
    x = 0.4 * voiced * syllable + 0.01 * rng.standard_normal(n)
    edge = int(round(edge_silence_s * sample_rate))
    if edge:
        x[:edge] = 0.0
        x[-edge:] = 0.0
    pcm = np.clip(np.round(x * 32767), -32768, 32767).astype(np.int16)
    if channels > 1:
        pcm = np.repeat(pcm, channels)
    return AudioClip(pcm, sample_rate, channels)


def write_stub_bundles(directory, route=("en", "india"), hidden_size=200, seed=0) -> dict:
    """Write LID and accent bundles that route every utterance to ``route``."""
    directory = Path(directory)
    lang, accent = route
    paths = {"lid": save_weights(
        init_weights(DEFAULT_LANGUAGES, hidden_size=hidden_size, seed=seed, favor=lang),
        directory / "lid",
    ).parent}
    for i, (language, accents) in enumerate(DEFAULT_ACCENTS.items()):
        if len(accents) < 2:
            continue  # single-accent languages get no accent classifier
        favor = accent if language == lang else accents[0]
        ws = init_weights(accents, hidden_size=hidden_size, seed=seed + 1 + i, favor=favor)
        paths[language] = save_weights(ws, directory / f"accent-{language}").parent
    return paths


def _toml_value(v):
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(v)


def build_demo(directory, route=("en", "india"), model_size_mb=60.0, budget_mb=775.0,
               mode="lazy", hidden_size=200, transcripts=None, models=None, port=8080,
               seed=0) -> Path:
    """Create a runnable deployment under ``directory``; returns the config path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    bundles = write_stub_bundles(directory / "weights", route, hidden_size, seed)
    if models is None:
        models = [(lang, acc) for lang in DEFAULT_LANGUAGES for acc in DEFAULT_ACCENTS[lang]]
    transcripts = dict(transcripts or {})
    for key in models:
        transcripts.setdefault(tuple(key), f"transcribed by the {key[0]} {key[1]} model")

    lines = [
        "[service]",
        'host = "127.0.0.1"',
        f"port = {port}",
        "latency_slo_ms = 1000",
        "",
        "[preprocess]",
        "silence_threshold_db = -40.0",
        "silence_window_ms = 20.0",
        "normalize_peak = 0.95",
        "id_min_duration_s = 10.0",
        "",
        "[identify]",
        f"languages = {_toml_value(DEFAULT_LANGUAGES)}",
        f'lid_bundle = "{bundles["lid"].relative_to(directory).as_posix()}"',
        "lid_confidence_threshold = 0.0",
        "",
        "[identify.accents]",
        *(f"{lang} = {_toml_value(acc)}" for lang, acc in DEFAULT_ACCENTS.items()),
        "",
        "[identify.accent_bundles]",
        *(f'{lang} = "{p.relative_to(directory).as_posix()}"' for lang, p in bundles.items() if lang != "lid"),
        "",
        "[registry]",
        f"budget_mb = {float(budget_mb)!r}",
        f'mode = "{mode}"',
        "",
        "[backend]",
        'kind = "mock"',
        "timeout_ms = 30000",
        "",
        "[backend.mock]",
        *(f'"{k[0]}/{k[1]}" = {_toml_value(v)}' for k, v in transcripts.items()),
        "",
    ]
    model_dir = directory / "models"
    model_dir.mkdir(exist_ok=True)
    for lang, acc in models:
        artifact = model_dir / f"{lang}-{acc}.bin"
        artifact.write_bytes(b"placeholder model artifact\n")
        lines += [
            "[[models]]",
            f'language = "{lang}"',
            f'accent = "{acc}"',
            f'path = "models/{artifact.name}"',
            f"size_mb = {float(model_size_mb)!r}",
            'backend = "mock"',
            "",
        ]
    config = directory / "config.toml"
    config.write_text("\n".join(lines))
    return config


def write_sample_wavs(directory, count=3, duration_s=10.0, sample_rate=16000) -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        p = directory / f"utt{i:03d}.wav"
        p.write_bytes(encode_wav(synth_utterance(duration_s, sample_rate, seed=i)))
        paths.append(p)
    return paths
