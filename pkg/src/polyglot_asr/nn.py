"""Forward-only LSTM classifier runtime and its on-disk weight bundle format.

Architecture: ``L`` stacked LSTM layers, each followed by inference-mode
batch normalization, mean pooling over time, a dense layer and softmax.

Bundle layout (a directory)::

    manifest.json   metadata + tensor table (name, shape, offset, length)
    weights.bin     concatenated row-major little-endian float32 tensors

Tensor names per layer ``k`` (``D`` = F for k=0, else H)::

    W_ih_l{k}   (4H, D)    gates packed (i, f, g, o)
    W_hh_l{k}   (4H, H)
    b_ih_l{k}   (4H,)
    b_hh_l{k}   (4H,)
    bn_gamma_l{k} / bn_beta_l{k} / bn_mean_l{k} / bn_var_l{k}   (H,)

plus ``W_out`` (C, H) and ``b_out`` (C,).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .dsp import FRONTEND_DESCRIPTOR
from .errors import (
    DimensionMismatch,
    ManifestMissing,
    NonFiniteWeight,
    TensorShapeMismatch,
    WeightError,
)

BUNDLE_FORMAT = "lstm-bn-classifier"
BUNDLE_VERSION = 1
GATE_ORDER = "ifgo"
BN_EPS = 1e-5
MANIFEST_NAME = "manifest.json"
BLOB_NAME = "weights.bin"


def architecture_template(input_dim: int, hidden_size: int, num_layers: int, n_classes: int):
    """Ordered mapping of tensor name -> expected shape."""
    h = hidden_size
    shapes = {}
    for k in range(num_layers):
        d = input_dim if k == 0 else h
        shapes[f"W_ih_l{k}"] = (4 * h, d)
        shapes[f"W_hh_l{k}"] = (4 * h, h)
        shapes[f"b_ih_l{k}"] = (4 * h,)
        shapes[f"b_hh_l{k}"] = (4 * h,)
        for stat in ("gamma", "beta", "mean", "var"):
            shapes[f"bn_{stat}_l{k}"] = (h,)
    shapes["W_out"] = (n_classes, h)
    shapes["b_out"] = (n_classes,)
    return shapes


@dataclass(frozen=True)
class LSTMLayer:
    w_ih: np.ndarray
    w_hh: np.ndarray
    b_ih: np.ndarray
    b_hh: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.w_hh.shape[1]

    @property
    def input_dim(self) -> int:
        return self.w_ih.shape[1]


@dataclass(frozen=True)
class BatchNormStats:
    gamma: np.ndarray
    beta: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    eps: float = BN_EPS


@dataclass(frozen=True, eq=False)
class WeightSet:
    tensors: dict
    input_dim: int
    hidden_size: int
    num_layers: int
    labels: tuple
    frontend: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) < 1 or len(set(self.labels)) != len(self.labels):
            raise WeightError("class labels must be non-empty and unique")
        template = architecture_template(
            self.input_dim, self.hidden_size, self.num_layers, len(self.labels)
        )
        frozen = {}
        for name, shape in template.items():
            if name not in self.tensors:
                raise TensorShapeMismatch(f"missing tensor {name!r}")
            arr = np.asarray(self.tensors[name], dtype=np.float32)
            if arr.shape != shape:
                raise TensorShapeMismatch(f"{name}: expected shape {list(shape)}, got {list(arr.shape)}")
            if not np.all(np.isfinite(arr)):
                raise NonFiniteWeight(f"{name} contains NaN or Inf")
            arr = arr.copy()
            arr.setflags(write=False)
            frozen[name] = arr
        unexpected = set(self.tensors) - set(template)
        if unexpected:
            raise TensorShapeMismatch(f"unexpected tensors {sorted(unexpected)}")
        for k in range(self.num_layers):
            if np.any(frozen[f"bn_var_l{k}"] < 0):
                raise WeightError(f"bn_var_l{k} has negative running variance")
        object.__setattr__(self, "tensors", frozen)

    @property
    def n_classes(self) -> int:
        return len(self.labels)

    def layer(self, k: int) -> LSTMLayer:
        t = self.tensors
        return LSTMLayer(t[f"W_ih_l{k}"], t[f"W_hh_l{k}"], t[f"b_ih_l{k}"], t[f"b_hh_l{k}"])

    def batch_norm(self, k: int) -> BatchNormStats:
        t = self.tensors
        return BatchNormStats(t[f"bn_gamma_l{k}"], t[f"bn_beta_l{k}"], t[f"bn_mean_l{k}"], t[f"bn_var_l{k}"])


@dataclass(frozen=True, eq=False)
class ClassScores:
    labels: tuple
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "labels", tuple(self.labels))
        if probs.shape != (len(self.labels),):
            raise DimensionMismatch("one probability per label required")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-6:
            raise ValueError("probabilities must be non-negative and sum to 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def argmax_index(self) -> int:
        # np.argmax returns the first maximal index, which is the tie-break rule
        return int(np.argmax(self.probs))

    @property
    def label(self):
        return self.labels[self.argmax_index]

    @property
    def confidence(self) -> float:
        return float(self.probs[self.argmax_index])

    def as_dict(self) -> dict:
        return {label: float(p) for label, p in zip(self.labels, self.probs)}

    def __eq__(self, other):
        if not isinstance(other, ClassScores):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.probs, other.probs)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def lstm_forward(layer: LSTMLayer, inputs: np.ndarray) -> np.ndarray:
    """Run one LSTM layer from zero initial state; returns every h_t as (T, H)."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != layer.input_dim:
        raise DimensionMismatch(
            f"layer expects (T, {layer.input_dim}) input, got {tuple(x.shape)}"
        )
    h_size = layer.hidden_size
    # reorder packed gates (i, f, g, o) -> (i, f, o, g) so sigmoids hit one slice
    order = np.r_[0:2 * h_size, 3 * h_size:4 * h_size, 2 * h_size:3 * h_size]
    w_hh_t = layer.w_hh.astype(np.float64)[order].T
    bias = layer.b_ih.astype(np.float64) + layer.b_hh
    # input projection for every timestep at once
    pre = x @ layer.w_ih.astype(np.float64)[order].T + bias[order]
    h = np.zeros(h_size)
    c = np.zeros(h_size)
    out = np.empty((x.shape[0], h_size))
    s3 = 3 * h_size
    for t in range(x.shape[0]):
        gates = pre[t] + h @ w_hh_t
        ifo = expit(gates[:s3])
        g = np.tanh(gates[s3:])
        c = ifo[h_size:2 * h_size] * c + ifo[:h_size] * g
        h = ifo[2 * h_size:s3] * np.tanh(c)
        out[t] = h
    return out


def batch_norm_seq(x: np.ndarray, stats: BatchNormStats) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != stats.gamma.shape[0]:
        raise DimensionMismatch(f"batch norm over {stats.gamma.shape[0]} features, got {tuple(x.shape)}")
    scale = stats.gamma.astype(np.float64) / np.sqrt(stats.var.astype(np.float64) + stats.eps)
    return (x - stats.mean) * scale + stats.beta


def classify(weights: WeightSet, features) -> ClassScores:
    frames = getattr(features, "frames", features)
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != weights.input_dim:
        raise DimensionMismatch(
            f"classifier expects {weights.input_dim}-dim features, got shape {tuple(frames.shape)}"
        )
    h = frames
    for k in range(weights.num_layers):
        h = batch_norm_seq(lstm_forward(weights.layer(k), h), weights.batch_norm(k))
    pooled = h.mean(axis=0)
    logits = weights.tensors["W_out"].astype(np.float64) @ pooled + weights.tensors["b_out"]
    return ClassScores(weights.labels, softmax(logits))


def save_weights(weights: WeightSet, bundle_dir) -> Path:
    """Write ``weights`` as a bundle directory and return the manifest path."""
    bundle = Path(bundle_dir)
    bundle.mkdir(parents=True, exist_ok=True)
    table = []
    offset = 0
    chunks = []
    for name, shape in architecture_template(
        weights.input_dim, weights.hidden_size, weights.num_layers, weights.n_classes
    ).items():
        raw = weights.tensors[name].astype("<f4").tobytes(order="C")
        table.append({"name": name, "shape": list(shape), "offset": offset, "length": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "input_dim": weights.input_dim,
        "hidden_size": weights.hidden_size,
        "num_layers": weights.num_layers,
        "labels": list(weights.labels),
        "frontend": weights.frontend,
        "gate_order": GATE_ORDER,
        "initial_state": "zeros",
        "batch_norm": {"mode": "inference", "axis": "feature", "eps": BN_EPS},
        "pooling": "mean",
        "dtype": "float32-le",
        "tensors": table,
    }
    manifest.update(weights.extra)
    (bundle / BLOB_NAME).write_bytes(b"".join(chunks))
    path = bundle / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def load_weights(manifest_path) -> WeightSet:
    """Load and validate a bundle; accepts the bundle directory or its manifest."""
    path = Path(manifest_path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.is_file():
        raise ManifestMissing(f"no weight manifest at {path}")
    blob_path = path.parent / BLOB_NAME
    if not blob_path.is_file():
        raise ManifestMissing(f"no weight blob at {blob_path}")
    try:
        meta = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise WeightError(f"{path}: invalid JSON ({exc})") from exc
    if meta.get("format") != BUNDLE_FORMAT or meta.get("version") != BUNDLE_VERSION:
        raise WeightError(f"{path}: unsupported bundle format {meta.get('format')!r} v{meta.get('version')}")
    if meta.get("gate_order", GATE_ORDER) != GATE_ORDER:
        raise WeightError(f"{path}: gate order {meta.get('gate_order')!r} unsupported")
    blob = blob_path.read_bytes()
    try:
        input_dim = int(meta["input_dim"])
        hidden = int(meta["hidden_size"])
        layers = int(meta["num_layers"])
        labels = list(meta["labels"])
        table = meta["tensors"]
    except (KeyError, TypeError, ValueError) as exc:
        raise WeightError(f"{path}: incomplete manifest ({exc})") from exc
    template = architecture_template(input_dim, hidden, layers, len(labels))
    tensors = {}
    for entry in table:
        name = entry["name"]
        shape = tuple(int(s) for s in entry["shape"])
        if name in template and shape != template[name]:
            raise TensorShapeMismatch(
                f"{name}: manifest shape {list(shape)}, architecture requires {list(template[name])}"
            )
        offset, length = int(entry["offset"]), int(entry["length"])
        if length != 4 * int(np.prod(shape, dtype=np.int64)):
            raise TensorShapeMismatch(f"{name}: byte length {length} does not match shape {list(shape)}")
        if offset < 0 or offset + length > len(blob):
            raise WeightError(f"{name}: byte range outside {BLOB_NAME}")
        tensors[name] = np.frombuffer(blob, dtype="<f4", count=length // 4, offset=offset).reshape(shape)
    known = {"format", "version", "input_dim", "hidden_size", "num_layers", "labels", "frontend",
             "gate_order", "initial_state", "batch_norm", "pooling", "dtype", "tensors"}
    extra = {k: v for k, v in meta.items() if k not in known}
    return WeightSet(tensors, input_dim, hidden, layers, labels, meta.get("frontend", ""), extra)


def init_weights(labels, input_dim=40, hidden_size=200, num_layers=2, scale=0.1,
                 seed=0, frontend=FRONTEND_DESCRIPTOR, favor=None, favor_margin=10.0) -> WeightSet:
    """Random weights with identity batch norm; ``favor`` biases the head toward one label.

    Stands in for trained weights wherever the runtime must be exercised
    without a trained model.
    """
    rng = np.random.default_rng(seed)
    labels = list(labels)
    tensors = {}
    for name, shape in architecture_template(input_dim, hidden_size, num_layers, len(labels)).items():
        if name.startswith(("bn_gamma", "bn_var")):
            tensors[name] = np.ones(shape)
        elif name.startswith(("bn_beta", "bn_mean")):
            tensors[name] = np.zeros(shape)
        else:
            tensors[name] = rng.uniform(-scale, scale, size=shape)
    if favor is not None:
        tensors["W_out"] = np.zeros_like(tensors["W_out"])
        bias = np.zeros(len(labels))
        bias[labels.index(favor)] = favor_margin
        tensors["b_out"] = bias
    return WeightSet(tensors, input_dim, hidden_size, num_layers, labels, frontend)


def zero_weights(labels, input_dim=40, hidden_size=200, num_layers=2, frontend=FRONTEND_DESCRIPTOR) -> WeightSet:
    """All-zero LSTM/dense weights with identity batch norm."""
    tensors = {
        name: (np.ones(shape) if name.startswith(("bn_gamma", "bn_var")) else np.zeros(shape))
        for name, shape in architecture_template(input_dim, hidden_size, num_layers, len(labels)).items()
    }
    return WeightSet(tensors, input_dim, hidden_size, num_layers, labels, frontend)


def bundle_size_bytes(path) -> int:
    path = Path(path)
    if path.is_file():
        path = path.parent
    return sum(os.path.getsize(p) for p in path.iterdir() if p.is_file())
