import json
import math

import numpy as np
import pytest

from oracles import naive_lstm
from polyglot_asr.errors import (
    DimensionMismatch,
    ManifestMissing,
    NonFiniteWeight,
    TensorShapeMismatch,
    WeightError,
)
from polyglot_asr.nn import (
    BatchNormStats,
    ClassScores,
    LSTMLayer,
    architecture_template,
    batch_norm_seq,
    classify,
    init_weights,
    load_weights,
    lstm_forward,
    save_weights,
    softmax,
    zero_weights,
)


def random_layer(rng, hidden, dim, bound=0.5):
    return LSTMLayer(
        rng.uniform(-bound, bound, (4 * hidden, dim)),
        rng.uniform(-bound, bound, (4 * hidden, hidden)),
        rng.uniform(-bound, bound, 4 * hidden),
        rng.uniform(-bound, bound, 4 * hidden),
    )


@pytest.mark.parametrize("seed", range(40))
def test_lstm_matches_scalar_oracle(seed):
    rng = np.random.default_rng(seed)
    hidden, dim, steps = rng.integers(1, 9), rng.integers(1, 6), rng.integers(1, 17)
    layer = random_layer(rng, hidden, dim)
    x = rng.uniform(-2, 2, (steps, dim))
    got = lstm_forward(layer, x)
    want = naive_lstm(layer.w_ih.tolist(), layer.w_hh.tolist(), layer.b_ih.tolist(), layer.b_hh.tolist(), x.tolist())
    np.testing.assert_allclose(got, np.array(want), atol=1e-5, rtol=0)


def test_lstm_single_unit_hand_value():
    big = 30.0
    # packed rows (i, f, g, o); only b_i and b_g set
    layer = LSTMLayer(np.zeros((4, 1)), np.zeros((4, 1)), np.array([big, 0.0, big, 0.0]), np.zeros(4))
    h = lstm_forward(layer, np.array([[0.3]]))
    assert abs(h[0, 0] - 0.5 * math.tanh(1.0)) < 1e-6
    assert abs(h[0, 0] - 0.380797) < 1e-6


def test_lstm_zero_weights_zero_output():
    layer = LSTMLayer(np.zeros((8, 3)), np.zeros((8, 2)), np.zeros(8), np.zeros(8))
    assert np.all(lstm_forward(layer, np.ones((5, 3))) == 0)


def test_lstm_dimension_mismatch():
    layer = LSTMLayer(np.zeros((8, 3)), np.zeros((8, 2)), np.zeros(8), np.zeros(8))
    with pytest.raises(DimensionMismatch):
        lstm_forward(layer, np.ones((5, 4)))


def test_hidden_states_bounded():
    rng = np.random.default_rng(9)
    layer = random_layer(rng, 6, 4, bound=3.0)
    h = lstm_forward(layer, rng.normal(0, 5, (50, 4)))
    assert np.all(np.abs(h) < 1)


def test_batch_norm_examples():
    one = np.ones(1)
    stats = BatchNormStats(2 * one, one, 3 * one, 4 * one)
    out = batch_norm_seq(np.array([[5.0]]), stats)
    assert abs(out[0, 0] - (2 * 2 / math.sqrt(4 + 1e-5) + 1)) < 1e-12
    # exact value 2.9999975; the quoted 2.999996 is a rounding slip
    assert abs(out[0, 0] - 2.9999975) < 1e-9
    assert abs(out[0, 0] - 2.999996) < 5e-6

    # eps makes identity parameters scale by 1/sqrt(1+1e-5), so keep |x| <= 2
    x = np.random.default_rng(0).uniform(-2, 2, size=(7, 3))
    ident = BatchNormStats(np.ones(3), np.zeros(3), np.zeros(3), np.ones(3))
    np.testing.assert_allclose(batch_norm_seq(x, ident), x, atol=1e-5)
    flat = BatchNormStats(np.zeros(3), np.array([1.0, 2.0, 3.0]), np.zeros(3), np.ones(3))
    np.testing.assert_array_equal(batch_norm_seq(x, flat), np.tile([1.0, 2.0, 3.0], (7, 1)))
    with pytest.raises(DimensionMismatch):
        batch_norm_seq(np.ones((2, 4)), ident)


def test_softmax_values_and_shift():
    p = softmax([10.0, 0.0, 0.0])
    e = math.exp(10)
    np.testing.assert_allclose(p, [e / (e + 2), 1 / (e + 2), 1 / (e + 2)], rtol=1e-12)
    assert abs(p[0] - 0.99990) < 1e-5 and abs(p[1] - 0.0000454) < 1e-7
    np.testing.assert_allclose(softmax(np.array([10.0, 0, 0]) + 7), p, atol=1e-12)
    assert abs(softmax(np.array([1000.0, -1000.0])).sum() - 1) < 1e-12


def test_classify_dense_bias_dominates():
    ws = zero_weights(["a", "b", "c"], input_dim=4, hidden_size=3, num_layers=2)
    t = dict(ws.tensors)
    t["b_out"] = np.array([10.0, 0.0, 0.0])
    ws = type(ws)(t, 4, 3, 2, ws.labels, ws.frontend)
    scores = classify(ws, np.random.default_rng(1).normal(size=(9, 4)))
    assert scores.argmax_index == 0 and scores.label == "a"
    np.testing.assert_allclose(scores.probs, [0.99990, 0.0000454, 0.0000454], atol=1e-5)


def test_classify_all_zero_uniform_tie_break():
    ws = zero_weights(["x", "y", "z", "w"], input_dim=4, hidden_size=2, num_layers=2)
    scores = classify(ws, np.ones((3, 4)))
    np.testing.assert_allclose(scores.probs, 0.25)
    assert scores.argmax_index == 0 and scores.confidence == pytest.approx(0.25)


def test_classify_bias_shift_invariance():
    ws = init_weights(["a", "b", "c"], input_dim=5, hidden_size=4, seed=3)
    t = dict(ws.tensors)
    t["b_out"] = t["b_out"] + 7
    shifted = type(ws)(t, 5, 4, 2, ws.labels, ws.frontend)
    x = np.random.default_rng(2).normal(size=(11, 5))
    np.testing.assert_allclose(classify(shifted, x).probs, classify(ws, x).probs, atol=1e-6)


def test_classify_matches_oracle_pipeline():
    rng = np.random.default_rng(5)
    ws = init_weights(["a", "b"], input_dim=3, hidden_size=4, num_layers=2, scale=0.5, seed=5)
    t = dict(ws.tensors)
    for k in range(2):
        t[f"bn_gamma_l{k}"] = rng.uniform(0.5, 2, 4)
        t[f"bn_beta_l{k}"] = rng.uniform(-1, 1, 4)
        t[f"bn_mean_l{k}"] = rng.uniform(-0.2, 0.2, 4)
        t[f"bn_var_l{k}"] = rng.uniform(0.1, 2, 4)
    ws = type(ws)(t, 3, 4, 2, ws.labels, ws.frontend)
    t = {k: v.astype(np.float64) for k, v in ws.tensors.items()}
    x = rng.normal(size=(6, 3))
    seq = x.tolist()
    for k in range(2):
        seq = naive_lstm(t[f"W_ih_l{k}"].tolist(), t[f"W_hh_l{k}"].tolist(),
                         t[f"b_ih_l{k}"].tolist(), t[f"b_hh_l{k}"].tolist(), seq)
        seq = [[t[f"bn_gamma_l{k}"][u] * (row[u] - t[f"bn_mean_l{k}"][u]) / math.sqrt(t[f"bn_var_l{k}"][u] + 1e-5)
                + t[f"bn_beta_l{k}"][u] for u in range(4)] for row in seq]
    pooled = [sum(col) / len(seq) for col in zip(*seq)]
    logits = [sum(w * p for w, p in zip(row, pooled)) + b for row, b in zip(t["W_out"], t["b_out"])]
    m = max(logits)
    e = [math.exp(v - m) for v in logits]
    np.testing.assert_allclose(classify(ws, x).probs, [v / sum(e) for v in e], atol=1e-9)


def test_classify_deterministic_and_dimension_checked():
    ws = init_weights(["a", "b"], input_dim=40, hidden_size=8)
    x = np.random.default_rng(0).normal(size=(30, 40))
    assert classify(ws, x) == classify(ws, x.copy())
    with pytest.raises(DimensionMismatch):
        classify(ws, np.ones((3, 39)))


def test_class_scores_validation():
    with pytest.raises(ValueError):
        ClassScores(("a", "b"), [0.7, 0.7])
    s = ClassScores(("a", "b", "c"), [0.4, 0.4, 0.2])
    assert s.argmax_index == 0


def test_template_shapes():
    t = architecture_template(40, 200, 2, 3)
    assert t["W_ih_l0"] == (800, 40)
    assert t["W_ih_l1"] == (800, 200)
    assert t["W_hh_l0"] == (800, 200)
    assert t["W_out"] == (3, 200)


def test_bundle_round_trip(tmp_path):
    ws = init_weights(["en", "ta", "cmn"], input_dim=40, hidden_size=16, seed=4)
    manifest = save_weights(ws, tmp_path / "b")
    back = load_weights(manifest)
    assert back.labels == ws.labels and back.frontend == ws.frontend
    for name in ws.tensors:
        np.testing.assert_array_equal(back.tensors[name], ws.tensors[name])
    assert load_weights(tmp_path / "b").labels == ws.labels


def test_blob_layout_is_little_endian_float32(tmp_path):
    ws = init_weights(["a"], input_dim=2, hidden_size=1, seed=0)
    manifest = save_weights(ws, tmp_path)
    meta = json.loads(manifest.read_text())
    blob = (tmp_path / "weights.bin").read_bytes()
    entry = next(e for e in meta["tensors"] if e["name"] == "W_ih_l0")
    raw = np.frombuffer(blob[entry["offset"]:entry["offset"] + entry["length"]], dtype="<f4")
    np.testing.assert_array_equal(raw.reshape(4, 2), ws.tensors["W_ih_l0"])
    assert meta["gate_order"] == "ifgo"


def _rewrite(tmp_path, mutate, blob_mutate=None):
    ws = init_weights(["a", "b"], input_dim=40, hidden_size=200, seed=0)
    path = save_weights(ws, tmp_path)
    meta = json.loads(path.read_text())
    mutate(meta)
    path.write_text(json.dumps(meta))
    if blob_mutate:
        blob = bytearray((tmp_path / "weights.bin").read_bytes())
        blob_mutate(meta, blob)
        (tmp_path / "weights.bin").write_bytes(bytes(blob))
    return path


def test_load_full_size_shapes(tmp_path):
    ws = load_weights(_rewrite(tmp_path, lambda m: None))
    assert ws.tensors["W_ih_l0"].shape == (800, 40)


def test_load_wrong_shape(tmp_path):
    def shrink(meta):
        entry = next(e for e in meta["tensors"] if e["name"] == "W_hh_l0")
        entry["shape"] = [800, 100]
        entry["length"] = 800 * 100 * 4
    with pytest.raises(TensorShapeMismatch):
        load_weights(_rewrite(tmp_path, shrink))


def test_load_nan(tmp_path):
    def poison(meta, blob):
        off = next(e for e in meta["tensors"] if e["name"] == "b_out")["offset"]
        blob[off:off + 4] = np.array([np.nan], dtype="<f4").tobytes()
    with pytest.raises(NonFiniteWeight):
        load_weights(_rewrite(tmp_path, lambda m: None, poison))


def test_load_missing(tmp_path):
    with pytest.raises(ManifestMissing):
        load_weights(tmp_path / "nothing" / "manifest.json")
    path = save_weights(init_weights(["a"], input_dim=2, hidden_size=1), tmp_path / "x")
    (path.parent / "weights.bin").unlink()
    with pytest.raises(ManifestMissing):
        load_weights(path)


def test_load_missing_tensor_and_bad_format(tmp_path):
    def drop(meta):
        meta["tensors"] = [e for e in meta["tensors"] if e["name"] != "W_out"]
    with pytest.raises(TensorShapeMismatch):
        load_weights(_rewrite(tmp_path / "a", drop))
    with pytest.raises(WeightError):
        load_weights(_rewrite(tmp_path / "b", lambda m: m.update(gate_order="iofg")))


def test_weights_are_read_only():
    ws = init_weights(["a"], input_dim=2, hidden_size=1)
    with pytest.raises(ValueError):
        ws.tensors["b_out"][0] = 1.0
