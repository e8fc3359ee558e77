"""Feed-forward net: inference, training, gradient check, weight files."""
import json

import numpy as np
import pytest

from icckit.errors import NonFiniteLoss, ParseError, ShapeMismatch
from icckit.predictor import (
    Mlp,
    TrainConfig,
    init_mlp,
    load_weights,
    loss_and_gradients,
    save_weights,
    train,
)


def test_single_layer_projection():
    # 1 x p weight row e_1: output equals the first feature
    m = Mlp([np.array([[1.0, 0.0, 0.0]])], [np.zeros(1)])
    x = np.array([[3.0, -1.0, 5.0], [0.5, 2.0, 2.0]])
    assert np.allclose(m(x), [3.0, 0.5])


def test_all_zero_weights():
    m = init_mlp(4, hidden=(8,), seed=0)
    for w in m.weights:
        w[:] = 0.0
    assert np.allclose(m(np.random.default_rng(0).normal(size=(10, 4))), 0.0)


def test_hand_computed_221_relu():
    # layer 1: W=[[1, -1], [2, 0]], b=(0.5, -1); layer 2: W=[[1, 1]], b=0.25
    # x=(1, -1): z1=(1*1 + -1*-1 + .5, 2*1 - 1) = (2.5, 1.0); relu same
    # out = 2.5 + 1.0 + 0.25 = 3.75
    m = Mlp(
        [np.array([[1.0, -1.0], [2.0, 0.0]]), np.array([[1.0, 1.0]])],
        [np.array([0.5, -1.0]), np.array([0.25])],
    )
    assert np.isclose(m(np.array([1.0, -1.0])), 3.75)


def test_forward_shape_mismatch():
    m = init_mlp(3, hidden=(4,), seed=0)
    with pytest.raises(ShapeMismatch):
        m(np.zeros((5, 2)))


def test_forward_batch_order_invariant():
    m = init_mlp(3, hidden=(16, 8), seed=1)
    x = np.random.default_rng(2).normal(size=(20, 3))
    full = m(x)
    for i in range(20):
        assert np.isclose(m(x[i : i + 1])[0], full[i])


def test_binary_head_gives_probability():
    m = init_mlp(2, hidden=(4,), head="binary", seed=0)
    out = m(np.random.default_rng(1).normal(size=(50, 2)))
    assert np.all((out > 0.0) & (out < 1.0))


def test_train_learns_linear_target():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(500, 2))
    y = 2 * x[:, 0] + 1
    m = train((x, y), TrainConfig(epochs=200, learning_rate=1e-2, hidden=(16,), seed=0))
    xt = rng.normal(size=(200, 2))
    rmse = np.sqrt(np.mean((m(xt) - (2 * xt[:, 0] + 1)) ** 2))
    assert rmse < 0.05


def test_train_constant_target():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(100, 3))
    y = np.full(100, 4.2)
    m = train((x, y), TrainConfig(epochs=800, learning_rate=2e-2, hidden=(4,), seed=0))
    assert np.sqrt(np.mean((m(x) - y) ** 2)) < 1e-3


def test_train_deterministic_and_loss_decreases():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(120, 2))
    y = x[:, 0] - 0.5 * x[:, 1]
    cfg = TrainConfig(epochs=20, seed=7, hidden=(16,), record_history=True)
    a = train((x, y), cfg)
    b = train((x, y), cfg)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
    assert a.history[-1] <= a.history[0]


def test_train_divergence_raises():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(50, 2)) * 1e200
    y = rng.normal(size=50) * 1e200
    with np.errstate(all="ignore"), pytest.raises(NonFiniteLoss):
        train((x, y), TrainConfig(epochs=2, learning_rate=1e-2, hidden=(4,)))


def test_gradient_check_against_finite_differences():
    # central differences with step 1e-4 on a 2-2-1 net at 8 random points
    rng = np.random.default_rng(5)
    m = init_mlp(2, hidden=(2,), seed=3)
    x = rng.normal(size=(8, 2))
    y = rng.normal(size=8)
    for loss in ("squared_error", "cross_entropy"):
        yy = (y > 0).astype(float) if loss == "cross_entropy" else y
        _, gw, gb = loss_and_gradients(m, x, yy, loss)
        step = 1e-4
        for li in range(len(m.weights)):
            for arr, grad in ((m.weights[li], gw[li]), (m.biases[li], gb[li])):
                it = np.nditer(arr, flags=["multi_index"])
                for _ in it:
                    idx = it.multi_index
                    orig = arr[idx]
                    arr[idx] = orig + step
                    up, _, _ = loss_and_gradients(m, x, yy, loss)
                    arr[idx] = orig - step
                    down, _, _ = loss_and_gradients(m, x, yy, loss)
                    arr[idx] = orig
                    fd = (up - down) / (2 * step)
                    denom = max(abs(fd), abs(grad[idx]), 1e-8)
                    assert abs(fd - grad[idx]) / denom < 1e-3


def test_weight_file_round_trip(tmp_path):
    m = init_mlp(3, hidden=(5, 4), seed=9)
    path = tmp_path / "w.json"
    save_weights(m, str(path))
    loaded = load_weights(str(path))
    x = np.random.default_rng(0).normal(size=(10, 3))
    assert np.array_equal(m(x), loaded(x))


def test_truncated_weight_file(tmp_path):
    m = init_mlp(2, hidden=(3,), seed=0)
    path = tmp_path / "w.json"
    save_weights(m, str(path))
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(ParseError):
        load_weights(str(path))


def test_version_mismatch(tmp_path):
    m = init_mlp(2, hidden=(3,), seed=0)
    path = tmp_path / "w.json"
    save_weights(m, str(path))
    payload = json.loads(path.read_text())
    payload["version"] = 99
    path.write_text(json.dumps(payload))
    with pytest.raises(ParseError, match="version"):
        load_weights(str(path))


def test_bad_config_rejected():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        TrainConfig(loss="hinge")
