"""
Flight Stack - Neural Network Engine Tests
"""

import os
import subprocess
import sys
import textwrap
from pathlib import Path

import numpy as np
import pytest

from src.nn import (
    Activation,
    AdamState,
    Conv2D,
    Dense,
    Flatten,
    Network,
    adam_step,
    build_decoder,
    build_encoder,
    build_mlp,
    global_norm_clip,
    load_checkpoint,
    mse_loss,
    parameter_checksum,
    read_checkpoint,
    save_checkpoint,
    write_checkpoint,
)
from src.utils import CheckpointError, NetworkShapeError

REPO_ROOT = Path(__file__).resolve().parents[1]


def finite_difference_check(net: Network, x: np.ndarray, rng, h: float = 1e-3, max_params: int = 80):
    """Central differences of L = Σ out·R against backward(), in float64"""
    net = net.to_dtype(np.float64)
    x = np.asarray(x, dtype=np.float64)
    out, cache = net.forward_with_cache(x)
    weights = rng.normal(size=out.shape)
    grad, grad_x = net.backward(cache, weights)

    def loss(params, inputs):
        trial = net.copy()
        trial.set_params(params)
        return float(np.sum(trial.forward(inputs) * weights))

    indices = np.arange(net.param_count)
    if len(indices) > max_params:
        indices = rng.choice(indices, size=max_params, replace=False)

    def numeric_param_grad(i, step):
        plus, minus = net.params.copy(), net.params.copy()
        plus[i] += step
        minus[i] -= step
        return (loss(plus, x) - loss(minus, x)) / (2 * step)

    for i in indices:
        # A relu kink inside [-h, h] spoils the difference; retry with a smaller step before failing
        errors = [abs(grad[i] - numeric) / max(1.0, abs(grad[i]), abs(numeric))
                  for numeric in (numeric_param_grad(i, h), numeric_param_grad(i, h / 10))]
        assert min(errors) < 1e-4

    def numeric_input_grad(i, step):
        plus, minus = x.copy().ravel(), x.copy().ravel()
        plus[i] += step
        minus[i] -= step
        return (loss(net.params, plus.reshape(x.shape)) - loss(net.params, minus.reshape(x.shape))) / (2 * step)

    for i in rng.choice(x.size, size=min(20, x.size), replace=False):
        errors = [abs(grad_x.ravel()[i] - numeric) / max(1.0, abs(numeric))
                  for numeric in (numeric_input_grad(i, h), numeric_input_grad(i, h / 10))]
        assert min(errors) < 1e-4


def naive_conv(x, weights, bias, stride):
    batch, channels, height, width = x.shape
    out_channels, _, k, _ = weights.shape
    out_h, out_w = (height - k) // stride + 1, (width - k) // stride + 1
    y = np.zeros((batch, out_channels, out_h, out_w))
    for b in range(batch):
        for o in range(out_channels):
            for i in range(out_h):
                for j in range(out_w):
                    patch = x[b, :, i * stride:i * stride + k, j * stride:j * stride + k]
                    y[b, o, i, j] = np.sum(patch * weights[o]) + bias[o]
    return y


def test_identity_dense_layer():
    net = Network([Dense(3, 3)], (3,), params=np.concatenate([np.eye(3).ravel(), np.zeros(3)]))
    x = np.array([1.5, -2.0, 0.25], dtype=np.float32)
    assert np.array_equal(net.forward(x), x)


def test_dense_and_conv_accumulate_in_double_precision():
    # 1e8 + 1 - 1e8 loses the 1 when summed in float32
    values = np.array([1e8, 1.0, -1e8], dtype=np.float32)
    dense = Network([Dense(3, 1)], (3,), params=np.array([1.0, 1.0, 1.0, 0.0]))
    assert dense.params.dtype == np.float32
    assert dense.forward(values)[0] == 1.0

    conv = Network([Conv2D(3, 1, 1)], (3, 1, 1), params=np.array([1.0, 1.0, 1.0, 0.0]))
    out = conv.forward(values.reshape(3, 1, 1))
    assert out.dtype == np.float32
    assert out[0, 0, 0] == 1.0


def test_zero_weights_output_bias():
    bias = np.array([0.5, -1.0])
    net = Network([Dense(4, 2)], (4,), params=np.concatenate([np.zeros(8), bias]))
    np.testing.assert_array_equal(net.forward(np.ones((3, 4))), np.tile(bias, (3, 1)))


def test_mlp_matches_naive_matmul(rng):
    net = build_mlp(5, (7, 6), 3, activation="tanh", seed=3)
    x = rng.normal(size=(4, 5))

    h = x.astype(np.float32).astype(np.float64)
    for index, layer in enumerate(net.layers):
        if isinstance(layer, Dense):
            p = net.layer_params(index).astype(np.float64)
            w = p[:layer.out_features * layer.in_features].reshape(layer.out_features, layer.in_features)
            h = np.array([[sum(w[o, i] * row[i] for i in range(layer.in_features)) + p[-layer.out_features + o]
                           for o in range(layer.out_features)] for row in h])
        else:
            h = np.tanh(h)
    np.testing.assert_allclose(net.forward(x), h, rtol=1e-6, atol=1e-6)


def test_conv_matches_naive_loops(rng):
    layer = Conv2D(2, 3, 3, stride=2)
    net = Network([layer], (2, 9, 8)).initialize(1)
    x = rng.normal(size=(2, 2, 9, 8))
    p = net.layer_params(0)
    weights = p[:54].reshape(3, 2, 3, 3)

    np.testing.assert_allclose(net.forward(x), naive_conv(x.astype(np.float32), weights, p[54:], 2), atol=1e-5)


def test_dense_gradient_closed_form():
    w = np.array([[1.0, 2.0], [-0.5, 0.25]])
    x = np.array([0.3, -1.2])
    y = np.array([0.1, 0.4])
    net = Network([Dense(2, 2)], (2,), params=np.concatenate([w.ravel(), np.zeros(2)]), dtype=np.float64)

    out, cache = net.forward_with_cache(x)
    grad, _ = net.backward(cache, out - y)
    np.testing.assert_allclose(grad[:4].reshape(2, 2), np.outer(w @ x - y, x))
    np.testing.assert_allclose(grad[4:], w @ x - y)


@pytest.mark.parametrize("layers,input_shape,batch", [
    ([Dense(6, 5), Activation("tanh"), Dense(5, 3)], (6,), 3),
    ([Dense(6, 5), Activation("relu"), Dense(5, 2), Activation("tanh")], (6,), 4),
    ([Conv2D(1, 3, 3, 2), Activation("relu"), Flatten(), Dense(27, 4)], (1, 7, 7), 2),
    ([Conv2D(2, 2, 2, 1), Activation("tanh"), Conv2D(2, 3, 3, 2), Flatten(), Dense(12, 2)], (2, 6, 6), 2),
])
def test_gradients_match_finite_differences(layers, input_shape, batch, rng):
    net = Network(layers, input_shape).initialize(7)
    finite_difference_check(net, rng.normal(size=(batch,) + input_shape), rng)


def test_zero_output_gradient_gives_zero_gradient(rng):
    net = build_mlp(4, (8,), 2, seed=1)
    _, cache = net.forward_with_cache(rng.normal(size=(3, 4)))
    grad, grad_x = net.backward(cache, np.zeros((3, 2)))
    assert not np.any(grad)
    assert not np.any(grad_x)


def test_backward_without_cache_fails():
    with pytest.raises(NetworkShapeError):
        build_mlp(4, (8,), 2).backward(None, np.zeros(2))


def test_shape_errors_name_the_layer():
    with pytest.raises(NetworkShapeError) as excinfo:
        Network([Dense(3, 4), Activation("tanh"), Dense(5, 2)], (3,))
    assert excinfo.value.layer_index == 2

    with pytest.raises(NetworkShapeError) as excinfo:
        build_mlp(4, (8,), 2).forward(np.zeros(5))
    assert excinfo.value.layer_index == 0


def test_parameter_counts():
    assert Dense(24, 128).param_count == 24 * 128 + 128
    assert Conv2D(8, 16, 4, 2).param_count == 16 * 8 * 16 + 16
    net = build_mlp(24, (128, 128), 4)
    assert net.param_count == (24 * 128 + 128) + (128 * 128 + 128) + (128 * 4 + 4)
    assert net.params.dtype == np.float32


def test_encoder_and_decoder_shapes():
    encoder = build_encoder(48, 64, embedding_dim=64)
    decoder = build_decoder(48, 64, embedding_dim=64)
    z = encoder.forward(np.zeros((2, 1, 48, 64)))

    assert encoder.shapes[-3] == (32, 4, 6)
    assert z.shape == (2, 64)
    assert decoder.forward(z).shape == (2, 48 * 64)
    with pytest.raises(NetworkShapeError):
        build_encoder(16, 16)


def test_forward_is_deterministic(rng):
    encoder = build_encoder(24, 24, embedding_dim=16, seed=2)
    x = rng.uniform(size=(3, 1, 24, 24))
    assert np.array_equal(encoder.forward(x), encoder.forward(x))


def test_adam_zero_gradient_keeps_params():
    params = np.array([1.0, -2.0, 3.0])
    new, state = adam_step(params, np.zeros(3), AdamState.zeros(3, learning_rate=0.1))
    assert np.array_equal(new, params)
    assert state.step == 1


def test_adam_first_step_closed_form():
    params = np.array([1.0, -2.0, 3.0])
    g = np.array([0.5, -4.0, 1e-3])
    new, _ = adam_step(params, g, AdamState.zeros(3, learning_rate=0.01))
    np.testing.assert_allclose(new, params - 0.01 * g / (np.abs(g) + 1e-8))


def test_adam_constant_gradient_step_size():
    params = np.zeros(2)
    state = AdamState.zeros(2, learning_rate=1e-3)
    g = np.array([3.0, -0.2])
    for _ in range(2000):
        previous = params
        params, state = adam_step(params, g, state)
    np.testing.assert_allclose(params - previous, -1e-3 * np.sign(g), rtol=1e-6)


def test_adam_rejects_misaligned_arrays():
    with pytest.raises(NetworkShapeError):
        adam_step(np.zeros(3), np.zeros(2), AdamState.zeros(3))


def test_global_norm_clip_and_mse():
    grads, norm = global_norm_clip(np.array([3.0, 4.0]), 1.0)
    assert norm == pytest.approx(5.0)
    np.testing.assert_allclose(grads, [0.6, 0.8])

    loss, grad = mse_loss(np.array([1.0, 3.0]), np.array([0.0, 1.0]))
    assert loss == pytest.approx(2.5)
    np.testing.assert_allclose(grad, [1.0, 2.0])


def test_checkpoint_bytes_are_stable():
    net = build_encoder(24, 24, embedding_dim=8, seed=5)
    net.metadata["role"] = "encoder"
    blob = save_checkpoint(net)
    loaded = load_checkpoint(blob)

    assert save_checkpoint(loaded) == blob
    assert parameter_checksum(loaded) == parameter_checksum(net)
    assert loaded.metadata["role"] == "encoder"


def test_checkpoint_corruption_is_rejected(tmp_path):
    blob = save_checkpoint(build_mlp(4, (8,), 2))

    with pytest.raises(CheckpointError):
        load_checkpoint(blob[:-3])
    with pytest.raises(CheckpointError):
        load_checkpoint(b"NOTACKPT" + blob[8:])
    with pytest.raises(CheckpointError):
        load_checkpoint(blob[:8] + (99).to_bytes(4, "little") + blob[12:])
    with pytest.raises(CheckpointError):
        read_checkpoint(tmp_path / "missing.ckpt")


def test_checkpoint_reproduces_forward_in_another_process(tmp_path, rng):
    net = build_mlp(6, (16, 16), 4, squash=True, seed=9)
    x = rng.normal(size=(5, 6)).astype(np.float32)
    np.save(tmp_path / "x.npy", x)
    write_checkpoint(net, tmp_path / "net.ckpt")

    script = textwrap.dedent(f"""
        import numpy as np
        from src.nn import read_checkpoint
        net = read_checkpoint({str(tmp_path / 'net.ckpt')!r})
        np.save({str(tmp_path / 'y.npy')!r}, net.forward(np.load({str(tmp_path / 'x.npy')!r})))
    """)
    subprocess.run([sys.executable, "-c", script], cwd=REPO_ROOT, env=dict(os.environ), check=True)

    assert np.array_equal(np.load(tmp_path / "y.npy"), net.forward(x))
