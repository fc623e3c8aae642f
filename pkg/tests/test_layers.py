import numpy as np
import pytest

from wavenilm.layers import (Dense, DilatedCausalConv, activation_backward,
                             activation_forward, dropout, dropout_backward,
                             relu, sigmoid, tanh)


def test_activation_fixed_points():
    assert sigmoid(np.array(0.0)) == 0.5
    assert tanh(np.array(0.0)) == 0.0
    assert relu(np.array(-1.0)) == 0.0


def test_activation_ranges(rng):
    x = rng.normal(scale=20.0, size=1000)
    s = activation_forward("sigmoid", x)
    assert np.all((s > 0) & (s < 1))
    t = activation_forward("tanh", x)
    assert np.all((t > -1) & (t < 1))
    assert np.all(activation_forward("relu", x) >= 0)


def test_sigmoid_derivative_at_zero_matches_finite_differences():
    eps = 1e-6
    numeric = (sigmoid(np.array(eps)) - sigmoid(np.array(-eps))) / (2 * eps)
    analytic = activation_backward("sigmoid", np.array(0.0), np.array(1.0))
    assert analytic == pytest.approx(0.25, abs=1e-12)
    assert numeric == pytest.approx(analytic, abs=1e-9)


def test_relu_backward_gates_on_positive_input():
    x = np.array([-2.0, -0.0, 0.5, 3.0])
    upstream = np.array([1.0, 1.0, 1.0, 1.0])
    np.testing.assert_array_equal(
        activation_backward("relu", x, upstream), [0.0, 0.0, 1.0, 1.0])


def test_activation_rejects_unknown_kind_and_nonfinite():
    with pytest.raises(ValueError, match="unknown activation"):
        activation_forward("gelu", np.zeros(3))
    with pytest.raises(ValueError, match="non-finite"):
        activation_forward("tanh", np.array([1.0, np.nan]))


def test_dropout_rate_zero_is_identity(rng):
    x = rng.normal(size=(4, 5))
    out, mask = dropout(x, 0.0, rng, training=True)
    assert mask is None
    np.testing.assert_array_equal(out, x)


def test_dropout_inference_mode_is_identity(rng):
    x = rng.normal(size=(4, 5))
    out, mask = dropout(x, 0.9, rng, training=False)
    assert mask is None
    np.testing.assert_array_equal(out, x)


def test_dropout_zero_fraction_concentrates(rng):
    x = np.ones(1_000_000)
    out, mask = dropout(x, 0.1, rng, training=True)
    zero_fraction = np.mean(out == 0.0)
    assert abs(zero_fraction - 0.1) < 0.002
    # survivors are scaled by 1/(1-rate)
    survivors = out[out != 0.0]
    np.testing.assert_allclose(survivors, 1.0 / 0.9)


def test_dropout_backward_reuses_mask(rng):
    x = rng.normal(size=(50,))
    out, mask = dropout(x, 0.3, rng, training=True)
    upstream = np.ones_like(x)
    grad = dropout_backward(upstream, mask)
    np.testing.assert_array_equal(grad == 0.0, out == 0.0)


def test_dropout_rejects_bad_rate(rng):
    with pytest.raises(ValueError, match="rate"):
        dropout(np.zeros(3), 1.0, rng)
    with pytest.raises(ValueError, match="rate"):
        dropout(np.zeros(3), -0.1, rng)


def test_dense_identity_weights(rng):
    layer = Dense(3, 3, rng)
    layer.weights[...] = np.eye(3)
    layer.bias[...] = 0.0
    x = rng.normal(size=(2, 7, 3))
    np.testing.assert_array_equal(layer.forward(x), x)


def test_dense_is_time_distributed(rng):
    layer = Dense(3, 4, rng)
    x = rng.normal(size=(1, 9, 3))
    base = layer.forward(x)
    bumped = x.copy()
    bumped[0, 4, :] += 1.0
    out = layer.forward(bumped)
    changed = np.any(out != base, axis=2)[0]
    assert changed[4]
    assert not changed[:4].any() and not changed[5:].any()


def test_dense_gradients_match_finite_differences(rng):
    layer = Dense(3, 2, rng)
    x = rng.normal(size=(2, 5, 3))
    upstream = rng.normal(size=(2, 5, 2))
    _, grad_w, grad_b = layer.backward(x, upstream)
    eps = 1e-6
    for idx in ((0, 0), (2, 1)):
        orig = layer.weights[idx]
        layer.weights[idx] = orig + eps
        hi = float((layer.forward(x) * upstream).sum())
        layer.weights[idx] = orig - eps
        lo = float((layer.forward(x) * upstream).sum())
        layer.weights[idx] = orig
        assert grad_w[idx] == pytest.approx((hi - lo) / (2 * eps), rel=1e-6)
    assert grad_b[0] == pytest.approx(upstream[..., 0].sum(), rel=1e-12)


def test_dense_rejects_channel_mismatch(rng):
    layer = Dense(3, 2, rng)
    with pytest.raises(ValueError, match="channels"):
        layer.forward(np.zeros((1, 4, 5)))


def test_conv_receptive_field_accounting(rng):
    conv = DilatedCausalConv(1, 1, filter_length=2, dilation=256, rng=rng)
    assert conv.receptive_field == 257


def test_conv_rejects_bad_shapes_and_nonfinite(rng):
    conv = DilatedCausalConv(2, 3, 2, 1, rng)
    with pytest.raises(ValueError, match="channels"):
        conv.forward(np.zeros((1, 5, 4)))
    with pytest.raises(ValueError, match="non-finite"):
        conv.forward(np.full((1, 5, 2), np.inf))
    with pytest.raises(ValueError, match="gradient shape"):
        conv.backward(np.zeros((1, 5, 2)), np.zeros((1, 5, 7)))


def test_conv_zero_upstream_gives_zero_gradients(rng):
    conv = DilatedCausalConv(2, 2, 2, 2, rng)
    x = rng.normal(size=(2, 6, 2))
    grad_x, grad_w, grad_b = conv.backward(x, np.zeros((2, 6, 2)))
    assert not grad_x.any() and not grad_w.any() and not grad_b.any()


def test_single_tap_conv_weight_grad_is_input_times_upstream(rng):
    # filter_length 1 degenerates to a pointwise channel map
    conv = DilatedCausalConv(1, 1, 1, 1, rng)
    x = rng.normal(size=(1, 8, 1))
    upstream = rng.normal(size=(1, 8, 1))
    _, grad_w, _ = conv.backward(x, upstream)
    assert grad_w[0, 0, 0] == pytest.approx((x * upstream).sum(), rel=1e-12)


def test_conv_backward_matches_finite_differences(rng):
    conv = DilatedCausalConv(2, 2, 2, 3, rng)
    x = rng.normal(size=(1, 8, 2))
    upstream = rng.normal(size=(1, 8, 2))
    grad_x, grad_w, grad_b = conv.backward(x, upstream)
    eps = 1e-5

    orig = conv.weights[1, 0, 1]
    conv.weights[1, 0, 1] = orig + eps
    hi = float((conv.forward(x) * upstream).sum())
    conv.weights[1, 0, 1] = orig - eps
    lo = float((conv.forward(x) * upstream).sum())
    conv.weights[1, 0, 1] = orig
    assert grad_w[1, 0, 1] == pytest.approx((hi - lo) / (2 * eps), rel=1e-6)

    bumped = x.copy()
    bumped[0, 3, 1] += eps
    hi = float((conv.forward(bumped) * upstream).sum())
    bumped[0, 3, 1] -= 2 * eps
    lo = float((conv.forward(bumped) * upstream).sum())
    assert grad_x[0, 3, 1] == pytest.approx((hi - lo) / (2 * eps), rel=1e-6)
