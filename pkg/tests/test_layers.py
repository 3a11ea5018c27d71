"""Layer catalog tests.

The convolution oracles below are deliberately written as direct nested loops,
independent of the im2col path under test. Expected values for the fixed-seed
cases were computed from these oracles and frozen.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from feverscreen.numcore import (
    Conv2d,
    ConvTranspose2d,
    InstanceNorm2d,
    LeakyReLU,
    ReLU,
    Sequential,
    Tanh,
    grad_check,
)

rng = np.random.default_rng


# ---------------------------------------------------------------------------
# oracles: direct-loop convolution and transposed convolution
# ---------------------------------------------------------------------------

def conv2d_loops(x, w, b, stride, pad):
    n, c, h, wd = x.shape
    oc, ic, kh, kw = w.shape
    assert c == ic
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    y = np.zeros((n, oc, oh, ow))
    for ni in range(n):
        for oci in range(oc):
            for i in range(oh):
                for j in range(ow):
                    acc = b[oci]
                    for ci in range(ic):
                        for a in range(kh):
                            for bb in range(kw):
                                acc += xp[ni, ci, i * stride + a, j * stride + bb] \
                                    * w[oci, ci, a, bb]
                    y[ni, oci, i, j] = acc
    return y


def tconv2d_loops(x, w, b, stride, pad, out_pad):
    n, ic_in, h, wd = x.shape
    oc, ic, kh, kw = w.shape
    assert ic_in == ic
    oh = (h - 1) * stride - 2 * pad + kh + out_pad
    ow = (wd - 1) * stride - 2 * pad + kw + out_pad
    # scatter into a padded canvas, then trim the padding border
    canvas = np.zeros((n, oc, oh + 2 * pad, ow + 2 * pad))
    for ni in range(n):
        for ci in range(ic):
            for u in range(h):
                for v in range(wd):
                    for oci in range(oc):
                        for a in range(kh):
                            for bb in range(kw):
                                canvas[ni, oci, u * stride + a, v * stride + bb] += \
                                    x[ni, ci, u, v] * w[oci, ci, a, bb]
    y = canvas[:, :, pad:pad + oh, pad:pad + ow]
    return y + b.reshape(1, -1, 1, 1)


# ---------------------------------------------------------------------------
# forward agreement with the oracles
# ---------------------------------------------------------------------------

class TestConvForward:
    @pytest.mark.parametrize("stride,pad,ksize", [(1, 0, 1), (1, 1, 3), (2, 1, 3),
                                                  (1, 3, 7), (2, 1, 4)])
    def test_matches_loop_oracle(self, stride, pad, ksize):
        r = rng(7)
        x = r.normal(size=(2, 3, 9, 8))
        layer = Conv2d(3, 4, ksize, stride, pad, rng=r)
        want = conv2d_loops(x, layer.w, layer.b, stride, pad)
        got = layer.forward(x)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)

    def test_known_3x3_values(self):
        # single channel, 3x3 kernel of ones over a ramp: plain window sums
        x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
        layer = Conv2d(1, 1, 3, 1, 0)
        layer.w = np.ones((1, 1, 3, 3))
        layer.b = np.zeros(1)
        got = layer.forward(x)
        want = np.array([[[[45.0, 54.0], [81.0, 90.0]]]])
        np.testing.assert_array_equal(got, want)

    def test_channel_mismatch_rejected(self):
        layer = Conv2d(3, 4, 3, 1, 1, rng=rng(0))
        with pytest.raises(ValueError, match="channels"):
            layer.forward(np.zeros((1, 2, 8, 8)))

    def test_kernel_larger_than_input_rejected(self):
        layer = Conv2d(1, 1, 5, 1, 0, rng=rng(0))
        with pytest.raises(ValueError, match="does not fit"):
            layer.forward(np.zeros((1, 1, 3, 3)))


class TestTransposeConvForward:
    @pytest.mark.parametrize("stride,pad,ksize,out_pad", [(1, 0, 3, 0), (2, 1, 3, 1),
                                                          (2, 1, 4, 0), (1, 1, 3, 0)])
    def test_matches_loop_oracle(self, stride, pad, ksize, out_pad):
        r = rng(11)
        x = r.normal(size=(2, 3, 5, 6))
        layer = ConvTranspose2d(3, 2, ksize, stride, pad, out_pad, rng=r)
        want = tconv2d_loops(x, layer.w, layer.b, stride, pad, out_pad)
        got = layer.forward(x)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)

    @given(h=st.integers(4, 12), w=st.integers(4, 12), k=st.integers(1, 4),
           s=st.integers(1, 3), p=st.integers(0, 2))
    @settings(max_examples=40, deadline=None)
    def test_inverts_conv_shape(self, h, w, k, s, p):
        """Shape law: a transpose-conv with matching geometry undoes a conv's
        spatial reduction when out_pad soaks up the flooring remainder."""
        if h + 2 * p < k or w + 2 * p < k:
            return
        rem_h = (h + 2 * p - k) % s
        if rem_h >= s or rem_h != (w + 2 * p - k) % s:
            return
        conv = Conv2d(1, 1, k, s, p, rng=rng(0))
        tconv = ConvTranspose2d(1, 1, k, s, p, rem_h, rng=rng(0))
        y = conv.forward(np.zeros((1, 1, h, w)))
        z = tconv.forward(y)
        assert z.shape == (1, 1, h, w)


# ---------------------------------------------------------------------------
# instance norm
# ---------------------------------------------------------------------------

class TestInstanceNorm:
    def test_normalizes_each_plane(self):
        r = rng(3)
        x = r.normal(loc=5.0, scale=3.0, size=(2, 4, 6, 6))
        layer = InstanceNorm2d(4)
        y = layer.forward(x)
        means = y.mean(axis=(2, 3))
        stds = y.std(axis=(2, 3))
        np.testing.assert_allclose(means, 0.0, atol=1e-12)
        np.testing.assert_allclose(stds, 1.0, atol=1e-3)  # eps shifts std slightly

    def test_affine_params_applied(self):
        x = rng(4).normal(size=(1, 2, 5, 5))
        layer = InstanceNorm2d(2)
        layer.gain = np.array([2.0, 0.5])
        layer.shift = np.array([1.0, -1.0])
        y = layer.forward(x)
        np.testing.assert_allclose(y.mean(axis=(2, 3)), [[1.0, -1.0]], atol=1e-12)

    def test_constant_plane_maps_to_shift(self):
        # zero variance: eps keeps the division finite and x_hat collapses to 0
        x = np.full((1, 1, 4, 4), 7.5)
        layer = InstanceNorm2d(1)
        y = layer.forward(x)
        np.testing.assert_allclose(y, 0.0, atol=1e-12)


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

class TestActivations:
    def test_relu(self):
        x = np.array([[-2.0, -0.5, 0.0, 0.5, 2.0]]).reshape(1, 1, 1, 5)
        np.testing.assert_array_equal(
            ReLU().forward(x).ravel(), [0.0, 0.0, 0.0, 0.5, 2.0])

    def test_leaky_relu_slope(self):
        x = np.array([-10.0, -1.0, 2.0]).reshape(1, 1, 1, 3)
        np.testing.assert_allclose(
            LeakyReLU(0.2).forward(x).ravel(), [-2.0, -0.2, 2.0])

    def test_tanh_range(self):
        x = rng(5).normal(scale=10, size=(1, 1, 8, 8))
        y = Tanh().forward(x)
        assert np.all(np.abs(y) <= 1.0)


# ---------------------------------------------------------------------------
# backward passes against central finite differences
# ---------------------------------------------------------------------------

# The probe objective is kept small on purpose: composites contain exactly-zero
# gradient directions (a conv bias feeding an instance norm), where the FD
# quotient is pure roundoff noise ~ eps*|loss|/step measured against the 1e-8
# denominator guard. A small |loss| keeps that noise below tolerance without
# changing the relative error of genuinely nonzero gradients.

def _fd_layer_params(layer, x, seed=0):
    """Max relative FD error over the layer's own parameters."""
    gout_rng = rng(seed)
    gout = None

    def loss():
        nonlocal gout
        y, cache = layer.forward_cached(x)
        if gout is None:
            gout = gout_rng.normal(size=y.shape) / (100.0 * y.size)
        _, pgrads = layer.backward(cache, gout)
        return float((y * gout).sum()), pgrads

    return grad_check(loss, layer.params(), step=1e-5)


def _fd_layer_input(layer, x, seed=0):
    """Max relative FD error with respect to the layer input."""
    gout_rng = rng(seed)
    gout = None

    def loss():
        nonlocal gout
        y, cache = layer.forward_cached(x)
        if gout is None:
            gout = gout_rng.normal(size=y.shape) / (100.0 * y.size)
        gx, _ = layer.backward(cache, gout)
        return float((y * gout).sum()), [gx]

    return grad_check(loss, [x], step=1e-5)


class TestBackward:
    def test_conv_params_and_input(self):
        x = rng(21).normal(size=(1, 3, 8, 8))
        layer = Conv2d(3, 4, 3, 2, 1, rng=rng(22))
        assert _fd_layer_params(layer, x) < 1e-4
        assert _fd_layer_input(layer, x) < 1e-4

    def test_tconv_params_and_input(self):
        x = rng(23).normal(size=(1, 4, 5, 5))
        layer = ConvTranspose2d(4, 3, 3, 2, 1, 1, rng=rng(24))
        assert _fd_layer_params(layer, x) < 1e-4
        assert _fd_layer_input(layer, x) < 1e-4

    def test_instance_norm_params_and_input(self):
        x = rng(25).normal(size=(1, 4, 6, 6))
        layer = InstanceNorm2d(4)
        layer.gain = rng(26).normal(1.0, 0.1, size=4)
        layer.shift = rng(27).normal(0.0, 0.1, size=4)
        assert _fd_layer_params(layer, x) < 1e-4
        assert _fd_layer_input(layer, x) < 1e-4

    @pytest.mark.parametrize("layer", [ReLU(), LeakyReLU(0.2), Tanh()])
    def test_activations_input(self, layer):
        # keep samples away from the ReLU kink so the FD quotient is valid
        x = rng(28).normal(size=(1, 2, 6, 6))
        x[np.abs(x) < 1e-3] = 0.1
        assert _fd_layer_input(layer, x) < 1e-4

    def test_sequential_chain(self):
        r = rng(29)
        x = r.normal(size=(1, 2, 8, 8))
        net = Sequential([
            Conv2d(2, 4, 3, 1, 1, rng=r, name="c0"),
            InstanceNorm2d(4, name="n0"),
            ReLU(),
            Conv2d(4, 2, 3, 2, 1, rng=r, name="c1"),
            Tanh(),
        ])
        assert _fd_layer_params(net, x) < 1e-4
        assert _fd_layer_input(net, x) < 1e-4


class TestSequentialPlumbing:
    def test_param_ordering_stable(self):
        r = rng(31)
        net = Sequential([Conv2d(1, 2, 3, rng=r, name="a"), InstanceNorm2d(2, name="b")])
        names = net.param_names()
        assert names == ["seq.0.w", "seq.0.b", "seq.1.gain", "seq.1.shift"]
        assert len(net.params()) == 4

    def test_set_params_roundtrip(self):
        r = rng(32)
        net = Sequential([Conv2d(1, 2, 3, rng=r), ReLU(), Conv2d(2, 1, 3, rng=r)])
        fresh = [p + 1.0 for p in net.params()]
        net.set_params(fresh)
        for got, want in zip(net.params(), fresh):
            assert got is want

    def test_set_params_length_checked(self):
        net = Sequential([Conv2d(1, 2, 3, rng=rng(0))])
        with pytest.raises(ValueError, match="expected 2 arrays"):
            net.set_params([np.zeros((2, 1, 3, 3))])
