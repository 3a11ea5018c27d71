"""Layer catalog with explicit forward and backward passes.

Six layer kinds cover every network in the package: convolution, transposed
convolution, instance normalization, ReLU, leaky ReLU, and tanh. Convolutions
run as im2col + GEMM; the transposed convolution is implemented through the
exact adjoint relationship with the forward convolution, so the two share the
same column primitives and their gradients agree by construction.

Layers are stateless with respect to activations: ``forward`` is pure, and
``backward`` receives the cache that ``forward_cached`` returned. Parameters
live on the layer object and are updated in place by the training loop.
"""

from __future__ import annotations

import numpy as np

from .tensor import check_tensor4

NORM_EPS = 1e-5
LEAKY_SLOPE = 0.2
INIT_STD = 0.02


# ---------------------------------------------------------------------------
# column primitives
# ---------------------------------------------------------------------------

def conv_output_hw(h: int, w: int, kh: int, kw: int, stride: int, pad: int) -> tuple[int, int]:
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ValueError(
            f"kernel {kh}x{kw} stride {stride} pad {pad} does not fit input {h}x{w}"
        )
    return oh, ow


def im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int) -> tuple[np.ndarray, int, int]:
    """Unfold (n, c, h, w) into (n, c*kh*kw, oh*ow) patch columns."""
    n, c, h, w = x.shape
    oh, ow = conv_output_hw(h, w, kh, kw, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]  # (n, c, oh, ow, kh, kw)
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * kh * kw, oh * ow)
    return np.ascontiguousarray(cols), oh, ow


def col2im(cols: np.ndarray, x_shape: tuple[int, int, int, int],
           kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    """Adjoint of im2col: scatter-add columns back onto the input grid."""
    n, c, h, w = x_shape
    oh, ow = conv_output_hw(h, w, kh, kw, stride, pad)
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=np.float64)
    cols6 = cols.reshape(n, c, kh, kw, oh, ow)
    for a in range(kh):
        for b in range(kw):
            xp[:, :, a:a + stride * oh:stride, b:b + stride * ow:stride] += cols6[:, :, a, b]
    if pad:
        return xp[:, :, pad:pad + h, pad:pad + w]
    return xp


def _conv_core(x, weight, stride, pad):
    oc = weight.shape[0]
    kh, kw = weight.shape[2], weight.shape[3]
    cols, oh, ow = im2col(x, kh, kw, stride, pad)
    y = np.matmul(weight.reshape(oc, -1), cols)  # (n, oc, oh*ow)
    return y.reshape(x.shape[0], oc, oh, ow), cols


def _conv_input_grad(grad_y, weight, x_shape, stride, pad):
    n, oc = grad_y.shape[0], grad_y.shape[1]
    kh, kw = weight.shape[2], weight.shape[3]
    gy = grad_y.reshape(n, oc, -1)
    gcols = np.matmul(weight.reshape(oc, -1).T, gy)
    return col2im(gcols, x_shape, kh, kw, stride, pad)


def _conv_weight_grad(cols, grad_y, weight_shape):
    n, oc = grad_y.shape[0], grad_y.shape[1]
    gy = grad_y.reshape(n, oc, -1)
    gw = np.matmul(gy, cols.transpose(0, 2, 1)).sum(axis=0)
    return gw.reshape(weight_shape)


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------

class Layer:
    """Protocol shared by all layers (and layer composites)."""

    name = "layer"

    def params(self) -> list[np.ndarray]:
        return []

    def param_names(self) -> list[str]:
        return []

    def set_params(self, arrays: list[np.ndarray]) -> None:
        if arrays:
            raise ValueError(f"{self.name}: layer has no parameters")

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_cached(x)
        return y

    def forward_cached(self, x: np.ndarray):
        raise NotImplementedError

    def backward(self, cache, grad_out: np.ndarray):
        """Return (grad_input, param_grads) for the cached forward call."""
        raise NotImplementedError


class Conv2d(Layer):
    """2-D convolution (cross-correlation), weight (out_c, in_c, kh, kw)."""

    kind = "conv"

    def __init__(self, in_ch: int, out_ch: int, ksize: int, stride: int = 1,
                 pad: int = 0, rng: np.random.Generator | None = None, name: str = "conv"):
        if in_ch < 1 or out_ch < 1 or ksize < 1 or stride < 1 or pad < 0:
            raise ValueError(f"{name}: bad conv geometry "
                             f"(in={in_ch}, out={out_ch}, k={ksize}, s={stride}, p={pad})")
        self.in_ch, self.out_ch = in_ch, out_ch
        self.ksize, self.stride, self.pad = ksize, stride, pad
        self.name = name
        if rng is None:
            self.w = np.zeros((out_ch, in_ch, ksize, ksize), dtype=np.float64)
        else:
            self.w = rng.normal(0.0, INIT_STD, size=(out_ch, in_ch, ksize, ksize))
        self.b = np.zeros(out_ch, dtype=np.float64)

    def params(self):
        return [self.w, self.b]

    def param_names(self):
        return [f"{self.name}.w", f"{self.name}.b"]

    def set_params(self, arrays):
        w, b = arrays
        if w.shape != self.w.shape or b.shape != self.b.shape:
            raise ValueError(f"{self.name}: parameter shape mismatch "
                             f"{w.shape}/{b.shape} vs {self.w.shape}/{self.b.shape}")
        self.w, self.b = w, b

    def _check_input(self, x):
        check_tensor4(x, self.name)
        if x.shape[1] != self.in_ch:
            raise ValueError(f"{self.name}: expected {self.in_ch} input channels, "
                             f"got {x.shape[1]} (input shape {x.shape})")

    def forward_cached(self, x):
        self._check_input(x)
        y, cols = _conv_core(x, self.w, self.stride, self.pad)
        y += self.b.reshape(1, -1, 1, 1)
        return y, (x.shape, cols)

    def backward(self, cache, grad_out):
        x_shape, cols = cache
        gw = _conv_weight_grad(cols, grad_out, self.w.shape)
        gb = grad_out.sum(axis=(0, 2, 3))
        gx = _conv_input_grad(grad_out, self.w, x_shape, self.stride, self.pad)
        return gx, [gw, gb]


class ConvTranspose2d(Layer):
    """Transposed convolution; exact adjoint of Conv2d with the same geometry.

    Weight layout matches Conv2d, (out_c, in_c, kh, kw). For stride s, pad p
    and kernel k the output size is (h-1)*s - 2p + k + out_pad.
    """

    kind = "transpose-conv"

    def __init__(self, in_ch: int, out_ch: int, ksize: int, stride: int = 1,
                 pad: int = 0, out_pad: int = 0,
                 rng: np.random.Generator | None = None, name: str = "tconv"):
        if out_pad < 0 or out_pad >= stride:
            raise ValueError(f"{name}: out_pad must lie in [0, stride), got {out_pad}")
        self.in_ch, self.out_ch = in_ch, out_ch
        self.ksize, self.stride, self.pad, self.out_pad = ksize, stride, pad, out_pad
        self.name = name
        if rng is None:
            self.w = np.zeros((out_ch, in_ch, ksize, ksize), dtype=np.float64)
        else:
            self.w = rng.normal(0.0, INIT_STD, size=(out_ch, in_ch, ksize, ksize))
        self.b = np.zeros(out_ch, dtype=np.float64)

    def params(self):
        return [self.w, self.b]

    def param_names(self):
        return [f"{self.name}.w", f"{self.name}.b"]

    def set_params(self, arrays):
        w, b = arrays
        if w.shape != self.w.shape or b.shape != self.b.shape:
            raise ValueError(f"{self.name}: parameter shape mismatch")
        self.w, self.b = w, b

    def output_hw(self, h: int, w: int) -> tuple[int, int]:
        oh = (h - 1) * self.stride - 2 * self.pad + self.ksize + self.out_pad
        ow = (w - 1) * self.stride - 2 * self.pad + self.ksize + self.out_pad
        if oh < 1 or ow < 1:
            raise ValueError(f"{self.name}: degenerate output {oh}x{ow}")
        return oh, ow

    def _equiv_weight(self):
        # The forward map is the input-gradient of a Conv2d whose weight has
        # the in/out axes swapped; sharing that identity keeps both passes
        # consistent to machine precision.
        return self.w.swapaxes(0, 1)

    def forward_cached(self, x):
        check_tensor4(x, self.name)
        if x.shape[1] != self.in_ch:
            raise ValueError(f"{self.name}: expected {self.in_ch} input channels, "
                             f"got {x.shape[1]}")
        n = x.shape[0]
        oh, ow = self.output_hw(x.shape[2], x.shape[3])
        y_shape = (n, self.out_ch, oh, ow)
        y = _conv_input_grad(x, self._equiv_weight(), y_shape, self.stride, self.pad)
        y += self.b.reshape(1, -1, 1, 1)
        return y, (x, y_shape)

    def backward(self, cache, grad_out):
        x, y_shape = cache
        if grad_out.shape != y_shape:
            raise ValueError(f"{self.name}: grad shape {grad_out.shape} != output {y_shape}")
        gx, cols_gy = _conv_core(grad_out, self._equiv_weight(), self.stride, self.pad)
        gw_equiv = _conv_weight_grad(cols_gy, x, self._equiv_weight().shape)
        gb = grad_out.sum(axis=(0, 2, 3))
        return gx, [gw_equiv.swapaxes(0, 1), gb]


class InstanceNorm2d(Layer):
    """Per-sample, per-channel spatial normalization with affine gain/shift."""

    kind = "instance-norm"

    def __init__(self, channels: int, eps: float = NORM_EPS, name: str = "inorm"):
        self.channels = channels
        self.eps = eps
        self.name = name
        self.gain = np.ones(channels, dtype=np.float64)
        self.shift = np.zeros(channels, dtype=np.float64)

    def params(self):
        return [self.gain, self.shift]

    def param_names(self):
        return [f"{self.name}.gain", f"{self.name}.shift"]

    def set_params(self, arrays):
        g, s = arrays
        if g.shape != self.gain.shape or s.shape != self.shift.shape:
            raise ValueError(f"{self.name}: parameter shape mismatch")
        self.gain, self.shift = g, s

    def forward_cached(self, x):
        check_tensor4(x, self.name)
        if x.shape[1] != self.channels:
            raise ValueError(f"{self.name}: expected {self.channels} channels, got {x.shape[1]}")
        mu = x.mean(axis=(2, 3), keepdims=True)
        var = x.var(axis=(2, 3), keepdims=True)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu) * inv
        y = self.gain.reshape(1, -1, 1, 1) * xhat + self.shift.reshape(1, -1, 1, 1)
        return y, (xhat, inv)

    def backward(self, cache, grad_out):
        xhat, inv = cache
        g = grad_out
        ggain = (g * xhat).sum(axis=(0, 2, 3))
        gshift = g.sum(axis=(0, 2, 3))
        gh = g * self.gain.reshape(1, -1, 1, 1)
        mean_gh = gh.mean(axis=(2, 3), keepdims=True)
        mean_gh_xhat = (gh * xhat).mean(axis=(2, 3), keepdims=True)
        gx = inv * (gh - mean_gh - xhat * mean_gh_xhat)
        return gx, [ggain, gshift]


class ReLU(Layer):
    kind = "relu"
    name = "relu"

    def forward_cached(self, x):
        y = np.maximum(x, 0.0)
        return y, (x > 0.0)

    def backward(self, cache, grad_out):
        return grad_out * cache, []


class LeakyReLU(Layer):
    kind = "leaky-relu"

    def __init__(self, slope: float = LEAKY_SLOPE, name: str = "lrelu"):
        self.slope = slope
        self.name = name

    def forward_cached(self, x):
        mask = x > 0.0
        y = np.where(mask, x, self.slope * x)
        return y, mask

    def backward(self, cache, grad_out):
        return np.where(cache, grad_out, self.slope * grad_out), []


class Tanh(Layer):
    kind = "tanh"
    name = "tanh"

    def forward_cached(self, x):
        y = np.tanh(x)
        return y, y

    def backward(self, cache, grad_out):
        return grad_out * (1.0 - cache * cache), []


class Sequential(Layer):
    """Chain of layers sharing the Layer protocol (composites welcome)."""

    kind = "sequential"

    def __init__(self, layers: list[Layer], name: str = "seq"):
        self.layers = list(layers)
        self.name = name

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def param_names(self):
        out = []
        for i, layer in enumerate(self.layers):
            out.extend(f"{self.name}.{i}.{n.split('.', 1)[-1]}" for n in layer.param_names())
        return out

    def set_params(self, arrays):
        arrays = list(arrays)
        if len(arrays) != len(self.params()):
            raise ValueError(f"{self.name}: expected {len(self.params())} arrays, "
                             f"got {len(arrays)}")
        k = 0
        for layer in self.layers:
            n = len(layer.params())
            layer.set_params(arrays[k:k + n])
            k += n

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def forward_cached(self, x):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward_cached(x)
            caches.append(cache)
        return x, caches

    def backward(self, cache, grad_out):
        grads_rev = []
        g = grad_out
        for layer, c in zip(reversed(self.layers), reversed(cache)):
            g, pg = layer.backward(c, g)
            grads_rev.append(pg)
        grads = []
        for pg in reversed(grads_rev):
            grads.extend(pg)
        return g, grads
