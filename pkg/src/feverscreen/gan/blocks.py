"""Bottleneck residual block with two skip connections.

The block is three pre-activated convolutional chains::

    g: norm -> relu -> 1x1 conv, C -> C_b      (squeeze)
    f: norm -> relu -> 3x3 conv -> norm -> relu -> 3x3 conv, C_b -> C_b
    h: norm -> relu -> 1x1 conv, C_b -> C      (expand)

composed with an inner skip around ``f`` and an outer skip around the whole
block::

    y = h(f(g(x)) + g(x)) + x

Zeroing ``h``'s conv makes the block the exact identity; zeroing ``f``'s
convs leaves ``y = h(g(x)) + x``.
"""

from __future__ import annotations

import numpy as np

from ..numcore import layers as L


class DualSkipBottleneck:
    """Layer-protocol composite implementing the dual-skip bottleneck."""

    def __init__(self, channels: int, bottleneck: int | None = None,
                 rng: np.random.Generator | None = None):
        if channels < 1:
            raise ValueError(f"channels must be >= 1, got {channels}")
        if bottleneck is None:
            bottleneck = max(channels // 4, 1)
        self.channels = channels
        self.bottleneck = bottleneck
        self.g = L.Sequential([
            L.InstanceNorm2d(channels),
            L.ReLU(),
            L.Conv2d(channels, bottleneck, 1, rng=rng),
        ], name="g")
        self.f = L.Sequential([
            L.InstanceNorm2d(bottleneck),
            L.ReLU(),
            L.Conv2d(bottleneck, bottleneck, 3, pad=1, rng=rng),
            L.InstanceNorm2d(bottleneck),
            L.ReLU(),
            L.Conv2d(bottleneck, bottleneck, 3, pad=1, rng=rng),
        ], name="f")
        self.h = L.Sequential([
            L.InstanceNorm2d(bottleneck),
            L.ReLU(),
            L.Conv2d(bottleneck, channels, 1, rng=rng),
        ], name="h")

    def _chains(self):
        return (("g", self.g), ("f", self.f), ("h", self.h))

    def params(self):
        out = []
        for _, chain in self._chains():
            out.extend(chain.params())
        return out

    def param_names(self):
        # Leading "brb" is the token an enclosing Sequential strips; the
        # chain tag after it keeps g/f/h parameters distinct there.
        out = []
        for _, chain in self._chains():
            out.extend(f"brb.{n}" for n in chain.param_names())
        return out

    def set_params(self, values):
        values = list(values)
        if len(values) != len(self.params()):
            raise ValueError("parameter count mismatch")
        i = 0
        for _, chain in self._chains():
            k = len(chain.params())
            chain.set_params(values[i:i + k])
            i += k

    def forward(self, x):
        L.check_tensor4(x, "dual-skip bottleneck input")
        if x.shape[1] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {x.shape[1]}")
        w = self.g.forward(x)
        z = self.f.forward(w) + w
        return self.h.forward(z) + x

    def forward_cached(self, x):
        L.check_tensor4(x, "dual-skip bottleneck input")
        if x.shape[1] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {x.shape[1]}")
        w, cg = self.g.forward_cached(x)
        u, cf = self.f.forward_cached(w)
        z = u + w
        v, ch = self.h.forward_cached(z)
        return v + x, (cg, cf, ch)

    def backward(self, cache, grad_out):
        cg, cf, ch = cache
        gz, ph = self.h.backward(ch, grad_out)
        gw_f, pf = self.f.backward(cf, gz)
        gw = gz + gw_f  # inner skip joins f's input gradient
        gx_g, pg = self.g.backward(cg, gw)
        grad_in = grad_out + gx_g  # outer skip
        return grad_in, pg + pf + ph
