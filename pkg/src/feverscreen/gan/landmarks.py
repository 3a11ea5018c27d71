"""Differentiable template-correlation landmark detector.

Each landmark has a fixed small template. Detection per landmark:

1. correlate the gray tile with the zero-mean template (same-size output);
2. presence score = peak normalized cross-correlation (template and window
   both mean-centered) — compared against ``presence_threshold``;
3. location = soft-argmax over a template-sized window around the
   correlation peak, with sharpness ``beta``.

The soft-argmax makes locations differentiable with respect to the tile, so
a landmark-matching loss can push gradients into an upstream generator:
``backward_points`` maps point gradients back to a tile gradient. Presence
is a hard gate and carries no gradient. Templates are fixed data, never
trained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numcore.layers import _conv_core, _conv_input_grad


@dataclass
class DetectResult:
    points: np.ndarray        # (k, 2) float (x, y) tile coordinates
    scores: np.ndarray        # (k,) peak NCC per landmark
    found: bool               # all scores >= presence threshold


def _correlate_same(gray: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    k = kernel.shape[0]
    x = gray[None, None, :, :]
    w = kernel[None, None, :, :]
    y, _ = _conv_core(x, w, stride=1, pad=k // 2)
    return y[0, 0]


class TemplateLandmarkDetector:
    def __init__(self, templates, beta: float = 20.0,
                 presence_threshold: float = 0.55,
                 gray_weights=(0.5, 0.3, 0.2),
                 search_centers=None, search_radius: float | None = None,
                 min_window_std: float = 0.05):
        """``search_centers`` (k, 2) with ``search_radius`` restricts each
        landmark's peak search to a square window around its expected tile
        position. Meant for layout-normalized crops, where it stops a
        template from latching onto a lookalike pattern elsewhere on the
        face; by default the whole tile is searched. ``min_window_std`` is
        the contrast floor of the match score normalizer (unit-scale pixels);
        windows flatter than this cannot score well."""
        if not templates:
            raise ValueError("need at least one template")
        if (search_centers is None) != (search_radius is None):
            raise ValueError("search_centers and search_radius go together")
        self.raw_templates = []   # as given; what checkpoints persist
        self.templates = []       # zero-mean working copies
        self.tnorms = []
        for t in templates:
            t = np.asarray(t, dtype=np.float64)
            if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] % 2 == 0:
                raise ValueError(f"templates must be odd square 2-D, got {t.shape}")
            zm = t - t.mean()
            self.raw_templates.append(t.copy())
            self.templates.append(zm)
            self.tnorms.append(float(np.linalg.norm(zm)) + 1e-12)
        self.beta = float(beta)
        self.presence_threshold = float(presence_threshold)
        self.gray_weights = np.asarray(gray_weights, dtype=np.float64)
        self.min_window_std = float(min_window_std)
        if self.min_window_std < 0.0:
            raise ValueError("min_window_std must be non-negative")
        if search_centers is None:
            self.search_centers = None
            self.search_radius = None
        else:
            sc = np.asarray(search_centers, dtype=np.float64)
            if sc.shape != (len(self.templates), 2):
                raise ValueError(f"need one (x, y) center per template, "
                                 f"got {sc.shape}")
            self.search_centers = sc
            self.search_radius = float(search_radius)
            if self.search_radius <= 0.0:
                raise ValueError("search_radius must be positive")

    @property
    def k(self) -> int:
        return len(self.templates)

    def _gray(self, tile: np.ndarray) -> np.ndarray:
        tile = np.asarray(tile, dtype=np.float64)
        if tile.ndim != 3 or tile.shape[0] != self.gray_weights.size:
            raise ValueError(f"expected ({self.gray_weights.size}, h, w) tile, "
                             f"got {tile.shape}")
        return np.tensordot(self.gray_weights, tile, axes=([0], [0]))

    def _ncc_map(self, gray, corr, tmpl, tnorm) -> np.ndarray:
        kh, kw = tmpl.shape
        n = kh * kw
        ones = np.ones((kh, kw))
        s1 = _correlate_same(gray, ones)
        s2 = _correlate_same(gray * gray, ones)
        # floor the window contrast: in a near-flat window the true variance
        # is roundoff, and dividing by it turns numerical noise into
        # arbitrary match scores
        var = np.clip(s2 - s1 * s1 / n, n * self.min_window_std ** 2, None)
        return corr / (tnorm * np.sqrt(var))

    def detect_cached(self, tile: np.ndarray):
        gray = self._gray(tile)
        h, w = gray.shape
        points = np.empty((self.k, 2))
        scores = np.empty(self.k)
        caches = []
        for j, (tmpl, tnorm) in enumerate(zip(self.templates, self.tnorms)):
            if h < tmpl.shape[0] or w < tmpl.shape[1]:
                raise ValueError(f"tile {gray.shape} smaller than template "
                                 f"{tmpl.shape}")
            corr = _correlate_same(gray, tmpl) / tnorm
            # contrast-normalized map picks the peak (pattern match quality,
            # not raw response, which high-contrast edges would dominate)
            ncc = self._ncc_map(gray, corr * tnorm, tmpl, tnorm)
            hh, hw = tmpl.shape[0] // 2, tmpl.shape[1] // 2
            # peak search only where the window fits: outside, the running
            # sums see zero padding, which manufactures contrast and
            # correlation on tiles whose background sits far from zero
            ylo, yhi, xlo, xhi = hh, h - hh, hw, w - hw
            if self.search_centers is not None:
                cx, cy = self.search_centers[j]
                r = self.search_radius
                ylo = max(ylo, int(np.ceil(cy - r)))
                yhi = min(yhi, int(np.floor(cy + r)) + 1)
                xlo = max(xlo, int(np.ceil(cx - r)))
                xhi = min(xhi, int(np.floor(cx + r)) + 1)
                if ylo >= yhi or xlo >= xhi:
                    raise ValueError(f"empty search window for template {j} "
                                     f"on a {h}x{w} tile")
            inner = ncc[ylo:yhi, xlo:xhi]
            scores[j] = float(inner.max())
            py, px = np.unravel_index(int(np.argmax(inner)), inner.shape)
            py, px = py + ylo, px + xlo
            # the refinement window obeys the same support rule: corr values
            # at unsupported positions carry padding artifacts and would
            # drag the soft-argmax off the peak
            ys = slice(max(py - hh, hh), min(py + hh + 1, h - hh))
            xs = slice(max(px - hw, hw), min(px + hw + 1, w - hw))
            win = corr[ys, xs]
            c = self.beta * win
            p = np.exp(c - c.max())
            p /= p.sum()
            yy, xx = np.mgrid[ys, xs]
            points[j] = (float(np.sum(p * xx)), float(np.sum(p * yy)))
            caches.append((tmpl, tnorm, ys, xs, p, xx, yy, points[j].copy()))
        found = bool(np.all(scores >= self.presence_threshold))
        return DetectResult(points, scores, found), (tile.shape, caches)

    def detect(self, tile: np.ndarray) -> DetectResult:
        result, _ = self.detect_cached(tile)
        return result

    def backward_points(self, cache, grad_points: np.ndarray) -> np.ndarray:
        """Map d(loss)/d(points) -> d(loss)/d(tile), shape like the tile."""
        tile_shape, caches = cache
        _, h, w = tile_shape
        grad_gray = np.zeros((h, w))
        for j, (tmpl, tnorm, ys, xs, p, xx, yy, pt) in enumerate(caches):
            gx, gy = grad_points[j]
            if gx == 0.0 and gy == 0.0:
                continue
            # soft-argmax jacobian: d(point)/d(corr_win) = beta * p * (coord - point)
            gc = self.beta * p * (gx * (xx - pt[0]) + gy * (yy - pt[1]))
            gcorr = np.zeros((h, w))
            gcorr[ys, xs] = gc / tnorm
            k = tmpl.shape[0]
            ggray = _conv_input_grad(gcorr[None, None], tmpl[None, None],
                                     (1, 1, h, w), stride=1, pad=k // 2)[0, 0]
            grad_gray += ggray
        return self.gray_weights[:, None, None] * grad_gray[None, :, :]
