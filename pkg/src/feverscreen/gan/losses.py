"""The four loss terms of the translation objective and their gradients.

Value functions return plain floats. Each gradient companion returns only
the gradients the training loop actually needs — gradients with respect to
generator outputs; the perceptual net and the landmark detector are fixed
and never accumulate parameter gradients here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError, NumericError


@dataclass(frozen=True)
class LossWeights:
    """Weights applied to the cyclical/perceptual/feature terms."""

    cyc: float = 10.0
    per: float = 4.0
    feat: float = 7.0

    def __post_init__(self):
        for name in ("cyc", "per", "feat"):
            v = float(getattr(self, name))
            if not v > 0.0:
                raise ConfigError(f"loss weight {name} must be > 0, got {v}")


def _scores(arr, name: str) -> np.ndarray:
    a = np.asarray(arr, dtype=np.float64)
    if a.size == 0:
        raise DataError(f"{name} score map is empty")
    return a


def adversarial_loss(real_scores, fake_scores, role: str) -> float:
    """Least-squares adversarial loss over discriminator score maps.

    discriminator: 0.5 * [mean((real - 1)^2) + mean(fake^2)]
    generator:     mean((fake - 1)^2)  (real_scores ignored, may be None)
    """
    fake = _scores(fake_scores, "fake")
    if role == "generator":
        return float(np.mean((fake - 1.0) ** 2))
    if role == "discriminator":
        real = _scores(real_scores, "real")
        return float(0.5 * (np.mean((real - 1.0) ** 2) + np.mean(fake ** 2)))
    raise ConfigError(f"unknown adversarial role {role!r}")


def adversarial_grad(real_scores, fake_scores, role: str):
    """Gradients of ``adversarial_loss`` with respect to the score maps.

    Returns (grad_real, grad_fake); grad_real is None for the generator role.
    """
    fake = _scores(fake_scores, "fake")
    if role == "generator":
        return None, 2.0 * (fake - 1.0) / fake.size
    if role == "discriminator":
        real = _scores(real_scores, "real")
        return (real - 1.0) / real.size, fake / fake.size
    raise ConfigError(f"unknown adversarial role {role!r}")


def _paired(a, b, name: str):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError(f"{name} shapes differ: {a.shape} vs {b.shape}")
    return a, b


def cyclical_loss(x, x_rec, y, y_rec) -> float:
    """Mean absolute reconstruction error, summed over both cycles."""
    x, x_rec = _paired(x, x_rec, "thermal cycle")
    y, y_rec = _paired(y, y_rec, "visual cycle")
    return float(np.mean(np.abs(x_rec - x)) + np.mean(np.abs(y_rec - y)))


def cyclical_grad(x, x_rec, y, y_rec):
    """Gradients with respect to the two reconstructions (subgradient 0 at ties)."""
    x, x_rec = _paired(x, x_rec, "thermal cycle")
    y, y_rec = _paired(y, y_rec, "visual cycle")
    return np.sign(x_rec - x) / x.size, np.sign(y_rec - y) / y.size


def perceptual_loss(phi, real, synth) -> float:
    """Mean squared difference between phi's activations on real and synth."""
    real, synth = _paired(real, synth, "perceptual")
    a = phi.forward(real)
    b = phi.forward(synth)
    return float(np.mean((a - b) ** 2))


def perceptual_grad(phi, real, synth):
    """(loss value, gradient with respect to synth). phi stays fixed."""
    real, synth = _paired(real, synth, "perceptual")
    a = phi.forward(real)
    b, cache = phi.forward_cached(synth)
    diff = b - a
    value = float(np.mean(diff ** 2))
    grad_synth, _ = phi.backward(cache, 2.0 * diff / diff.size)
    return value, grad_synth


@dataclass
class FeatureLossDetail:
    """Feature-preserving loss with the bookkeeping the trainer reports."""

    value: float
    m_ratio: float
    n_pairs: int          # pairs that entered the mean
    n_excluded: int       # pairs dropped for mismatched point counts
    gated: bool           # True when m_ratio >= t_feat forced the value to 0
    grad_synth: np.ndarray | None = None


def _batch4(batch, name: str) -> np.ndarray:
    a = np.asarray(batch, dtype=np.float64)
    if a.ndim != 4:
        raise DataError(f"{name} batch must be (m, c, h, w), got {a.shape}")
    return a


def feature_preserving_detail(real_batch, synth_batch, detector,
                              t_feat: float, with_grad: bool = False
                              ) -> FeatureLossDetail:
    """Landmark-displacement loss over a batch, with gating diagnostics.

    An image whose synthesized version yields no features counts toward
    m_ratio; once m_ratio >= t_feat the loss is exactly zero. A pair whose
    real and synthesized point counts disagree is excluded and counted as
    featureless. A pair whose *real* image yields no features merely drops
    out of the mean — the synthesized image did show features.
    """
    real = _batch4(real_batch, "real")
    synth = _batch4(synth_batch, "synth")
    if real.shape[0] != synth.shape[0]:
        raise DataError(f"batch lengths differ: {real.shape[0]} vs {synth.shape[0]}")
    m = synth.shape[0]
    if m < 1:
        raise DataError("empty batch")
    if not 0.0 < t_feat <= 1.0:
        raise ConfigError(f"t_feat must be in (0, 1], got {t_feat}")

    featureless = 0
    excluded = 0
    pairs = []  # (index, real points, synth points, synth cache)
    for i in range(m):
        if with_grad:
            s_res, s_cache = detector.detect_cached(synth[i])
        else:
            s_res, s_cache = detector.detect(synth[i]), None
        if not s_res.found:
            featureless += 1
            continue
        r_res = detector.detect(real[i])
        if not r_res.found:
            continue
        if np.shape(r_res.points) != np.shape(s_res.points):
            featureless += 1
            excluded += 1
            continue
        pairs.append((i, np.asarray(r_res.points, dtype=np.float64),
                      np.asarray(s_res.points, dtype=np.float64), s_cache))

    m_ratio = featureless / m
    grad = np.zeros_like(synth) if with_grad else None
    if m_ratio >= t_feat or not pairs:
        return FeatureLossDetail(0.0, m_ratio, 0, excluded,
                                 m_ratio >= t_feat, grad)

    total = 0.0
    for i, r_pts, s_pts, s_cache in pairs:
        delta = s_pts - r_pts
        norms = np.linalg.norm(delta, axis=1)
        total += float(norms.sum())
        if with_grad:
            safe = np.where(norms > 0.0, norms, 1.0)
            g_pts = delta / safe[:, None] / len(pairs)
            g_pts[norms == 0.0] = 0.0
            grad[i] = detector.backward_points(s_cache, g_pts)
    return FeatureLossDetail(total / len(pairs), m_ratio, len(pairs),
                             excluded, False, grad)


def feature_preserving_loss(real_batch, synth_batch, detector,
                            t_feat: float) -> float:
    """Scalar form of ``feature_preserving_detail``."""
    return feature_preserving_detail(real_batch, synth_batch, detector,
                                     t_feat).value


def total_objective(l_adv, l_cyc, l_per, l_feat, weights: LossWeights) -> float:
    """Weighted sum of the four components."""
    parts = (float(l_adv), float(l_cyc), float(l_per), float(l_feat))
    if not all(np.isfinite(parts)):
        raise NumericError(f"non-finite loss components {parts}")
    return (parts[0] + weights.cyc * parts[1]
            + weights.per * parts[2] + weights.feat * parts[3])
