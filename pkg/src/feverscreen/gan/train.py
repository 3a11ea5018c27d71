"""Alternating adversarial training with feature-driven LR decay.

Each step updates the two discriminators on real vs detached synthesized
tiles, then updates both generators on the full weighted objective. The
learning rate halves when the running-mean feature-preserving loss stops
improving; windows in which the feature term was gated off at every step
carry no signal and are skipped rather than counted against patience.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ..dataio import atomic_write_text
from ..errors import ConfigError, DataError, NumericError
from ..numcore.optim import AdamState, adam_step
from .losses import (adversarial_grad, adversarial_loss, cyclical_grad,
                     cyclical_loss, feature_preserving_detail,
                     perceptual_grad, total_objective)
from .networks import TEST_SCALE, ScalePreset, TranslationModel, build_model

HISTORY_COLUMNS = ("iteration", "l_adv_D", "l_adv_G", "l_cyc", "l_per",
                   "l_feat", "mRatio", "lr")


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 500
    batch_size: int = 4
    alpha: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    seed: int = 0
    decay_factor: float = 0.5
    patience: int = 10
    eval_every: int = 25
    lr_floor_div: float = 100.0
    preset: ScalePreset = TEST_SCALE

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.decay_factor < 1.0:
            raise ConfigError(f"decay_factor must be in (0, 1), "
                              f"got {self.decay_factor}")
        if self.alpha <= 0.0 or self.lr_floor_div < 1.0:
            raise ConfigError("alpha must be > 0 and lr_floor_div >= 1")
        if self.patience < 1 or self.eval_every < 1:
            raise ConfigError("patience and eval_every must be >= 1")

    @property
    def lr_floor(self) -> float:
        return self.alpha / self.lr_floor_div


@dataclass
class LossReport:
    iteration: int
    l_adv_D: float
    l_adv_G: float
    l_cyc: float
    l_per: float
    l_feat: float
    m_ratio: float
    lr: float
    gated: bool = False       # feature term forced to zero this step
    n_excluded: int = 0       # pairs dropped for mismatched point counts

    def csv_row(self) -> list:
        return [self.iteration, repr(self.l_adv_D), repr(self.l_adv_G),
                repr(self.l_cyc), repr(self.l_per), repr(self.l_feat),
                repr(self.m_ratio), repr(self.lr)]


def write_history(path: str, reports: list[LossReport]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HISTORY_COLUMNS)
    for rep in reports:
        writer.writerow(rep.csv_row())
    atomic_write_text(path, buf.getvalue())


@dataclass
class OptimizerStates:
    gen_visual: AdamState
    gen_thermal: AdamState
    disc_visual: AdamState
    disc_thermal: AdamState

    @classmethod
    def init(cls, model: TranslationModel, config: TrainConfig) -> "OptimizerStates":
        def like(part):
            return AdamState.init_like(part.params(), alpha=config.alpha,
                                       beta1=config.beta1, beta2=config.beta2)
        return cls(like(model.gen_visual), like(model.gen_thermal),
                   like(model.disc_visual), like(model.disc_thermal))


def _check_finite(value: float, component: str, iteration: int) -> float:
    if not np.isfinite(value):
        raise NumericError(f"non-finite {component} at iteration {iteration}")
    return float(value)


def _disc_update(disc, real, fake, state: AdamState, lr: float,
                 component: str, iteration: int):
    """Least-squares discriminator step on real vs already-detached fakes."""
    s_real, c_real = disc.forward_cached(real)
    s_fake, c_fake = disc.forward_cached(fake)
    loss = _check_finite(adversarial_loss(s_real, s_fake, "discriminator"),
                         component, iteration)
    g_real, g_fake = adversarial_grad(s_real, s_fake, "discriminator")
    _, p_real = disc.backward(c_real, g_real)
    _, p_fake = disc.backward(c_fake, g_fake)
    grads = [a + b for a, b in zip(p_real, p_fake)]
    new_params, state = adam_step(disc.params(), grads, state, lr=lr)
    disc.set_params(new_params)
    return loss, state


def generator_objective_and_grads(model: TranslationModel,
                                  x: np.ndarray, y: np.ndarray):
    """Objective value, per-component values, and generator gradients.

    ``x`` is the thermal batch (replicated to 3 channels), ``y`` the paired
    visual batch. Returns (total, components dict, gen_visual grads,
    gen_thermal grads, feature detail). Discriminators, phi, and the
    detector contribute to the objective but receive no updates here.
    """
    w = model.weights
    gy, gx = model.gen_visual, model.gen_thermal

    y_fake, c_gy = gy.forward_cached(x)
    x_fake, c_gx = gx.forward_cached(y)
    x_rec, c_cycx = gx.forward_cached(y_fake)
    y_rec, c_cycy = gy.forward_cached(x_fake)

    s_y, c_dy = model.disc_visual.forward_cached(y_fake)
    s_x, c_dx = model.disc_thermal.forward_cached(x_fake)
    l_adv = (adversarial_loss(None, s_y, "generator")
             + adversarial_loss(None, s_x, "generator"))
    _, g_sy = adversarial_grad(None, s_y, "generator")
    _, g_sx = adversarial_grad(None, s_x, "generator")

    l_cyc = cyclical_loss(x, x_rec, y, y_rec)
    g_xrec, g_yrec = cyclical_grad(x, x_rec, y, y_rec)

    l_per_y, g_yfake_per = perceptual_grad(model.phi, y, y_fake)
    l_per_x, g_xfake_per = perceptual_grad(model.phi, x, x_fake)
    l_per = l_per_y + l_per_x

    detail = feature_preserving_detail(y, y_fake, model.detector,
                                       model.t_feat, with_grad=True)

    # Gradient into y_fake: adversarial + thermal-cycle + perceptual + feature.
    g_yfake, _ = model.disc_visual.backward(c_dy, g_sy)
    gin_cycx, gx_par_cyc = gx.backward(c_cycx, w.cyc * g_xrec)
    g_yfake = (g_yfake + gin_cycx + w.per * g_yfake_per
               + w.feat * detail.grad_synth)

    # Gradient into x_fake: adversarial + visual-cycle + perceptual.
    g_xfake, _ = model.disc_thermal.backward(c_dx, g_sx)
    gin_cycy, gy_par_cyc = gy.backward(c_cycy, w.cyc * g_yrec)
    g_xfake = g_xfake + gin_cycy + w.per * g_xfake_per

    _, gy_par = gy.backward(c_gy, g_yfake)
    _, gx_par = gx.backward(c_gx, g_xfake)
    gy_grads = [a + b for a, b in zip(gy_par, gy_par_cyc)]
    gx_grads = [a + b for a, b in zip(gx_par, gx_par_cyc)]

    total = total_objective(l_adv, l_cyc, l_per, detail.value, w)
    components = {"l_adv_G": l_adv, "l_cyc": l_cyc, "l_per": l_per,
                  "l_feat": detail.value}
    return total, components, gy_grads, gx_grads, detail


def generator_objective(model: TranslationModel,
                        x: np.ndarray, y: np.ndarray) -> float:
    """Value-only form of the generator objective (for numeric checks)."""
    total, _, _, _, _ = generator_objective_and_grads(model, x, y)
    return total


def train_step(model: TranslationModel, batch, config: TrainConfig,
               opt: OptimizerStates, iteration: int = 0,
               lr: float | None = None) -> LossReport:
    """One alternating update; returns every loss component and mRatio."""
    x_batch, y_batch = batch
    x = model.check_tiles(x_batch, "thermal batch")
    y = model.check_tiles(y_batch, "visual batch")
    if x.shape[0] != y.shape[0]:
        raise DataError(f"batch lengths differ: {x.shape[0]} vs {y.shape[0]}")
    lr = config.alpha if lr is None else float(lr)

    # Discriminators first, on detached (plain-forward) synthesized tiles.
    y_fake = model.gen_visual.forward(x)
    x_fake = model.gen_thermal.forward(y)
    l_dy, opt.disc_visual = _disc_update(model.disc_visual, y, y_fake,
                                         opt.disc_visual, lr,
                                         "l_adv_D", iteration)
    l_dx, opt.disc_thermal = _disc_update(model.disc_thermal, x, x_fake,
                                          opt.disc_thermal, lr,
                                          "l_adv_D", iteration)
    l_adv_d = l_dy + l_dx

    # Generators on the full objective against the just-updated critics.
    _, comps, gy_grads, gx_grads, detail = generator_objective_and_grads(
        model, x, y)
    for name in ("l_adv_G", "l_cyc", "l_per", "l_feat"):
        comps[name] = _check_finite(comps[name], name, iteration)
    new_gy, opt.gen_visual = adam_step(model.gen_visual.params(), gy_grads,
                                       opt.gen_visual, lr=lr)
    model.gen_visual.set_params(new_gy)
    new_gx, opt.gen_thermal = adam_step(model.gen_thermal.params(), gx_grads,
                                        opt.gen_thermal, lr=lr)
    model.gen_thermal.set_params(new_gx)

    return LossReport(iteration, l_adv_d, comps["l_adv_G"], comps["l_cyc"],
                      comps["l_per"], comps["l_feat"], detail.m_ratio, lr,
                      detail.gated, detail.n_excluded)


@dataclass
class LrDecaySchedule:
    """Plateau decay on the running-mean feature loss.

    Feed one window of reports at a time. A window in which the feature
    term was gated off at every step carries no information about feature
    quality, so it neither improves the best value nor counts as stale.
    """

    config: TrainConfig
    lr: float = 0.0
    best: float = np.inf
    stale: int = 0

    def __post_init__(self):
        self.lr = self.config.alpha

    def update(self, window: list[LossReport]) -> float:
        if window and not all(r.gated for r in window):
            mean_feat = float(np.mean([r.l_feat for r in window]))
            if mean_feat < self.best:
                self.best = mean_feat
                self.stale = 0
            else:
                self.stale += 1
                if self.stale >= self.config.patience:
                    self.lr = max(self.lr * self.config.decay_factor,
                                  self.config.lr_floor)
                    self.stale = 0
        return self.lr


def _batches(n: int, batch_size: int, iterations: int, seed: int):
    """Seeded epoch shuffling, yielding index arrays until iterations run out."""
    rng = np.random.default_rng([seed, 31])
    done = 0
    while done < iterations:
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            if done >= iterations:
                return
            yield order[start:start + batch_size]
            done += 1


def train(dataset, config: TrainConfig,
          model: TranslationModel | None = None
          ) -> tuple[TranslationModel, list[LossReport]]:
    """Train on paired (thermal, visual) tile arrays; returns history.

    ``dataset`` is a pair of float arrays shaped (n, 3, t, t) in [-1, 1],
    index-paired. A fresh model is built from the config preset and seed
    unless one is passed in.
    """
    thermal, visual = dataset
    thermal = np.asarray(thermal, dtype=np.float64)
    visual = np.asarray(visual, dtype=np.float64)
    if thermal.ndim != 4 or visual.ndim != 4:
        raise DataError("dataset must be a pair of (n, 3, t, t) arrays")
    if thermal.shape[0] != visual.shape[0]:
        raise DataError(f"dataset halves differ in length: "
                        f"{thermal.shape[0]} vs {visual.shape[0]}")
    if thermal.shape[0] == 0:
        raise DataError("empty dataset")

    if model is None:
        model = build_model(config.preset, config.seed)
    opt = OptimizerStates.init(model, config)

    history: list[LossReport] = []
    schedule = LrDecaySchedule(config)
    lr = schedule.lr
    window: list[LossReport] = []

    for it, idx in enumerate(_batches(thermal.shape[0], config.batch_size,
                                      config.iterations, config.seed)):
        rep = train_step(model, (thermal[idx], visual[idx]), config, opt,
                         iteration=it, lr=lr)
        history.append(rep)
        window.append(rep)
        if len(window) >= config.eval_every:
            lr = schedule.update(window)
            window = []
    return model, history
