"""Network builders and the bundled cross-spectral translation model.

Two generators map between the thermal and visual domains (thermal tiles
are 1-channel data replicated to 3 channels before entering a generator);
two patch discriminators score each domain; a fixed random conv stack
``phi`` provides perceptual features; a fixed template landmark detector
provides the feature-preserving signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import synthetic
from ..errors import ConfigError, DataError
from ..numcore import layers as L
from ..numcore.tensor import check_tensor4
from ..numcore.weightio import load_weights, save_weights
from .blocks import DualSkipBottleneck
from .landmarks import TemplateLandmarkDetector
from .losses import LossWeights


@dataclass(frozen=True)
class ScalePreset:
    """Size knobs that scale the whole model together."""

    name: str
    tile_size: int          # square tile edge in pixels
    base_channels: int      # encoder width; doubles at each downsample
    n_blocks: int           # dual-skip bottleneck blocks in the transformer
    disc_downs: int         # stride-2 stages in the discriminators

    def __post_init__(self):
        if self.tile_size < 8 or self.tile_size % 4 != 0:
            raise ConfigError(f"tile_size must be a multiple of 4 and >= 8, "
                              f"got {self.tile_size}")
        if min(self.base_channels, self.n_blocks, self.disc_downs) < 1:
            raise ConfigError("base_channels, n_blocks, disc_downs must be >= 1")


PAPER_SCALE = ScalePreset("paper", 64, 64, 6, 3)
TEST_SCALE = ScalePreset("test", 16, 8, 2, 2)


def build_generator(preset: ScalePreset,
                    rng: np.random.Generator | None) -> L.Sequential:
    """Encoder (7x7 then two stride-2 3x3) -> bottleneck blocks -> decoder."""
    b = preset.base_channels
    layers = [
        L.Conv2d(3, b, 7, stride=1, pad=3, rng=rng),
        L.InstanceNorm2d(b), L.ReLU(),
        L.Conv2d(b, 2 * b, 3, stride=2, pad=1, rng=rng),
        L.InstanceNorm2d(2 * b), L.ReLU(),
        L.Conv2d(2 * b, 4 * b, 3, stride=2, pad=1, rng=rng),
        L.InstanceNorm2d(4 * b), L.ReLU(),
    ]
    layers += [DualSkipBottleneck(4 * b, rng=rng) for _ in range(preset.n_blocks)]
    layers += [
        L.ConvTranspose2d(4 * b, 2 * b, 3, stride=2, pad=1, out_pad=1, rng=rng),
        L.InstanceNorm2d(2 * b), L.ReLU(),
        L.ConvTranspose2d(2 * b, b, 3, stride=2, pad=1, out_pad=1, rng=rng),
        L.InstanceNorm2d(b), L.ReLU(),
        L.Conv2d(b, 3, 7, stride=1, pad=3, rng=rng),
        L.Tanh(),
    ]
    return L.Sequential(layers, name="gen")


def build_discriminator(preset: ScalePreset,
                        rng: np.random.Generator | None) -> L.Sequential:
    """Patch discriminator: 4x4 stride-2 stack -> stride-1 stage -> 1-ch map."""
    b = preset.base_channels
    layers = [
        L.Conv2d(3, b, 4, stride=2, pad=1, rng=rng),
        L.LeakyReLU(),
    ]
    ch = b
    for _ in range(preset.disc_downs - 1):
        layers += [
            L.Conv2d(ch, 2 * ch, 4, stride=2, pad=1, rng=rng),
            L.InstanceNorm2d(2 * ch), L.LeakyReLU(),
        ]
        ch *= 2
    layers += [
        L.Conv2d(ch, 2 * ch, 4, stride=1, pad=1, rng=rng),
        L.InstanceNorm2d(2 * ch), L.LeakyReLU(),
        L.Conv2d(2 * ch, 1, 4, stride=1, pad=1, rng=rng),
    ]
    return L.Sequential(layers, name="disc")


PHI_CHANNELS = 8


def build_perceptual_net(rng: np.random.Generator) -> L.Sequential:
    """Fixed random 3-conv feature stack with roughly unit activation gain."""
    layers = [
        L.Conv2d(3, PHI_CHANNELS, 3, stride=1, pad=1, rng=rng),
        L.ReLU(),
        L.Conv2d(PHI_CHANNELS, PHI_CHANNELS, 3, stride=2, pad=1, rng=rng),
        L.ReLU(),
        L.Conv2d(PHI_CHANNELS, PHI_CHANNELS, 3, stride=1, pad=1, rng=rng),
    ]
    for layer in layers:
        if isinstance(layer, L.Conv2d):
            fan_in = layer.w.shape[1] * layer.w.shape[2] * layer.w.shape[3]
            layer.w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=layer.w.shape)
    return L.Sequential(layers, name="phi")


def generator_forward(gen: L.Sequential, tiles: np.ndarray) -> np.ndarray:
    """Run a generator after validating shape and value range."""
    x = check_tensor4(np.asarray(tiles, dtype=np.float64), "generator input")
    if x.shape[1] != 3:
        raise DataError(f"generator expects 3 channels, got {x.shape[1]}")
    if x.shape[2] % 4 != 0 or x.shape[3] % 4 != 0:
        raise DataError(f"tile sides must be multiples of 4, got {x.shape[2:]}")
    if x.size and (np.max(np.abs(x)) > 1.0 + 1e-9):
        raise DataError("generator input must lie in [-1, 1]")
    return gen.forward(x)


_PART_NAMES = ("gy", "gx", "dy", "dx", "phi")


class TranslationModel:
    """Both generators, both discriminators, and the fixed loss machinery.

    gen_visual maps thermal -> visual; gen_thermal maps visual -> thermal.
    disc_visual scores visual-domain tiles, disc_thermal thermal-domain
    ones. ``phi`` and ``detector`` are fixed: they shape the objective but
    are never trained.
    """

    def __init__(self, preset: ScalePreset, gen_visual, gen_thermal,
                 disc_visual, disc_thermal, phi,
                 detector: TemplateLandmarkDetector,
                 weights: LossWeights, t_feat: float = 0.5):
        if not 0.0 < t_feat <= 1.0:
            raise ConfigError(f"t_feat must be in (0, 1], got {t_feat}")
        self.preset = preset
        self.gen_visual = gen_visual
        self.gen_thermal = gen_thermal
        self.disc_visual = disc_visual
        self.disc_thermal = disc_thermal
        self.phi = phi
        self.detector = detector
        self.weights = weights
        self.t_feat = float(t_feat)

    def _parts(self):
        return {"gy": self.gen_visual, "gx": self.gen_thermal,
                "dy": self.disc_visual, "dx": self.disc_thermal,
                "phi": self.phi}

    def check_tiles(self, tiles: np.ndarray, what: str) -> np.ndarray:
        t = self.preset.tile_size
        x = check_tensor4(np.asarray(tiles, dtype=np.float64), what)
        if x.shape[1:] != (3, t, t):
            raise DataError(f"{what}: expected (n, 3, {t}, {t}), got {x.shape}")
        return x

    def synthesize_visual(self, thermal_tiles: np.ndarray) -> np.ndarray:
        return generator_forward(self.gen_visual,
                                 self.check_tiles(thermal_tiles, "thermal tiles"))

    def synthesize_thermal(self, visual_tiles: np.ndarray) -> np.ndarray:
        return generator_forward(self.gen_thermal,
                                 self.check_tiles(visual_tiles, "visual tiles"))

    def save(self, path: str) -> None:
        named: list[tuple[str, np.ndarray]] = [
            ("meta.preset", np.array([self.preset.tile_size,
                                      self.preset.base_channels,
                                      self.preset.n_blocks,
                                      self.preset.disc_downs], dtype=np.float64)),
            ("meta.weights", np.array([self.weights.cyc, self.weights.per,
                                       self.weights.feat])),
            ("meta.t_feat", np.array([self.t_feat])),
            ("meta.detector", np.array([self.detector.beta,
                                        self.detector.presence_threshold,
                                        self.detector.min_window_std])),
            ("meta.gray", np.asarray(self.detector.gray_weights)),
        ]
        for j, tpl in enumerate(self.detector.raw_templates):
            named.append((f"tpl.{j}", tpl))
        for tag, part in self._parts().items():
            for name, arr in zip(part.param_names(), part.params()):
                named.append((f"{tag}.{name}", arr))
        save_weights(path, named)

    @classmethod
    def load(cls, path: str) -> "TranslationModel":
        arrays = dict(load_weights(path))
        try:
            tile, base, blocks, downs = (int(v) for v in arrays["meta.preset"])
            w_cyc, w_per, w_feat = (float(v) for v in arrays["meta.weights"])
            t_feat = float(arrays["meta.t_feat"][0])
            beta, thr, floor = (float(v) for v in arrays["meta.detector"])
            gray = tuple(float(v) for v in arrays["meta.gray"])
        except KeyError as exc:
            raise DataError(f"{path}: checkpoint missing {exc}") from exc
        preset = ScalePreset("custom", tile, base, blocks, downs)
        for known in (PAPER_SCALE, TEST_SCALE):
            if (tile, base, blocks, downs) == (known.tile_size, known.base_channels,
                                               known.n_blocks, known.disc_downs):
                preset = known
        templates = []
        while f"tpl.{len(templates)}" in arrays:
            templates.append(arrays[f"tpl.{len(templates)}"])
        if not templates:
            raise DataError(f"{path}: checkpoint holds no landmark templates")
        detector = TemplateLandmarkDetector(templates, beta=beta,
                                            presence_threshold=thr,
                                            gray_weights=gray,
                                            min_window_std=floor)
        model = cls(preset,
                    build_generator(preset, None), build_generator(preset, None),
                    build_discriminator(preset, None),
                    build_discriminator(preset, None),
                    build_perceptual_net(np.random.default_rng(0)),
                    detector, LossWeights(w_cyc, w_per, w_feat), t_feat)
        for tag, part in model._parts().items():
            try:
                part.set_params([arrays[f"{tag}.{n}"] for n in part.param_names()])
            except KeyError as exc:
                raise DataError(f"{path}: checkpoint missing {exc}") from exc
        return model


def build_model(preset: ScalePreset, seed: int,
                weights: LossWeights | None = None,
                t_feat: float = 0.5) -> TranslationModel:
    """Seeded model: each component draws from its own child stream."""
    ss = np.random.SeedSequence([int(seed), 907])
    r_gy, r_gx, r_dy, r_dx, r_phi = (np.random.default_rng(s)
                                     for s in ss.spawn(5))
    templates = synthetic.landmark_templates(preset.tile_size)
    detector = TemplateLandmarkDetector(templates)
    return TranslationModel(
        preset,
        build_generator(preset, r_gy), build_generator(preset, r_gx),
        build_discriminator(preset, r_dy), build_discriminator(preset, r_dx),
        build_perceptual_net(r_phi), detector,
        weights if weights is not None else LossWeights(), t_feat)
