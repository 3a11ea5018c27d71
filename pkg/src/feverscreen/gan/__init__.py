"""Cross-spectral translation model: generators, discriminators, losses,
the differentiable landmark detector, and the training loop."""

from .blocks import DualSkipBottleneck
from .landmarks import DetectResult, TemplateLandmarkDetector
from .losses import (LossWeights, adversarial_loss, cyclical_loss,
                     feature_preserving_loss, perceptual_loss, total_objective)
from .networks import (PAPER_SCALE, TEST_SCALE, ScalePreset, TranslationModel,
                       build_discriminator, build_generator, build_model,
                       build_perceptual_net, generator_forward)
from .train import (HISTORY_COLUMNS, LossReport, LrDecaySchedule,
                    OptimizerStates, TrainConfig, generator_objective,
                    generator_objective_and_grads, train, train_step,
                    write_history)

__all__ = [
    "DualSkipBottleneck", "DetectResult", "TemplateLandmarkDetector",
    "LossWeights", "adversarial_loss", "cyclical_loss",
    "feature_preserving_loss", "perceptual_loss", "total_objective",
    "PAPER_SCALE", "TEST_SCALE", "ScalePreset", "TranslationModel",
    "build_discriminator", "build_generator", "build_model",
    "build_perceptual_net", "generator_forward",
    "HISTORY_COLUMNS", "LossReport", "LrDecaySchedule", "OptimizerStates",
    "TrainConfig", "generator_objective", "generator_objective_and_grads",
    "train", "train_step", "write_history",
]
