"""Loss term tests.

Closed-form cases were worked by hand and frozen: a half-confident
discriminator scores exactly 0.25; a constant 0.1 reconstruction offset
costs exactly 0.1; two landmarks displaced by (3, 4) cost exactly 10; unit
components under the default weights total exactly 22.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fd_utils import masked_grad_check
from feverscreen import dataio, synthetic
from feverscreen.errors import ConfigError, DataError, NumericError
from feverscreen.gan.landmarks import DetectResult, TemplateLandmarkDetector
from feverscreen.gan.losses import (LossWeights, adversarial_grad,
                                    adversarial_loss, cyclical_grad,
                                    cyclical_loss, feature_preserving_detail,
                                    feature_preserving_loss, perceptual_grad,
                                    perceptual_loss, total_objective)
from feverscreen.numcore import Conv2d, Sequential, grad_check

rng = np.random.default_rng


class TestAdversarial:
    def test_perfect_discriminator_zero(self):
        assert adversarial_loss(np.ones((2, 1, 3, 3)), np.zeros((2, 1, 3, 3)),
                                "discriminator") == 0.0

    def test_fooled_generator_zero(self):
        assert adversarial_loss(None, np.ones((1, 1, 2, 2)), "generator") == 0.0

    def test_half_scores_quarter(self):
        half = np.full((2, 1, 4, 4), 0.5)
        assert adversarial_loss(half, half, "discriminator") == 0.25

    def test_empty_scores_rejected(self):
        with pytest.raises(DataError):
            adversarial_loss(np.ones((1, 1, 2, 2)), np.empty((0,)),
                             "discriminator")

    def test_unknown_role_rejected(self):
        with pytest.raises(ConfigError):
            adversarial_loss(np.ones(4), np.ones(4), "critic")

    def test_gradients_match_fd(self):
        real = rng(0).normal(0.5, 0.3, size=(1, 1, 3, 3))
        fake = rng(1).normal(0.5, 0.3, size=(1, 1, 3, 3))
        for role in ("discriminator", "generator"):
            g_real, g_fake = adversarial_grad(real, fake, role)

            def fn():
                val = adversarial_loss(real, fake, role)
                gr, gf = adversarial_grad(real, fake, role)
                grads = [gf] if role == "generator" else [gr, gf]
                return val, grads

            params = [fake] if role == "generator" else [real, fake]
            assert grad_check(fn, params, step=1e-6) <= 1e-6
            assert g_fake.shape == fake.shape
            if role == "generator":
                assert g_real is None


class TestCyclical:
    def test_perfect_cycles_zero(self):
        x = rng(2).normal(size=(1, 3, 4, 4))
        y = rng(3).normal(size=(1, 3, 4, 4))
        assert cyclical_loss(x, x, y, y) == 0.0

    def test_constant_offset_oracle(self):
        x = rng(4).uniform(-1, 1, size=(2, 3, 4, 4))
        y = rng(5).uniform(-1, 1, size=(2, 3, 4, 4))
        assert cyclical_loss(x, x, y, y + 0.1) == pytest.approx(0.1, abs=1e-12)

    def test_shape_mismatch_rejected(self):
        x = np.zeros((1, 3, 4, 4))
        with pytest.raises(DataError):
            cyclical_loss(x, np.zeros((1, 3, 4, 5)), x, x)

    def test_gradients_match_fd_away_from_kinks(self):
        x = rng(6).normal(size=(1, 3, 4, 4))
        y = rng(7).normal(size=(1, 3, 4, 4))
        sign = rng(8).choice([-1.0, 1.0], size=x.shape)
        x_rec = x + sign * rng(9).uniform(0.2, 1.0, size=x.shape)
        y_rec = y + sign * rng(10).uniform(0.2, 1.0, size=x.shape)

        def fn():
            val = cyclical_loss(x, x_rec, y, y_rec)
            return val, list(cyclical_grad(x, x_rec, y, y_rec))

        assert grad_check(fn, [x_rec, y_rec], step=1e-6) <= 1e-6


def identity_phi():
    conv = Conv2d(3, 3, 1)
    conv.w = np.eye(3).reshape(3, 3, 1, 1)
    return Sequential([conv], name="phi")


class TestPerceptual:
    def test_identical_inputs_zero(self):
        phi = identity_phi()
        x = rng(11).normal(size=(1, 3, 4, 4))
        assert perceptual_loss(phi, x, x) == 0.0

    def test_identity_phi_unit_offset(self):
        phi = identity_phi()
        x = rng(12).uniform(-1, 1, size=(2, 3, 4, 4))
        assert perceptual_loss(phi, x, x + 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_grad_matches_fd(self):
        from feverscreen.gan.networks import build_perceptual_net
        phi = build_perceptual_net(rng(13))
        real = rng(14).uniform(-1, 1, size=(1, 3, 8, 8))
        synth = rng(15).uniform(-1, 1, size=(1, 3, 8, 8))

        def fn():
            val, g = perceptual_grad(phi, real, synth)
            return val, [g]

        worst, checked, _ = masked_grad_check(fn, [synth], step=1e-5,
                                              sample_per_param=24, seed=16)
        assert worst <= 1e-4 and checked >= 20

    def test_phi_params_untouched(self):
        phi = identity_phi()
        before = [p.copy() for p in phi.params()]
        x = rng(17).normal(size=(1, 3, 4, 4))
        perceptual_grad(phi, x, x + 0.5)
        for a, b in zip(before, phi.params()):
            assert np.array_equal(a, b)


def scripted(table):
    """Detector stub that looks results up by the tile's [0,0,0] tag."""

    class Scripted:
        def detect(self, tile):
            return table[int(round(float(tile[0, 0, 0])))]

        def detect_cached(self, tile):
            return self.detect(tile), None

    return Scripted()


def tagged_batch(tags):
    batch = np.zeros((len(tags), 3, 2, 2))
    for i, t in enumerate(tags):
        batch[i, 0, 0, 0] = t
    return batch


def result(points, found=True):
    pts = np.asarray(points, dtype=np.float64)
    return DetectResult(pts, np.ones(len(pts)), found)


NONE = result(np.zeros((0, 2)), found=False)


class TestFeaturePreserving:
    def test_all_featureless_gates_to_exact_zero(self):
        det = scripted({0: NONE, 1: NONE})
        val = feature_preserving_loss(tagged_batch([0, 1]),
                                      tagged_batch([0, 1]), det, 0.5)
        assert val == 0.0

    def test_gate_ignores_point_positions(self):
        table = {0: NONE, 1: NONE,
                 2: result([[0.0, 0.0]]), 3: result([[500.0, 500.0]])}
        det = scripted(table)
        detail = feature_preserving_detail(tagged_batch([2, 2, 2, 2]),
                                           tagged_batch([0, 1, 2, 3]),
                                           det, 0.5)
        assert detail.value == 0.0 and detail.gated
        assert detail.m_ratio == 0.5

    def test_hand_oracle_displacement_three_four(self):
        det = scripted({0: result([[0.0, 0.0], [1.0, 1.0]]),
                        1: result([[3.0, 4.0], [4.0, 5.0]])})
        val = feature_preserving_loss(tagged_batch([0]), tagged_batch([1]),
                                      det, 0.5)
        assert val == 10.0

    def test_identical_points_zero(self):
        det = scripted({0: result([[2.0, 3.0], [5.0, 7.0]])})
        assert feature_preserving_loss(tagged_batch([0]), tagged_batch([0]),
                                       det, 0.5) == 0.0

    def test_mismatched_counts_excluded_and_counted_featureless(self):
        det = scripted({
            0: result([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]),  # real: 3 points
            1: result([[0.0, 0.0], [1.0, 1.0]]),              # synth: 2 points
            2: result([[0.0, 0.0], [1.0, 1.0]]),
            3: result([[3.0, 4.0], [4.0, 5.0]]),
        })
        detail = feature_preserving_detail(tagged_batch([0, 2]),
                                           tagged_batch([1, 3]), det, 0.9)
        assert detail.n_excluded == 1
        assert detail.m_ratio == 0.5       # the mismatch counts as featureless
        assert detail.n_pairs == 1
        assert detail.value == 10.0

    def test_real_featureless_drops_pair_but_not_m_ratio(self):
        det = scripted({
            0: NONE,                                   # real has no features
            1: result([[0.0, 0.0], [1.0, 1.0]]),
            2: result([[0.0, 0.0], [1.0, 1.0]]),
            3: result([[3.0, 4.0], [4.0, 5.0]]),
        })
        detail = feature_preserving_detail(tagged_batch([0, 2]),
                                           tagged_batch([1, 3]), det, 0.9)
        assert detail.m_ratio == 0.0
        assert detail.n_pairs == 1
        assert detail.value == 10.0

    def test_validation(self):
        det = scripted({0: NONE})
        with pytest.raises(ConfigError):
            feature_preserving_loss(tagged_batch([0]), tagged_batch([0]), det, 0.0)
        with pytest.raises(ConfigError):
            feature_preserving_loss(tagged_batch([0]), tagged_batch([0]), det, 1.5)
        with pytest.raises(DataError):
            feature_preserving_loss(tagged_batch([0, 0]), tagged_batch([0]),
                                    det, 0.5)
        with pytest.raises(DataError):
            feature_preserving_loss(np.zeros((0, 3, 2, 2)),
                                    np.zeros((0, 3, 2, 2)), det, 0.5)

    def test_grad_matches_fd_through_detector(self):
        det = TemplateLandmarkDetector(synthetic.landmark_templates(16))
        spec = synthetic.TileSpec(size=16)
        r = rng([40, 1])
        rgb_r, _, _ = synthetic.render_tile_pair(r, spec, 6.0, False)
        rgb_s, _, _ = synthetic.render_tile_pair(rng([40, 7]), spec, 6.0, False)
        real = dataio.visual_to_unit(rgb_r)[None]
        synth = dataio.visual_to_unit(rgb_s)[None].copy()
        assert det.detect(real[0]).found and det.detect(synth[0]).found
        s = 1e-3

        def fn():
            detail = feature_preserving_detail(real, synth, det, 0.5,
                                               with_grad=True)
            return s * detail.value, [s * detail.grad_synth]

        worst, checked, skipped = masked_grad_check(
            fn, [synth], step=1e-6, sample_per_param=24, seed=41, tol=1e-3)
        assert worst <= 1e-3
        assert checked >= 18


class TestTotalObjective:
    def test_unit_components_paper_weights(self):
        assert total_objective(1.0, 1.0, 1.0, 1.0, LossWeights()) == 22.0

    def test_all_zero(self):
        assert total_objective(0.0, 0.0, 0.0, 0.0, LossWeights()) == 0.0

    def test_non_finite_rejected(self):
        with pytest.raises(NumericError):
            total_objective(np.nan, 0.0, 0.0, 0.0, LossWeights())

    def test_weights_must_be_positive(self):
        with pytest.raises(ConfigError):
            LossWeights(cyc=0.0)
        with pytest.raises(ConfigError):
            LossWeights(feat=-1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.0, 5.0),
           st.floats(0.0, 5.0), st.floats(0.01, 1.0))
    def test_linear_in_each_component(self, a, c, p, f, delta):
        w = LossWeights(2.5, 1.25, 0.5)
        base = total_objective(a, c, p, f, w)
        assert total_objective(a + delta, c, p, f, w) - base == pytest.approx(delta, rel=1e-9, abs=1e-9)
        assert total_objective(a, c + delta, p, f, w) - base == pytest.approx(w.cyc * delta, rel=1e-9, abs=1e-9)
        assert total_objective(a, c, p + delta, f, w) - base == pytest.approx(w.per * delta, rel=1e-9, abs=1e-9)
        assert total_objective(a, c, p, f + delta, w) - base == pytest.approx(w.feat * delta, rel=1e-9, abs=1e-9)
