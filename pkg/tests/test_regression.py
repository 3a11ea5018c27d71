"""Disparity-vector and linear-regressor oracles.

Closed forms frozen here: a single point displaced by (3, 4) gives magnitude
5 and angle atan2(4, 3) = 0.9272952180016122; least squares on noiseless
linear targets must recover the generating coefficients to round-off.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from feverscreen import fusion, synthetic
from feverscreen.errors import DataError
from feverscreen.fusion import LinearFit, RegressorModel


class TestDisparityVector:
    def test_identical_points_all_zero(self):
        pts = np.array([[3.0, 4.0], [10.0, 2.0], [5.5, 7.25]])
        z = fusion.disparity_vector(pts, pts)
        assert z.shape == (6,)
        assert np.all(z == 0.0)

    def test_single_point_closed_form(self):
        z = fusion.disparity_vector(np.array([[1.0, 2.0]]),
                                    np.array([[4.0, 6.0]]))
        assert abs(z[0] - 5.0) <= 1e-12
        assert abs(z[1] - 0.9272952180016122) <= 1e-12

    def test_length_law(self):
        z = fusion.disparity_vector(np.zeros((2, 2)), np.ones((2, 2)))
        assert z.shape == (4,)

    def test_angle_range_closes_at_pi(self):
        # a displacement of (-1, -0.0) hits the branch cut; the convention
        # keeps angles in (-pi, pi] so it must come back as +pi
        z = fusion.disparity_vector(np.array([[1.0, 0.0]]),
                                    np.array([[0.0, -0.0]]))
        assert z[1] == np.pi

    def test_count_mismatch_rejected(self):
        with pytest.raises(DataError):
            fusion.disparity_vector(np.zeros((2, 2)), np.zeros((3, 2)))
        with pytest.raises(DataError):
            fusion.disparity_vector(np.zeros((2, 3)), np.zeros((2, 3)))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2 ** 31 - 1),
           st.floats(-50, 50), st.floats(-50, 50))
    def test_translation_leaves_z_unchanged(self, n, seed, tx, ty):
        rng = np.random.default_rng(seed)
        a = rng.uniform(-30, 30, (n, 2))
        b = rng.uniform(-30, 30, (n, 2))
        shift = np.array([tx, ty])
        assert np.allclose(fusion.disparity_vector(a, b),
                           fusion.disparity_vector(a + shift, b + shift),
                           atol=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2 ** 31 - 1),
           st.floats(-np.pi, np.pi))
    def test_rotation_equivariance(self, n, seed, theta):
        rng = np.random.default_rng(seed)
        a = rng.uniform(-30, 30, (n, 2))
        b = a + rng.uniform(0.5, 10, (n, 2))
        rot = np.array([[np.cos(theta), -np.sin(theta)],
                        [np.sin(theta), np.cos(theta)]])
        z0 = fusion.disparity_vector(a, b)
        z1 = fusion.disparity_vector(a @ rot.T, b @ rot.T)
        assert np.allclose(z0[:n], z1[:n], atol=1e-8)
        # angles advance by theta modulo the 2*pi wrap
        assert np.allclose(np.exp(1j * (z1[n:] - z0[n:] - theta)),
                           1.0, atol=1e-8)


class TestFitRegressor:
    def test_noiseless_linear_recovery(self):
        rng = np.random.default_rng(3)
        Z = rng.uniform(-2, 2, (60, 6))
        coef = np.array([1.5, -2.0, 0.25, 3.0, -0.5, 1.0, 0.75])
        t = coef[0] + Z @ coef[1:]
        fit = fusion.fit_regressor(Z, t)
        assert np.max(np.abs(fit.coef - coef)) <= 1e-9
        assert abs(fit.residual_mean) <= 1e-9
        assert fit.residual_std <= 1e-9

    def test_noiseless_r_squared(self):
        rng = np.random.default_rng(9)
        Z = rng.uniform(-1, 1, (40, 4))
        t = 2.0 + Z @ np.array([1.0, -1.0, 0.5, 2.0])
        fit = fusion.fit_regressor(Z, t)
        pred = np.array([fit.predict(z) for z in Z])
        ss_res = np.sum((t - pred) ** 2)
        ss_tot = np.sum((t - t.mean()) ** 2)
        assert 1.0 - ss_res / ss_tot >= 1.0 - 1e-9

    def test_constant_targets_intercept_only(self):
        rng = np.random.default_rng(5)
        Z = rng.uniform(-3, 3, (30, 4))
        fit = fusion.fit_regressor(Z, np.full(30, 7.25))
        assert abs(fit.coef[0] - 7.25) <= 1e-9
        assert np.max(np.abs(fit.coef[1:])) <= 1e-9

    def test_noise_keeps_coefficients_in_statistical_bounds(self):
        rng_z = np.random.default_rng(14)
        Z = rng_z.uniform(-2, 2, (120, 4))
        coef = np.array([0.5, 1.0, -2.0, 0.25, 3.0])
        clean = coef[0] + Z @ coef[1:]
        A = np.column_stack([np.ones(len(Z)), Z])
        sigma = 0.01
        scale = sigma * np.sqrt(np.trace(np.linalg.inv(A.T @ A)))
        for seed in range(5):
            noisy = clean + np.random.default_rng(seed).normal(0, sigma,
                                                               len(clean))
            fit = fusion.fit_regressor(Z, noisy)
            assert np.linalg.norm(fit.coef - coef) <= 5.0 * scale

    def test_rank_deficiency_rejected_with_condition(self):
        rng = np.random.default_rng(2)
        col = rng.uniform(-1, 1, 20)
        Z = np.column_stack([col, 2.0 * col])
        with pytest.raises(DataError, match="condition"):
            fusion.fit_regressor(Z, rng.uniform(0, 1, 20))

    def test_too_few_rows_rejected(self):
        with pytest.raises(DataError, match="rows"):
            fusion.fit_regressor(np.eye(4), np.ones(4))

    def test_non_finite_rejected(self):
        Z = np.ones((10, 2))
        Z[3, 1] = np.nan
        with pytest.raises(DataError, match="finite"):
            fusion.fit_regressor(Z, np.ones(10))


def make_model(w, u, z_min, z_max, d_range):
    dist = LinearFit(np.asarray(w, dtype=np.float64), 0.0, 0.0)
    off = LinearFit(np.asarray(u, dtype=np.float64), 0.0, 0.0)
    return RegressorModel(dist, off, np.asarray(z_min, dtype=np.float64),
                          np.asarray(z_max, dtype=np.float64), d_range)


class TestEstimatePosition:
    def test_zero_vector_returns_intercepts(self):
        model = make_model([6.5, 1.0, 2.0], [0.25, -1.0, 3.0],
                           [-1, -1], [1, 1], (0.0, 20.0))
        est = fusion.estimate_position(np.zeros(2), model)
        assert est.d == 6.5 and est.o == 0.25
        assert not est.extrapolated

    def test_length_mismatch_rejected(self):
        model = make_model([1.0, 0.0, 0.0], [0.0, 0.0, 0.0],
                           [-1, -1], [1, 1], (0.0, 20.0))
        with pytest.raises(DataError):
            fusion.estimate_position(np.zeros(3), model)

    def test_hull_departure_flagged(self):
        model = make_model([5.0, 0.1, 0.0], [0.0, 0.0, 0.0],
                           [-1, -1], [1, 1], (0.0, 20.0))
        assert not fusion.estimate_position(np.array([0.5, 0.5]),
                                            model).extrapolated
        assert fusion.estimate_position(np.array([1.5, 0.0]),
                                        model).extrapolated

    def test_out_of_range_prediction_flagged(self):
        model = make_model([30.0, 0.0, 0.0], [0.0, 0.0, 0.0],
                           [-1, -1], [1, 1], (4.0, 15.0))
        assert fusion.estimate_position(np.zeros(2), model).extrapolated


class TestModelIO:
    def fitted(self):
        rng = np.random.default_rng(21)
        Z = rng.uniform(-2, 2, (40, 4))
        d = 5.0 + Z @ np.array([1.0, 0.5, -0.25, 2.0])
        o = 1.0 + Z @ np.array([-0.5, 1.5, 0.75, 0.0])
        return fusion.fit_pose_regressor(Z, d, o), Z

    def test_dict_roundtrip_preserves_predictions(self):
        model, Z = self.fitted()
        back = RegressorModel.from_dict(model.to_dict())
        for z in Z[:5]:
            a = fusion.estimate_position(z, model)
            b = fusion.estimate_position(z, back)
            assert a == b

    def test_file_roundtrip(self, tmp_path):
        model, Z = self.fitted()
        model.save(tmp_path / "reg.json")
        back = RegressorModel.load(tmp_path / "reg.json")
        assert np.allclose(back.distance.coef, model.distance.coef)
        assert np.allclose(back.z_min, model.z_min)
        assert back.d_range == model.d_range

    def test_bad_payload_rejected(self):
        with pytest.raises(DataError):
            RegressorModel.from_dict({"w": [1.0]})

    def test_inconsistent_lengths_rejected(self):
        model, _ = self.fitted()
        obj = model.to_dict()
        obj["z_min"] = obj["z_min"][:-1]
        with pytest.raises(DataError):
            RegressorModel.from_dict(obj)


class TestPoseSurveyFit:
    """End-to-end sanity of the regressor on the calibration-rig geometry."""

    def test_held_out_error_within_twice_training_residual(self):
        spec = synthetic.SceneSpec.pose_survey()
        model = fusion.fit_scene_regressor(spec, n=120, seed=7)
        rng = np.random.default_rng(11)
        errs = []
        for _ in range(60):
            d = rng.uniform(*spec.dist_range)
            o = rng.uniform(*spec.offset_range)
            h = rng.uniform(*spec.height_range)
            z = fusion.disparity_vector(
                *synthetic.project_landmarks(spec, d, o, h))
            errs.append(abs(fusion.estimate_position(z, model).d - d))
        assert np.mean(errs) <= 2.0 * model.distance.residual_std

    def test_range_endpoints_tracked(self):
        spec = synthetic.SceneSpec.pose_survey()
        model = fusion.fit_scene_regressor(spec, n=120, seed=7)
        for d in (4.0, 15.0):
            z = fusion.disparity_vector(
                *synthetic.project_landmarks(spec, d, 3.0, 1.2))
            assert abs(fusion.estimate_position(z, model).d - d) <= 0.5

    def test_equal_focal_rig_needs_jitter(self):
        spec = synthetic.SceneSpec.walkway(focal_ratio=1.0)
        with pytest.raises(DataError, match="rank-deficient"):
            fusion.fit_scene_regressor(spec, n=40, seed=3)
        model = fusion.fit_scene_regressor(spec, n=40, seed=3, jitter_px=0.5)
        assert model.n_features == 10

    def test_same_seed_same_coefficients(self):
        spec = synthetic.SceneSpec.pose_survey()
        a = fusion.fit_scene_regressor(spec, n=50, seed=4)
        b = fusion.fit_scene_regressor(spec, n=50, seed=4)
        assert np.array_equal(a.distance.coef, b.distance.coef)
        assert np.array_equal(a.offset.coef, b.offset.coef)
