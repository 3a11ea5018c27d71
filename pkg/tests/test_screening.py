"""Screening oracles.

Temperatures convert through the linear counts calibration, so expected
read-outs are exact integer-count arithmetic. The two published confusion
rows are frozen here as count tuples and their truncated percentage strings.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from feverscreen import fusion, screening, synthetic
from feverscreen.errors import ConfigError, DataError
from feverscreen.fusion import BBox
from feverscreen.screening import (CompensationModel, ConfusionCounts,
                                   PersonRecord, ThermalFrame)


def frame_at(t_celsius, shape=(40, 40)):
    counts = np.full(shape, synthetic.counts_for_temp(t_celsius),
                     dtype=np.uint16)
    return ThermalFrame(counts)


class TestThermalFrame:
    def test_temperature_mapping_linear(self):
        f = ThermalFrame(np.array([[0, 3650]], dtype=np.uint16),
                         gain_c=0.01, offset_c=0.0)
        assert np.allclose(f.temperature(), [[0.0, 36.5]])

    def test_dtype_checked(self):
        with pytest.raises(DataError):
            ThermalFrame(np.zeros((4, 4), dtype=np.float64))
        with pytest.raises(DataError):
            ThermalFrame(np.zeros(16, dtype=np.uint16))

    def test_gain_checked(self):
        with pytest.raises(ConfigError):
            ThermalFrame(np.zeros((4, 4), dtype=np.uint16), gain_c=0.0)

    def test_band_flag(self):
        assert frame_at(36.5).in_band
        assert not ThermalFrame(np.full((4, 4), 65535, dtype=np.uint16)).in_band


class TestCanthusReadout:
    def test_uniform_raster(self):
        marks = np.array([[10.0, 10.0], [20.0, 10.0], [15.0, 20.0],
                          [12.0, 28.0], [18.0, 28.0]])
        t = screening.read_canthus_temperature(frame_at(36.5), marks)
        assert t == 36.5

    def test_hot_pixel_inside_window(self):
        f = frame_at(36.0)
        f.counts[10, 11] = synthetic.counts_for_temp(38.2)
        marks = np.array([[10.0, 10.0], [30.0, 10.0]])
        t = screening.read_canthus_temperature(f, marks, canthus_indices=(0, 1))
        assert abs(t - 38.2) <= 1e-9

    def test_hotter_canthus_wins(self):
        f = frame_at(36.0)
        f.counts[10, 30] = synthetic.counts_for_temp(37.1)
        marks = np.array([[10.0, 10.0], [30.0, 10.0]])
        t = screening.read_canthus_temperature(f, marks, canthus_indices=(0, 1))
        assert abs(t - 37.1) <= 1e-9

    def test_rounding_to_nearest_pixel(self):
        f = frame_at(36.0)
        f.counts[12, 9] = synthetic.counts_for_temp(37.5)
        # (9.4, 11.6) rounds to (9, 12); radius-1 window covers the hot pixel
        marks = np.array([[9.4, 11.6], [30.0, 10.0]])
        t = screening.read_canthus_temperature(f, marks, canthus_indices=(0, 1))
        assert abs(t - 37.5) <= 1e-9

    def test_window_overflow_rejected(self):
        marks = np.array([[0.2, 10.0], [30.0, 10.0]])
        with pytest.raises(DataError, match="window"):
            screening.read_canthus_temperature(frame_at(36.0), marks,
                                               canthus_indices=(0, 1))

    def test_bad_marks_shape_rejected(self):
        with pytest.raises(DataError):
            screening.read_canthus_temperature(frame_at(36.0),
                                               np.zeros((5, 3)))


class TestCompensation:
    def test_zero_distance_identity(self):
        m = CompensationModel(0.1, (0.0, 15.0))
        assert screening.compensate_temperature(36.8, 0.0, m) == 36.8

    def test_linear_formula(self):
        m = CompensationModel(0.1, (0.0, 15.0))
        assert abs(screening.compensate_temperature(36.8, 5.0, m)
                   - 37.3) <= 1e-12

    def test_negative_distance_rejected(self):
        m = CompensationModel(0.1, (0.0, 15.0))
        with pytest.raises(DataError):
            screening.compensate_temperature(36.8, -1.0, m)

    def test_empty_range_rejected(self):
        with pytest.raises(ConfigError):
            CompensationModel(0.1, (5.0, 5.0))

    def test_range_membership(self):
        m = CompensationModel(0.1, (4.0, 15.0))
        assert m.in_range(4.0) and m.in_range(15.0)
        assert not m.in_range(3.9) and not m.in_range(15.1)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.01, 1.0), st.floats(30, 40),
           st.floats(0, 14), st.floats(0.1, 5))
    def test_monotone_in_distance(self, kappa, t, d, step):
        m = CompensationModel(kappa, (0.0, 20.0))
        assert (screening.compensate_temperature(t, d + step, m)
                > screening.compensate_temperature(t, d, m))

    def test_dict_roundtrip(self):
        m = CompensationModel(0.085, (4.0, 15.0))
        assert CompensationModel.from_dict(m.to_dict()) == m

    def test_bad_payload_rejected(self):
        with pytest.raises(DataError):
            CompensationModel.from_dict({"kappa_c_per_ft": 0.1})


class TestFitCompensation:
    def test_exact_decay_recovered(self):
        d = np.linspace(4.0, 15.0, 30)
        t = 37.4 - 0.1 * d
        m = screening.fit_compensation(d, t)
        assert abs(m.kappa_c_per_ft - 0.1) <= 1e-12
        assert m.d_range == (4.0, 15.0)

    def test_noisy_decay_within_five_percent(self):
        rng = np.random.default_rng(17)
        d = rng.uniform(4.0, 15.0, 200)
        t = 37.4 - 0.1 * d + rng.normal(0.0, 0.02, 200)
        m = screening.fit_compensation(d, t)
        assert abs(m.kappa_c_per_ft - 0.1) <= 0.005

    def test_single_distance_rejected(self):
        with pytest.raises(DataError):
            screening.fit_compensation(np.full(5, 6.0), np.full(5, 36.8))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DataError):
            screening.fit_compensation(np.ones(5), np.ones(4))


class TestClassify:
    def test_below_threshold(self):
        assert not screening.classify_fever(37.0, 38.0)

    def test_boundary_inclusive(self):
        assert screening.classify_fever(38.0, 38.0)

    def test_above_threshold(self):
        assert screening.classify_fever(39.1, 38.0)

    def test_threshold_must_be_finite(self):
        with pytest.raises(ConfigError):
            screening.classify_fever(37.0, float("nan"))


class TestConfusionAndAccuracy:
    def test_published_rows(self):
        edge = ConfusionCounts(tp=6, fp=2, tn=110, fn=24)
        cloud = ConfusionCounts(tp=7, fp=1, tn=133, fn=1)
        assert abs(screening.accuracy(edge) - 116 / 142) <= 1e-12
        assert abs(screening.accuracy(cloud) - 140 / 142) <= 1e-12
        assert screening.format_accuracy(screening.accuracy(edge)) == "81.6%"
        assert screening.format_accuracy(screening.accuracy(cloud)) == "98.5%"

    def test_single_true_positive(self):
        assert screening.accuracy(ConfusionCounts(1, 0, 0, 0)) == 1.0
        assert screening.format_accuracy(1.0) == "100.0%"

    def test_truncation_not_rounding(self):
        # 0.8169... would round to 81.7; reporting truncates to 81.6
        assert screening.format_accuracy(0.81699) == "81.6%"

    def test_zero_total_rejected(self):
        with pytest.raises(DataError):
            screening.accuracy(ConfusionCounts(0, 0, 0, 0))

    def test_negative_count_rejected(self):
        with pytest.raises(DataError):
            ConfusionCounts(-1, 0, 1, 0)

    def test_non_integer_rejected(self):
        with pytest.raises(DataError):
            ConfusionCounts(1.5, 0, 1, 0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 50), st.integers(0, 50),
           st.integers(0, 50), st.integers(0, 50))
    def test_accuracy_bounded(self, tp, fp, tn, fn):
        c = ConfusionCounts(tp, fp, tn, fn)
        if c.total == 0:
            return
        assert 0.0 <= screening.accuracy(c) <= 1.0

    def test_confusion_from_flags(self):
        c = screening.confusion_from_flags([True, True, False, False],
                                           [True, False, False, True])
        assert (c.tp, c.fp, c.tn, c.fn) == (1, 1, 1, 1)

    def test_flag_length_mismatch(self):
        with pytest.raises(DataError):
            screening.confusion_from_flags([True], [True, False])


class TestEvalCsv:
    def test_roundtrip(self, tmp_path):
        p = tmp_path / "eval.csv"
        p.write_text("record_id,predicted,actual\n"
                     "a,1,1\nb,1,0\nc,0,0\nd,0,1\ne,0,0\n")
        c = screening.read_eval_csv(p)
        assert (c.tp, c.fp, c.tn, c.fn) == (1, 1, 2, 1)

    def test_header_checked(self, tmp_path):
        p = tmp_path / "eval.csv"
        p.write_text("id,pred,act\na,1,1\n")
        with pytest.raises(DataError, match="header"):
            screening.read_eval_csv(p)

    def test_bad_flag_rejected(self, tmp_path):
        p = tmp_path / "eval.csv"
        p.write_text("record_id,predicted,actual\na,yes,1\n")
        with pytest.raises(DataError, match="line 2"):
            screening.read_eval_csv(p)

    def test_empty_data_rejected(self, tmp_path):
        p = tmp_path / "eval.csv"
        p.write_text("record_id,predicted,actual\n")
        with pytest.raises(DataError):
            screening.read_eval_csv(p)


class TestRecordsIO:
    def sample(self):
        return [PersonRecord(0, BBox(1, 2, 3, 4), BBox(5, 6, 7, 8),
                             (12.5, 13.5), 36.8, 6.0, 1.0, 37.4, False),
                PersonRecord(1, BBox(10, 2, 3, 4), BBox(50, 6, 7, 8),
                             (42.5, 13.5), 38.5, 5.0, -1.0, 39.0, True)]

    def test_roundtrip(self, tmp_path):
        p = tmp_path / "records.jsonl"
        screening.write_records(p, self.sample())
        assert screening.read_records(p) == self.sample()

    def test_write_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        screening.write_records(a, self.sample())
        screening.write_records(b, self.sample())
        assert a.read_bytes() == b.read_bytes()

    def test_bad_line_rejected(self, tmp_path):
        p = tmp_path / "records.jsonl"
        p.write_text("{not json}\n")
        with pytest.raises(DataError, match="line 1"):
            screening.read_records(p)

    def test_bad_record_rejected(self, tmp_path):
        p = tmp_path / "records.jsonl"
        p.write_text('{"person_id": 3}\n')
        with pytest.raises(DataError):
            screening.read_records(p)


@pytest.fixture(scope="module")
def rig():
    spec = synthetic.SceneSpec.walkway(focal_ratio=1.0)
    calib = fusion.calibration_for_scene(spec, sweep_range_px=36.0,
                                         sweep_step_px=4.0)
    det, sdet = fusion.standard_detectors(spec)
    model = fusion.fit_scene_regressor(spec, n=80, seed=7, jitter_px=0.5)
    comp = CompensationModel(synthetic.CANTHUS_SLOPE_C_PER_FT, (4.0, 15.0))
    return spec, calib, det, sdet, model, comp


def screen_scene(rig, seed, fever):
    spec, calib, det, sdet, model, comp = rig
    rng = np.random.default_rng(np.random.SeedSequence([909, seed]))
    d = rng.uniform(*spec.dist_range)
    o = rng.uniform(*spec.offset_range)
    h = rng.uniform(*spec.height_range)
    rgb, counts, _, _ = synthetic.render_scene_pair(rng, spec, d, o, h, fever)
    result = screening.screen_frame_pair(
        rgb, ThermalFrame(counts), synthetic.inverse_thermal_tile, calib,
        det, model, comp, synth_detector=sdet)
    return result, d


class TestScreenFramePair:
    def test_healthy_person_not_flagged(self, rig):
        result, d = screen_scene(rig, 1, fever=False)
        assert len(result.records) == 1
        rec = result.records[0]
        assert not rec.fever
        # generator writes the canthus spot at base - slope*d exactly
        want = synthetic.CANTHUS_BASE_C - synthetic.CANTHUS_SLOPE_C_PER_FT * d
        assert abs(rec.t_meas_c - want) <= 0.05

    def test_fever_flagged_and_compensation_identity(self, rig):
        comp = rig[5]
        result, _ = screen_scene(rig, 2, fever=True)
        rec = result.records[0]
        assert rec.fever
        assert abs(rec.t_comp_c
                   - (rec.t_meas_c + comp.kappa_c_per_ft * rec.d_ft)) <= 1e-9
        assert rec.t_comp_c >= rec.t_meas_c

    def test_compensation_restores_base_temperature(self, rig):
        # measured loses slope*d; compensating with the matching kappa and
        # the *estimated* distance lands near the distance-free temperature
        result, _ = screen_scene(rig, 3, fever=False)
        rec = result.records[0]
        assert abs(rec.t_comp_c - synthetic.CANTHUS_BASE_C) <= 0.15

    def test_empty_scene_empty_records(self, rig):
        spec, calib, det, sdet, model, comp = rig
        rgb = np.full((spec.frame_h, spec.frame_w, 3),
                      synthetic.BACKGROUND_RGB, dtype=np.uint8)
        counts = np.full((spec.frame_h, spec.frame_w), 3000, dtype=np.uint16)
        result = screening.screen_frame_pair(
            rgb, ThermalFrame(counts), synthetic.inverse_thermal_tile, calib,
            det, model, comp, synth_detector=sdet)
        assert result.records == [] and result.skipped == []

    def test_deterministic(self, rig):
        a, _ = screen_scene(rig, 4, fever=True)
        b, _ = screen_scene(rig, 4, fever=True)
        assert a.records == b.records

    def test_visual_photometry_does_not_change_temperature(self, rig):
        # same thermal raster, visual frame rendered at different brightness:
        # detection survives, temperature comes solely from the counts
        spec, calib, det, sdet, model, comp = rig
        rng = np.random.default_rng(np.random.SeedSequence([909, 5]))
        d = rng.uniform(*spec.dist_range)
        o = rng.uniform(*spec.offset_range)
        h = rng.uniform(*spec.height_range)
        rgb, counts, _, _ = synthetic.render_scene_pair(rng, spec, d, o, h,
                                                        False)
        dim = np.clip(rgb.astype(np.float64) * 0.9, 0,
                      255).astype(np.uint8)
        base = screening.screen_frame_pair(
            rgb, ThermalFrame(counts), synthetic.inverse_thermal_tile, calib,
            det, model, comp, synth_detector=sdet)
        dimmed = screening.screen_frame_pair(
            dim, ThermalFrame(counts), synthetic.inverse_thermal_tile, calib,
            det, model, comp, synth_detector=sdet)
        assert len(base.records) == len(dimmed.records) == 1
        assert dimmed.records[0].t_meas_c == base.records[0].t_meas_c
        assert dimmed.records[0].fever == base.records[0].fever
