"""Fever screening on fused frame pairs.

The thermal camera exports 16-bit raw counts plus a linear calibration
(temperature = gain * counts + offset). Screening a frame pair composes the
cross-spectral association with three small steps: read the temperature as
the windowed maximum around the two inner-canthus landmarks, compensate the
distance-driven attenuation linearly (T_comp = T_meas + kappa * d), and
compare against a configurable fever threshold. Accuracy bookkeeping uses
plain confusion counts; reported percentages truncate to one decimal, which
is how screening-station dashboards conventionally round down rather than
overstate accuracy.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import synthetic
from .errors import ConfigError, DataError
from .fusion import BBox, associate_frames

CANTHUS_INDICES = synthetic.CANTHUS_INDICES
DEFAULT_FEVER_THRESHOLD_C = 38.0
SANITY_BAND_C = (0.0, 60.0)


@dataclass(frozen=True)
class ThermalFrame:
    """Raw counts raster plus its counts -> Celsius calibration."""

    counts: np.ndarray
    gain_c: float = synthetic.THERMAL_GAIN_C
    offset_c: float = synthetic.THERMAL_OFFSET_C

    def __post_init__(self):
        if not isinstance(self.counts, np.ndarray) \
                or self.counts.dtype != np.uint16 or self.counts.ndim != 2:
            raise DataError(f"thermal frame needs uint16 (h, w) counts, got "
                            f"{getattr(self.counts, 'dtype', None)} "
                            f"{getattr(self.counts, 'shape', None)}")
        if self.gain_c <= 0.0:
            raise ConfigError(f"thermal gain must be positive, got {self.gain_c}")

    def temperature(self) -> np.ndarray:
        """Whole-raster mapped temperatures, °C."""
        return self.gain_c * self.counts.astype(np.float64) + self.offset_c

    @property
    def in_band(self) -> bool:
        """True when every mapped temperature is physically plausible."""
        t = self.temperature()
        return bool(t.min() >= SANITY_BAND_C[0] and t.max() <= SANITY_BAND_C[1])


def read_canthus_temperature(frame: ThermalFrame, landmarks: np.ndarray,
                             canthus_indices=CANTHUS_INDICES,
                             r: int = 1) -> float:
    """Max mapped temperature over (2r+1)^2 windows at the canthus marks.

    The max over a small window tolerates a pixel of landmark error without
    attenuating the peak the way a mean would.
    """
    return _canthus_read(frame, landmarks, canthus_indices, r)[0]


def _canthus_read(frame, landmarks, canthus_indices, r):
    """(temperature, window center of the hotter canthus)."""
    pts = np.asarray(landmarks, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DataError(f"landmarks must be (k, 2), got {pts.shape}")
    if r < 0:
        raise ConfigError(f"window radius must be non-negative, got {r}")
    h, w = frame.counts.shape
    best, site = -np.inf, (0, 0)
    for idx in canthus_indices:
        x, y = pts[idx]
        cx, cy = int(round(x)), int(round(y))
        if cx - r < 0 or cy - r < 0 or cx + r >= w or cy + r >= h:
            raise DataError(f"canthus window at ({cx}, {cy}) radius {r} "
                            f"leaves the {w}x{h} frame")
        window = frame.counts[cy - r:cy + r + 1, cx - r:cx + r + 1]
        peak = float(window.max())
        if peak > best:
            best, site = peak, (cx, cy)
    return frame.gain_c * best + frame.offset_c, site


@dataclass(frozen=True)
class CompensationModel:
    """Linear distance compensation: T_comp = T_meas + kappa * d."""

    kappa_c_per_ft: float
    d_range: tuple[float, float]

    def __post_init__(self):
        if not self.d_range[0] < self.d_range[1]:
            raise ConfigError(f"compensation range must be non-empty, "
                              f"got {self.d_range}")

    def in_range(self, d: float) -> bool:
        return self.d_range[0] <= d <= self.d_range[1]

    def to_dict(self) -> dict:
        return {"kappa_c_per_ft": self.kappa_c_per_ft,
                "d_range": [self.d_range[0], self.d_range[1]]}

    @staticmethod
    def from_dict(obj: dict) -> "CompensationModel":
        try:
            return CompensationModel(
                kappa_c_per_ft=float(obj["kappa_c_per_ft"]),
                d_range=(float(obj["d_range"][0]), float(obj["d_range"][1])))
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise DataError(f"bad compensation payload: {exc}") from exc


def compensate_temperature(t_meas_c: float, d_ft: float,
                           model: CompensationModel) -> float:
    if d_ft < 0.0:
        raise DataError(f"distance must be non-negative, got {d_ft}")
    return t_meas_c + model.kappa_c_per_ft * d_ft


def fit_compensation(d_ft: np.ndarray, t_meas_c: np.ndarray) -> CompensationModel:
    """Calibrate kappa from repeated reads of a constant-temperature source.

    Measured temperature decays with distance; the fitted slope of the
    least-squares line, negated, is the compensation coefficient.
    """
    d = np.asarray(d_ft, dtype=np.float64)
    t = np.asarray(t_meas_c, dtype=np.float64)
    if d.shape != t.shape or d.ndim != 1 or d.size < 2:
        raise DataError(f"need matching 1-D samples (>= 2), got "
                        f"{d.shape} and {t.shape}")
    if d.min() == d.max():
        raise DataError("calibration sweep needs at least two distances")
    slope, _ = np.polyfit(d, t, 1)
    return CompensationModel(kappa_c_per_ft=float(-slope),
                             d_range=(float(d.min()), float(d.max())))


def classify_fever(t_comp_c: float,
                   threshold_c: float = DEFAULT_FEVER_THRESHOLD_C) -> bool:
    if not math.isfinite(threshold_c):
        raise ConfigError(f"fever threshold must be finite, got {threshold_c}")
    return t_comp_c >= threshold_c


# ---------------------------------------------------------------------------
# per-person records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PersonRecord:
    person_id: int
    visual_box: BBox
    thermal_box: BBox
    canthus_xy: tuple[float, float]   # thermal frame coordinates
    t_meas_c: float
    d_ft: float
    o_ft: float
    t_comp_c: float
    fever: bool

    def to_dict(self) -> dict:
        box = lambda b: [b.x, b.y, b.w, b.h]
        return {"person_id": self.person_id,
                "visual_box": box(self.visual_box),
                "thermal_box": box(self.thermal_box),
                "canthus_xy": list(self.canthus_xy),
                "t_meas_c": self.t_meas_c, "d_ft": self.d_ft,
                "o_ft": self.o_ft, "t_comp_c": self.t_comp_c,
                "fever": self.fever}

    @staticmethod
    def from_dict(obj: dict) -> "PersonRecord":
        try:
            return PersonRecord(
                person_id=int(obj["person_id"]),
                visual_box=BBox(*obj["visual_box"]),
                thermal_box=BBox(*obj["thermal_box"]),
                canthus_xy=(float(obj["canthus_xy"][0]),
                            float(obj["canthus_xy"][1])),
                t_meas_c=float(obj["t_meas_c"]), d_ft=float(obj["d_ft"]),
                o_ft=float(obj["o_ft"]), t_comp_c=float(obj["t_comp_c"]),
                fever=bool(obj["fever"]))
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise DataError(f"bad person record: {exc}") from exc


def write_records(path, records) -> None:
    """JSON-lines, one person record per line, key-sorted for bit-exactness."""
    lines = [json.dumps(r.to_dict(), sort_keys=True) for r in records]
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_records(path) -> list[PersonRecord]:
    out = []
    for i, line in enumerate(Path(path).read_text().splitlines()):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"line {i + 1} is not JSON: {exc}") from exc
        out.append(PersonRecord.from_dict(obj))
    return out


@dataclass(frozen=True)
class ScreeningResult:
    records: list[PersonRecord]
    skipped: list            # SkippedObject entries from the association


def screen_frame_pair(visual_rgb: np.ndarray, thermal: ThermalFrame, synth,
                      calib, detector, regressor,
                      compensation: CompensationModel,
                      threshold_c: float = DEFAULT_FEVER_THRESHOLD_C,
                      read_radius: int = 1, box_source=None,
                      synth_detector=None) -> ScreeningResult:
    """Associate, read canthus temperature, compensate, classify.

    One record per associated person, ids in detection order; association
    skips pass through with their reasons.
    """
    assoc = associate_frames(visual_rgb, thermal.counts, synth, calib,
                             detector, regressor, box_source=box_source,
                             synth_detector=synth_detector)
    records = []
    for pid, ob in enumerate(assoc.objects):
        t_meas, site = _canthus_read(thermal, ob.pts_thermal,
                                     CANTHUS_INDICES, read_radius)
        t_comp = compensate_temperature(t_meas, max(ob.d, 0.0), compensation)
        records.append(PersonRecord(
            person_id=pid, visual_box=ob.visual_box,
            thermal_box=ob.thermal_box,
            canthus_xy=(float(site[0]), float(site[1])),
            t_meas_c=t_meas, d_ft=ob.d, o_ft=ob.o, t_comp_c=t_comp,
            fever=classify_fever(t_comp, threshold_c)))
    return ScreeningResult(records=records, skipped=assoc.skipped)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for tag, v in (("tp", self.tp), ("fp", self.fp),
                       ("tn", self.tn), ("fn", self.fn)):
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise DataError(f"{tag} must be a non-negative integer, got {v}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def accuracy(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise DataError("accuracy of an empty confusion matrix")
    return (c.tp + c.tn) / c.total


def format_accuracy(fraction: float) -> str:
    """Percentage truncated (not rounded) to one decimal, e.g. '81.6%'."""
    if not 0.0 <= fraction <= 1.0:
        raise DataError(f"accuracy fraction out of [0, 1]: {fraction}")
    return f"{math.floor(fraction * 1000.0) / 10.0:.1f}%"


def confusion_from_flags(predicted, actual) -> ConfusionCounts:
    p = [bool(v) for v in predicted]
    a = [bool(v) for v in actual]
    if len(p) != len(a):
        raise DataError(f"prediction/truth length mismatch: "
                        f"{len(p)} vs {len(a)}")
    tp = sum(1 for x, y in zip(p, a) if x and y)
    fp = sum(1 for x, y in zip(p, a) if x and not y)
    tn = sum(1 for x, y in zip(p, a) if not x and not y)
    fn = sum(1 for x, y in zip(p, a) if not x and y)
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def read_eval_csv(path) -> ConfusionCounts:
    """CSV with header record_id,predicted,actual; flags are 0 or 1."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows or rows[0] != ["record_id", "predicted", "actual"]:
        raise DataError(f"expected header record_id,predicted,actual, "
                        f"got {rows[0] if rows else 'empty file'}")
    pred, act = [], []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 3 or row[1] not in ("0", "1") or row[2] not in ("0", "1"):
            raise DataError(f"line {i}: expected id,0|1,0|1 — got {row}")
        pred.append(row[1] == "1")
        act.append(row[2] == "1")
    if not pred:
        raise DataError("evaluation file has no data rows")
    return confusion_from_flags(pred, act)
