"""Disparity vectors and the linear depth/offset regressor.

Per-landmark displacement between the visual detection and the chosen
thermal candidate is summarized as n Euclidean magnitudes followed by n
four-quadrant angles. Distance and lateral offset are each a linear function
of that vector, fit by least squares through a QR decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import dataio
from ..errors import DataError


def disparity_vector(pts_y: np.ndarray, pts_hat: np.ndarray) -> np.ndarray:
    """Stack displacement magnitudes then angles -> z of length 2n.

    Entry j is the Euclidean distance between point pair j; entry n+j is the
    four-quadrant angle of the displacement (hat - y), in (-pi, pi], with a
    zero displacement assigned angle 0.
    """
    a = np.asarray(pts_y, dtype=np.float64)
    b = np.asarray(pts_hat, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 2 or a.shape[0] < 1:
        raise DataError(f"need matching (n, 2) point sets, got "
                        f"{a.shape} and {b.shape}")
    delta = b - a
    mags = np.hypot(delta[:, 0], delta[:, 1])
    angles = np.arctan2(delta[:, 1], delta[:, 0])
    angles = np.where(angles == -np.pi, np.pi, angles)
    return np.concatenate([mags, angles])


@dataclass(frozen=True)
class LinearFit:
    """One least-squares solution: intercept-first coefficients + residuals."""

    coef: np.ndarray          # (m + 1,), coef[0] is the intercept
    residual_mean: float
    residual_std: float

    def predict(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.coef.size - 1,):
            raise DataError(f"feature length {z.shape} does not match "
                            f"{self.coef.size - 1} coefficients")
        return float(self.coef[0] + self.coef[1:] @ z)


def fit_regressor(Z: np.ndarray, targets: np.ndarray) -> LinearFit:
    """Least squares with intercept via QR; rejects rank-deficient designs."""
    Z = np.asarray(Z, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if Z.ndim != 2 or t.shape != (Z.shape[0],):
        raise DataError(f"need (rows, m) features and (rows,) targets, got "
                        f"{Z.shape} and {t.shape}")
    rows, m = Z.shape
    if rows < m + 1:
        raise DataError(f"need at least {m + 1} rows to fit {m} features "
                        f"plus intercept, got {rows}")
    if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(t))):
        raise DataError("features and targets must be finite")
    A = np.column_stack([np.ones(rows), Z])
    q, r = np.linalg.qr(A)
    diag = np.abs(np.diag(r))
    if diag.min() <= diag.max() * 1e-12:
        cond = np.inf if diag.min() == 0.0 else diag.max() / diag.min()
        raise DataError(f"rank-deficient design matrix "
                        f"(triangular condition ~{cond:.3e})")
    coef = np.linalg.solve(r, q.T @ t)
    resid = t - A @ coef
    return LinearFit(coef=coef, residual_mean=float(resid.mean()),
                     residual_std=float(np.sqrt(np.mean(resid * resid))))


@dataclass(frozen=True)
class RegressorModel:
    """Distance and offset fits plus the training envelope.

    ``z_min`` / ``z_max`` record the per-coordinate hull of the training
    disparity vectors; predictions outside it (or outside the trained
    distance range) are flagged as extrapolated rather than rejected.
    """

    distance: LinearFit
    offset: LinearFit
    z_min: np.ndarray
    z_max: np.ndarray
    d_range: tuple[float, float]

    @property
    def n_features(self) -> int:
        return self.distance.coef.size - 1

    def to_dict(self) -> dict:
        return {"w": self.distance.coef.tolist(),
                "u": self.offset.coef.tolist(),
                "residual_d": {"mean": self.distance.residual_mean,
                               "std": self.distance.residual_std},
                "residual_o": {"mean": self.offset.residual_mean,
                               "std": self.offset.residual_std},
                "z_min": self.z_min.tolist(), "z_max": self.z_max.tolist(),
                "d_range": [self.d_range[0], self.d_range[1]]}

    @staticmethod
    def from_dict(obj: dict) -> "RegressorModel":
        try:
            dist = LinearFit(np.asarray(obj["w"], dtype=np.float64),
                             float(obj["residual_d"]["mean"]),
                             float(obj["residual_d"]["std"]))
            off = LinearFit(np.asarray(obj["u"], dtype=np.float64),
                            float(obj["residual_o"]["mean"]),
                            float(obj["residual_o"]["std"]))
            model = RegressorModel(
                dist, off,
                z_min=np.asarray(obj["z_min"], dtype=np.float64),
                z_max=np.asarray(obj["z_max"], dtype=np.float64),
                d_range=(float(obj["d_range"][0]), float(obj["d_range"][1])))
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise DataError(f"bad regressor payload: {exc}") from exc
        if (model.offset.coef.size != model.distance.coef.size
                or model.z_min.size != model.n_features
                or model.z_max.size != model.n_features):
            raise DataError("regressor coefficient/hull lengths disagree")
        return model

    def save(self, path) -> None:
        dataio.write_json(path, self.to_dict())

    @staticmethod
    def load(path) -> "RegressorModel":
        return RegressorModel.from_dict(dataio.read_json(path))


def fit_pose_regressor(Z: np.ndarray, dists: np.ndarray,
                       offsets: np.ndarray) -> RegressorModel:
    """Fit both heads on one design matrix and record the training hull."""
    Z = np.asarray(Z, dtype=np.float64)
    d = np.asarray(dists, dtype=np.float64)
    return RegressorModel(distance=fit_regressor(Z, d),
                          offset=fit_regressor(Z, offsets),
                          z_min=Z.min(axis=0), z_max=Z.max(axis=0),
                          d_range=(float(d.min()), float(d.max())))


@dataclass(frozen=True)
class PoseEstimate:
    d: float            # distance from the rig, feet
    o: float            # lateral offset, feet
    extrapolated: bool  # z left the training hull or d the trained range


def estimate_position(z: np.ndarray, model: RegressorModel) -> PoseEstimate:
    """Apply both linear heads and flag departures from the training data."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (model.n_features,):
        raise DataError(f"disparity vector length {z.shape} does not match "
                        f"the {model.n_features}-feature model")
    d = model.distance.predict(z)
    o = model.offset.predict(z)
    outside_hull = bool(np.any(z < model.z_min) or np.any(z > model.z_max))
    outside_range = not (model.d_range[0] <= d <= model.d_range[1])
    return PoseEstimate(d=d, o=o, extrapolated=outside_hull or outside_range)
