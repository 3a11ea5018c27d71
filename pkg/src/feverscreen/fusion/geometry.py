"""Boxes, camera calibration, and the thermal candidate sweep.

A visual-frame detection is carried into the thermal frame by scaling with
the focal-length ratio and sliding horizontally through a disparity sweep
centered on the nominal cross-camera offset. Clipping keeps every candidate
inside the thermal frame; candidates that vanish entirely are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import dataio
from ..errors import ConfigError, DataError

CALIB_KEYS = ("f_y", "f_x", "r_y", "r_x", "baseline_ft", "b_hat_px",
              "sweep_range_px", "sweep_step_px")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, top-left origin, pixel units (floats allowed)."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise DataError(f"box needs positive size, got {self.w}x{self.h}")

    @property
    def center(self) -> tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    def clip(self, frame_w: float, frame_h: float) -> "BBox | None":
        """Intersection with the frame rectangle; None when empty."""
        x0, y0 = max(self.x, 0.0), max(self.y, 0.0)
        x1 = min(self.x + self.w, float(frame_w))
        y1 = min(self.y + self.h, float(frame_h))
        if x1 - x0 <= 0.0 or y1 - y0 <= 0.0:
            return None
        return BBox(x0, y0, x1 - x0, y1 - y0)


@dataclass(frozen=True)
class CameraCalib:
    """Rig description: focal lengths, frame sizes, and the disparity sweep.

    ``r_y`` / ``r_x`` are (width, height) of the visual and thermal frames.
    ``b_hat_px`` is the nominal horizontal pixel offset between a focal-ratio
    scaled visual box and its thermal counterpart; the sweep explores
    ``b_hat_px ± sweep_range_px`` at ``sweep_step_px`` spacing.
    """

    f_y: float
    f_x: float
    r_y: tuple[int, int]
    r_x: tuple[int, int]
    baseline_ft: float
    b_hat_px: float
    sweep_range_px: float = 12.0
    sweep_step_px: float = 4.0

    def __post_init__(self):
        if not (self.f_y > 0 and self.f_x > 0):
            raise ConfigError(f"focal lengths must be positive, got "
                              f"({self.f_y}, {self.f_x})")
        for tag, res in (("r_y", self.r_y), ("r_x", self.r_x)):
            if len(res) != 2 or res[0] <= 0 or res[1] <= 0:
                raise ConfigError(f"{tag} must be positive (w, h), got {res}")
        if self.sweep_step_px <= 0:
            raise ConfigError(f"sweep step must be positive, "
                              f"got {self.sweep_step_px}")
        if self.sweep_range_px < 0:
            raise ConfigError(f"sweep range must be non-negative, "
                              f"got {self.sweep_range_px}")

    def to_dict(self) -> dict:
        return {"f_y": self.f_y, "f_x": self.f_x,
                "r_y": list(self.r_y), "r_x": list(self.r_x),
                "baseline_ft": self.baseline_ft, "b_hat_px": self.b_hat_px,
                "sweep_range_px": self.sweep_range_px,
                "sweep_step_px": self.sweep_step_px}

    @staticmethod
    def from_dict(obj: dict) -> "CameraCalib":
        if not isinstance(obj, dict):
            raise DataError("calibration must be a JSON object")
        missing = [k for k in CALIB_KEYS if k not in obj]
        unknown = [k for k in obj if k not in CALIB_KEYS]
        if missing or unknown:
            raise DataError(f"bad calibration keys: missing {missing}, "
                            f"unknown {unknown}")
        return CameraCalib(
            f_y=float(obj["f_y"]), f_x=float(obj["f_x"]),
            r_y=(int(obj["r_y"][0]), int(obj["r_y"][1])),
            r_x=(int(obj["r_x"][0]), int(obj["r_x"][1])),
            baseline_ft=float(obj["baseline_ft"]),
            b_hat_px=float(obj["b_hat_px"]),
            sweep_range_px=float(obj["sweep_range_px"]),
            sweep_step_px=float(obj["sweep_step_px"]))

    def save(self, path) -> None:
        dataio.write_json(path, self.to_dict())

    @staticmethod
    def load(path) -> "CameraCalib":
        return CameraCalib.from_dict(dataio.read_json(path))


@dataclass(frozen=True)
class Candidate:
    """One sweep position: the signed disparity and the clipped box."""

    disparity: float
    box: BBox


def map_bbox(b_y: BBox, calib: CameraCalib, disparity: float) -> BBox | None:
    """Visual box -> thermal box at one disparity; None when clipped away.

    All four coordinates scale by the focal ratio, then the box slides
    horizontally by ``disparity`` pixels and is clipped to the thermal frame.
    """
    f = calib.f_x / calib.f_y
    moved = BBox(b_y.x * f + disparity, b_y.y * f, b_y.w * f, b_y.h * f)
    return moved.clip(*calib.r_x)


def sweep_disparities(calib: CameraCalib) -> np.ndarray:
    """Sweep positions b_hat - range ... b_hat + range at the step."""
    offsets = np.arange(-calib.sweep_range_px,
                        calib.sweep_range_px + calib.sweep_step_px / 2.0,
                        calib.sweep_step_px)
    return calib.b_hat_px + offsets


def propose_candidates(b_y: BBox, calib: CameraCalib) -> list[Candidate]:
    """Thermal candidates for a visual box; empty list if all clip away."""
    out = []
    for disp in sweep_disparities(calib):
        box = map_bbox(b_y, calib, float(disp))
        if box is not None:
            out.append(Candidate(float(disp), box))
    return out


def expand_to_common_size(b_y: BBox, b_x: BBox,
                          frame_y: tuple[int, int],
                          frame_x: tuple[int, int]) -> tuple[BBox, BBox]:
    """Grow both boxes about their centers to the elementwise max size.

    Each grown box is clipped to its own frame; a box that clipping reduces
    to nothing is rejected. Crops taken from the results are resampled to a
    common raster later, so a clip-induced size mismatch is harmless.
    """
    tw = max(b_y.w, b_x.w)
    th = max(b_y.h, b_x.h)
    out = []
    for box, frame in ((b_y, frame_y), (b_x, frame_x)):
        cx, cy = box.center
        grown = BBox(cx - tw / 2.0, cy - th / 2.0, tw, th)
        clipped = grown.clip(*frame)
        if clipped is None:
            raise DataError(f"expanded box {grown} degenerate in frame {frame}")
        out.append(clipped)
    return out[0], out[1]


def crop_unit(frame_unit: np.ndarray, box: BBox,
              tile_size: int) -> tuple[np.ndarray, tuple[int, int, int, int]]:
    """Cut ``box`` from a (3, H, W) unit frame and resample to a square tile.

    Returns the tile and the integer pixel rect (x0, y0, w, h) actually cut,
    which is what maps tile coordinates back into the frame.
    """
    _, fh, fw = frame_unit.shape
    x0 = max(int(np.floor(box.x)), 0)
    y0 = max(int(np.floor(box.y)), 0)
    x1 = min(int(np.ceil(box.x + box.w)), fw)
    y1 = min(int(np.ceil(box.y + box.h)), fh)
    if x1 - x0 < 1 or y1 - y0 < 1:
        raise DataError(f"box {box} leaves an empty crop")
    crop = frame_unit[:, y0:y1, x0:x1]
    tile = dataio.resize_bilinear(crop, tile_size, tile_size)
    return tile, (x0, y0, x1 - x0, y1 - y0)


def tile_points_to_frame(points: np.ndarray,
                         rect: tuple[int, int, int, int],
                         tile_size: int) -> np.ndarray:
    """Map (k, 2) tile (x, y) points back to frame coordinates.

    Inverts the half-pixel-center resampling of :func:`crop_unit`: tile
    coordinate p lands at rect origin + (p + 0.5) * rect_size / tile - 0.5.
    """
    x0, y0, w, h = rect
    pts = np.asarray(points, dtype=np.float64)
    out = np.empty_like(pts)
    out[:, 0] = x0 + (pts[:, 0] + 0.5) * (w / tile_size) - 0.5
    out[:, 1] = y0 + (pts[:, 1] + 0.5) * (h / tile_size) - 0.5
    return out


def calibration_for_scene(scene, sweep_range_px: float = 12.0,
                          sweep_step_px: float = 4.0,
                          nominal_d: float | None = None) -> CameraCalib:
    """Build the rig calibration implied by a synthetic scene description.

    The nominal offset is the horizontal displacement between a focal-ratio
    scaled visual face box and the thermal face box for a person standing at
    ``nominal_d`` (default: mid working range) — which is independent of the
    person's lateral position, since scaling multiplies out the lateral term.
    """
    if nominal_d is None:
        nominal_d = 0.5 * (scene.dist_range[0] + scene.dist_range[1])
    ratio = scene.f_x / scene.f_y
    cx = scene.frame_w / 2.0
    b_hat = (cx * (1.0 - ratio) + scene.thermal_cx_shift
             - scene.f_x * scene.baseline_ft / nominal_d)
    res = (scene.frame_w, scene.frame_h)
    return CameraCalib(f_y=scene.f_y, f_x=scene.f_x, r_y=res, r_x=res,
                       baseline_ft=scene.baseline_ft, b_hat_px=b_hat,
                       sweep_range_px=sweep_range_px,
                       sweep_step_px=sweep_step_px)


def true_box_disparity(scene, d: float) -> float:
    """Ground-truth sweep disparity for a person at distance ``d`` (feet)."""
    ratio = scene.f_x / scene.f_y
    cx = scene.frame_w / 2.0
    return (cx * (1.0 - ratio) + scene.thermal_cx_shift
            - scene.f_x * scene.baseline_ft / d)
