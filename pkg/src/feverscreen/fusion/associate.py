"""Cross-spectral object association.

For each visual face box: sweep thermal candidates, expand each pair to a
common size, synthesize a visual-like tile from the thermal crop, and score
the candidate by the mean Euclidean residual between landmarks found on the
real visual crop and on the synthesized crop. The winning candidate's
landmark displacement field becomes the disparity vector feeding the pose
regressor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import dataio, synthetic
from ..errors import DataError
from ..gan.landmarks import TemplateLandmarkDetector
from .geometry import (BBox, CameraCalib, crop_unit, expand_to_common_size,
                       propose_candidates, tile_points_to_frame)
from .regression import (RegressorModel, disparity_vector, estimate_position,
                         fit_pose_regressor)


@dataclass(frozen=True)
class AssociatedObject:
    """One visual detection resolved into the thermal frame."""

    visual_box: BBox
    thermal_box: BBox
    disparity: float          # sweep position of the chosen candidate
    pts_visual: np.ndarray    # (k, 2) landmarks, visual frame coordinates
    pts_thermal: np.ndarray   # (k, 2) landmarks, thermal frame coordinates
    z: np.ndarray             # disparity vector, length 2k
    d: float                  # estimated distance, feet
    o: float                  # estimated lateral offset, feet
    extrapolated: bool
    score: float              # mean landmark residual of the winner, px


@dataclass(frozen=True)
class SkippedObject:
    visual_box: BBox
    reason: str


@dataclass(frozen=True)
class AssociationResult:
    objects: list[AssociatedObject]
    skipped: list[SkippedObject]


def associate_frames(visual_rgb: np.ndarray, thermal_counts: np.ndarray,
                     synth, calib: CameraCalib, detector,
                     regressor: RegressorModel, box_source=None,
                     tile_size: int = 64,
                     synth_detector=None) -> AssociationResult:
    """Run the full association pipeline over one frame pair.

    ``synth`` maps a (3, t, t) unit thermal tile to a visual-like unit tile;
    ``detector`` provides ``detect(tile) -> points/scores/found``;
    ``box_source`` yields (x, y, w, h) face boxes on the visual frame
    (default: the synthetic skin-blob proposer). When the synthesizer's
    output has its own appearance quirks, ``synth_detector`` supplies a
    detector matched to that domain for the synthesized crops; the default
    reuses ``detector`` on both sides.
    """
    fh, fw = visual_rgb.shape[:2]
    if (fw, fh) != tuple(calib.r_y):
        raise DataError(f"visual frame {fw}x{fh} does not match "
                        f"calibration {calib.r_y}")
    th_h, th_w = thermal_counts.shape
    if (th_w, th_h) != tuple(calib.r_x):
        raise DataError(f"thermal frame {th_w}x{th_h} does not match "
                        f"calibration {calib.r_x}")
    vis_unit = dataio.visual_to_unit(visual_rgb)
    th_unit = dataio.thermal_to_unit(thermal_counts)
    if box_source is None:
        box_source = synthetic.blob_face_boxes

    if synth_detector is None:
        synth_detector = detector

    objects, skipped = [], []
    for raw in box_source(visual_rgb):
        b_y = raw if isinstance(raw, BBox) else BBox(*raw)
        outcome = _associate_one(vis_unit, th_unit, b_y, synth, calib,
                                 detector, synth_detector, regressor,
                                 tile_size)
        if isinstance(outcome, SkippedObject):
            skipped.append(outcome)
        else:
            objects.append(outcome)
    return AssociationResult(objects, skipped)


def associate(visual_rgb: np.ndarray, thermal_counts: np.ndarray, synth,
              calib: CameraCalib, detector, regressor: RegressorModel,
              box_source=None, tile_size: int = 64,
              synth_detector=None) -> list[AssociatedObject]:
    """Successful associations only; see :func:`associate_frames`."""
    return associate_frames(visual_rgb, thermal_counts, synth, calib,
                            detector, regressor, box_source, tile_size,
                            synth_detector).objects


def _associate_one(vis_unit, th_unit, b_y, synth, calib, detector,
                   synth_detector, regressor, tile_size):
    candidates = propose_candidates(b_y, calib)
    if not candidates:
        return SkippedObject(b_y, "all thermal candidates clipped away")

    frame_y = calib.r_y
    frame_x = calib.r_x
    visual_cache: dict = {}   # integer rect -> detection on that crop
    visual_found = False
    best = None
    for cand in candidates:
        eb_y, eb_x = expand_to_common_size(b_y, cand.box, frame_y, frame_x)
        vis_tile, rect_y = crop_unit(vis_unit, eb_y, tile_size)
        if rect_y not in visual_cache:
            visual_cache[rect_y] = detector.detect(vis_tile)
        r_vis = visual_cache[rect_y]
        if not r_vis.found:
            continue
        visual_found = True
        th_tile, rect_x = crop_unit(th_unit, eb_x, tile_size)
        r_syn = synth_detector.detect(synth(th_tile))
        if not r_syn.found:
            continue
        score = float(np.mean(np.linalg.norm(r_vis.points - r_syn.points,
                                             axis=1)))
        if best is None or score < best[0]:
            best = (score, cand, r_vis, r_syn, rect_y, rect_x)

    if best is None:
        reason = ("no landmarks on the visual crop" if not visual_found
                  else "all candidates featureless")
        return SkippedObject(b_y, reason)

    score, cand, r_vis, r_syn, rect_y, rect_x = best
    pts_y = tile_points_to_frame(r_vis.points, rect_y, tile_size)
    pts_x = tile_points_to_frame(r_syn.points, rect_x, tile_size)
    z = disparity_vector(pts_y, pts_x)
    est = estimate_position(z, regressor)
    return AssociatedObject(visual_box=b_y, thermal_box=cand.box,
                            disparity=cand.disparity, pts_visual=pts_y,
                            pts_thermal=pts_x, z=z, d=est.d, o=est.o,
                            extrapolated=est.extrapolated, score=score)


def standard_detectors(spec, tile_size: int = 64,
                       presence_threshold: float = 0.30,
                       search_radius: float = 10.0):
    """(visual, synthesis-domain) landmark detectors for association crops.

    Association crops are layout-normalized (the face fills the crop at a
    fixed proportion), so each landmark's peak search can be confined to a
    window around its canonical tile position; that stops a template from
    latching onto a lookalike glyph elsewhere on the face. The synthesized
    side gets templates cut from the synthesis stub's own output. The
    presence threshold sits below the weakest genuine landmark response on
    in-range scenes while flat or misaligned crops stay rejected.
    """
    canon = synthetic.render_canonical_tile(tile_size)[1]
    detector = TemplateLandmarkDetector(
        synthetic.landmark_templates(tile_size),
        presence_threshold=presence_threshold,
        search_centers=canon, search_radius=search_radius)
    synth_detector = TemplateLandmarkDetector(
        synthetic.synth_landmark_templates(spec, tile_size),
        presence_threshold=presence_threshold,
        search_centers=canon, search_radius=search_radius)
    return detector, synth_detector


def fit_scene_regressor(spec, n: int = 200, seed: int = 7,
                        jitter_px: float = 0.0) -> RegressorModel:
    """Fit the pose regressor on exact mark projections of a scene family.

    ``jitter_px`` adds sub-pixel measurement jitter to the projected marks.
    A rig with equal focal lengths produces displacement angles with zero
    variance (every displacement is horizontal), which the fit's rank check
    rejects; a fraction-of-a-pixel jitter restores full rank there.
    """
    rng = np.random.default_rng(seed)
    Z, ds, os_ = [], [], []
    for _ in range(n):
        d = rng.uniform(*spec.dist_range)
        o = rng.uniform(*spec.offset_range)
        h = rng.uniform(*spec.height_range)
        pts_y, pts_x = synthetic.project_landmarks(spec, d, o, h)
        if jitter_px > 0.0:
            pts_y = pts_y + rng.normal(0.0, jitter_px, pts_y.shape)
            pts_x = pts_x + rng.normal(0.0, jitter_px, pts_x.shape)
        Z.append(disparity_vector(pts_y, pts_x))
        ds.append(d)
        os_.append(o)
    return fit_pose_regressor(np.asarray(Z), np.asarray(ds), np.asarray(os_))
