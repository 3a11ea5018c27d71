"""Cross-spectral association and pose regression."""

from .associate import (AssociatedObject, AssociationResult, SkippedObject,
                        associate, associate_frames, fit_scene_regressor,
                        standard_detectors)
from .geometry import (BBox, CameraCalib, Candidate, calibration_for_scene,
                       crop_unit, expand_to_common_size, map_bbox,
                       propose_candidates, sweep_disparities,
                       tile_points_to_frame, true_box_disparity)
from .regression import (LinearFit, PoseEstimate, RegressorModel,
                         disparity_vector, estimate_position, fit_regressor,
                         fit_pose_regressor)

__all__ = [
    "AssociatedObject", "AssociationResult", "SkippedObject", "associate",
    "associate_frames", "BBox", "CameraCalib", "Candidate",
    "calibration_for_scene", "crop_unit", "expand_to_common_size", "map_bbox",
    "propose_candidates", "sweep_disparities", "tile_points_to_frame",
    "true_box_disparity", "LinearFit", "PoseEstimate", "RegressorModel",
    "disparity_vector", "estimate_position", "fit_regressor",
    "fit_pose_regressor", "fit_scene_regressor", "standard_detectors",
]
