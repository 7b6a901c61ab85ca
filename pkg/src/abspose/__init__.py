"""Absolute 3D multi-person pose geometry: area-based root depth, root fitting
baselines, evaluation metrics and synthetic scenes."""

__version__ = "0.1.0"

from .camera import (
    A_REAL_DEFAULT,
    BBox,
    CameraIntrinsics,
    RootCoord,
    back_project,
    compose_absolute_pose,
    compute_k,
    crop_to_original,
    depth_from_extent,
    original_to_crop,
    project,
    square_extend,
)
from .rootfit import (
    CorrectionFactor,
    RansacConfig,
    RootFitResult,
    k_localize,
    limb_exclusion_mask,
    lsq_root_fit,
    ransac_root_fit,
)
from .skeleton import SkeletonDef, default_skeleton
