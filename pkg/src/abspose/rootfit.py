"""Absolute root localization: scaled area measure and 2D/3D fitting baselines."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import A_REAL_DEFAULT, BBox, CameraIntrinsics, RootCoord, compute_k
from .errors import DegenerateConfiguration, EmptyMask, JointCountMismatch, NoConsensus
from .skeleton import SkeletonDef

RANK_TOL = 1e-8


@dataclass(frozen=True)
class CorrectionFactor:
    """Multiplier applied to ``k``; relates to the area factor as 1/sqrt(gamma)."""
    gamma_prime: float

    def __post_init__(self):
        if not self.gamma_prime > 0:
            raise ValueError("gamma_prime must be positive")

    @classmethod
    def from_area_factor(cls, gamma: float) -> "CorrectionFactor":
        return cls(1.0 / np.sqrt(gamma))

    @property
    def area_factor(self) -> float:
        return 1.0 / self.gamma_prime ** 2


@dataclass(frozen=True)
class RootFitResult:
    translation: np.ndarray  # (3,) mm
    residual: float          # mean squared reprojection error, px^2
    inlier_mask: np.ndarray | None = None


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 256
    sample_size: int = 3
    inlier_threshold: float = 10.0  # px
    seed: int = 0


def k_localize(b: BBox, cam: CameraIntrinsics, root2d, corr: CorrectionFactor,
               a_real: float = A_REAL_DEFAULT) -> RootCoord:
    z = corr.gamma_prime * compute_k(b, cam, a_real)
    return RootCoord(float(root2d[0]), float(root2d[1]), z)


def limb_exclusion_mask(s: SkeletonDef) -> np.ndarray:
    mask = ~np.asarray(s.limb, dtype=bool)
    if not mask.any():
        raise EmptyMask("every joint is flagged as a limb joint")
    return mask


def reprojection_errors(p2d, rel, t, cam: CameraIntrinsics) -> np.ndarray:
    """Per-joint pixel distance between ``p2d`` and the projection of ``rel + t``.

    Joints that land behind the camera get an infinite error.
    """
    pts = np.asarray(rel, dtype=np.float64) + np.asarray(t, dtype=np.float64)
    z = pts[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam.alpha_x * pts[:, 0] / z + cam.cx
        v = cam.alpha_y * pts[:, 1] / z + cam.cy
    err = np.hypot(u - p2d[:, 0], v - p2d[:, 1])
    err[~(z > 0)] = np.inf
    return err


def _check_inputs(p2d, rel):
    p2d = np.asarray(p2d, dtype=np.float64)
    rel = np.asarray(rel, dtype=np.float64)
    if p2d.ndim != 2 or p2d.shape[1] != 2 or rel.ndim != 2 or rel.shape[1] != 3:
        raise ValueError("expected p2d of shape (J, 2) and rel of shape (J, 3)")
    if len(p2d) != len(rel):
        raise JointCountMismatch(f"{len(p2d)} 2D joints vs {len(rel)} 3D joints")
    return p2d, rel


def _solve(p2d, rel, cam: CameraIntrinsics, idx) -> np.ndarray:
    # Projection multiplied through by depth, linear in T:
    #   ax*Tx - (u-cx)*Tz = (u-cx)*Z - ax*X
    #   ay*Ty - (v-cy)*Tz = (v-cy)*Z - ay*Y
    du = p2d[idx, 0] - cam.cx
    dv = p2d[idx, 1] - cam.cy
    X, Y, Z = rel[idx, 0], rel[idx, 1], rel[idx, 2]
    m = len(idx)
    A = np.zeros((2 * m, 3))
    A[:m, 0] = cam.alpha_x
    A[:m, 2] = -du
    A[m:, 1] = cam.alpha_y
    A[m:, 2] = -dv
    b = np.concatenate([du * Z - cam.alpha_x * X, dv * Z - cam.alpha_y * Y])
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] < RANK_TOL * sv[0]:
        raise DegenerateConfiguration("joint configuration does not determine the root")
    t, *_ = np.linalg.lstsq(A, b, rcond=None)
    return t


def lsq_root_fit(p2d, rel, cam: CameraIntrinsics, mask=None) -> RootFitResult:
    """Linear least-squares root translation from 2D joints and root-relative 3D joints.

    ``rel`` holds root-relative joints in camera axes (mm); ``mask`` selects the
    joints that take part in the fit (all by default).
    """
    p2d, rel = _check_inputs(p2d, rel)
    mask = np.ones(len(p2d), bool) if mask is None else np.asarray(mask, dtype=bool)
    idx = np.flatnonzero(mask)
    if len(idx) < 2:
        raise DegenerateConfiguration("need at least two joints")
    t = _solve(p2d, rel, cam, idx)
    err = reprojection_errors(p2d[idx], rel[idx], t, cam)
    return RootFitResult(t, float(np.mean(err ** 2)))


def ransac_root_fit(p2d, rel, cam: CameraIntrinsics, skeleton: SkeletonDef,
                    cfg: RansacConfig = RansacConfig(), mask=None) -> RootFitResult:
    """RANSAC over minimal joint subsets, refit on the best consensus set.

    The best model has the most inliers; ties go to the lower mean squared
    inlier error, then to the earlier trial.
    """
    p2d, rel = _check_inputs(p2d, rel)
    J = len(p2d)
    if J != skeleton.num_joints:
        raise JointCountMismatch(f"skeleton has {skeleton.num_joints} joints, pose has {J}")
    candidates = np.arange(J) if mask is None else np.flatnonzero(np.asarray(mask, bool))
    if not 2 <= cfg.sample_size <= len(candidates):
        raise ValueError(f"sample_size must be in [2, {len(candidates)}]")

    rng = np.random.default_rng(cfg.seed)
    best = None  # (-count, inlier mse, trial)
    best_inliers = None
    for trial in range(cfg.iterations):
        sample = rng.choice(candidates, size=cfg.sample_size, replace=False)
        try:
            t = _solve(p2d, rel, cam, np.sort(sample))
        except DegenerateConfiguration:
            continue
        err = reprojection_errors(p2d[candidates], rel[candidates], t, cam)
        inl = err <= cfg.inlier_threshold
        count = int(inl.sum())
        if count < cfg.sample_size:
            continue
        key = (-count, float(np.mean(err[inl] ** 2)), trial)
        if best is None or key < best:
            best, best_inliers = key, inl

    if best is None:
        raise NoConsensus("no sample reached a consensus set")
    inlier_mask = np.zeros(J, bool)
    inlier_mask[candidates[best_inliers]] = True
    res = lsq_root_fit(p2d, rel, cam, inlier_mask)
    return RootFitResult(res.translation, res.residual, inlier_mask)
