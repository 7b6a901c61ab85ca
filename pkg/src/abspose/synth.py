"""Seeded synthetic multi-person scenes with full ground truth.

Persons are a skeleton template scaled to a sampled height, turned by a
sampled yaw and placed at a sampled camera-centered position. Everything an
estimator would observe (2D joints, boxes, root-relative 3D) is derived from
that by projection, so the scene is its own oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .camera import (
    A_REAL_DEFAULT,
    BBox,
    CameraIntrinsics,
    RootCoord,
    bbox_of_points,
    compute_k,
    project,
    square_extend,
)
from .errors import ConstantInput, PlacementFailure
from .skeleton import TEMPLATE, SkeletonDef, default_skeleton

ADULT_HEAD_FRACTION = 0.17  # head_top..neck share of height in TEMPLATE
_ANKLE_Y = 0.52


@dataclass(frozen=True)
class NoiseConfig:
    sigma_2d: float = 0.0     # px, added to every 2D joint coordinate
    box_jitter: float = 0.0   # relative std of box width/height
    sigma_3d: float = 0.0     # mm, added to root-relative 3D joints
    limb_factor: float = 1.0  # sigma_3d multiplier on limb joints
    limb_outlier_rate: float = 0.0  # chance a limb joint's 3D position is grossly wrong
    limb_outlier_mm: float = 0.0    # size of such an error, random direction

    def __post_init__(self):
        if min(self.sigma_2d, self.box_jitter, self.sigma_3d, self.limb_factor,
               self.limb_outlier_mm) < 0:
            raise ValueError("noise levels must be non-negative")
        if not 0 <= self.limb_outlier_rate <= 1:
            raise ValueError("limb_outlier_rate must lie in [0, 1]")


@dataclass(frozen=True)
class SceneConfig:
    n_images: int = 10
    persons_per_image: tuple[int, int] = (1, 3)
    height_range: tuple[float, float] = (1400.0, 1900.0)
    depth_range: tuple[float, float] = (3000.0, 8000.0)
    lateral_range: tuple[float, float] = (-1500.0, 1500.0)
    vertical_range: tuple[float, float] = (-300.0, 300.0)
    yaw_range: tuple[float, float] = (-45.0, 45.0)  # degrees
    camera: CameraIntrinsics = CameraIntrinsics(1500.0, 1500.0, 960.0, 540.0)
    image_size: tuple[int, int] = (1920, 1080)
    template: str | tuple = "human"  # "human", "square" or explicit unit offsets
    child_proportions: bool = True
    box_pad: float = 0.1
    a_real: float = A_REAL_DEFAULT
    noise: NoiseConfig = NoiseConfig()
    skeleton: SkeletonDef = field(default_factory=default_skeleton)
    seed: int = 0
    max_attempts: int = 200

    def __post_init__(self):
        lo, hi = self.persons_per_image
        if not 0 < lo <= hi:
            raise ValueError("persons_per_image must satisfy 0 < min <= max")
        if self.n_images < 1:
            raise ValueError("n_images must be at least 1")
        for name in ("height_range", "depth_range"):
            a, b = getattr(self, name)
            if not 0 < a <= b:
                raise ValueError(f"{name} must be positive and ordered")
        for name in ("lateral_range", "vertical_range", "yaw_range"):
            a, b = getattr(self, name)
            if a > b:
                raise ValueError(f"{name} must be ordered")
        if self.image_size[0] <= 0 or self.image_size[1] <= 0:
            raise ValueError("image_size must be positive")
        if self.box_pad < 0 or self.a_real <= 0 or self.max_attempts < 1:
            raise ValueError("invalid box_pad, a_real or max_attempts")


@dataclass(frozen=True)
class SceneSample:
    """One synthetic person.

    Ground truth: ``joints_abs``, ``root``, ``height``, ``k_true``,
    ``gamma_true``. Observations (what ``perturb`` touches): ``pose2d``,
    ``rel_pose``, ``rel_cam``, ``bbox``, ``bbox_sq``.
    """
    image_id: int
    height: float
    joints_abs: np.ndarray  # (J, 3) mm
    root: RootCoord
    k_true: float
    gamma_true: float
    pose2d: np.ndarray      # (J, 2) px
    rel_pose: np.ndarray    # (J, 3) px, px, mm root-relative depth
    rel_cam: np.ndarray     # (J, 3) mm root-relative, camera axes
    bbox: BBox
    bbox_sq: BBox


def head_fraction(height: float) -> float:
    """Share of body height taken by the head; larger for children."""
    return float(np.interp(height, [1000.0, 1700.0], [0.26, ADULT_HEAD_FRACTION]))


def body_template(height: float, child_proportions: bool = True) -> np.ndarray:
    """Unit-height joint offsets for a person of ``height`` mm."""
    t = TEMPLATE.copy()
    if child_proportions:
        f = head_fraction(height)
        names = default_skeleton().joint_names
        head = [names.index("head_top"), names.index("head")]
        neck = names.index("neck")
        body = [i for i in range(len(t)) if i not in head]
        old_neck = t[neck].copy()
        s = (1.0 - f) / (1.0 - ADULT_HEAD_FRACTION)
        t[body, 1] = _ANKLE_Y + (t[body, 1] - _ANKLE_Y) * s
        t[head] = t[neck] + (TEMPLATE[head] - old_neck) * (f / ADULT_HEAD_FRACTION)
        t -= t[names.index("pelvis")]
    return t


def square_template() -> np.ndarray:
    """Planar template whose bounding extent is 1 wide and 1 tall."""
    t = TEMPLATE.copy()
    t[:, 2] = 0.0
    t[:, 0] *= 1.0 / np.ptp(t[:, 0])
    return t


def _yaw(points: np.ndarray, degrees: float) -> np.ndarray:
    a = math.radians(degrees)
    c, s = math.cos(a), math.sin(a)
    out = points.copy()
    out[:, 0] = c * points[:, 0] + s * points[:, 2]
    out[:, 2] = -s * points[:, 0] + c * points[:, 2]
    return out


def _unit_offsets(cfg: SceneConfig, height: float) -> np.ndarray:
    if isinstance(cfg.template, str):
        if cfg.template == "square":
            return square_template()
        if cfg.template == "human":
            return body_template(height, cfg.child_proportions)
        raise ValueError(f"unknown template {cfg.template!r}")
    t = np.asarray(cfg.template, dtype=np.float64)
    if t.shape != (cfg.skeleton.num_joints, 3):
        raise ValueError("template does not match the skeleton")
    return t - t[cfg.skeleton.root_index]


def make_sample(joints_abs, image_id: int, height: float, cam: CameraIntrinsics,
                root_index: int, box_pad: float = 0.1,
                a_real: float = A_REAL_DEFAULT) -> SceneSample:
    """Derive every observed field of a person from its camera-centered joints."""
    joints_abs = np.asarray(joints_abs, dtype=np.float64)
    pose2d = project(joints_abs, cam)
    root3 = joints_abs[root_index]
    root = RootCoord(float(pose2d[root_index, 0]), float(pose2d[root_index, 1]), float(root3[2]))
    rel_cam = joints_abs - root3
    rel_pose = np.column_stack([pose2d, rel_cam[:, 2]])
    bbox = bbox_of_points(pose2d, box_pad)
    bbox_sq = square_extend(bbox)
    k = compute_k(bbox_sq, cam, a_real)
    return SceneSample(image_id=image_id, height=height, joints_abs=joints_abs, root=root,
                       k_true=k, gamma_true=root.z / k, pose2d=pose2d, rel_pose=rel_pose,
                       rel_cam=rel_cam, bbox=bbox, bbox_sq=bbox_sq)


def _place_person(cfg: SceneConfig, rng: np.random.Generator, image_id: int) -> SceneSample:
    w, h = cfg.image_size
    for _ in range(cfg.max_attempts):
        height = rng.uniform(*cfg.height_range)
        yaw = rng.uniform(*cfg.yaw_range)
        pos = np.array([rng.uniform(*cfg.lateral_range),
                        rng.uniform(*cfg.vertical_range),
                        rng.uniform(*cfg.depth_range)])
        joints = _yaw(_unit_offsets(cfg, height), yaw) * height + pos
        if np.any(joints[:, 2] <= 0):
            continue
        q = project(joints, cfg.camera)
        if np.all((q >= 0) & (q < (w, h))):
            return make_sample(joints, image_id, height, cfg.camera,
                               cfg.skeleton.root_index, cfg.box_pad, cfg.a_real)
    raise PlacementFailure(f"no valid placement after {cfg.max_attempts} attempts")


def generate_scene(cfg: SceneConfig) -> list[SceneSample]:
    """All persons of ``cfg.n_images`` images, in (image, person) order.

    Each image and each person draws from its own stream derived from
    ``cfg.seed``, so output is reproducible and order-independent.
    """
    out = []
    lo, hi = cfg.persons_per_image
    for img in range(cfg.n_images):
        n = int(np.random.default_rng([cfg.seed, img]).integers(lo, hi + 1))
        for p in range(n):
            rng = np.random.default_rng([cfg.seed, img, p, 1])
            out.append(_place_person(cfg, rng, img))
    return out


def perturb(s: SceneSample, noise: NoiseConfig, seed, skeleton: SkeletonDef | None = None) -> SceneSample:
    """Noisy copy of the observed fields; ground truth is left as is."""
    rng = np.random.default_rng(seed)
    skeleton = skeleton or default_skeleton()
    J = len(s.pose2d)
    pose2d = s.pose2d + rng.normal(0.0, noise.sigma_2d, size=(J, 2)) if noise.sigma_2d else s.pose2d
    rel_cam = s.rel_cam
    limb = np.asarray(skeleton.limb, dtype=bool)
    if noise.sigma_3d:
        scale = np.where(limb, noise.limb_factor, 1.0) * noise.sigma_3d
        rel_cam = rel_cam + rng.normal(0.0, 1.0, size=(J, 3)) * scale[:, None]
    if noise.limb_outlier_rate and noise.limb_outlier_mm:
        hit = limb & (rng.random(J) < noise.limb_outlier_rate)
        d = rng.normal(size=(J, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        rel_cam = rel_cam + np.where(hit[:, None], d * noise.limb_outlier_mm, 0.0)
    if rel_cam is not s.rel_cam:
        rel_cam = rel_cam - rel_cam[skeleton.root_index]
    bbox = s.bbox
    if noise.box_jitter:
        fw, fh = np.maximum(1.0 + noise.box_jitter * rng.normal(size=2), 0.1)
        cx, cy = bbox.center
        bbox = BBox(cx - 0.5 * bbox.w * fw, cy - 0.5 * bbox.h * fh, bbox.w * fw, bbox.h * fh)
    if pose2d is s.pose2d and rel_cam is s.rel_cam and bbox is s.bbox:
        return s
    rel_pose = np.column_stack([pose2d, rel_cam[:, 2]])
    return replace(s, pose2d=pose2d, rel_cam=rel_cam, rel_pose=rel_pose,
                   bbox=bbox, bbox_sq=square_extend(bbox))


def pearson(xs, ys) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("need two equal-length 1D sequences of at least 2 values")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = np.dot(dx, dx), np.dot(dy, dy)
    if sxx == 0 or syy == 0:
        raise ConstantInput("correlation of a constant sequence is undefined")
    return float(np.clip(np.dot(dx, dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def run_k_correlation(cfg: SceneConfig) -> tuple[float, np.ndarray]:
    """Correlation between ``k`` of (noisy) squared boxes and true root depth.

    Returns ``r`` and an ``(N, 2)`` array of ``(k, Z_true)`` rows.
    """
    rows = []
    for i, s in enumerate(generate_scene(cfg)):
        obs = perturb(s, cfg.noise, [cfg.seed, i, 2], cfg.skeleton)
        rows.append((compute_k(obs.bbox_sq, cfg.camera, cfg.a_real), s.root.z))
    rows = np.array(rows)
    return pearson(rows[:, 0], rows[:, 1]), rows
