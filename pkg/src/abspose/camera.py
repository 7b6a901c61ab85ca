"""Pinhole camera geometry, box squaring and the area-based depth measure.

Lengths are millimetres, image quantities pixels. Points are numpy arrays
whose last axis holds the coordinates, so every function here works on a
single point or on a ``(J, 2|3)`` pose alike.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveDepth, ZeroArea, ZeroExtent

A_REAL_DEFAULT = 2000.0 * 2000.0  # mm^2


@dataclass(frozen=True)
class CameraIntrinsics:
    alpha_x: float
    alpha_y: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.alpha_x > 0 and self.alpha_y > 0):
            raise ValueError("focal lengths must be positive")
        if not all(map(math.isfinite, (self.alpha_x, self.alpha_y, self.cx, self.cy))):
            raise ValueError("intrinsics must be finite")


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box extent must be positive, got {self.w}x{self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return self.x + 0.5 * self.w, self.y + 0.5 * self.h

    def scaled(self, s: float) -> "BBox":
        """Box scaled by ``s`` about its center."""
        cx, cy = self.center
        w, h = self.w * s, self.h * s
        return BBox(cx - 0.5 * w, cy - 0.5 * h, w, h)


@dataclass(frozen=True)
class RootCoord:
    """Root pixel position plus its absolute depth in mm."""
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not self.z > 0:
            raise NonPositiveDepth(f"root depth must be positive, got {self.z}")


def _check_depth(z):
    if np.any(~(np.asarray(z) > 0)):
        raise NonPositiveDepth("depth must be positive")


def project(p, cam: CameraIntrinsics) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    z = p[..., 2]
    _check_depth(z)
    u = cam.alpha_x * p[..., 0] / z + cam.cx
    v = cam.alpha_y * p[..., 1] / z + cam.cy
    return np.stack([u, v], axis=-1)


def back_project(q, depth, cam: CameraIntrinsics) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    _check_depth(depth)
    x = (q[..., 0] - cam.cx) * depth / cam.alpha_x
    y = (q[..., 1] - cam.cy) * depth / cam.alpha_y
    return np.stack([x, y, np.broadcast_to(depth, x.shape)], axis=-1)


def square_extend(b: BBox) -> BBox:
    """Grow the shorter side about the center to a 1:1 aspect ratio.

    No clamping to the image: only the area feeds ``compute_k``.
    """
    side = max(b.w, b.h)
    cx, cy = b.center
    return BBox(cx - 0.5 * side, cy - 0.5 * side, side, side)


def compute_k(b: BBox, cam: CameraIntrinsics, a_real: float = A_REAL_DEFAULT) -> float:
    """Depth proxy ``sqrt(alpha_x * alpha_y * a_real / area)`` in mm.

    ``b`` must already be squared; this does not square it.
    """
    if not a_real > 0:
        raise ValueError("a_real must be positive")
    area = b.w * b.h
    if area == 0:
        raise ZeroArea("box has zero area")
    return math.sqrt(cam.alpha_x * cam.alpha_y * a_real / area)


def depth_from_extent(l_real: float, l_img: float, alpha: float) -> float:
    if not l_img > 0:
        raise ZeroExtent("image extent must be positive")
    return alpha * l_real / l_img


def crop_to_original(q, crop_box: BBox, crop_size: tuple[float, float]) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    cw, ch = crop_size
    if not (cw > 0 and ch > 0):
        raise ValueError("crop size must be positive")
    u = crop_box.x + q[..., 0] * (crop_box.w / cw)
    v = crop_box.y + q[..., 1] * (crop_box.h / ch)
    return np.stack([u, v], axis=-1)


def original_to_crop(q, crop_box: BBox, crop_size: tuple[float, float]) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    cw, ch = crop_size
    if not (cw > 0 and ch > 0):
        raise ValueError("crop size must be positive")
    u = (q[..., 0] - crop_box.x) * (cw / crop_box.w)
    v = (q[..., 1] - crop_box.y) * (ch / crop_box.h)
    return np.stack([u, v], axis=-1)


def compose_absolute_pose(rel, root: RootCoord, cam: CameraIntrinsics) -> np.ndarray:
    """Lift a root-relative pose to camera-centered mm.

    ``rel`` is ``(J, 3)`` rows of ``(u, v, z_rel)`` with ``(u, v)`` already in
    original-image pixels. Each joint's depth becomes ``z_rel + root.z`` and
    its pixel is back-projected at that depth.
    """
    rel = np.asarray(rel, dtype=np.float64)
    z_abs = rel[:, 2] + root.z
    if np.any(~(z_abs > 0)):
        raise NonPositiveDepth("composed joint depth is not positive")
    return back_project(rel[:, :2], z_abs, cam)


def bbox_of_points(q, pad: float = 0.0) -> BBox:
    """Tight box around 2D points, padded by ``pad`` of the extent per side."""
    q = np.asarray(q, dtype=np.float64)
    lo = q.min(axis=0)
    hi = q.max(axis=0)
    w, h = hi - lo
    if not (w > 0 and h > 0):
        raise ZeroArea("points span no area")
    return BBox(lo[0] - pad * w, lo[1] - pad * h, w * (1 + 2 * pad), h * (1 + 2 * pad))
