from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# 17-joint layout (MuPoTS-3D order). Root is the pelvis.
JOINT_NAMES = (
    "head_top", "neck",
    "r_shoulder", "r_elbow", "r_wrist",
    "l_shoulder", "l_elbow", "l_wrist",
    "r_hip", "r_knee", "r_ankle",
    "l_hip", "l_knee", "l_ankle",
    "pelvis", "spine", "head",
)
LIMB_JOINTS = frozenset({"r_elbow", "r_wrist", "l_elbow", "l_wrist",
                         "r_knee", "r_ankle", "l_knee", "l_ankle"})
EDGES = (
    (0, 16), (16, 1), (1, 15), (15, 14),
    (1, 2), (2, 3), (3, 4),
    (1, 5), (5, 6), (6, 7),
    (14, 8), (8, 9), (9, 10),
    (14, 11), (11, 12), (12, 13),
)

# Unit-height offsets in camera axes (x right, y down, z away from camera),
# person facing the camera, pelvis at the origin. Vertical extent
# head_top..ankle is exactly 1.
TEMPLATE = np.array([
    [0.000, -0.480, 0.000],    # head_top
    [0.000, -0.310, 0.000],    # neck
    [-0.110, -0.295, 0.000],   # r_shoulder
    [-0.135, -0.135, -0.020],  # r_elbow
    [-0.145, 0.020, -0.060],   # r_wrist
    [0.110, -0.295, 0.000],    # l_shoulder
    [0.135, -0.135, -0.020],   # l_elbow
    [0.145, 0.020, -0.060],    # l_wrist
    [-0.060, 0.005, 0.000],    # r_hip
    [-0.065, 0.265, -0.015],   # r_knee
    [-0.065, 0.520, 0.010],    # r_ankle
    [0.060, 0.005, 0.000],     # l_hip
    [0.065, 0.265, -0.015],    # l_knee
    [0.065, 0.520, 0.010],     # l_ankle
    [0.000, 0.000, 0.000],     # pelvis
    [0.000, -0.160, 0.010],    # spine
    [0.000, -0.400, -0.020],   # head
])


@dataclass(frozen=True)
class SkeletonDef:
    joint_names: tuple[str, ...]
    root_index: int
    limb: tuple[bool, ...]
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        n = len(self.joint_names)
        if n == 0:
            raise ValueError("skeleton needs at least one joint")
        if not 0 <= self.root_index < n:
            raise ValueError(f"root_index {self.root_index} out of range for {n} joints")
        if len(self.limb) != n:
            raise ValueError(f"limb flags: expected {n}, got {len(self.limb)}")
        for a, b in self.edges:
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"edge ({a}, {b}) references a missing joint")

    @property
    def num_joints(self) -> int:
        return len(self.joint_names)

    def index(self, name: str) -> int:
        return self.joint_names.index(name)


def default_skeleton() -> SkeletonDef:
    return SkeletonDef(
        joint_names=JOINT_NAMES,
        root_index=JOINT_NAMES.index("pelvis"),
        limb=tuple(n in LIMB_JOINTS for n in JOINT_NAMES),
        edges=EDGES,
    )
