"""Small regressor predicting the depth correction factor from box/keypoint cues.

The network is ``gamma' = exp(w2 . tanh(W1 z + b1) + b2)`` on standardized
features ``z``, trained to minimize ``mean |gamma' * k - Z|`` with seeded
mini-batch Adam steps on the L1 subgradient.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .camera import A_REAL_DEFAULT, BBox, CameraIntrinsics, compute_k, square_extend
from .errors import DimensionMismatch, EmptyDataset
from .rootfit import CorrectionFactor
from .skeleton import SkeletonDef, default_skeleton

N_FEATURES = 5
FEATURE_NAMES = ("log_k", "aspect", "rel_height", "torso_ratio", "bias")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-2
    epochs: int = 200
    batch_size: int = 64
    seed: int = 0
    hidden: int = 8

    def __post_init__(self):
        if not (self.lr > 0 and self.epochs > 0 and self.batch_size > 0 and self.hidden > 0):
            raise ValueError("training parameters must be positive")


@dataclass
class RegressorParams:
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    w1: np.ndarray  # (hidden, F)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float
    loss_trace: list[float] = field(default_factory=list)

    @classmethod
    def zeros(cls, n_features: int = N_FEATURES, hidden: int = 8) -> "RegressorParams":
        return cls(np.zeros(n_features), np.ones(n_features), np.zeros((hidden, n_features)),
                   np.zeros(hidden), np.zeros(hidden), 0.0)

    @property
    def n_features(self) -> int:
        return self.w1.shape[1]

    def flat(self) -> np.ndarray:
        """Trainable weights as one vector (normalization excluded)."""
        return np.concatenate([self.w1.ravel(), self.b1, self.w2, [self.b2]])

    def with_flat(self, theta) -> "RegressorParams":
        h, f = self.w1.shape
        theta = np.asarray(theta, dtype=np.float64)
        i = h * f
        return RegressorParams(self.feature_mean, self.feature_scale,
                               theta[:i].reshape(h, f), theta[i:i + h],
                               theta[i + h:i + 2 * h], float(theta[-1]))

    def to_dict(self) -> dict:
        return {
            "feature_names": list(FEATURE_NAMES),
            "feature_mean": self.feature_mean.tolist(),
            "feature_scale": self.feature_scale.tolist(),
            "w1": self.w1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": float(self.b2),
            "loss_trace": [float(x) for x in self.loss_trace],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressorParams":
        arr = lambda k: np.asarray(d[k], dtype=np.float64)
        p = cls(arr("feature_mean"), arr("feature_scale"), arr("w1"), arr("b1"), arr("w2"),
                float(d["b2"]), list(d.get("loss_trace", [])))
        h, f = p.w1.shape
        if p.feature_mean.shape != (f,) or p.feature_scale.shape != (f,) \
                or p.b1.shape != (h,) or p.w2.shape != (h,):
            raise DimensionMismatch("inconsistent parameter shapes")
        return p


def featurize(b: BBox, cam: CameraIntrinsics, image_size, p2d=None,
              skeleton: SkeletonDef | None = None, a_real: float = A_REAL_DEFAULT) -> np.ndarray:
    """Feature vector for one detection; ``b`` is the box before squaring."""
    k = compute_k(square_extend(b), cam, a_real)
    torso = 0.0
    skeleton = skeleton or default_skeleton()
    if p2d is not None and "neck" in skeleton.joint_names:
        p2d = np.asarray(p2d, dtype=np.float64)
        neck = p2d[skeleton.index("neck")]
        pelvis = p2d[skeleton.root_index]
        torso = float(np.hypot(*(neck - pelvis))) / b.h
    return np.array([math.log(k / 1000.0), b.h / b.w, b.h / image_size[1], torso, 1.0])


def _forward(params: RegressorParams, F: np.ndarray):
    z = (F - params.feature_mean) / params.feature_scale
    hid = np.tanh(z @ params.w1.T + params.b1)
    out = hid @ params.w2 + params.b2
    return z, hid, out


def predict_gamma_batch(params: RegressorParams, F) -> np.ndarray:
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    if F.shape[1] != params.n_features:
        raise DimensionMismatch(f"expected {params.n_features} features, got {F.shape[1]}")
    return np.exp(_forward(params, F)[2])


def predict_gamma(params: RegressorParams, f) -> CorrectionFactor:
    return CorrectionFactor(float(predict_gamma_batch(params, f)[0]))


def loss_and_grad(params: RegressorParams, F, k, z) -> tuple[float, np.ndarray]:
    """Mean ``|gamma' k - Z|`` and its (sub)gradient w.r.t. ``params.flat()``.

    The subgradient of ``|r|`` at ``r == 0`` is taken as 0.
    """
    F = np.asarray(F, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    z_true = np.asarray(z, dtype=np.float64)
    n = len(F)
    zf, hid, out = _forward(params, F)
    pred = np.exp(out) * k
    r = pred - z_true
    loss = float(np.mean(np.abs(r)))
    g_out = np.sign(r) * pred / n
    g_w2 = hid.T @ g_out
    g_b2 = g_out.sum()
    g_pre = np.outer(g_out, params.w2) * (1.0 - hid ** 2)
    g_w1 = g_pre.T @ zf
    g_b1 = g_pre.sum(axis=0)
    return loss, np.concatenate([g_w1.ravel(), g_b1, g_w2, [g_b2]])


def init_params(F, cfg: TrainConfig) -> RegressorParams:
    F = np.asarray(F, dtype=np.float64)
    mean = F.mean(axis=0)
    scale = F.std(axis=0)
    const = scale < 1e-12
    mean[const] = 0.0
    scale[const] = 1.0
    rng = np.random.default_rng([cfg.seed, 0])
    nf = F.shape[1]
    w1 = rng.normal(0.0, 1.0 / math.sqrt(nf), size=(cfg.hidden, nf))
    return RegressorParams(mean, scale, w1, np.zeros(cfg.hidden), np.zeros(cfg.hidden), 0.0)


def train(F, k, z, cfg: TrainConfig = TrainConfig()) -> RegressorParams:
    """Fit the regressor on features ``F`` (N, F), box measures ``k`` and true depths ``z``."""
    F = np.asarray(F, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if len(F) == 0:
        raise EmptyDataset("no training samples")
    if not (len(F) == len(k) == len(z)):
        raise DimensionMismatch("features, k and depths differ in length")

    params = init_params(F, cfg)
    theta = params.flat()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    b1, b2, eps = 0.9, 0.999, 1e-8
    rng = np.random.default_rng([cfg.seed, 1])
    trace = [loss_and_grad(params, F, k, z)[0]]
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(F))
        for start in range(0, len(F), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, g = loss_and_grad(params.with_flat(theta), F[idx], k[idx], z[idx])
            step += 1
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            mhat = m / (1 - b1 ** step)
            vhat = v / (1 - b2 ** step)
            theta = theta - cfg.lr * mhat / (np.sqrt(vhat) + eps)
        trace.append(loss_and_grad(params.with_flat(theta), F, k, z)[0])
    out = params.with_flat(theta)
    out.loss_trace = trace
    return out
