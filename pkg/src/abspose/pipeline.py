"""Glue between synthetic scenes, documents and the estimators.

These are the workflows behind the CLI commands, usable from Python too.
"""
from __future__ import annotations

from dataclasses import fields, replace

import numpy as np

from .camera import (
    A_REAL_DEFAULT,
    CameraIntrinsics,
    RootCoord,
    back_project,
    compose_absolute_pose,
    compute_k,
    project,
    square_extend,
)
from .correction import RegressorParams, TrainConfig, featurize, predict_gamma_batch, train
from .errors import AbsPoseError, SchemaError
from .io import (
    GtDocument,
    GtPersonRecord,
    ImageInfo,
    Pred2DDocument,
    Pred2DPersonRecord,
    PredDocument,
    PredPersonRecord,
    skeleton_from_dict,
)
from .metrics import EvalConfig, PersonGt, PersonPrediction, evaluate, mrpe
from .rootfit import (
    CorrectionFactor,
    RansacConfig,
    k_localize,
    limb_exclusion_mask,
    lsq_root_fit,
    ransac_root_fit,
)
from .synth import NoiseConfig, SceneConfig, SceneSample, perturb

ROOTFIT_METHODS = ("k", "lsq", "lsq-nolimb", "ransac")


# ----------------------------------------------------------------- scene config

def scene_config_from_dict(d: dict) -> SceneConfig:
    """Build a ``SceneConfig`` from plain JSON values; unknown keys are rejected."""
    known = {f.name for f in fields(SceneConfig)}
    unknown = set(d) - known
    if unknown:
        raise SchemaError(f"scene config: unknown field(s) {sorted(unknown)}")
    kw = {}
    try:
        for key, val in d.items():
            if key == "camera":
                kw[key] = CameraIntrinsics(float(val["alpha_x"]), float(val["alpha_y"]),
                                           float(val["cx"]), float(val["cy"]))
            elif key == "noise":
                kw[key] = NoiseConfig(**val)
            elif key == "skeleton":
                kw[key] = skeleton_from_dict(val, "scene config.skeleton")
            elif key == "template" and not isinstance(val, str):
                kw[key] = tuple(tuple(float(x) for x in row) for row in val)
            elif isinstance(val, list):
                kw[key] = tuple(val)
            else:
                kw[key] = val
        return SceneConfig(**kw)
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, AbsPoseError):
            raise
        raise SchemaError(f"scene config: {e}") from None


# ---------------------------------------------------------------- scene -> docs

def scene_to_gt(samples: list[SceneSample], cfg: SceneConfig) -> GtDocument:
    w, h = cfg.image_size
    images = {i: ImageInfo(i, int(w), int(h), cfg.camera) for i in range(cfg.n_images)}
    persons = [GtPersonRecord(s.image_id, s.bbox, s.joints_abs) for s in samples]
    return GtDocument(cfg.skeleton, images, persons)


def observe(samples: list[SceneSample], cfg: SceneConfig, noise: NoiseConfig, seed) -> list[SceneSample]:
    """Perturbed observations, one substream per person."""
    return [perturb(s, noise, [seed, i, 3], cfg.skeleton) for i, s in enumerate(samples)]


def scene_to_pred(samples, observed, cfg: SceneConfig) -> PredDocument:
    """Predictions whose depth is the true correction applied to the observed box.

    With zero noise they reproduce the groundtruth.
    """
    ri = cfg.skeleton.root_index
    persons = []
    for s, o in zip(samples, observed):
        z = s.gamma_true * compute_k(o.bbox_sq, cfg.camera, cfg.a_real)
        root = np.array([o.pose2d[ri, 0], o.pose2d[ri, 1], z])
        persons.append(PredPersonRecord(s.image_id, 1.0, root, o.rel_pose))
    return PredDocument(persons)


def scene_to_pred2d(samples, observed) -> Pred2DDocument:
    return Pred2DDocument([Pred2DPersonRecord(s.image_id, i, o.bbox, o.pose2d, o.rel_cam)
                           for i, (s, o) in enumerate(zip(samples, observed))])


# ------------------------------------------------------------------ evaluation

def gt_persons(gt: GtDocument) -> list[PersonGt]:
    return [PersonGt(p.image_id, p.joints_cam) for p in gt.persons]


def compose_predictions(gt: GtDocument, pred: PredDocument) -> list[PersonPrediction]:
    out = []
    for i, p in enumerate(pred.persons):
        if p.image_id not in gt.images:
            raise SchemaError(f"pred.persons[{i}].image_id: unknown image {p.image_id}")
        if len(p.rel_pose) != gt.skeleton.num_joints:
            raise SchemaError(f"pred.persons[{i}].rel_pose: expected "
                              f"{gt.skeleton.num_joints} joints, got {len(p.rel_pose)}")
        cam = gt.images[p.image_id].cam
        pose = compose_absolute_pose(p.rel_pose, RootCoord(*p.root), cam)
        out.append(PersonPrediction(p.image_id, pose, p.score))
    return out


def evaluate_documents(gt: GtDocument, pred: PredDocument, config: EvalConfig | None = None):
    config = config or EvalConfig()
    config = replace(config, root_index=gt.skeleton.root_index)
    return evaluate(compose_predictions(gt, pred), gt_persons(gt), config), config


# ------------------------------------------------------------------- root fits

def fit_root(method: str, p: Pred2DPersonRecord, cam: CameraIntrinsics, skeleton,
             ransac: RansacConfig, gamma_prime: float = 1.0, a_real: float = A_REAL_DEFAULT) -> np.ndarray:
    """Camera-centered root estimate (mm) for one person by one method."""
    ri = skeleton.root_index
    if method == "k":
        r = k_localize(square_extend(p.bbox), cam, p.joints_2d[ri],
                       CorrectionFactor(gamma_prime), a_real)
        return back_project((r.x, r.y), r.z, cam)
    if method == "lsq":
        return lsq_root_fit(p.joints_2d, p.rel_cam, cam).translation
    if method == "lsq-nolimb":
        return lsq_root_fit(p.joints_2d, p.rel_cam, cam, limb_exclusion_mask(skeleton)).translation
    if method == "ransac":
        return ransac_root_fit(p.joints_2d, p.rel_cam, cam, skeleton, ransac).translation
    raise ValueError(f"unknown method {method!r}")


def rootfit_table(gt: GtDocument, pred2d: Pred2DDocument, methods=ROOTFIT_METHODS,
                  ransac: RansacConfig = RansacConfig(), gamma_prime: float = 1.0) -> dict:
    """MRPE and per-axis errors of each root localization method.

    Fits that fail (degenerate or no consensus) are counted and left out.
    """
    J = gt.skeleton.num_joints
    table = {}
    for method in methods:
        est, ref, failed = [], [], 0
        for i, p in enumerate(pred2d.persons):
            if not 0 <= p.gt_index < len(gt.persons):
                raise SchemaError(f"pred2d.persons[{i}].gt_index: out of range")
            if len(p.joints_2d) != J:
                raise SchemaError(f"pred2d.persons[{i}].joints_2d: expected {J} joints")
            g = gt.persons[p.gt_index]
            cam = gt.images[g.image_id].cam
            cfg = replace(ransac, seed=hash_seed(ransac.seed, i))
            try:
                est.append(fit_root(method, p, cam, gt.skeleton, cfg, gamma_prime))
            except AbsPoseError:
                failed += 1
                continue
            ref.append(g.joints_cam[gt.skeleton.root_index])
        row = {"n": len(est), "n_failed": failed,
               "mrpe": None, "mrpe_x": None, "mrpe_y": None, "mrpe_z": None}
        if est:
            total, axes = mrpe(est, ref)
            row.update(mrpe=total, mrpe_x=axes[0], mrpe_y=axes[1], mrpe_z=axes[2])
        table[method] = row
    return table


def hash_seed(seed: int, index: int) -> int:
    """Deterministic per-person seed derived from a run seed."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


# ------------------------------------------------------------------ correction

def correction_dataset(gt: GtDocument):
    """Features, ``k`` and true root depth for every groundtruth person.

    Keypoints are the projected groundtruth joints.
    """
    F, K, Z = [], [], []
    ri = gt.skeleton.root_index
    for p in gt.persons:
        im = gt.images[p.image_id]
        p2d = project(p.joints_cam, im.cam)
        F.append(featurize(p.bbox, im.cam, (im.width, im.height), p2d, gt.skeleton))
        K.append(compute_k(square_extend(p.bbox), im.cam))
        Z.append(p.joints_cam[ri, 2])
    return np.array(F).reshape(len(F), -1), np.array(K), np.array(Z)


def train_correction(gt: GtDocument, cfg: TrainConfig) -> RegressorParams:
    F, K, Z = correction_dataset(gt)
    return train(F, K, Z, cfg)


def predict_with_correction(params: RegressorParams, gt: GtDocument) -> PredDocument:
    """Predictions with groundtruth 2D/relative pose and corrected-k root depth."""
    F, K, _ = correction_dataset(gt)
    gammas = predict_gamma_batch(params, F) if len(F) else np.zeros(0)
    ri = gt.skeleton.root_index
    persons = []
    for p, g, k in zip(gt.persons, gammas, K):
        cam = gt.images[p.image_id].cam
        p2d = project(p.joints_cam, cam)
        rel = np.column_stack([p2d, p.joints_cam[:, 2] - p.joints_cam[ri, 2]])
        persons.append(PredPersonRecord(p.image_id, 1.0,
                                        np.array([p2d[ri, 0], p2d[ri, 1], g * k]), rel))
    return PredDocument(persons)
