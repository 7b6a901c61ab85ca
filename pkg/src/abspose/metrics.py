"""Pose and root evaluation metrics for single- and multi-person predictions.

Poses are ``(J, 3)`` arrays in mm. Means use ``math.fsum`` so results do not
depend on the order of samples or joints.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGt, EmptySet, JointCountMismatch, SchemaMismatch, TooFewPoints

AUC_THRESHOLDS = tuple(float(t) for t in range(5, 155, 5))


def _pair(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise JointCountMismatch(f"pose shapes differ: {pred.shape} vs {gt.shape}")
    return pred, gt


def _mean(xs) -> float:
    xs = list(xs)
    return math.fsum(xs) / len(xs)


def joint_errors(pred, gt, root_index: int | None = None) -> np.ndarray:
    """Per-joint Euclidean errors, after root alignment if ``root_index`` is given."""
    pred, gt = _pair(pred, gt)
    if root_index is not None:
        return np.linalg.norm((pred - pred[root_index]) - (gt - gt[root_index]), axis=-1)
    return np.linalg.norm(pred - gt, axis=-1)


def mpjpe(pred, gt, root_index: int | None = None) -> float:
    return _mean(joint_errors(pred, gt, root_index))


@dataclass(frozen=True)
class Similarity:
    """``x -> scale * R @ x + t``."""
    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, x) -> np.ndarray:
        return self.scale * np.asarray(x) @ self.rotation.T + self.translation


def procrustes_align(pred, gt) -> tuple[np.ndarray, Similarity]:
    """Least-squares similarity (rotation, uniform scale, translation) taking pred onto gt.

    Reflections are excluded.
    """
    pred, gt = _pair(pred, gt)
    mu_p, mu_g = pred.mean(axis=0), gt.mean(axis=0)
    P, G = pred - mu_p, gt - mu_g
    var_g = np.sum(G ** 2)
    if var_g <= 1e-12 * max(1.0, np.sum(gt ** 2)):
        raise DegenerateGt("groundtruth joints are all coincident")
    var_p = np.sum(P ** 2)
    if var_p == 0:
        # every pred joint coincident: best fit collapses onto the gt centroid
        return np.broadcast_to(mu_g, gt.shape).copy(), Similarity(0.0, np.eye(3), mu_g)
    U, S, Vt = np.linalg.svd(G.T @ P)
    d = np.ones(3)
    if np.linalg.det(U @ Vt) < 0:
        d[-1] = -1.0
    R = U @ np.diag(d) @ Vt
    s = float(np.sum(S * d) / var_p)
    t = mu_g - s * R @ mu_p
    tf = Similarity(s, R, t)
    return tf.apply(pred), tf


def pa_mpjpe(pred, gt) -> float:
    aligned, _ = procrustes_align(pred, gt)
    return mpjpe(aligned, gt)


def mrpe(preds, gts) -> tuple[float, np.ndarray]:
    """Mean root position error and mean absolute error per axis."""
    preds = np.asarray(preds, dtype=np.float64).reshape(-1, 3)
    gts = np.asarray(gts, dtype=np.float64).reshape(-1, 3)
    if len(preds) == 0:
        raise EmptySet("no roots to compare")
    if preds.shape != gts.shape:
        raise ValueError("prediction and groundtruth counts differ")
    diff = preds - gts
    total = _mean(np.linalg.norm(diff, axis=1))
    axes = np.array([_mean(np.abs(diff[:, a])) for a in range(3)])
    return total, axes


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int], ...]  # (prediction index, groundtruth index)
    unmatched_gt: tuple[int, ...]
    unmatched_pred: tuple[int, ...] = ()


def match_roots(pred_roots, gt_roots, radius: float = 500.0) -> Matching:
    """Greedy matching on ascending 3D root distance, capped at ``radius`` (inclusive)."""
    pr = np.asarray(pred_roots, dtype=np.float64).reshape(-1, 3)
    gr = np.asarray(gt_roots, dtype=np.float64).reshape(-1, 3)
    cand = []
    for i, j in itertools.product(range(len(pr)), range(len(gr))):
        d = float(np.linalg.norm(pr[i] - gr[j]))
        if d <= radius:
            cand.append((d, i, j))
    cand.sort()
    used_p, used_g, pairs = set(), set(), []
    for _, i, j in cand:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        pairs.append((i, j))
    pairs.sort(key=lambda p: p[1])
    return Matching(tuple(pairs),
                    tuple(j for j in range(len(gr)) if j not in used_g),
                    tuple(i for i in range(len(pr)) if i not in used_p))


def match_persons(preds, gts, radius: float = 500.0, root_index: int = 0) -> Matching:
    """Match predicted poses to groundtruth poses of one image by their roots."""
    pr = [np.asarray(p)[root_index] for p in preds]
    gr = [np.asarray(g)[root_index] for g in gts]
    return match_roots(np.reshape(pr, (-1, 3)), np.reshape(gr, (-1, 3)), radius)


def pck(pairs, threshold: float = 150.0, root_index: int | None = None,
        n_missing_joints: int = 0) -> float:
    """Fraction of joints with error <= ``threshold``.

    ``pairs`` is a sequence of (pred, gt) poses. ``n_missing_joints`` adds
    joints that count as wrong (unmatched groundtruth in all-groundtruth mode).
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    errs = [joint_errors(p, g, root_index) for p, g in pairs]
    errs = np.concatenate(errs) if errs else np.zeros(0)
    total = len(errs) + n_missing_joints
    if total == 0:
        return 0.0
    return int(np.count_nonzero(errs <= threshold)) / total


@dataclass(frozen=True)
class PckCurve:
    thresholds: tuple[float, ...]
    fractions: tuple[float, ...]

    def __post_init__(self):
        if len(self.thresholds) != len(self.fractions):
            raise ValueError("thresholds and fractions differ in length")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError("thresholds must be strictly increasing")
        if any(not 0 <= f <= 1 for f in self.fractions) or \
                any(b < a for a, b in zip(self.fractions, self.fractions[1:])):
            raise ValueError("fractions must be non-decreasing values in [0, 1]")

    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.thresholds, self.fractions))


def pck_curve(errors, thresholds=AUC_THRESHOLDS, n_missing_joints: int = 0) -> PckCurve:
    """PCK at each threshold from a flat array of per-joint errors."""
    errors = np.asarray(errors, dtype=np.float64).ravel()
    total = len(errors) + n_missing_joints
    fr = [int(np.count_nonzero(errors <= t)) / total if total else 0.0 for t in thresholds]
    return PckCurve(tuple(float(t) for t in thresholds), tuple(fr))


def auc(curve: PckCurve) -> float:
    """Mean PCK over the curve's threshold grid."""
    if len(curve.fractions) < 2:
        raise TooFewPoints("AUC needs at least two thresholds")
    return _mean(curve.fractions)


def ap_root(preds, gts, threshold: float = 250.0) -> float:
    """Average precision of root detections.

    ``preds`` are ``(image_id, score, root_xyz)`` and ``gts`` ``(image_id,
    root_xyz)``. Predictions are visited by descending score; each claims the
    nearest unclaimed groundtruth of its image and is a hit when that
    distance is strictly below ``threshold``. Precision is interpolated over
    all recall points.
    """
    n_gt = len(gts)
    if n_gt == 0 or len(preds) == 0:
        return 0.0
    by_image: dict = {}
    for j, (img, root) in enumerate(gts):
        by_image.setdefault(img, []).append((j, np.asarray(root, dtype=np.float64)))
    order = sorted(range(len(preds)), key=lambda i: -float(preds[i][1]))
    claimed = set()
    hits = []
    for i in order:
        img, _, root = preds[i]
        root = np.asarray(root, dtype=np.float64)
        best, best_d = None, math.inf
        for j, g in by_image.get(img, []):
            if j in claimed:
                continue
            d = float(np.linalg.norm(root - g))
            if d < best_d:
                best, best_d = j, d
        hit = best is not None and best_d < threshold
        if hit:
            claimed.add(best)
        hits.append(hit)
    return average_precision(hits, n_gt)


def average_precision(hits, n_gt: int) -> float:
    """All-point interpolated AP from hit flags in ranked order."""
    hits = np.asarray(hits, dtype=bool)
    if n_gt == 0 or len(hits) == 0:
        return 0.0
    tp = np.cumsum(hits)
    precision = tp / np.arange(1, len(hits) + 1)
    recall = tp / n_gt
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return math.fsum((recall - prev_recall) * envelope)


@dataclass(frozen=True)
class EvalConfig:
    pck_threshold: float = 150.0
    match_radius: float = 500.0
    ap_threshold: float = 250.0
    auc_thresholds: tuple[float, ...] = AUC_THRESHOLDS
    root_index: int = 0


@dataclass(frozen=True)
class PersonPrediction:
    image_id: object
    pose: np.ndarray  # (J, 3) camera-centered mm
    score: float = 1.0


@dataclass(frozen=True)
class PersonGt:
    image_id: object
    pose: np.ndarray


@dataclass
class EvalReport:
    n_pred: int
    n_gt: int
    n_matched: int
    n_joints: int
    ap_root: float
    # matched groundtruths only; None when nothing matched
    mpjpe: float | None = None
    pa_mpjpe: float | None = None
    mrpe: float | None = None
    mrpe_axes: tuple[float, float, float] | None = None
    pck_rel: float | None = None
    pck_abs: float | None = None
    auc_rel: float | None = None
    curve_rel: PckCurve | None = None
    # every groundtruth, unmatched joints counted as wrong
    pck_rel_all: float = 0.0
    pck_abs_all: float = 0.0
    auc_rel_all: float = 0.0
    curve_rel_all: PckCurve | None = None
    matches: list = field(default_factory=list)  # (image_id, pred index, gt index)


def evaluate(preds, gts, config: EvalConfig = EvalConfig()) -> EvalReport:
    """Match per image, then compute every metric in matched and all-groundtruth modes."""
    preds = list(preds)
    gts = list(gts)
    shapes = {np.shape(p.pose) for p in preds} | {np.shape(g.pose) for g in gts}
    if len(shapes) > 1:
        raise SchemaMismatch(f"inconsistent pose shapes: {sorted(shapes)}")
    J = shapes.pop()[0] if shapes else 0
    if J and not 0 <= config.root_index < J:
        raise SchemaMismatch("root_index out of range")
    ri = config.root_index

    images = sorted({g.image_id for g in gts} | {p.image_id for p in preds}, key=repr)
    pairs, matches = [], []
    for img in images:
        pi = [i for i, p in enumerate(preds) if p.image_id == img]
        gi = [j for j, g in enumerate(gts) if g.image_id == img]
        m = match_persons([preds[i].pose for i in pi], [gts[j].pose for j in gi],
                          config.match_radius, ri)
        for a, b in m.pairs:
            matches.append((img, pi[a], gi[b]))
            pairs.append((preds[pi[a]].pose, gts[gi[b]].pose))
    n_missing = (len(gts) - len(pairs)) * J

    ap = ap_root([(p.image_id, p.score, np.asarray(p.pose)[ri]) for p in preds],
                 [(g.image_id, np.asarray(g.pose)[ri]) for g in gts], config.ap_threshold)
    rep = EvalReport(n_pred=len(preds), n_gt=len(gts), n_matched=len(pairs), n_joints=J,
                     ap_root=ap, matches=matches)

    rel_err = np.concatenate([joint_errors(p, g, ri) for p, g in pairs]) if pairs else np.zeros(0)
    rep.curve_rel_all = pck_curve(rel_err, config.auc_thresholds, n_missing)
    rep.auc_rel_all = auc(rep.curve_rel_all)
    rep.pck_rel_all = pck(pairs, config.pck_threshold, ri, n_missing)
    rep.pck_abs_all = pck(pairs, config.pck_threshold, None, n_missing)
    if pairs:
        rep.mpjpe = _mean(rel_err)
        rep.pa_mpjpe = _mean(np.concatenate(
            [joint_errors(procrustes_align(p, g)[0], g) for p, g in pairs]))
        total, axes = mrpe([np.asarray(p)[ri] for p, _ in pairs],
                           [np.asarray(g)[ri] for _, g in pairs])
        rep.mrpe, rep.mrpe_axes = total, tuple(float(a) for a in axes)
        rep.curve_rel = pck_curve(rel_err, config.auc_thresholds)
        rep.auc_rel = auc(rep.curve_rel)
        rep.pck_rel = pck(pairs, config.pck_threshold, ri)
        rep.pck_abs = pck(pairs, config.pck_threshold, None)
    return rep
