import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abspose.errors import DegenerateGt, EmptySet, JointCountMismatch, SchemaMismatch, TooFewPoints
from abspose.metrics import (
    AUC_THRESHOLDS,
    EvalConfig,
    PckCurve,
    PersonGt,
    PersonPrediction,
    ap_root,
    auc,
    average_precision,
    evaluate,
    joint_errors,
    match_roots,
    mpjpe,
    mrpe,
    pa_mpjpe,
    pck,
    pck_curve,
    procrustes_align,
)
from oracles import align_by_search, ap_by_enumeration, exhaustive_matching, random_rotation


def rand_pose(rng, J=17):
    return rng.normal(0, 300, (J, 3)) + [0, 0, 5000]


# ---- per-pose errors

def test_mpjpe_hand_value():
    gt = np.zeros((2, 3))
    pred = np.array([[3.0, 4.0, 0.0], [0.0, 0.0, 2.0]])
    assert mpjpe(pred, gt) == 3.5
    # root aligned on joint 1: shift pred by (0, 0, -2)
    assert mpjpe(pred, gt, root_index=1) == pytest.approx((math.sqrt(9 + 16 + 4) + 0) / 2)


def test_mpjpe_shape_mismatch():
    with pytest.raises(JointCountMismatch):
        mpjpe(np.zeros((3, 3)), np.zeros((4, 3)))


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=100)
def test_procrustes_recovers_similarity(seed):
    rng = np.random.default_rng(seed)
    gt = rand_pose(rng)
    R = random_rotation(rng)
    s = rng.uniform(0.2, 5)
    t = rng.normal(0, 1000, 3)
    pred = (gt - t) @ R / s  # gt = s R pred + t
    aligned, tf = procrustes_align(pred, gt)
    assert np.abs(aligned - gt).max() < 1e-9 * 1e4
    assert tf.scale == pytest.approx(s, rel=1e-9)
    assert np.allclose(tf.rotation, R, atol=1e-9)


def test_procrustes_has_no_reflection():
    rng = np.random.default_rng(0)
    gt = rand_pose(rng)
    mirrored = gt * [-1, 1, 1]
    _, tf = procrustes_align(mirrored, gt)
    assert np.linalg.det(tf.rotation) == pytest.approx(1.0)
    assert pa_mpjpe(mirrored, gt) > 1.0


def test_procrustes_matches_search_oracle():
    rng = np.random.default_rng(5)
    for _ in range(3):
        pred, gt = rng.normal(0, 100, (5, 3)), rng.normal(0, 100, (5, 3))
        aligned, _ = procrustes_align(pred, gt)
        best, *_ = align_by_search(pred, gt, rng, n_random=2000, polish_iters=3000)
        assert np.sum((aligned - gt) ** 2) <= best + 1e-6 * max(1.0, best)


@given(seed=st.integers(0, 2**32 - 1))
def test_pa_mpjpe_not_above_root_aligned(seed):
    rng = np.random.default_rng(seed)
    gt = rand_pose(rng)
    pred = gt + rng.normal(0, 80, gt.shape)
    assert pa_mpjpe(pred, gt) <= mpjpe(pred, gt, root_index=14) + 1e-9


def test_procrustes_degenerate_inputs():
    gt = np.ones((5, 3))
    with pytest.raises(DegenerateGt):
        procrustes_align(np.random.default_rng(0).normal(size=(5, 3)), gt)
    gt = np.random.default_rng(1).normal(size=(5, 3))
    aligned, tf = procrustes_align(np.zeros((5, 3)), gt)
    assert np.allclose(aligned, gt.mean(0))
    assert tf.scale == 0.0


def test_mrpe_axes():
    total, axes = mrpe([[3, 4, 0], [0, 0, -2]], [[0, 0, 0], [0, 0, 0]])
    assert total == 3.5
    assert np.array_equal(axes, [1.5, 2.0, 1.0])
    with pytest.raises(EmptySet):
        mrpe(np.zeros((0, 3)), np.zeros((0, 3)))


# ---- PCK / AUC

def test_pck_threshold_is_inclusive():
    gt = np.zeros((4, 3))
    pred = np.array([[150.0, 0, 0], [150.0 + 1e-9, 0, 0], [0, 0, 0], [0, 10, 0]])
    assert pck([(pred, gt)], 150.0) == 0.75
    assert pck([(pred, gt)], 150.0, n_missing_joints=4) == 0.375


def test_pck_curve_and_auc():
    c = pck_curve([0.0, 7.0, 100.0, 1000.0])
    assert c.thresholds == AUC_THRESHOLDS and len(c.thresholds) == 30
    assert c.fractions[0] == 0.25 and c.fractions[1] == 0.5 and c.fractions[-1] == 0.75
    # fraction is 0.5 for thresholds 10..95 (18 values), 0.75 for 100..150 (11 values)
    assert auc(c) == pytest.approx((0.25 + 18 * 0.5 + 11 * 0.75) / 30)
    assert auc(pck_curve(np.zeros(5))) == 1.0
    with pytest.raises(TooFewPoints):
        auc(PckCurve((5.0,), (1.0,)))


def test_pck_curve_rejects_bad_curves():
    with pytest.raises(ValueError):
        PckCurve((5.0, 5.0), (0.1, 0.2))
    with pytest.raises(ValueError):
        PckCurve((5.0, 10.0), (0.5, 0.2))


@given(errs=st.lists(st.floats(0, 500), min_size=1, max_size=40))
def test_curve_is_monotone_and_bounded(errs):
    c = pck_curve(errs)
    assert all(0 <= f <= 1 for f in c.fractions)
    assert list(c.fractions) == sorted(c.fractions)
    assert 0 <= auc(c) <= 1


# ---- AP

def test_ap_hand_case():
    # three predictions, two groundtruths, ranked hits: TP, FP, TP
    gts = [(0, [0.0, 0, 5000]), (0, [1000.0, 0, 5000])]
    preds = [(0, 0.9, [10.0, 0, 5000]), (0, 0.8, [3000.0, 0, 5000]), (0, 0.7, [1020.0, 0, 5000])]
    ap = ap_root(preds, gts)
    assert ap == ap_by_enumeration([True, False, True], 2)
    assert ap == pytest.approx(0.5 + 0.5 * 2 / 3, abs=1e-15)


def test_ap_threshold_is_strict():
    gts = [(0, [0.0, 0, 5000])]
    assert ap_root([(0, 1.0, [250.0, 0, 5000])], gts, 250.0) == 0.0
    assert ap_root([(0, 1.0, [249.999, 0, 5000])], gts, 250.0) == 1.0


def test_ap_respects_images_and_claims():
    gts = [(0, [0.0, 0, 5000]), (1, [0.0, 0, 5000])]
    preds = [(0, 0.9, [0.0, 0, 5000]), (0, 0.8, [0.0, 0, 5000]), (1, 0.1, [0.0, 0, 5000])]
    # second prediction of image 0 finds its groundtruth already claimed
    assert ap_root(preds, gts) == ap_by_enumeration([True, False, True], 2)


def test_ap_empty():
    assert ap_root([], [(0, [0, 0, 1])]) == 0.0
    assert average_precision([], 3) == 0.0


@given(hits=st.lists(st.booleans(), min_size=1, max_size=12), extra=st.integers(0, 5))
def test_average_precision_matches_enumeration(hits, extra):
    n_gt = sum(hits) + extra
    if n_gt == 0:
        return
    assert average_precision(hits, n_gt) == pytest.approx(ap_by_enumeration(hits, n_gt), abs=1e-12)


# ---- matching

def test_match_radius_inclusive():
    m = match_roots([[500.0, 0, 0]], [[0.0, 0, 0]], 500.0)
    assert m.pairs == ((0, 0),)
    m = match_roots([[500.0 + 1e-9, 0, 0]], [[0.0, 0, 0]], 500.0)
    assert m.pairs == () and m.unmatched_gt == (0,) and m.unmatched_pred == (0,)


def test_greedy_takes_closest_pair_first():
    # greedy pairs p0-g1 (distance 1) and leaves g0 unmatched although a
    # two-pair assignment exists within the radius
    m = match_roots([[0.0, 0, 0], [-200.0, 0, 0]], [[-150.0, 0, 0], [1.0, 0, 0]], 100.0)
    assert set(m.pairs) == {(0, 1), (1, 0)}
    m = match_roots([[0.0, 0, 0]], [[-60.0, 0, 0], [1.0, 0, 0]], 100.0)
    assert m.pairs == ((0, 1),) and m.unmatched_gt == (0,)


@given(seed=st.integers(0, 2**32 - 1), n_p=st.integers(0, 4), n_g=st.integers(0, 4))
@settings(max_examples=100)
def test_matching_equals_exhaustive_on_separated_people(seed, n_p, n_g):
    # people at least 2 m apart, predictions within 200 mm of their person:
    # greedy and the optimal assignment must coincide
    rng = np.random.default_rng(seed)
    centers = np.array([[2000.0 * i, 0, 5000] for i in range(max(n_p, n_g))]).reshape(-1, 3)
    gts = centers[:n_g]
    perm = rng.permutation(len(centers))[:n_p]
    preds = centers[perm] + rng.uniform(-115, 115, (n_p, 3))
    m = match_roots(preds, gts, 500.0)
    assert sorted(m.pairs, key=lambda p: p[1]) == exhaustive_matching(preds, gts, 500.0)


# ---- evaluate

def test_evaluate_perfect_predictions():
    rng = np.random.default_rng(0)
    gts = [PersonGt(i // 2, rand_pose(rng)) for i in range(6)]
    preds = [PersonPrediction(g.image_id, g.pose.copy(), 0.5) for g in gts]
    rep = evaluate(preds, gts, EvalConfig(root_index=14))
    assert rep.n_matched == 6
    assert rep.mpjpe == rep.mrpe == 0.0
    assert rep.pa_mpjpe < 1e-9
    assert rep.pck_rel == rep.pck_abs == rep.auc_rel == rep.ap_root == 1.0
    assert rep.pck_rel_all == rep.auc_rel_all == 1.0


def test_evaluate_all_mode_counts_missing_people():
    rng = np.random.default_rng(1)
    gts = [PersonGt(0, rand_pose(rng)), PersonGt(0, rand_pose(rng) + [5000, 0, 0])]
    preds = [PersonPrediction(0, gts[0].pose.copy())]
    rep = evaluate(preds, gts, EvalConfig(root_index=14))
    assert rep.pck_rel == 1.0
    assert rep.pck_rel_all == 0.5
    assert rep.auc_rel_all == 0.5
    assert rep.ap_root == 0.5


def test_evaluate_nothing_matched():
    rng = np.random.default_rng(2)
    rep = evaluate([], [PersonGt(0, rand_pose(rng))], EvalConfig(root_index=14))
    assert rep.n_matched == 0 and rep.mpjpe is None and rep.pck_rel is None
    assert rep.pck_rel_all == 0.0 and rep.ap_root == 0.0


def test_evaluate_rejects_mixed_shapes():
    with pytest.raises(SchemaMismatch):
        evaluate([PersonPrediction(0, np.zeros((3, 3)) + 1)], [PersonGt(0, np.ones((4, 3)))])


def test_evaluate_is_order_invariant():
    rng = np.random.default_rng(3)
    gts = [PersonGt(i % 3, rand_pose(rng) + [2000 * i, 0, 0]) for i in range(9)]
    preds = [PersonPrediction(g.image_id, g.pose + rng.normal(0, 40, g.pose.shape), rng.uniform())
             for g in gts]
    a = evaluate(preds, gts, EvalConfig(root_index=14))
    order = rng.permutation(9)
    b = evaluate([preds[i] for i in order], [gts[i] for i in order], EvalConfig(root_index=14))
    for key in ("mpjpe", "pa_mpjpe", "mrpe", "pck_rel", "pck_abs", "auc_rel", "ap_root",
                "pck_rel_all", "auc_rel_all"):
        assert getattr(a, key) == getattr(b, key), key


def test_joint_errors_root_alignment_ignores_translation():
    rng = np.random.default_rng(4)
    gt = rand_pose(rng)
    assert np.allclose(joint_errors(gt + [100, -50, 300], gt, root_index=3), 0)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=50)
def test_pa_mpjpe_invariant_to_similarity_on_pred(seed):
    rng = np.random.default_rng(seed)
    gt = rand_pose(rng)
    pred = gt + rng.normal(0, 50, gt.shape)
    moved = rng.uniform(0.5, 2) * pred @ random_rotation(rng).T + rng.normal(0, 1000, 3)
    assert abs(pa_mpjpe(moved, gt) - pa_mpjpe(pred, gt)) <= 1e-9


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8))
@settings(max_examples=50)
def test_ap_invariant_to_input_order(seed, n):
    rng = np.random.default_rng(seed)
    gts = [(int(rng.integers(0, 2)), rng.normal(0, 400, 3)) for _ in range(4)]
    scores = rng.permutation(n) / n + 0.01
    preds = [(int(rng.integers(0, 2)), float(scores[i]), rng.normal(0, 400, 3)) for i in range(n)]
    order = rng.permutation(n)
    assert ap_root(preds, gts) == ap_root([preds[i] for i in order], gts)
