"""Command-line interface: ``abspose <command> ...``.

Exit codes: 0 success, 1 invalid input, 2 I/O failure.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import __version__
from .correction import RegressorParams, TrainConfig
from .errors import AbsPoseError, SchemaError
from .io import (
    SCHEMA,
    load_gt,
    load_pred,
    load_pred2d,
    read_json,
    report_to_dict,
    write_csv,
    write_json,
    write_report,
)
from .metrics import EvalConfig
from .pipeline import (
    ROOTFIT_METHODS,
    evaluate_documents,
    observe,
    predict_with_correction,
    rootfit_table,
    scene_config_from_dict,
    scene_to_gt,
    scene_to_pred,
    scene_to_pred2d,
    train_correction,
)
from .rootfit import RansacConfig
from .synth import NoiseConfig, SceneConfig, generate_scene, run_k_correlation


def _scene_config(args) -> SceneConfig:
    cfg = scene_config_from_dict(read_json(args.config)) if args.config else SceneConfig()
    over = {}
    if getattr(args, "images", None) is not None:
        over["n_images"] = args.images
    if getattr(args, "persons", None):
        over["persons_per_image"] = tuple(args.persons)
    if getattr(args, "heights", None):
        over["height_range"] = tuple(args.heights)
    if getattr(args, "depths", None):
        over["depth_range"] = tuple(args.depths)
    if args.seed is not None:
        over["seed"] = args.seed
    try:
        return replace(cfg, **over)
    except ValueError as e:
        raise SchemaError(f"scene config: {e}") from None


def cmd_eval(args) -> int:
    gt = load_gt(args.gt)
    pred = load_pred(args.pred, gt.skeleton.num_joints, gt.skeleton.root_index)
    config = EvalConfig(pck_threshold=args.pck_threshold, match_radius=args.match_radius,
                        ap_threshold=args.ap_threshold)
    rep, config = evaluate_documents(gt, pred, config)
    doc = report_to_dict(rep, config, args.mode)
    write_report(doc, args.out)
    if args.csv:
        matched = dict(rep.curve_rel.rows()) if rep.curve_rel else {}
        rows = [(t, matched.get(t, ""), f) for t, f in rep.curve_rel_all.rows()]
        write_csv(["threshold_mm", "pck_rel_matched", "pck_rel_all"], rows, args.csv)
    s = doc["summary"]
    print(f"mode={args.mode} pck_rel={s['pck_rel']} pck_abs={s['pck_abs']} "
          f"auc_rel={s['auc_rel']} ap_root={rep.ap_root}")
    return 0


def cmd_synth(args) -> int:
    cfg = _scene_config(args)
    samples = generate_scene(cfg)
    write_json(scene_to_gt(samples, cfg).to_dict(), args.out)
    if args.pred_out or args.pred2d_out:
        noise = replace(cfg.noise, **{k: v for k, v in (
            ("sigma_2d", args.noise_2d), ("box_jitter", args.noise_box),
            ("sigma_3d", args.noise_3d), ("limb_outlier_rate", args.limb_outlier_rate),
            ("limb_outlier_mm", args.limb_outlier_mm)) if v is not None})
        observed = observe(samples, cfg, noise, cfg.seed)
        if args.pred_out:
            write_json(scene_to_pred(samples, observed, cfg).to_dict(), args.pred_out)
        if args.pred2d_out:
            write_json(scene_to_pred2d(samples, observed).to_dict(), args.pred2d_out)
    print(f"{len(samples)} persons in {cfg.n_images} images")
    return 0


def cmd_rootfit(args) -> int:
    gt = load_gt(args.gt)
    pred2d = load_pred2d(args.pred2d, gt.skeleton.num_joints)
    methods = args.method or ["lsq"]
    ransac = RansacConfig(args.ransac_iters, args.sample_size, args.inlier_px, args.seed)
    table = rootfit_table(gt, pred2d, methods, ransac, args.gamma)
    write_json({"schema": SCHEMA, "kind": "rootfit-report",
                "config": {"methods": methods, "ransac_iters": args.ransac_iters,
                           "sample_size": args.sample_size, "inlier_px": args.inlier_px,
                           "seed": args.seed, "gamma_prime": args.gamma},
                "methods": table}, args.out)
    for m in methods:
        row = table[m]
        print(f"{m:12s} mrpe={row['mrpe']} x={row['mrpe_x']} y={row['mrpe_y']} "
              f"z={row['mrpe_z']} n={row['n']} failed={row['n_failed']}")
    return 0


def cmd_corr(args) -> int:
    cfg = _scene_config(args)
    r, rows = run_k_correlation(cfg)
    write_csv(["k_mm", "z_true_mm"], [tuple(map(float, row)) for row in rows], args.out)
    print(f"r={r!r} n={len(rows)}")
    return 0


def cmd_train(args) -> int:
    gt = load_gt(args.data)
    if not gt.persons:
        raise SchemaError("gt.persons: no training samples")
    cfg = TrainConfig(lr=args.lr, epochs=args.epochs, batch_size=args.batch_size,
                      seed=args.seed, hidden=args.hidden)
    params = train_correction(gt, cfg)
    doc = {"schema": SCHEMA, "kind": "correction-model",
           "train_config": {"lr": cfg.lr, "epochs": cfg.epochs, "batch_size": cfg.batch_size,
                            "seed": cfg.seed, "hidden": cfg.hidden}}
    doc.update(params.to_dict())
    write_json(doc, args.out)
    print(f"loss {params.loss_trace[0]!r} -> {params.loss_trace[-1]!r}")
    return 0


def load_model(path) -> RegressorParams:
    doc = read_json(path)
    if doc.get("schema") != SCHEMA or doc.get("kind") != "correction-model":
        raise SchemaError("model: not an abspose/1 correction-model document")
    try:
        return RegressorParams.from_dict(doc)
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"model: {e}") from None


def cmd_predict(args) -> int:
    params = load_model(args.model)
    gt = load_gt(args.gt)
    write_json(predict_with_correction(params, gt).to_dict(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abspose", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"abspose {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help, description=help)
        p.add_argument("--version", action="version", version=f"abspose {__version__}")
        p.set_defaults(func=func)
        return p

    def scene_flags(p):
        p.add_argument("--config", help="scene config JSON")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--images", type=int)
        p.add_argument("--persons", type=int, nargs=2, metavar=("MIN", "MAX"))
        p.add_argument("--heights", type=float, nargs=2, metavar=("MIN", "MAX"))
        p.add_argument("--depths", type=float, nargs=2, metavar=("MIN", "MAX"))

    p = add("eval", cmd_eval, "evaluate predictions against groundtruth")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--mode", choices=("all", "matched"), default="all")
    p.add_argument("--pck-threshold", type=float, default=150.0)
    p.add_argument("--match-radius", type=float, default=500.0)
    p.add_argument("--ap-threshold", type=float, default=250.0)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="write PCK curves as CSV")

    p = add("synth", cmd_synth, "generate a synthetic groundtruth scene")
    scene_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--pred-out", help="noisy pipeline predictions")
    p.add_argument("--pred2d-out", help="noisy 2D + root-relative 3D for rootfit")
    p.add_argument("--noise-2d", type=float, help="2D joint noise sigma, px")
    p.add_argument("--noise-box", type=float, help="relative box size jitter")
    p.add_argument("--noise-3d", type=float, help="root-relative 3D noise sigma, mm")
    p.add_argument("--limb-outlier-rate", type=float)
    p.add_argument("--limb-outlier-mm", type=float)

    p = add("rootfit", cmd_rootfit, "compare root localization methods")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred2d", required=True)
    p.add_argument("--method", action="append", choices=ROOTFIT_METHODS,
                   help="repeat to compare several methods (default: lsq)")
    p.add_argument("--ransac-iters", type=int, default=256)
    p.add_argument("--sample-size", type=int, default=3)
    p.add_argument("--inlier-px", type=float, default=10.0)
    p.add_argument("--gamma", type=float, default=1.0, help="correction factor for method k")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("corr", cmd_corr, "correlation between k and true root depth")
    scene_flags(p)
    p.add_argument("--out", required=True)

    p = add("train-correction", cmd_train, "train the correction-factor regressor")
    p.add_argument("--data", required=True, help="groundtruth JSON to train on")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)

    p = add("predict-correction", cmd_predict, "predict roots with a trained regressor")
    p.add_argument("--model", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AbsPoseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
