"""JSON document schemas (``abspose/1``), validation and atomic writers.

Documents carry ``"schema": "abspose/1"`` and a ``"kind"`` tag. Units are
fixed by the schema: millimetres for 3D, pixels for 2D. See README for the
field-by-field layout.
"""
from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import BBox, CameraIntrinsics
from .errors import ParseError, SchemaError
from .skeleton import SkeletonDef

SCHEMA = "abspose/1"


# ---------------------------------------------------------------- serialization

def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x}")
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits."""
    pad = " " * indent

    def enc(o, depth):
        if isinstance(o, np.ndarray):
            o = o.tolist()
        if o is None:
            return "null"
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return _fmt_float(float(o))
        if isinstance(o, str):
            return json.dumps(o, ensure_ascii=False)
        inner = pad * (depth + 1)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{inner}{json.dumps(str(k), ensure_ascii=False)}: {enc(o[k], depth + 1)}"
                     for k in sorted(o, key=str)]
            return "{\n" + ",\n".join(items) + "\n" + pad * depth + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            # numeric rows stay on one line
            if all(isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool)
                   for x in o):
                return "[" + ", ".join(enc(x, depth) for x in o) + "]"
            return "[\n" + ",\n".join(inner + enc(x, depth + 1) for x in o) + "\n" + pad * depth + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj, 0) + "\n"


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(obj, path) -> None:
    atomic_write_text(path, dumps(obj))


def write_csv(header, rows, path) -> None:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt_float(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    atomic_write_text(path, buf.getvalue())


def read_json(path):
    path = Path(path)
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"{path}: not valid UTF-8 ({e.reason} at byte {e.start})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None


# ------------------------------------------------------------------ validation

def _req(d, key, ctx):
    if not isinstance(d, dict):
        raise SchemaError(f"{ctx}: expected an object")
    if key not in d:
        raise SchemaError(f"{ctx}: missing field '{key}'")
    return d[key]


def _num(x, ctx) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise SchemaError(f"{ctx}: expected a finite number")
    return float(x)


def _int(x, ctx) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise SchemaError(f"{ctx}: expected an integer")
    return x


def _list(x, ctx) -> list:
    if not isinstance(x, list):
        raise SchemaError(f"{ctx}: expected an array")
    return x


def _matrix(x, cols, ctx, rows=None) -> np.ndarray:
    x = _list(x, ctx)
    if rows is not None and len(x) != rows:
        raise SchemaError(f"{ctx}: expected {rows} rows, got {len(x)}")
    out = np.empty((len(x), cols))
    for i, r in enumerate(x):
        r = _list(r, f"{ctx}[{i}]")
        if len(r) != cols:
            raise SchemaError(f"{ctx}[{i}]: expected {cols} values, got {len(r)}")
        for c, v in enumerate(r):
            out[i, c] = _num(v, f"{ctx}[{i}][{c}]")
    return out


def _vector(x, n, ctx) -> np.ndarray:
    x = _list(x, ctx)
    if len(x) != n:
        raise SchemaError(f"{ctx}: expected {n} values, got {len(x)}")
    return np.array([_num(v, f"{ctx}[{i}]") for i, v in enumerate(x)])


def _check_header(doc, kind, ctx):
    if _req(doc, "schema", ctx) != SCHEMA:
        raise SchemaError(f"{ctx}: unsupported schema {doc['schema']!r}, expected {SCHEMA!r}")
    if _req(doc, "kind", ctx) != kind:
        raise SchemaError(f"{ctx}: expected kind {kind!r}, got {doc['kind']!r}")


def _bbox(x, ctx) -> BBox:
    v = _vector(x, 4, ctx)
    if not (v[2] > 0 and v[3] > 0):
        raise SchemaError(f"{ctx}: box width and height must be positive")
    return BBox(*v)


def skeleton_to_dict(s: SkeletonDef) -> dict:
    return {"joint_names": list(s.joint_names), "root_index": s.root_index,
            "limb": list(s.limb), "edges": [list(e) for e in s.edges]}


def skeleton_from_dict(d, ctx="skeleton") -> SkeletonDef:
    names = _list(_req(d, "joint_names", ctx), f"{ctx}.joint_names")
    if not all(isinstance(n, str) for n in names):
        raise SchemaError(f"{ctx}.joint_names: expected strings")
    limb = _list(_req(d, "limb", ctx), f"{ctx}.limb")
    if not all(isinstance(b, bool) for b in limb):
        raise SchemaError(f"{ctx}.limb: expected booleans")
    edges = [tuple(_int(v, f"{ctx}.edges[{i}]") for v in _list(e, f"{ctx}.edges[{i}]"))
             for i, e in enumerate(_list(d.get("edges", []), f"{ctx}.edges"))]
    if any(len(e) != 2 for e in edges):
        raise SchemaError(f"{ctx}.edges: each edge needs two joint indices")
    try:
        return SkeletonDef(tuple(names), _int(_req(d, "root_index", ctx), f"{ctx}.root_index"),
                           tuple(limb), tuple(edges))
    except ValueError as e:
        raise SchemaError(f"{ctx}: {e}") from None


# ------------------------------------------------------------------- documents

@dataclass(frozen=True)
class ImageInfo:
    id: int
    width: int
    height: int
    cam: CameraIntrinsics


@dataclass(frozen=True)
class GtPersonRecord:
    image_id: int
    bbox: BBox
    joints_cam: np.ndarray  # (J, 3) mm


@dataclass(frozen=True)
class GtDocument:
    skeleton: SkeletonDef
    images: dict  # id -> ImageInfo
    persons: list

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "kind": "gt",
            "skeleton": skeleton_to_dict(self.skeleton),
            "images": [{"id": im.id, "width": im.width, "height": im.height,
                        "intrinsics": {"alpha_x": im.cam.alpha_x, "alpha_y": im.cam.alpha_y,
                                       "cx": im.cam.cx, "cy": im.cam.cy}}
                       for im in sorted(self.images.values(), key=lambda i: i.id)],
            "persons": [{"image_id": p.image_id,
                         "bbox": [p.bbox.x, p.bbox.y, p.bbox.w, p.bbox.h],
                         "joints_cam": p.joints_cam,
                         "root_index": self.skeleton.root_index} for p in self.persons],
        }


@dataclass(frozen=True)
class PredPersonRecord:
    image_id: int
    score: float
    root: np.ndarray      # (3,) x_R px, y_R px, Z_R mm
    rel_pose: np.ndarray  # (J, 3) px, px, mm


@dataclass(frozen=True)
class PredDocument:
    persons: list

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "kind": "pred",
                "persons": [{"image_id": p.image_id, "score": p.score, "root": p.root,
                             "rel_pose": p.rel_pose} for p in self.persons]}


@dataclass(frozen=True)
class Pred2DPersonRecord:
    image_id: int
    gt_index: int
    bbox: BBox
    joints_2d: np.ndarray  # (J, 2) px
    rel_cam: np.ndarray    # (J, 3) mm, root-relative, camera axes


@dataclass(frozen=True)
class Pred2DDocument:
    persons: list

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "kind": "pred2d",
                "persons": [{"image_id": p.image_id, "gt_index": p.gt_index,
                             "bbox": [p.bbox.x, p.bbox.y, p.bbox.w, p.bbox.h],
                             "joints_2d": p.joints_2d, "rel_cam": p.rel_cam}
                            for p in self.persons]}


def parse_gt(doc) -> GtDocument:
    _check_header(doc, "gt", "gt")
    skeleton = skeleton_from_dict(_req(doc, "skeleton", "gt"))
    J = skeleton.num_joints
    images = {}
    for i, im in enumerate(_list(_req(doc, "images", "gt"), "gt.images")):
        ctx = f"gt.images[{i}]"
        iid = _int(_req(im, "id", ctx), f"{ctx}.id")
        if iid in images:
            raise SchemaError(f"{ctx}.id: duplicate image id {iid}")
        w = _int(_req(im, "width", ctx), f"{ctx}.width")
        h = _int(_req(im, "height", ctx), f"{ctx}.height")
        if w <= 0 or h <= 0:
            raise SchemaError(f"{ctx}: image size must be positive")
        intr = _req(im, "intrinsics", ctx)
        vals = [_num(_req(intr, k, f"{ctx}.intrinsics"), f"{ctx}.intrinsics.{k}")
                for k in ("alpha_x", "alpha_y", "cx", "cy")]
        if not (vals[0] > 0 and vals[1] > 0):
            raise SchemaError(f"{ctx}.intrinsics: focal lengths must be positive")
        images[iid] = ImageInfo(iid, w, h, CameraIntrinsics(*vals))
    persons = []
    for i, p in enumerate(_list(_req(doc, "persons", "gt"), "gt.persons")):
        ctx = f"gt.persons[{i}]"
        iid = _int(_req(p, "image_id", ctx), f"{ctx}.image_id")
        if iid not in images:
            raise SchemaError(f"{ctx}.image_id: unknown image {iid}")
        joints = _matrix(_req(p, "joints_cam", ctx), 3, f"{ctx}.joints_cam", J)
        if "root_index" in p and p["root_index"] != skeleton.root_index:
            raise SchemaError(f"{ctx}.root_index: disagrees with skeleton")
        persons.append(GtPersonRecord(iid, _bbox(_req(p, "bbox", ctx), f"{ctx}.bbox"), joints))
    return GtDocument(skeleton, images, persons)


def parse_pred(doc, n_joints: int | None = None, root_index: int | None = None) -> PredDocument:
    _check_header(doc, "pred", "pred")
    persons = []
    for i, p in enumerate(_list(_req(doc, "persons", "pred"), "pred.persons")):
        ctx = f"pred.persons[{i}]"
        score = _num(_req(p, "score", ctx), f"{ctx}.score")
        if not 0 <= score <= 1:
            raise SchemaError(f"{ctx}.score: must lie in [0, 1]")
        root = _vector(_req(p, "root", ctx), 3, f"{ctx}.root")
        if not root[2] > 0:
            raise SchemaError(f"{ctx}.root: depth must be positive")
        rel = _matrix(_req(p, "rel_pose", ctx), 3, f"{ctx}.rel_pose", n_joints)
        if len(rel) == 0:
            raise SchemaError(f"{ctx}.rel_pose: empty pose")
        if root_index is not None and abs(rel[root_index, 2]) > 1e-6:
            raise SchemaError(f"{ctx}.rel_pose: root joint must have zero relative depth")
        persons.append(PredPersonRecord(_int(_req(p, "image_id", ctx), f"{ctx}.image_id"),
                                        score, root, rel))
    if n_joints is None and len({len(p.rel_pose) for p in persons}) > 1:
        raise SchemaError("pred.persons: poses differ in joint count")
    return PredDocument(persons)


def parse_pred2d(doc, n_joints: int | None = None) -> Pred2DDocument:
    _check_header(doc, "pred2d", "pred2d")
    persons = []
    for i, p in enumerate(_list(_req(doc, "persons", "pred2d"), "pred2d.persons")):
        ctx = f"pred2d.persons[{i}]"
        j2 = _matrix(_req(p, "joints_2d", ctx), 2, f"{ctx}.joints_2d", n_joints)
        rel = _matrix(_req(p, "rel_cam", ctx), 3, f"{ctx}.rel_cam", len(j2))
        persons.append(Pred2DPersonRecord(
            _int(_req(p, "image_id", ctx), f"{ctx}.image_id"),
            _int(_req(p, "gt_index", ctx), f"{ctx}.gt_index"),
            _bbox(_req(p, "bbox", ctx), f"{ctx}.bbox"), j2, rel))
    return Pred2DDocument(persons)


def load_gt(path) -> GtDocument:
    return parse_gt(read_json(path))


def load_pred(path, n_joints: int | None = None, root_index: int | None = None) -> PredDocument:
    return parse_pred(read_json(path), n_joints, root_index)


def load_pred2d(path, n_joints: int | None = None) -> Pred2DDocument:
    return parse_pred2d(read_json(path), n_joints)


def report_to_dict(rep, config, mode: str = "all") -> dict:
    """Report document for an ``EvalReport`` and the ``EvalConfig`` that produced it."""
    matched = None
    if rep.n_matched:
        matched = {"mpjpe": rep.mpjpe, "pa_mpjpe": rep.pa_mpjpe, "mrpe": rep.mrpe,
                   "mrpe_x": rep.mrpe_axes[0], "mrpe_y": rep.mrpe_axes[1],
                   "mrpe_z": rep.mrpe_axes[2], "pck_rel": rep.pck_rel, "pck_abs": rep.pck_abs,
                   "auc_rel": rep.auc_rel}
    all_gt = {"pck_rel": rep.pck_rel_all, "pck_abs": rep.pck_abs_all, "auc_rel": rep.auc_rel_all}
    summary = all_gt if mode == "all" else (matched or {"pck_rel": None, "pck_abs": None,
                                                        "auc_rel": None})
    return {
        "schema": SCHEMA,
        "kind": "eval-report",
        "config": {"mode": mode, "pck_threshold": config.pck_threshold,
                   "match_radius": config.match_radius, "ap_threshold": config.ap_threshold,
                   "auc_thresholds": list(config.auc_thresholds), "root_index": config.root_index},
        "counts": {"predictions": rep.n_pred, "groundtruths": rep.n_gt,
                   "matched": rep.n_matched, "joints": rep.n_joints},
        "ap_root": rep.ap_root,
        "matched": matched,
        "all": all_gt,
        "summary": {"pck_rel": summary["pck_rel"], "pck_abs": summary["pck_abs"],
                    "auc_rel": summary["auc_rel"]},
        "curves": {"rel_matched": [list(r) for r in rep.curve_rel.rows()] if rep.curve_rel else None,
                   "rel_all": [list(r) for r in rep.curve_rel_all.rows()]},
    }


def write_report(report: dict, path) -> None:
    write_json(report, path)


def load_report(path) -> dict:
    doc = read_json(path)
    _check_header(doc, "eval-report", "report")
    for key in ("config", "counts", "ap_root", "all", "curves"):
        _req(doc, key, "report")
    return doc
