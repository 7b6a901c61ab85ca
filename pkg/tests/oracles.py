"""Independent reference computations used as test oracles.

None of these call into the code paths they check.
"""
import itertools
import math

import numpy as np


# --- root translation: direct reprojection search -------------------------

def reprojection_cost(p2d, rel, t, alpha_x, alpha_y, cx, cy):
    pts = rel + t
    if np.any(pts[:, 2] <= 0):
        return math.inf
    u = alpha_x * pts[:, 0] / pts[:, 2] + cx
    v = alpha_y * pts[:, 1] / pts[:, 2] + cy
    return float(np.sum((u - p2d[:, 0]) ** 2 + (v - p2d[:, 1]) ** 2))


def algebraic_cost(p2d, rel, t, alpha_x, alpha_y, cx, cy):
    """Projection residual multiplied through by each joint's depth."""
    pts = rel + t
    ru = alpha_x * pts[:, 0] - (p2d[:, 0] - cx) * pts[:, 2]
    rv = alpha_y * pts[:, 1] - (p2d[:, 1] - cy) * pts[:, 2]
    return float(np.sum(ru ** 2 + rv ** 2))


def _golden(f, lo, hi, tol):
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def root_by_search(p2d, rel, cam, z_range=(500.0, 20000.0), objective="reprojection"):
    """Grid search then coordinate descent over (ray_x, ray_y, depth).

    Parameterizing the root as ``depth * (ray_x, ray_y, 1)`` keeps the
    coordinates nearly decoupled, so cyclic 1D golden-section minimization
    converges quickly. ``objective`` is "reprojection" or "algebraic".
    """
    ax, ay, cx, cy = cam.alpha_x, cam.alpha_y, cam.cx, cam.cy
    f = {"reprojection": reprojection_cost, "algebraic": algebraic_cost}[objective]

    def cost(a, b, z):
        return f(p2d, rel, np.array([a * z, b * z, z]), ax, ay, cx, cy)

    # grid: rays through a lattice around the 2D centroid, depth lattice
    mu = p2d.mean(axis=0)
    a0, b0 = (mu[0] - cx) / ax, (mu[1] - cy) / ay
    best = (math.inf, a0, b0, z_range[0])
    for z in np.linspace(*z_range, 40):
        for da in np.linspace(-0.1, 0.1, 5):
            for db in np.linspace(-0.1, 0.1, 5):
                c = cost(a0 + da, b0 + db, z)
                if c < best[0]:
                    best = (c, a0 + da, b0 + db, z)
    _, a, b, z = best
    step_ab, step_z = 0.05, (z_range[1] - z_range[0]) / 40
    for _ in range(200):
        prev = np.array([a, b, z])
        a = _golden(lambda x: cost(x, b, z), a - step_ab, a + step_ab, 1e-11)
        b = _golden(lambda x: cost(a, x, z), b - step_ab, b + step_ab, 1e-11)
        z = _golden(lambda x: cost(a, b, x), max(1.0, z - step_z), z + step_z, 1e-7)
        move = np.abs(np.array([a, b, z]) - prev)
        step_ab = max(4 * max(move[0], move[1]), 1e-9)
        step_z = max(4 * move[2], 1e-6)
        if move[0] < 1e-12 and move[1] < 1e-12 and move[2] < 1e-8:
            break
    return np.array([a * z, b * z, z])


# --- similarity alignment: random search + polish --------------------------

def _rotation(w):
    theta = np.linalg.norm(w)
    if theta < 1e-15:
        return np.eye(3)
    k = w / theta
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(theta) * K + (1 - math.cos(theta)) * K @ K


def similarity_residual(pred, gt, s, R, t):
    return float(np.sum((s * pred @ R.T + t - gt) ** 2))


def _best_scale_translation(pred, gt, R):
    # closed form for fixed rotation
    P = pred @ R.T
    mp, mg = P.mean(0), gt.mean(0)
    Pc, Gc = P - mp, gt - mg
    s = max(np.sum(Pc * Gc) / np.sum(Pc * Pc), 0.0)
    return s, mg - s * mp


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def align_by_search(pred, gt, rng, n_random=10000, polish_iters=4000):
    """Random rotation search then local perturbation polish. Returns min residual."""
    best_r, best_R = math.inf, None
    for _ in range(n_random):
        R = random_rotation(rng)
        s, t = _best_scale_translation(pred, gt, R)
        r = similarity_residual(pred, gt, s, R, t)
        if r < best_r:
            best_r, best_R = r, R
    step = 0.1
    R = best_R
    for _ in range(polish_iters):
        cand = _rotation(rng.normal(size=3) * step) @ R
        s, t = _best_scale_translation(pred, gt, cand)
        r = similarity_residual(pred, gt, s, cand, t)
        if r < best_r:
            best_r, R = r, cand
        else:
            step = max(step * 0.995, 1e-10)
    s, t = _best_scale_translation(pred, gt, R)
    return best_r, s, R, t


def align_by_quaternion(pred, gt):
    """Closed-form similarity via the unit quaternion of largest eigenvalue.

    Different route from the SVD one: rotation from a 4x4 symmetric
    eigenproblem, then the least-squares scale for that rotation.
    Returns the aligned pred.
    """
    P = pred - pred.mean(0)
    G = gt - gt.mean(0)
    S = P.T @ G
    (xx, xy, xz), (yx, yy, yz), (zx, zy, zz) = S
    N = np.array([
        [xx + yy + zz, yz - zy, zx - xz, xy - yx],
        [yz - zy, xx - yy - zz, xy + yx, zx + xz],
        [zx - xz, xy + yx, -xx + yy - zz, yz + zy],
        [xy - yx, zx + xz, yz + zy, -xx - yy + zz],
    ])
    w, v = np.linalg.eigh(N)
    q0, qx, qy, qz = v[:, -1]
    R = np.array([
        [q0 * q0 + qx * qx - qy * qy - qz * qz, 2 * (qx * qy - q0 * qz), 2 * (qx * qz + q0 * qy)],
        [2 * (qy * qx + q0 * qz), q0 * q0 - qx * qx + qy * qy - qz * qz, 2 * (qy * qz - q0 * qx)],
        [2 * (qz * qx - q0 * qy), 2 * (qz * qy + q0 * qx), q0 * q0 - qx * qx - qy * qy + qz * qz],
    ])
    RP = P @ R.T
    s = np.sum(RP * G) / np.sum(P * P)
    return s * RP + gt.mean(0)


# --- AP by exhaustive prefix enumeration -----------------------------------

def ap_by_enumeration(hits, n_gt):
    """AP as the integral over recall of the best precision reachable at that recall.

    Enumerates every score cutoff explicitly.
    """
    n = len(hits)
    points = []
    for cut in range(1, n + 1):
        tp = sum(hits[:cut])
        points.append((tp / n_gt, tp / cut))
    ap = 0.0
    levels = sorted({r for r, _ in points} | {0.0})
    for lo, hi in zip(levels, levels[1:]):
        ap += (hi - lo) * max(p for r, p in points if r >= hi)
    return ap


# --- matching: exhaustive assignment ----------------------------------------

def exhaustive_matching(pred_roots, gt_roots, radius):
    """Max-cardinality, then min-total-distance assignment within radius."""
    n_p, n_g = len(pred_roots), len(gt_roots)
    d = [[float(np.linalg.norm(np.subtract(p, g))) for g in gt_roots] for p in pred_roots]
    best = (0, 0.0, ())
    for k in range(min(n_p, n_g), 0, -1):
        for ps in itertools.permutations(range(n_p), k):
            for gs in itertools.combinations(range(n_g), k):
                pairs = tuple(zip(ps, gs))
                if any(d[i][j] > radius for i, j in pairs):
                    continue
                cost = sum(d[i][j] for i, j in pairs)
                if (k, -cost) > (best[0], -best[1]):
                    best = (k, cost, pairs)
        if best[0]:
            break
    return sorted(best[2], key=lambda p: p[1])


# --- metrics re-implemented plainly -----------------------------------------

def plain_metrics(pairs, n_unmatched_gt, J, root, thr=150.0, grid=range(5, 155, 5)):
    """Straightforward loops over matched (pred, gt) pose pairs."""
    rel_errs, abs_errs, root_errs, axis_errs = [], [], [], []
    for p, g in pairs:
        for j in range(J):
            d_abs = math.sqrt(sum((p[j][c] - g[j][c]) ** 2 for c in range(3)))
            pr = [p[j][c] - p[root][c] for c in range(3)]
            gr = [g[j][c] - g[root][c] for c in range(3)]
            d_rel = math.sqrt(sum((pr[c] - gr[c]) ** 2 for c in range(3)))
            rel_errs.append(d_rel)
            abs_errs.append(d_abs)
        root_errs.append(math.sqrt(sum((p[root][c] - g[root][c]) ** 2 for c in range(3))))
        axis_errs.append([abs(p[root][c] - g[root][c]) for c in range(3)])
    n_all = len(rel_errs) + n_unmatched_gt * J
    out = {
        "pck_rel_all": sum(e <= thr for e in rel_errs) / n_all,
        "pck_abs_all": sum(e <= thr for e in abs_errs) / n_all,
        "auc_rel_all": sum(sum(e <= t for e in rel_errs) / n_all for t in grid) / len(grid),
    }
    if pairs:
        n = len(rel_errs)
        out.update({
            "mpjpe": sum(rel_errs) / n,
            "mrpe": sum(root_errs) / len(root_errs),
            "mrpe_axes": [sum(a[c] for a in axis_errs) / len(axis_errs) for c in range(3)],
            "pck_rel": sum(e <= thr for e in rel_errs) / n,
            "pck_abs": sum(e <= thr for e in abs_errs) / n,
            "auc_rel": sum(sum(e <= t for e in rel_errs) / n for t in grid) / len(grid),
        })
    return out
