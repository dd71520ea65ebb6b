"""Small independent oracles shared by the test modules."""

import numpy as np


def polygon_area(p):
    p = np.asarray(p, float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _clip(subject, a, b):
    def inside(p):
        return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0

    def cross(p, q):
        d1, d2 = q - p, b - a
        t = ((a[0] - p[0]) * d2[1] - (a[1] - p[1]) * d2[0]) / (d1[0] * d2[1] - d1[1] * d2[0])
        return p + t * d1

    out = []
    for i in range(len(subject)):
        cur, prev = subject[i], subject[i - 1]
        if inside(cur):
            if not inside(prev):
                out.append(cross(prev, cur))
            out.append(cur)
        elif inside(prev):
            out.append(cross(prev, cur))
    return out


def quad_iou(q1, q2):
    """IoU of two convex quads, both ordered clockwise in image coordinates."""
    q1, q2 = np.asarray(q1, float), np.asarray(q2, float)
    poly = list(q1)
    for i in range(4):
        if not poly:
            return 0.0
        poly = _clip(poly, q2[i], q2[(i + 1) % 4])
    inter = polygon_area(poly) if len(poly) >= 3 else 0.0
    return inter / (polygon_area(q1) + polygon_area(q2) - inter)


def truth_quad(truth, column, row):
    for c in truth["cells"]:
        if c["column"] == column and c["row"] == row:
            return np.array(c["quad"])
    raise KeyError((column, row))


def sse(y):
    y = np.asarray(y, float)
    return float(((y - y.mean()) ** 2).sum()) if len(y) else 0.0


def best_split_bruteforce(x, y):
    """Lowest child SSE over every feature and every gap between distinct values.

    Returns (sse, [(feature, threshold), ...] achieving it) or None when no
    split exists.
    """
    best, arg = None, []
    for f in range(x.shape[1]):
        vals = sorted(set(x[:, f].tolist()))
        for a, b in zip(vals, vals[1:]):
            t = (a + b) / 2.0
            left = x[:, f] <= t
            s = sse(y[left]) + sse(y[~left])
            if best is None or s < best - 1e-9 * max(1.0, abs(best)):
                best, arg = s, [(f, t)]
            elif abs(s - best) <= 1e-9 * max(1.0, abs(best)):
                arg.append((f, t))
    return None if best is None else (best, arg)


def check_tree_against_oracle(tree, x, y, min_split=2, max_depth=10**9):
    """Walk ``tree`` and assert each split is an exhaustive-search optimum
    and each leaf is forced by a stopping rule. Returns nodes visited."""
    visited = 0
    stack = [(0, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        visited += 1
        ys, xs = y[idx], x[idx]
        assert abs(tree.value[node] - ys.mean()) <= 1e-9 * max(1.0, abs(ys.mean()))
        oracle = best_split_bruteforce(xs, ys)
        stop = depth >= max_depth or len(idx) < min_split or ys.min() == ys.max() or oracle is None
        if tree.feature[node] < 0:
            assert stop, f"leaf at node {node} but a split was available"
            continue
        assert not stop, f"node {node} split despite a stopping rule"
        f, t = int(tree.feature[node]), float(tree.threshold[node])
        left = xs[:, f] <= t
        got = sse(ys[left]) + sse(ys[~left])
        assert got <= oracle[0] + 1e-9 * max(1.0, abs(oracle[0])), (got, oracle)
        assert any(g == f and abs(s - t) <= 1e-12 * max(1.0, abs(s)) for g, s in oracle[1]), (f, t, oracle)
        stack.append((int(tree.right[node]), idx[~left], depth + 1))
        stack.append((int(tree.left[node]), idx[left], depth + 1))
    return visited
