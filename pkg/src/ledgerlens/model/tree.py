"""Variance-reduction regression trees.

A tree is a set of parallel node arrays. Internal nodes send a row left when
``x[feature] <= threshold``; leaves carry the mean target of their samples.
Two builders share one algorithm: a numba kernel and a numpy fallback. Given
the same inputs and seed they produce identical arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import _accel

LEAF = -1
REL_TOL = 1e-12
_MASK64 = (1 << 64) - 1


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.node_count, dtype=np.int64)
        for i in range(self.node_count):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n": self.n_samples.tolist(),
            "impurity": self.impurity.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=np.float64),
                   np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
                   np.array(d["value"], dtype=np.float64), np.array(d["n"], dtype=np.int64),
                   np.array(d["impurity"], dtype=np.float64))


def n_candidate_features(rule, d: int) -> int:
    """Features examined per node: "all", "sqrt" (ceil(sqrt(d))) or a fraction."""
    if rule == "all":
        return d
    if rule == "sqrt":
        return max(1, int(math.ceil(math.sqrt(d))))
    frac = float(rule)
    if not 0.0 < frac <= 1.0:
        raise ValueError(f"max_features fraction must lie in (0, 1], got {rule!r}")
    return max(1, int(math.ceil(frac * d)))


# --------------------------------------------------------------------------
# numba builder


@_accel.njit
def _splitmix_nb(state):
    z = state[0] + np.uint64(0x9E3779B97F4A7C15)
    state[0] = z
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@_accel.njit
def _build_nb(x, y, sample_idx, max_depth, min_split, k_features, shuffle, seed):
    n = sample_idx.shape[0]
    d = x.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    count = np.zeros(cap, dtype=np.int64)
    impurity = np.zeros(cap)
    idx = sample_idx.copy()
    buf = np.empty(n, dtype=np.int64)
    perm = np.empty(d, dtype=np.int64)
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)

    st_node = np.empty(cap, dtype=np.int64)
    st_lo = np.empty(cap, dtype=np.int64)
    st_hi = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    top = 0
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n
    st_depth[0] = 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = st_node[top]
        lo = st_lo[top]
        hi = st_hi[top]
        depth = st_depth[top]
        m = hi - lo
        s = 0.0
        ymin = np.inf
        ymax = -np.inf
        for i in range(lo, hi):
            v = y[idx[i]]
            s += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        mean = s / m
        ss = 0.0
        for i in range(lo, hi):
            dv = y[idx[i]] - mean
            ss += dv * dv
        value[node] = mean
        count[node] = m
        impurity[node] = ss / m
        if depth >= max_depth or m < min_split or ymin == ymax:
            continue

        best_score = -np.inf
        best_f = -1
        best_thr = 0.0
        for j in range(d):
            perm[j] = j
        found = 0
        pos = 0
        while found < k_features and pos < d:
            if shuffle:
                r = pos + np.int64(_splitmix_nb(state) % np.uint64(d - pos))
                tmp = perm[pos]
                perm[pos] = perm[r]
                perm[r] = tmp
            f = perm[pos]
            pos += 1
            xmin = np.inf
            xmax = -np.inf
            for i in range(lo, hi):
                v = x[idx[i], f]
                if v < xmin:
                    xmin = v
                if v > xmax:
                    xmax = v
            if xmin == xmax:
                continue
            found += 1
            vals = np.empty(m)
            for i in range(m):
                vals[i] = x[idx[lo + i], f]
            order = np.argsort(vals, kind="mergesort")
            sl = 0.0
            for i in range(m - 1):
                sl += y[idx[lo + order[i]]]
                a = vals[order[i]]
                b = vals[order[i + 1]]
                if a == b:
                    continue
                nl = i + 1
                nr = m - nl
                sr = s - sl
                score = sl * sl / nl + sr * sr / nr
                if best_f < 0 or score > best_score + REL_TOL * abs(best_score):
                    best_score = score
                    best_f = f
                    t = a + (b - a) / 2.0
                    if t >= b:
                        t = a
                    best_thr = t
        if best_f < 0:
            continue

        nl = 0
        for i in range(lo, hi):
            if x[idx[i], best_f] <= best_thr:
                buf[nl] = idx[i]
                nl += 1
        nr = nl
        for i in range(lo, hi):
            if x[idx[i], best_f] > best_thr:
                buf[nr] = idx[i]
                nr += 1
        for i in range(m):
            idx[lo + i] = buf[i]
        li = n_nodes
        ri = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = li
        right[node] = ri
        # right pushed first so the left subtree is built (and numbered) first
        st_node[top] = ri
        st_lo[top] = lo + nl
        st_hi[top] = hi
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = li
        st_lo[top] = lo
        st_hi[top] = lo + nl
        st_depth[top] = depth + 1
        top += 1
    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes], count[:n_nodes], impurity[:n_nodes])


# --------------------------------------------------------------------------
# numpy builder


class _SplitMix:
    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)


def _best_split_np(xcol, ys, s):
    order = np.argsort(xcol, kind="mergesort")
    xv = xcol[order]
    yv = ys[order]
    m = len(xv)
    sl = np.cumsum(yv)[:-1]
    nl = np.arange(1, m, dtype=np.float64)
    valid = xv[:-1] != xv[1:]
    sr = s - sl
    score = sl * sl / nl + sr * sr / (m - nl)
    pos = np.flatnonzero(valid)
    return pos, score[pos], xv[pos], xv[pos + 1]


def _build_np(x, y, sample_idx, max_depth, min_split, k_features, shuffle, seed):
    d = x.shape[1]
    rng = _SplitMix(int(seed))
    feature, threshold, left, right, value, count, impurity = [], [], [], [], [], [], []

    def new_node():
        for arr, init in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1),
                          (value, 0.0), (count, 0), (impurity, 0.0)):
            arr.append(init)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.array(sample_idx, dtype=np.int64), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ys = y[idx]
        m = len(idx)
        s = 0.0
        for v in ys:  # sequential sum, matching the compiled kernel bit for bit
            s += v
        mean = s / m
        dev = ys - mean
        ss = 0.0
        for v in dev * dev:
            ss += v
        value[node], count[node], impurity[node] = mean, m, ss / m
        if depth >= max_depth or m < min_split or ys.min() == ys.max():
            continue
        best_score, best_f, best_thr = -math.inf, -1, 0.0
        perm = list(range(d))
        found = pos = 0
        xs = x[idx]
        while found < k_features and pos < d:
            if shuffle:
                r = pos + rng.next() % (d - pos)
                perm[pos], perm[r] = perm[r], perm[pos]
            f = perm[pos]
            pos += 1
            col = xs[:, f]
            if col.min() == col.max():
                continue
            found += 1
            cand, scores, a_vals, b_vals = _best_split_np(col, ys, s)
            for c in range(len(cand)):
                sc = scores[c]
                if best_f < 0 or sc > best_score + REL_TOL * abs(best_score):
                    best_score, best_f = sc, f
                    a, b = a_vals[c], b_vals[c]
                    t = a + (b - a) / 2.0
                    best_thr = a if t >= b else t
        if best_f < 0:
            continue
        go_left = xs[:, best_f] <= best_thr
        li, ri = new_node(), new_node()
        feature[node], threshold[node], left[node], right[node] = best_f, best_thr, li, ri
        stack.append((ri, idx[~go_left], depth + 1))
        stack.append((li, idx[go_left], depth + 1))
    return (np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64), np.array(value), np.array(count, dtype=np.int64), np.array(impurity))


def build_tree(x, y, sample_idx=None, *, max_depth: int = 200, min_samples_split: int = 2,
               max_features="all", seed: int = 0) -> Tree:
    """Grow one tree on rows ``sample_idx`` (repeats allowed) of ``x``/``y``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if sample_idx is None:
        sample_idx = np.arange(len(y), dtype=np.int64)
    sample_idx = np.ascontiguousarray(sample_idx, dtype=np.int64)
    d = x.shape[1]
    k = n_candidate_features(max_features, d) if d else 0
    shuffle = max_features != "all"
    kernel = _accel.pick(_build_nb, _build_np)
    arrays = kernel(x, y, sample_idx, int(max_depth), int(min_samples_split), int(k), bool(shuffle),
                    np.uint64(int(seed) & _MASK64))
    return Tree(*[np.ascontiguousarray(a) for a in arrays])


# --------------------------------------------------------------------------
# prediction


@_accel.njit
def _predict_nb(x, feature, threshold, left, right, value, offsets):
    n = x.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            base = offsets[t]
            node = 0
            while feature[base + node] >= 0:
                if x[i, feature[base + node]] <= threshold[base + node]:
                    node = left[base + node]
                else:
                    node = right[base + node]
            acc += value[base + node]
        out[i] = acc / n_trees
    return out


def _predict_np(x, feature, threshold, left, right, value, offsets):
    n = x.shape[0]
    acc = np.zeros(n)
    rows = np.arange(n)
    for t in range(len(offsets) - 1):
        base = offsets[t]
        node = np.zeros(n, dtype=np.int64)
        while True:
            f = feature[base + node]
            internal = f >= 0
            if not internal.any():
                break
            fi = np.where(internal, f, 0)
            go_left = x[rows, fi] <= threshold[base + node]
            nxt = np.where(go_left, left[base + node], right[base + node])
            node = np.where(internal, nxt, node)
        acc += value[base + node]
    return acc / (len(offsets) - 1)


def pack_trees(trees):
    offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([t.node_count for t in trees])
    cat = lambda name: np.ascontiguousarray(np.concatenate([getattr(t, name) for t in trees]))
    return (cat("feature"), cat("threshold"), cat("left"), cat("right"), cat("value"), offsets)


def predict_trees(packed, x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    kernel = _accel.pick(_predict_nb, _predict_np)
    return kernel(x, *packed)
