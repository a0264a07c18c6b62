"""Squared-error gradient-boosted regression trees with exact greedy splits.

Trees are grown level by level, with one pass per feature per level that
accumulates statistics for every open node at once. Columns with few distinct
values are scanned through per-node value histograms, the rest through a
presorted index; both consider every distinct-value boundary, so split
finding is exact either way. Split ties go to the lowest feature index, then
the lowest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from ..io import FORMAT_VERSION

MIN_LEAF = 2


@dataclass(frozen=True)
class Hyperparams:
    max_depth: int = 3
    learning_rate: float = 0.1
    n_rounds: int = 200

    def __post_init__(self):
        if int(self.max_depth) != self.max_depth or self.max_depth < 1:
            raise ValueError(f"max_depth must be a positive integer, got {self.max_depth}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if int(self.n_rounds) != self.n_rounds or self.n_rounds < 1:
            raise ValueError(f"n_rounds must be a positive integer, got {self.n_rounds}")

    def to_dict(self) -> dict:
        return {"max_depth": int(self.max_depth), "learning_rate": float(self.learning_rate),
                "n_rounds": int(self.n_rounds)}


def default_grid(n_rounds: int = 200) -> list[Hyperparams]:
    return [Hyperparams(d, lr, n_rounds) for d in (3, 5, 7) for lr in (0.05, 0.1, 0.3)]


@numba.njit(cache=True)
def _better(gain, j, best_gain, best_feat):
    return gain > best_gain or (gain == best_gain and best_feat >= 0 and j < best_feat)


@numba.njit(cache=True)
def _build_tree(Xt, order, xs, codes, foff, uniq, hist_feat, r, max_depth, min_leaf):
    """Grow one tree on residuals ``r``.

    ``hist_feat`` lists the columns handled by histograms: ``codes[i, h]`` is
    ``foff[h]`` plus the rank of row ``i``'s value among ``uniq[h]``. Every
    other column walks its presorted ``order`` with sorted values ``xs``.
    Both paths score midpoints between consecutive distinct values present
    in the node. A child's histogram is either accumulated (the smaller
    sibling) or obtained as parent minus sibling.
    """
    p, n = Xt.shape
    H = hist_feat.shape[0]
    width = foff[H]
    is_hist = np.zeros(p, np.bool_)
    for h in range(H):
        is_hist[hist_feat[h]] = True

    cap = 2 ** (max_depth + 1) - 1
    feat = np.full(cap, -1, np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    nsum = np.zeros(cap)
    ncnt = np.zeros(cap, np.int64)

    node_of = np.zeros(n, np.int64)
    leaf_of = np.zeros(n, np.int64)
    slot_of = np.zeros(n, np.int64)
    for i in range(n):
        nsum[0] += r[i]
        ncnt[0] += 1
    active = np.zeros(cap, np.int64)
    active[0] = 0
    n_active = 1
    n_nodes = 1
    slot = np.full(cap, -1, np.int64)
    # parent slot of each active node (-1 for the root)
    parent_slot = np.full(cap, -1, np.int64)
    prev_hs = np.zeros((1, max(width, 1)))
    prev_hc = np.zeros((1, max(width, 1)), np.int64)

    for _depth in range(max_depth):
        if n_active == 0:
            break
        for a in range(n_active):
            slot[active[a]] = a
        # build[a]: accumulate this node's histogram directly
        build = np.ones(n_active, np.bool_)
        for a in range(0, n_active, 2):
            if parent_slot[a] >= 0:
                if ncnt[active[a]] <= ncnt[active[a + 1]]:
                    build[a + 1] = False
                else:
                    build[a] = False
        for i in range(n):
            m = node_of[i]
            slot_of[i] = slot[m] if m >= 0 else -1

        hs = np.zeros((n_active, max(width, 1)))
        hc = np.zeros((n_active, max(width, 1)), np.int64)
        if H > 0:
            for i in range(n):
                s = slot_of[i]
                if s < 0 or not build[s]:
                    continue
                ri = r[i]
                for h in range(H):
                    k = codes[i, h]
                    hs[s, k] += ri
                    hc[s, k] += 1
            for a in range(n_active):
                if not build[a]:
                    sib = a + 1 if a % 2 == 0 else a - 1
                    ps = parent_slot[a]
                    for k in range(width):
                        hs[a, k] = prev_hs[ps, k] - hs[sib, k]
                        hc[a, k] = prev_hc[ps, k] - hc[sib, k]

        best_gain = np.zeros(n_active)
        best_feat = np.full(n_active, -1, np.int64)
        best_thr = np.zeros(n_active)

        for h in range(H):
            j = hist_feat[h]
            lo_k = foff[h]
            hi_k = foff[h + 1]
            for s in range(n_active):
                m = active[s]
                tot = ncnt[m]
                T = nsum[m]
                L = 0.0
                c = 0
                prev = -1
                for k in range(lo_k, hi_k):
                    cb = hc[s, k]
                    if cb == 0:
                        continue
                    if prev >= 0 and c >= min_leaf and tot - c >= min_leaf:
                        R = T - L
                        gain = L * L / c + R * R / (tot - c) - T * T / tot
                        if _better(gain, j, best_gain[s], best_feat[s]):
                            lo = uniq[prev]
                            hi = uniq[k]
                            mid = 0.5 * lo + 0.5 * hi
                            if mid >= hi or mid < lo:
                                mid = lo
                            best_gain[s] = gain
                            best_feat[s] = j
                            best_thr[s] = mid
                    L += hs[s, k]
                    c += cb
                    prev = k

        lsum = np.zeros(n_active)
        lcnt = np.zeros(n_active, np.int64)
        last = np.zeros(n_active)
        for j in range(p):
            if is_hist[j]:
                continue
            lsum[:] = 0.0
            lcnt[:] = 0
            for t in range(n):
                i = order[j, t]
                s = slot_of[i]
                if s < 0:
                    continue
                m = active[s]
                x = xs[j, t]
                c = lcnt[s]
                tot = ncnt[m]
                if c >= min_leaf and tot - c >= min_leaf and x > last[s]:
                    L = lsum[s]
                    T = nsum[m]
                    R = T - L
                    gain = L * L / c + R * R / (tot - c) - T * T / tot
                    if _better(gain, j, best_gain[s], best_feat[s]):
                        best_gain[s] = gain
                        best_feat[s] = j
                        mid = 0.5 * last[s] + 0.5 * x
                        if mid >= x or mid < last[s]:
                            mid = last[s]
                        best_thr[s] = mid
                lsum[s] += r[i]
                lcnt[s] = c + 1
                last[s] = x

        new_active = np.zeros(cap, np.int64)
        new_parent = np.full(cap, -1, np.int64)
        n_new = 0
        for a in range(n_active):
            m = active[a]
            if best_feat[a] >= 0:
                feat[m] = best_feat[a]
                thr[m] = best_thr[a]
                left[m] = n_nodes
                right[m] = n_nodes + 1
                new_active[n_new] = n_nodes
                new_active[n_new + 1] = n_nodes + 1
                new_parent[n_new] = a
                new_parent[n_new + 1] = a
                n_new += 2
                n_nodes += 2
        for a in range(n_active):
            slot[active[a]] = -1
        for i in range(n):
            m = node_of[i]
            if m < 0:
                continue
            f = feat[m]
            if f < 0:
                leaf_of[i] = m
                node_of[i] = -1
                continue
            if Xt[f, i] <= thr[m]:
                m = left[m]
            else:
                m = right[m]
            node_of[i] = m
            nsum[m] += r[i]
            ncnt[m] += 1
        active = new_active
        parent_slot = new_parent
        n_active = n_new
        prev_hs = hs
        prev_hc = hc

    for i in range(n):
        if node_of[i] >= 0:
            leaf_of[i] = node_of[i]
    lsum_all = np.zeros(n_nodes)
    lcnt_all = np.zeros(n_nodes, np.int64)
    for i in range(n):
        lsum_all[leaf_of[i]] += r[i]
        lcnt_all[leaf_of[i]] += 1
    for m in range(n_nodes):
        if feat[m] < 0 and lcnt_all[m] > 0:
            value[m] = lsum_all[m] / lcnt_all[m]
    return feat[:n_nodes].copy(), thr[:n_nodes].copy(), left[:n_nodes].copy(), \
        right[:n_nodes].copy(), value[:n_nodes].copy(), leaf_of


@numba.njit(cache=True)
def _predict_forest(X, offsets, feat, thr, left, right, value):
    n = X.shape[0]
    out = np.zeros(n)
    n_trees = offsets.shape[0] - 1
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            base = offsets[t]
            m = 0
            while feat[base + m] >= 0:
                if X[i, feat[base + m]] <= thr[base + m]:
                    m = left[base + m]
                else:
                    m = right[base + m]
            acc += value[base + m]
        out[i] = acc
    return out


@dataclass(frozen=True)
class Tree:
    """Array-backed binary tree; node 0 is the root, ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def depth(self) -> int:
        def walk(m):
            if self.feature[m] < 0:
                return 0
            return 1 + max(walk(self.left[m]), walk(self.right[m]))
        return walk(0)

    def to_nested(self, m: int = 0) -> dict:
        if self.feature[m] < 0:
            return {"leaf": float(self.value[m])}
        return {
            "feature": int(self.feature[m]),
            "threshold": float(self.threshold[m]),
            "left": self.to_nested(int(self.left[m])),
            "right": self.to_nested(int(self.right[m])),
        }

    @classmethod
    def from_nested(cls, node: dict) -> "Tree":
        feat, thr, left, right, value = [], [], [], [], []

        def add(nd):
            m = len(feat)
            feat.append(-1); thr.append(0.0); left.append(-1); right.append(-1); value.append(0.0)
            if "leaf" in nd:
                value[m] = float(nd["leaf"])
            else:
                feat[m] = int(nd["feature"])
                thr[m] = float(nd["threshold"])
                left[m] = add(nd["left"])
                right[m] = add(nd["right"])
            return m

        add(node)
        return cls(np.array(feat, np.int64), np.array(thr), np.array(left, np.int64),
                   np.array(right, np.int64), np.array(value))


@dataclass(frozen=True)
class GbrtModel:
    trees: tuple[Tree, ...]
    learning_rate: float
    base_score: float
    n_features: int
    _packed: tuple = field(default=None, repr=False, compare=False)

    def _pack(self):
        if self._packed is None:
            sizes = [len(t.feature) for t in self.trees]
            offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
            cat = lambda name, dt: (np.concatenate([getattr(t, name) for t in self.trees]).astype(dt)
                                    if self.trees else np.zeros(0, dt))
            packed = (offsets, cat("feature", np.int64), cat("threshold", np.float64),
                      cat("left", np.int64), cat("right", np.int64), cat("value", np.float64))
            object.__setattr__(self, "_packed", packed)
        return self._packed

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} feature columns, got shape {X.shape}")
        if not self.trees:
            return np.full(X.shape[0], self.base_score)
        return self.base_score + self.learning_rate * _predict_forest(X, *self._pack())

    def to_dict(self) -> dict:
        return {
            "kind": "gbrt",
            "format_version": FORMAT_VERSION,
            "learning_rate": float(self.learning_rate),
            "base_score": float(self.base_score),
            "n_features": int(self.n_features),
            "trees": [t.to_nested() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbrtModel":
        if d.get("kind") != "gbrt":
            raise ValueError(f"not a gbrt model: kind={d.get('kind')!r}")
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported gbrt format_version {d.get('format_version')!r}")
        return cls(tuple(Tree.from_nested(t) for t in d["trees"]), float(d["learning_rate"]),
                   float(d["base_score"]), int(d["n_features"]))


def _canonical(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Row order fixed by content so the fit ignores input order.
    keys = [y] + [X[:, j] for j in range(X.shape[1] - 1, -1, -1)]
    idx = np.lexsort(keys)
    return np.ascontiguousarray(X[idx]), np.ascontiguousarray(y[idx])


# Columns with at most this many distinct values use the histogram path.
HIST_MAX_BINS = 1024


@dataclass(frozen=True)
class _Prepared:
    """Per-fit column layouts reused by every boosting round."""

    Xt: np.ndarray
    order: np.ndarray
    xs: np.ndarray
    codes: np.ndarray
    foff: np.ndarray
    uniq: np.ndarray
    hist_feat: np.ndarray

    @classmethod
    def from_matrix(cls, X: np.ndarray) -> "_Prepared":
        n, p = X.shape
        Xt = np.ascontiguousarray(X.T)
        order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))
        xs = np.ascontiguousarray(np.take_along_axis(Xt, order, axis=1))
        hist_feat, blocks, code_cols, foff = [], [], [], [0]
        for j in range(p):
            u = np.unique(Xt[j])
            if len(u) <= HIST_MAX_BINS:
                code_cols.append(foff[-1] + np.searchsorted(u, Xt[j]))
                hist_feat.append(j)
                blocks.append(u)
                foff.append(foff[-1] + len(u))
        codes = (np.ascontiguousarray(np.stack(code_cols, axis=1)).astype(np.int64)
                 if code_cols else np.zeros((n, 0), np.int64))
        uniq = np.concatenate(blocks) if blocks else np.zeros(0)
        return cls(Xt, order, xs, codes, np.array(foff, np.int64), uniq, np.array(hist_feat, np.int64))


def _boost(X, y, prep: _Prepared, hp: Hyperparams, history: list | None = None) -> GbrtModel:
    base = float(y.mean())
    pred = np.full(len(y), base)
    trees = []
    for _ in range(hp.n_rounds):
        r = y - pred
        feat, thr, left, right, value, leaf_of = _build_tree(
            prep.Xt, prep.order, prep.xs, prep.codes, prep.foff, prep.uniq, prep.hist_feat,
            r, hp.max_depth, MIN_LEAF,
        )
        trees.append(Tree(feat, thr, left, right, value))
        pred = pred + hp.learning_rate * value[leaf_of]
        if history is not None:
            history.append(float(np.sqrt(np.mean((y - pred) ** 2))))
    return GbrtModel(tuple(trees), hp.learning_rate, base, X.shape[1])


def fit_gbrt(X, y, hp: Hyperparams, seed: int = 0, history: list | None = None) -> GbrtModel:
    """Fit ``hp.n_rounds`` depth-limited trees to squared-error residuals.

    Leaves hold at least two instances. The fit is fully deterministic; ``seed``
    is accepted for interface symmetry and does not change the result. Pass a
    list as ``history`` to collect the training RMSE after every round.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y) or len(y) < 1:
        raise ValueError(f"need a non-empty 2-D X matching y, got {X.shape} and {y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("X and y must be finite")
    Xc, yc = _canonical(X, y)
    return _boost(Xc, yc, _Prepared.from_matrix(Xc), hp, history)


def rmse(pred, y) -> float:
    return float(np.sqrt(np.mean((np.asarray(pred) - np.asarray(y)) ** 2)))
