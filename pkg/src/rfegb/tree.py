"""Exact greedy CART trees.

Two criteria share one grower: weighted squared error (regression, the
boosting base learner) and weighted Gini (classification, the DT
baseline).  Growth is level-wise.  Each feature column is encoded once as
integer codes over its sorted distinct values, so per-node split search
reduces to a few ``bincount`` passes over (node, code) keys; every
distinct value is its own code, so the search is exact rather than
histogram-approximated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

# gains closer than this are ties, resolved by (feature, threshold) order
TIE_TOL = 1e-12
# dense (node x code) tables above this size switch to sort-based keys
_DENSE_LIMIT = 1 << 20


@dataclass(frozen=True)
class Leaf:
    value: float
    n_samples: int


@dataclass(frozen=True)
class Split:
    """Rows with ``x[feature] <= threshold`` go left."""

    feature: int
    threshold: float
    left: "Node"
    right: "Node"
    impurity_decrease: float
    n_samples: int


Node = Union[Leaf, Split]


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 3
    min_samples_split: int = 10
    min_samples_leaf: int = 5

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


class BinnedFeatures:
    """Per-column distinct values and integer codes for a feature matrix.

    Codes of all columns share one numbering: column ``f`` owns codes
    ``offsets[f] .. offsets[f+1]-1``, in increasing value order.  Build once
    and reuse across many trees on the same rows (boosting).
    """

    def __init__(self, features: np.ndarray):
        X = np.asarray(features, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        self.n_rows, self.n_features = X.shape
        codes = np.empty((self.n_features, self.n_rows), dtype=np.int64)
        values = []
        offsets = [0]
        for f in range(self.n_features):
            uniq, inv = np.unique(X[:, f], return_inverse=True)
            codes[f] = inv + offsets[-1]
            values.append(uniq)
            offsets.append(offsets[-1] + len(uniq))
        self.codes = codes
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.values = np.concatenate(values) if values else np.zeros(0)
        self.n_codes = int(offsets[-1])


class _Grower:
    """Level-wise growth; node arrays are filled in breadth-first order."""

    def __init__(self, binned: BinnedFeatures, y, w, config: TreeConfig, gini: bool):
        self.b = binned
        self.y = y
        self.w = w
        self.wy = w * y
        self.unit = bool(np.all(w == 1.0))
        self.cfg = config
        self.gini = gini
        self.min_gain = TIE_TOL * (1.0 + float(np.dot(self.wy, y)))

        self.feature: list[int] = [-1]
        self.code: list[int] = [-1]
        self.threshold: list[float] = [0.0]
        self.children: list[tuple[int, int]] = [(-1, -1)]
        self.gain: list[float] = [0.0]

    def _impurity(self, W, G):
        # total (weight-scaled) impurity of a node with weight W and sum w*y = G
        if self.gini:
            return 2.0 * G * (W - G) / W
        return -(G * G) / W

    def _histogram(self, rows, slot, n_slots):
        """Count, weight and weighted-target sums per present (slot, code) key."""
        b = self.b
        d = b.n_features
        codes = b.codes if len(rows) == b.n_rows else b.codes[:, rows]
        key = ((slot * b.n_codes)[None, :] + codes).ravel()
        wy = np.tile(self.wy[rows], d)
        size = n_slots * b.n_codes
        if size <= _DENSE_LIMIT:
            cnt = np.bincount(key, minlength=size)
            present = np.flatnonzero(cnt)
            cnt = cnt[present]
            G = np.bincount(key, weights=wy, minlength=size)[present]
            if self.unit:
                W = cnt.astype(np.float64)
            else:
                W = np.bincount(key, weights=np.tile(self.w[rows], d), minlength=size)[present]
        else:
            present, inv = np.unique(key, return_inverse=True)
            cnt = np.bincount(inv)
            G = np.bincount(inv, weights=wy)
            W = cnt.astype(np.float64) if self.unit else np.bincount(inv, weights=np.tile(self.w[rows], d))
        return present, cnt, W, G

    def _best_splits(self, rows, slot, n_slots):
        """Winning (feature, code, next_code, gain) per slot.

        Keys sort by (slot, feature, code), so within a slot the first
        candidate within TIE_TOL of the slot's best gain has the smallest
        feature index and, within it, the smallest threshold.
        """
        b = self.b
        present, cnt, W, G = self._histogram(rows, slot, n_slots)
        eslot = present // b.n_codes
        ecode = present % b.n_codes
        efeat = np.searchsorted(b.offsets, ecode, side="right") - 1
        group = eslot * b.n_features + efeat
        boundary = group[1:] != group[:-1]
        # the last value of a (slot, feature) group cannot be a left boundary
        last = np.r_[boundary, True]
        is_start = np.r_[True, boundary]
        starts = np.flatnonzero(is_start)
        ends = np.r_[starts[1:], len(present)] - 1
        seg = np.cumsum(is_start) - 1

        def within_group(c):
            before = np.r_[0, c[:-1]][starts]
            return c - before[seg], (c[ends] - before)[seg]

        lc, tc = within_group(np.cumsum(cnt))
        lw, tw = within_group(np.cumsum(W))
        lg, tg = within_group(np.cumsum(G))
        rc, rw, rg = tc - lc, tw - lw, tg - lg

        msl = self.cfg.min_samples_leaf
        idx = np.flatnonzero(~last & (lc >= msl) & (rc >= msl) & (lw > 0) & (rw > 0))
        if not len(idx):
            return None
        gain = (
            self._impurity(tw[idx], tg[idx])
            - self._impurity(lw[idx], lg[idx])
            - self._impurity(rw[idx], rg[idx])
        )
        cslot = eslot[idx]
        sstart = np.flatnonzero(np.r_[True, cslot[1:] != cslot[:-1]])
        best = np.maximum.reduceat(gain, sstart)
        best_of = np.repeat(best, np.diff(np.r_[sstart, len(idx)]))
        hits = np.flatnonzero(gain >= best_of - TIE_TOL)
        slots, first = np.unique(cslot[hits], return_index=True)
        pick = idx[hits[first]]
        return slots, efeat[pick], ecode[pick], ecode[pick + 1], gain[hits[first]]

    def _split_level(self, open_nodes, row_node):
        n_slots = len(open_nodes)
        slot_of = np.full(len(self.feature), -1, dtype=np.int64)
        slot_of[open_nodes] = np.arange(n_slots)
        rows = np.flatnonzero(slot_of[row_node] >= 0)
        if not len(rows):
            return []
        slot = slot_of[row_node[rows]]
        found = self._best_splits(rows, slot, n_slots)
        if found is None:
            return []
        slots, feats, codes, nexts, gains = found
        keep = gains > self.min_gain
        if not keep.any():
            return []

        chosen_f = np.full(n_slots, -1, dtype=np.int64)
        chosen_code = np.zeros(n_slots, dtype=np.int64)
        left_id = np.full(n_slots, -1, dtype=np.int64)
        new_open = []
        for s, f, c, nc, g in zip(slots[keep], feats[keep], codes[keep], nexts[keep], gains[keep]):
            node = int(open_nodes[s])
            self.feature[node] = int(f)
            self.code[node] = int(c)
            self.threshold[node] = float((self.b.values[c] + self.b.values[nc]) / 2.0)
            self.gain[node] = float(g)
            lid = len(self.feature)
            self.feature += [-1, -1]
            self.code += [-1, -1]
            self.threshold += [0.0, 0.0]
            self.children += [(-1, -1), (-1, -1)]
            self.gain += [0.0, 0.0]
            self.children[node] = (lid, lid + 1)
            chosen_f[s] = f
            chosen_code[s] = c
            left_id[s] = lid
            new_open.extend((lid, lid + 1))

        moving = left_id[slot] >= 0
        split_rows = rows[moving]
        sslot = slot[moving]
        x_code = self.b.codes[chosen_f[sslot], split_rows]
        row_node[split_rows] = left_id[sslot] + (x_code > chosen_code[sslot])
        return new_open

    def grow(self, rows: np.ndarray):
        """Grow from ``rows``; returns the final node of every row (-1 if unused)."""
        row_node = np.full(self.b.n_rows, -1, dtype=np.int64)
        row_node[rows] = 0
        cfg = self.cfg
        open_nodes = [0]
        depth = 0
        while open_nodes and depth < cfg.max_depth:
            counts = np.bincount(row_node[row_node >= 0], minlength=len(self.feature))
            open_nodes = [
                n for n in open_nodes
                if counts[n] >= cfg.min_samples_split and counts[n] >= 2 * cfg.min_samples_leaf
            ]
            if not open_nodes:
                break
            open_nodes = self._split_level(np.asarray(open_nodes, dtype=np.int64), row_node)
            depth += 1
        self.row_node = row_node
        return row_node

    def build(self, leaf_values: np.ndarray, counts: np.ndarray) -> Node:
        def make(n: int) -> Node:
            if self.feature[n] < 0:
                return Leaf(float(leaf_values[n]), int(counts[n]))
            lid, rid = self.children[n]
            left, right = make(lid), make(rid)
            return Split(
                self.feature[n],
                self.threshold[n],
                left,
                right,
                self.gain[n],
                left.n_samples + right.n_samples,
            )

        return make(0)


def _check_inputs(features, targets, sample_weights):
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    if X.shape[0] == 0:
        raise ValueError("cannot fit a tree on empty input")
    if y.shape != (X.shape[0],):
        raise ValueError("targets length differs from row count")
    if sample_weights is None:
        w = np.ones(X.shape[0])
    else:
        w = np.asarray(sample_weights, dtype=np.float64)
        if w.shape != y.shape:
            raise ValueError("sample_weights length differs from row count")
        if (w < 0).any():
            raise ValueError("negative sample weight")
    return X, y, w


def grow_tree(
    binned: BinnedFeatures,
    targets: np.ndarray,
    weights: np.ndarray,
    config: TreeConfig,
    gini: bool = False,
    rows: Optional[np.ndarray] = None,
):
    """Grow on pre-binned features; returns ``(grower, row_node)``.

    Leaf values are left to the caller via ``grower.build`` so boosting can
    substitute Newton steps for the weighted mean.
    """
    if rows is None:
        rows = np.flatnonzero(weights > 0)
    g = _Grower(binned, targets, weights, config, gini)
    return g, g.grow(rows)


def _fit(features, targets, sample_weights, config, gini):
    X, y, w = _check_inputs(features, targets, sample_weights)
    binned = BinnedFeatures(X)
    rows = np.flatnonzero(w > 0)
    if not len(rows):
        raise ValueError("all sample weights are zero")
    grower, row_node = grow_tree(binned, y, w, config, gini, rows)
    used = row_node >= 0
    n_nodes = len(grower.feature)
    counts = np.bincount(row_node[used], minlength=n_nodes)
    W = np.bincount(row_node[used], weights=w[used], minlength=n_nodes)
    G = np.bincount(row_node[used], weights=(w * y)[used], minlength=n_nodes)
    values = np.divide(G, W, out=np.zeros(n_nodes), where=W > 0)
    return grower.build(values, counts)


def fit_regression_tree(features, targets, sample_weights=None, config: TreeConfig = TreeConfig()) -> Node:
    """Greedy least-squares CART; leaves hold the weighted target mean."""
    return _fit(features, targets, sample_weights, config, gini=False)


def fit_classification_tree(features, labels, config: TreeConfig = TreeConfig(), sample_weights=None) -> Node:
    """Greedy Gini CART; leaves hold the (weighted) class-1 fraction."""
    y = np.asarray(labels)
    if y.size and not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    return _fit(features, y, sample_weights, config, gini=True)


def predict_tree(tree: Node, row) -> float:
    node = tree
    while isinstance(node, Split):
        if node.feature >= len(row):
            raise ValueError(f"row has {len(row)} values, tree uses feature {node.feature}")
        node = node.left if row[node.feature] <= node.threshold else node.right
    return node.value


def predict_tree_batch(tree: Node, rows) -> np.ndarray:
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("rows must be a 2-D matrix")
    out = np.empty(X.shape[0])

    def walk(node: Node, idx: np.ndarray):
        if isinstance(node, Leaf):
            out[idx] = node.value
            return
        if node.feature >= X.shape[1]:
            raise ValueError(f"rows have {X.shape[1]} columns, tree uses feature {node.feature}")
        mask = X[idx, node.feature] <= node.threshold
        walk(node.left, idx[mask])
        walk(node.right, idx[~mask])

    walk(tree, np.arange(X.shape[0]))
    return out


def iter_splits(tree: Node):
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Split):
            yield node
            stack.append(node.right)
            stack.append(node.left)


def tree_importances(tree: Node, n_features: int) -> np.ndarray:
    """Sum of (n_samples / root n_samples) * impurity_decrease per feature."""
    imp = np.zeros(n_features)
    total = tree.n_samples
    for node in iter_splits(tree):
        if not 0 <= node.feature < n_features:
            raise ValueError(f"feature index {node.feature} out of range for {n_features} features")
        imp[node.feature] += node.n_samples / total * node.impurity_decrease
    return imp


def tree_to_dict(node: Node) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": node.value, "n_samples": node.n_samples}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "impurity_decrease": node.impurity_decrease,
        "n_samples": node.n_samples,
        "left": tree_to_dict(node.left),
        "right": tree_to_dict(node.right),
    }


def tree_from_dict(d: dict) -> Node:
    if "leaf" in d:
        return Leaf(float(d["leaf"]), int(d.get("n_samples", 0)))
    return Split(
        int(d["feature"]),
        float(d["threshold"]),
        tree_from_dict(d["left"]),
        tree_from_dict(d["right"]),
        float(d.get("impurity_decrease", 0.0)),
        int(d.get("n_samples", 0)),
    )


def tree_depth(node: Node) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))
