"""Scalar-output regression forest: axis-aligned threshold splits chosen by
variance reduction, mean leaves, ensemble averaging.

Trees are stored as flat node arrays (feature < 0 marks a leaf).  The split
search runs through the kernels package, so training uses the compiled core
when it is available.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import FormatError, ValidationError


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 20
    max_depth: int = 15
    min_leaf: int = 5
    n_candidate_features: int = 100
    n_thresholds: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ("n_trees", "max_depth", "min_leaf", "n_candidate_features", "n_thresholds"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")


class RegressionTree:
    """Flat node arrays; node 0 is the root, feature[i] < 0 marks a leaf."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.value = np.asarray(value, dtype=np.float64)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        pos = np.zeros(len(X), dtype=np.int64)
        active = self.feature[pos] >= 0
        while active.any():
            ai = np.nonzero(active)[0]
            p = pos[ai]
            go_left = X[ai, self.feature[p]] < self.threshold[p]
            pos[ai] = np.where(go_left, self.left[p], self.right[p])
            active = self.feature[pos] >= 0
        return self.value[pos]


class RegressionForest:
    def __init__(self, trees: list[RegressionTree], config: TrainConfig, n_features: int,
                 bank_fingerprint: str = ""):
        if not trees:
            raise ValidationError("forest needs at least one tree")
        self.trees = trees
        self.config = config
        self.n_features = n_features
        self.bank_fingerprint = bank_fingerprint

    def predict(self, x) -> float:
        return float(self.predict_many(np.asarray(x, dtype=np.float64)[None, :])[0])

    def predict_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValidationError(
                f"expected feature vectors of length {self.n_features}, got shape {X.shape}"
            )
        acc = np.zeros(len(X), dtype=np.float64)
        for tree in self.trees:
            acc += tree.predict_many(X)
        return acc / len(self.trees)


def variance_reduction(targets, left, right):
    """Var(all) - (|L|/N) Var(L) - (|R|/N) Var(R) with population variances.

    Returns -inf (the invalid-split signal) when either side is empty;
    raises if left and right are not a partition of targets.
    """
    targets = np.asarray(targets, dtype=np.float64)
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if left.size == 0 or right.size == 0:
        return float("-inf")
    if not np.array_equal(np.sort(np.concatenate([left, right])), np.sort(targets)):
        raise ValidationError("left/right must partition targets")
    n = targets.size
    return float(
        targets.var() - (left.size / n) * left.var() - (right.size / n) * right.var()
    )


def _grow_tree(X: np.ndarray, y: np.ndarray, idx: np.ndarray, cfg: TrainConfig,
               rng: np.random.Generator) -> RegressionTree:
    n_features = X.shape[1]
    k = min(cfg.n_candidate_features, n_features)
    feature, threshold, left, right, value = [], [], [], [], []

    def leaf(node_idx) -> int:
        nid = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[node_idx].mean()))
        return nid

    def grow(node_idx, depth) -> int:
        yv = y[node_idx]
        if (
            depth >= cfg.max_depth
            or node_idx.size < 2 * cfg.min_leaf
            or yv.max() == yv.min()
        ):
            return leaf(node_idx)
        feats = np.sort(rng.choice(n_features, size=k, replace=False)).astype(np.int64)
        cols = X[np.ix_(node_idx, feats)]
        mins = cols.min(axis=0)
        maxs = cols.max(axis=0)
        u = rng.random((k, cfg.n_thresholds))
        thr = mins[:, None] + u * (maxs - mins)[:, None]
        f, t, gain = kernels.best_split(
            X, y, node_idx, feats, np.ascontiguousarray(thr), cfg.min_leaf
        )
        if f < 0:
            return leaf(node_idx)
        go_left = X[node_idx, f] < t
        nid = len(feature)
        feature.append(int(f))
        threshold.append(float(t))
        left.append(-1)
        right.append(-1)
        value.append(float(yv.mean()))
        left_id = grow(node_idx[go_left], depth + 1)
        right_id = grow(node_idx[~go_left], depth + 1)
        left[nid] = left_id
        right[nid] = right_id
        return nid

    grow(idx, 0)
    return RegressionTree(feature, threshold, left, right, value)


def train(samples, cfg: TrainConfig, bank_fingerprint: str = "") -> RegressionForest:
    """Train on (feature vector, scalar target) pairs, or on a (X, y) pair of
    arrays.  Each tree sees a bootstrap resample of the same size."""
    if isinstance(samples, tuple) and len(samples) == 2:
        X = np.asarray(samples[0], dtype=np.float64)
        y = np.asarray(samples[1], dtype=np.float64)
    else:
        samples = list(samples)
        if not samples:
            raise ValidationError("no training samples")
        lengths = {len(v) for v, _ in samples}
        if len(lengths) != 1:
            raise ValidationError(f"inconsistent feature vector lengths: {sorted(lengths)}")
        X = np.array([v for v, _ in samples], dtype=np.float64)
        y = np.array([t for _, t in samples], dtype=np.float64)
    if X.size == 0 or X.ndim != 2:
        raise ValidationError("no training samples")
    if len(X) < 2 * cfg.min_leaf:
        raise ValidationError(
            f"need at least {2 * cfg.min_leaf} samples, got {len(X)}"
        )
    X = np.ascontiguousarray(X)
    y = np.ascontiguousarray(y)
    n = len(X)
    trees = []
    for seq in np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees):
        rng = np.random.Generator(np.random.PCG64(seq))
        boot = np.sort(rng.integers(0, n, size=n)).astype(np.int64)
        trees.append(_grow_tree(X, y, boot, cfg, rng))
    return RegressionForest(trees, cfg, X.shape[1], bank_fingerprint)


def predict(forest: RegressionForest, x) -> float:
    return forest.predict(x)


_MAGIC = b"FRST"
_VERSION = 1


def forest_to_bytes(forest: RegressionForest) -> bytes:
    cfg = forest.config
    fp = forest.bank_fingerprint.encode()
    out = [_MAGIC, struct.pack("<I", _VERSION)]
    out.append(struct.pack("<I", len(fp)))
    out.append(fp)
    out.append(
        struct.pack(
            "<6q",
            cfg.n_trees,
            cfg.max_depth,
            cfg.min_leaf,
            cfg.n_candidate_features,
            cfg.n_thresholds,
            cfg.seed,
        )
    )
    out.append(struct.pack("<II", forest.n_features, len(forest.trees)))
    for tree in forest.trees:
        out.append(struct.pack("<I", tree.n_nodes))
        out.append(tree.feature.astype("<i4").tobytes())
        out.append(tree.threshold.astype("<f8").tobytes())
        out.append(tree.left.astype("<i4").tobytes())
        out.append(tree.right.astype("<i4").tobytes())
        out.append(tree.value.astype("<f8").tobytes())
    return b"".join(out)


def forest_from_bytes(blob: bytes) -> RegressionForest:
    if blob[:4] != _MAGIC:
        raise FormatError("not a forest blob")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != _VERSION:
        raise FormatError(f"unsupported forest version {version}")
    off = 8
    (fp_len,) = struct.unpack_from("<I", blob, off)
    off += 4
    fp = blob[off : off + fp_len].decode()
    off += fp_len
    cfg_vals = struct.unpack_from("<6q", blob, off)
    off += 48
    cfg = TrainConfig(*cfg_vals)
    n_features, n_trees = struct.unpack_from("<II", blob, off)
    off += 8
    trees = []
    for _ in range(n_trees):
        (n_nodes,) = struct.unpack_from("<I", blob, off)
        off += 4

        def take(dtype, count):
            nonlocal off
            arr = np.frombuffer(blob, dtype=dtype, count=count, offset=off)
            off += arr.nbytes
            return arr

        feature = take("<i4", n_nodes)
        threshold = take("<f8", n_nodes)
        left = take("<i4", n_nodes)
        right = take("<i4", n_nodes)
        value = take("<f8", n_nodes)
        trees.append(RegressionTree(feature, threshold, left, right, value))
    return RegressionForest(trees, cfg, n_features, fp)
