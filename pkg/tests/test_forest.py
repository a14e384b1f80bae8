"""Regression forest: split selection, training, prediction, serialization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pancseg import kernels
from pancseg.errors import FormatError, ValidationError
from pancseg.forest import (
    RegressionForest,
    RegressionTree,
    TrainConfig,
    forest_from_bytes,
    forest_to_bytes,
    predict,
    train,
    variance_reduction,
)


def leaf_tree(value):
    return RegressionTree([-1], [0.0], [-1], [-1], [value])


# ---------------------------------------------------------------- variance reduction


def test_variance_reduction_identical_targets():
    assert variance_reduction([3, 3, 3, 3], [3, 3], [3, 3]) == 0.0


def test_variance_reduction_hand_example():
    """{0,0,10,10} split {0,0}|{10,10}: Var 25 - 0 - 0 = 25."""
    assert variance_reduction([0, 0, 10, 10], [0, 0], [10, 10]) == pytest.approx(25.0)


def test_variance_reduction_two_element_split():
    a, b = 3.0, 11.0
    var = np.var([a, b])
    assert variance_reduction([a, b], [a], [b]) == pytest.approx(var)


def test_variance_reduction_empty_side_is_invalid_signal():
    assert variance_reduction([1, 2, 3], [1, 2, 3], []) == float("-inf")
    assert variance_reduction([1, 2, 3], [], [1, 2, 3]) == float("-inf")


def test_variance_reduction_rejects_non_partition():
    with pytest.raises(ValidationError):
        variance_reduction([1, 2, 3], [1], [2])
    with pytest.raises(ValidationError):
        variance_reduction([1, 2, 3], [1, 2], [2, 3])


def split_oracle(x, y, thresholds, min_leaf=1):
    """Enumerate thresholds; return (best threshold, best gain) by the hand rule."""
    best_t, best_gain = None, float("-inf")
    for t in sorted(thresholds):
        left = y[x < t]
        right = y[x >= t]
        if len(left) < min_leaf or len(right) < min_leaf:
            continue
        gain = variance_reduction(y, left, right)
        if gain > best_gain + 1e-15:
            best_gain, best_t = gain, t
    return best_t, best_gain


# ---------------------------------------------------------------- split search kernel


def test_four_point_split_threshold_strictly_between_1_and_2(rng):
    """x = 0,1,2,3 with y = 0,0,10,10: the best split lands in (1, 2]."""
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0.0, 0.0, 10.0, 10.0])
    idx = np.arange(4, dtype=np.int64)
    feats = np.array([0], dtype=np.int64)
    thr = np.sort(rng.uniform(0.0, 3.0, size=(1, 64)))
    f, t, gain = kernels.best_split(X, y, idx, feats, np.ascontiguousarray(thr), 1)
    assert f == 0
    assert 1.0 < t <= 2.0
    assert gain == pytest.approx(25.0)
    # cross-check against the enumeration oracle
    ot, og = split_oracle(X[:, 0], y, thr[0])
    assert t == ot and gain == pytest.approx(og)


def test_best_split_matches_oracle_on_random_problems(rng):
    for _ in range(30):
        n, nf = 40, 5
        X = rng.integers(0, 10, size=(n, nf)).astype(np.float64)
        y = rng.integers(0, 20, size=n).astype(np.float64)
        idx = np.sort(rng.choice(n, size=30, replace=False)).astype(np.int64)
        feats = np.arange(nf, dtype=np.int64)
        thr = rng.uniform(0, 10, size=(nf, 8))
        f, t, gain = kernels.best_split(X, y, idx, feats, np.ascontiguousarray(thr), 2)
        # oracle: evaluate every (feature, threshold) with the declared tie rule
        best = (float("-inf"), None, None)
        for fi, feat in enumerate(feats):
            xs = X[idx, feat]
            for tt in thr[fi]:
                left = y[idx][xs < tt]
                right = y[idx][xs >= tt]
                if len(left) < 2 or len(right) < 2:
                    continue
                g = variance_reduction(y[idx], left, right)
                if g > best[0] + 1e-12:
                    best = (g, int(feat), float(tt))
                elif abs(g - best[0]) <= 1e-12 and best[1] is not None:
                    if (int(feat), float(tt)) < (best[1], best[2]):
                        best = (best[0], int(feat), float(tt))
        if best[1] is None:
            assert f == -1
        else:
            assert (f, t) == (best[1], best[2])
            assert gain == pytest.approx(best[0], rel=1e-9, abs=1e-12)


def test_best_split_min_leaf_enforced(rng):
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0.0, 0.0, 10.0, 10.0])
    idx = np.arange(4, dtype=np.int64)
    feats = np.array([0], dtype=np.int64)
    thr = np.array([[1.5]])
    f, t, gain = kernels.best_split(X, y, idx, feats, thr, 3)
    assert f == -1  # both sides would have 2 < min_leaf samples


def test_best_split_permutation_invariance(rng):
    """Splits depend only on the sample set, not on row order."""
    n, nf = 50, 4
    X = rng.integers(0, 8, size=(n, nf)).astype(np.float64)
    y = rng.integers(0, 30, size=n).astype(np.float64)
    idx = np.arange(n, dtype=np.int64)
    feats = np.arange(nf, dtype=np.int64)
    thr = np.ascontiguousarray(rng.uniform(0, 8, size=(nf, 6)))
    base = kernels.best_split(X, y, idx, feats, thr, 2)
    perm = rng.permutation(n)
    Xp = np.ascontiguousarray(X[perm])
    yp = np.ascontiguousarray(y[perm])
    inv = np.argsort(perm).astype(np.int64)
    permuted = kernels.best_split(Xp, yp, np.sort(inv), feats, thr, 2)
    assert base[0] == permuted[0] and base[1] == permuted[1]
    assert base[2] == pytest.approx(permuted[2], rel=1e-12)


# ---------------------------------------------------------------- training


def test_constant_target_predicts_constant_exactly(rng):
    X = rng.random((30, 4))
    y = np.full(30, 7.0)
    forest = train((X, y), TrainConfig(n_trees=5, seed=0))
    assert predict(forest, rng.random(4)) == 7.0
    assert np.all(forest.predict_many(rng.random((20, 4))) == 7.0)


def test_two_leaf_trees_average_to_mean():
    trees = [leaf_tree(4.0), leaf_tree(6.0)]
    forest = RegressionForest(trees, TrainConfig(n_trees=2), n_features=3)
    assert forest.predict([0.0, 0.0, 0.0]) == 5.0


def test_training_determinism(rng):
    X = rng.random((100, 6))
    y = rng.random(100) * 10
    cfg = TrainConfig(n_trees=4, max_depth=6, seed=3)
    a = forest_to_bytes(train((X, y), cfg))
    b = forest_to_bytes(train((X, y), cfg))
    assert a == b
    c = forest_to_bytes(train((X, y), TrainConfig(n_trees=4, max_depth=6, seed=4)))
    assert a != c


def test_prediction_within_target_range(rng):
    X = rng.random((200, 5))
    y = rng.random(200) * 40 - 20
    forest = train((X, y), TrainConfig(n_trees=8, max_depth=8, seed=1))
    preds = forest.predict_many(rng.random((100, 5)))
    assert np.all(preds >= y.min() - 1e-12)
    assert np.all(preds <= y.max() + 1e-12)


def test_y_equals_x_dense_grid():
    """y = x on 1000 dense samples, depth 12: error <= 2 grid spacings in-range."""
    n = 1000
    x = np.linspace(0.0, 1.0, n)
    spacing = x[1] - x[0]
    X = x[:, None]
    forest = train((X, x), TrainConfig(n_trees=20, max_depth=12, min_leaf=2, seed=0))
    rng = np.random.Generator(np.random.PCG64(5))
    q = rng.uniform(0.05, 0.95, size=200)
    preds = forest.predict_many(q[:, None])
    assert np.max(np.abs(preds - q)) <= 2.0 * spacing


def test_forest_beats_constant_predictor(rng):
    x = np.linspace(0, 1, 500)
    forest = train((x[:, None], x), TrainConfig(n_trees=10, max_depth=10, seed=2))
    preds = forest.predict_many(x[:, None])
    mse = float(np.mean((preds - x) ** 2))
    const_mse = float(np.var(x))
    assert mse <= const_mse


def test_train_accepts_sample_pairs(rng):
    samples = [(rng.random(3), float(rng.random())) for _ in range(40)]
    forest = train(samples, TrainConfig(n_trees=2, seed=0))
    X = np.array([v for v, _ in samples])
    y = np.array([t for _, t in samples])
    other = train((X, y), TrainConfig(n_trees=2, seed=0))
    assert forest_to_bytes(forest) == forest_to_bytes(other)


def test_train_validation_errors(rng):
    with pytest.raises(ValidationError):
        train([], TrainConfig())
    with pytest.raises(ValidationError):
        train([(np.zeros(3), 0.0), (np.zeros(4), 1.0)], TrainConfig())
    with pytest.raises(ValidationError):
        train((rng.random((4, 3)), rng.random(4)), TrainConfig(min_leaf=5))
    with pytest.raises(ValidationError):
        TrainConfig(n_trees=0)


def test_predict_rejects_wrong_length(rng):
    forest = train((rng.random((30, 4)), rng.random(30)), TrainConfig(n_trees=2))
    with pytest.raises(ValidationError):
        forest.predict(np.zeros(5))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(12, 60))
def test_prediction_range_property(seed, n):
    r = np.random.Generator(np.random.PCG64(seed))
    X = r.random((n, 3))
    y = r.random(n) * 100 - 50
    forest = train((X, y), TrainConfig(n_trees=3, max_depth=5, min_leaf=2, seed=seed & 0xFFFF))
    preds = forest.predict_many(r.random((20, 3)))
    assert np.all(preds >= y.min() - 1e-9) and np.all(preds <= y.max() + 1e-9)


# ---------------------------------------------------------------- serialization


def test_serialization_round_trip_1000_predictions_bit_exact(rng):
    X = rng.random((300, 8)) * 10
    y = rng.random(300) * 100
    forest = train((X, y), TrainConfig(n_trees=10, max_depth=10, seed=9), "fp-test")
    back = forest_from_bytes(forest_to_bytes(forest))
    Q = rng.random((1000, 8)) * 10
    assert np.array_equal(forest.predict_many(Q), back.predict_many(Q))
    assert back.config == forest.config
    assert back.bank_fingerprint == "fp-test"
    assert back.n_features == 8


def test_forest_from_bytes_rejects_garbage():
    with pytest.raises(FormatError):
        forest_from_bytes(b"NOPE" + b"\x00" * 64)


def test_forest_requires_trees():
    with pytest.raises(ValidationError):
        RegressionForest([], TrainConfig(), n_features=1)
