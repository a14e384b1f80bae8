"""Overlap metrics, fold planning, and the cross-validation report."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pancseg import evaluation as ev
from pancseg import graphcut as gc
from pancseg import localize as loc
from pancseg.errors import ValidationError
from pancseg.forest import TrainConfig
from pancseg.phantom import PhantomConfig, generate_phantom, synth_feature_volume


def random_masks(rng, shape=(8, 8, 8)):
    return rng.random(shape) < rng.uniform(0.1, 0.9), rng.random(shape) < rng.uniform(0.1, 0.9)


# ---------------------------------------------------------------- metrics


def test_jaccard_examples():
    a = np.zeros((2, 2, 2), dtype=bool)
    a[0, 0, 0] = a[0, 0, 1] = True
    assert ev.jaccard(a, a) == 1.0
    b = np.zeros_like(a)
    b[1, 1, 0] = b[1, 1, 1] = True
    assert ev.jaccard(a, b) == 0.0
    c = np.zeros_like(a)
    c[0, 0, 1] = c[1, 0, 0] = True  # |a|=|b|=2, |a&b|=1
    assert ev.jaccard(a, c) == pytest.approx(1.0 / 3.0)
    assert ev.dice(a, c) == pytest.approx(0.5)


def test_both_empty_convention():
    z = np.zeros((3, 3, 3), dtype=bool)
    assert ev.jaccard(z, z) == 1.0
    assert ev.dice(z, z) == 1.0


def test_dim_mismatch_raises():
    with pytest.raises(ValidationError):
        ev.jaccard(np.zeros((2, 2, 2), dtype=bool), np.zeros((2, 2, 3), dtype=bool))
    with pytest.raises(ValidationError):
        ev.dice(np.zeros((2, 2, 2), dtype=bool), np.zeros((3, 2, 2), dtype=bool))


def test_metric_identity_and_bounds(rng):
    """JI <= DICE and DICE = 2 JI / (1 + JI) to 1e-12 on random mask pairs."""
    for _ in range(200):
        a, b = random_masks(rng)
        ji = ev.jaccard(a, b)
        dc = ev.dice(a, b)
        assert 0.0 <= ji <= 1.0 and 0.0 <= dc <= 1.0
        assert ji <= dc + 1e-15
        assert dc == pytest.approx(2.0 * ji / (1.0 + ji), abs=1e-12)


def test_metric_symmetry(rng):
    a, b = random_masks(rng)
    assert ev.jaccard(a, b) == ev.jaccard(b, a)
    assert ev.dice(a, b) == ev.dice(b, a)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_metric_identity_property(seed):
    r = np.random.Generator(np.random.PCG64(seed))
    a, b = random_masks(r, shape=(5, 5, 5))
    ji = ev.jaccard(a, b)
    dc = ev.dice(a, b)
    assert dc == pytest.approx(2.0 * ji / (1.0 + ji), abs=1e-12)
    assert ji <= dc + 1e-15


# ---------------------------------------------------------------- folds


def test_folds_partition_ten_cases():
    plan = ev.make_folds(10, 5, seed=0)
    assert plan.k == 5
    sizes = [len(f) for f in plan.folds]
    assert sizes == [2, 2, 2, 2, 2]
    flat = sorted(i for f in plan.folds for i in f)
    assert flat == list(range(10))


def test_folds_sizes_differ_by_at_most_one():
    plan = ev.make_folds(11, 4, seed=1)
    sizes = [len(f) for f in plan.folds]
    assert max(sizes) - min(sizes) <= 1
    assert sum(sizes) == 11


def test_folds_deterministic():
    assert ev.make_folds(20, 5, seed=3) == ev.make_folds(20, 5, seed=3)
    assert ev.make_folds(20, 5, seed=3) != ev.make_folds(20, 5, seed=4)


def test_folds_too_few_cases():
    with pytest.raises(ValidationError):
        ev.make_folds(3, 5, seed=0)


# ---------------------------------------------------------------- cross validation


def make_cases(n, seed0=50):
    cases = []
    for i in range(n):
        cfg = PhantomConfig(seed=seed0 + i)
        ct, masks, boxes = generate_phantom(cfg)
        fvol = synth_feature_volume(masks[0], 8, seed=seed0 + i + 10_000)
        cases.append(ev.Case(f"case_{i:03d}", ct, fvol, masks[0], boxes[0]))
    return cases


FAST_CFG = ev.PipelineConfig(
    bank=loc.BankParams(n_diff1=6, n_diff2=6, n_lbp=2, n_lik=2, seed=0),
    forest=TrainConfig(n_trees=4, max_depth=6, min_leaf=2, seed=1),
    stride=12,
    atlas_grid=32,
    energy=gc.EnergyConfig(lam=16.0),
)


def test_run_cv_report_structure_and_determinism():
    cases = make_cases(6)
    a = ev.run_cv(cases, 3, FAST_CFG, seed=2, with_baseline=True)
    b = ev.run_cv(cases, 3, FAST_CFG, seed=2, with_baseline=True)
    assert len(a.results) == 6 and len(a.baseline) == 6
    assert ev.format_report(a) == ev.format_report(b)
    for r in a.results:
        assert np.isfinite(r.face_mm) and 0.0 <= r.ji <= 1.0 and 0.0 <= r.dice <= 1.0
        assert r.ji <= r.dice + 1e-15


def test_run_cv_coverage_and_aggregate_consistency():
    cases = make_cases(6)
    report = ev.run_cv(cases, 3, FAST_CFG, seed=5)
    ids = [r.case_id for r in report.results]
    assert ids == [c.case_id for c in cases]  # each case tested exactly once, in order
    text = ev.format_report(report)
    # recompute the aggregate from the emitted per-case lines
    lines = [ln for ln in text.splitlines() if ln.startswith("case_")]
    dices = [float(ln.split()[3]) for ln in lines]
    agg_line = next(ln for ln in text.splitlines() if ln.startswith("AGGREGATE dice"))
    mean = float(agg_line.split()[2].split("±")[0])
    assert mean == pytest.approx(np.mean(dices), abs=1e-6)


def test_run_cv_localization_only():
    cases = make_cases(5)
    cfg = ev.PipelineConfig(
        bank=FAST_CFG.bank, forest=FAST_CFG.forest, stride=FAST_CFG.stride, segment=False
    )
    report = ev.run_cv(cases, 5, cfg, seed=1)
    assert all(np.isfinite(r.face_mm) for r in report.results)
    assert all(np.isnan(r.dice) for r in report.results)


def test_run_cv_validation():
    with pytest.raises(ValidationError):
        ev.run_cv([], 3, FAST_CFG, seed=0)
    with pytest.raises(ValidationError):
        ev.run_cv(make_cases(2), 3, FAST_CFG, seed=0)


def test_threaded_features_match_serial():
    cases = make_cases(4)
    a = ev.run_cv(cases, 2, FAST_CFG, seed=3, n_threads=1)
    b = ev.run_cv(cases, 2, FAST_CFG, seed=3, n_threads=4)
    assert ev.format_report(a) == ev.format_report(b)
