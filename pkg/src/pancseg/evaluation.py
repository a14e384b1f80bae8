"""Overlap metrics and the k-fold cross-validation harness for the full
localize -> atlas -> graph-cut pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import atlas as atl
from . import graphcut as gc
from . import localize as loc
from .errors import ValidationError
from .forest import TrainConfig
from .geometry import BoundingBox
from .volume import FeatureVolume, ScalarVolume


def _check_dims(a, b):
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValidationError(f"mask shapes differ: {a.shape} vs {b.shape}")
    return a, b


def jaccard(a, b) -> float:
    """|a & b| / |a | b|; 1.0 when both masks are empty."""
    a, b = _check_dims(a, b)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def dice(a, b) -> float:
    """2 |a & b| / (|a| + |b|); 1.0 when both masks are empty."""
    a, b = _check_dims(a, b)
    total = np.count_nonzero(a) + np.count_nonzero(b)
    if total == 0:
        return 1.0
    return 2.0 * np.count_nonzero(a & b) / total


@dataclass(frozen=True)
class FoldPlan:
    k: int
    folds: tuple[tuple[int, ...], ...]
    seed: int


def make_folds(n_cases: int, k: int, seed: int) -> FoldPlan:
    """Seeded partition into k folds with sizes differing by at most one."""
    if n_cases < k:
        raise ValidationError(f"{n_cases} cases cannot fill {k} folds")
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = rng.permutation(n_cases)
    folds = tuple(tuple(int(i) for i in part) for part in np.array_split(perm, k))
    return FoldPlan(k=k, folds=folds, seed=seed)


@dataclass
class Case:
    case_id: str
    ct: ScalarVolume
    fvol: FeatureVolume
    mask: np.ndarray
    box: BoundingBox


@dataclass(frozen=True)
class PipelineConfig:
    bank: loc.BankParams = loc.BankParams()
    forest: TrainConfig = TrainConfig()
    stride: int = 8
    atlas_grid: int = 64
    margin_mm: float = atl.DEFAULT_MARGIN_MM
    rough_threshold: float = 0.5
    # large pairwise weight: lets the cut snap to the contrast edge when
    # the projected prior is misplaced by residual localization error
    energy: gc.EnergyConfig = gc.EnergyConfig(lam=16.0)
    segment: bool = True  # False: localization-only runs (e.g. ablations)


@dataclass
class CaseResult:
    case_id: str
    face_mm: float
    ji: float
    dice: float


@dataclass
class CVReport:
    results: list[CaseResult]
    baseline: list[CaseResult] = field(default_factory=list)

    def aggregate(self, attr: str, baseline: bool = False):
        """(mean, population stddev) of a per-case metric."""
        rows = self.baseline if baseline else self.results
        vals = np.array([getattr(r, attr) for r in rows], dtype=np.float64)
        return float(vals.mean()), float(vals.std())


def _segment_case(case: Case, atlas: atl.ProbAtlas, box: BoundingBox, cfg: PipelineConfig):
    prob = atl.project_atlas(atlas, box, cfg.margin_mm, case.ct.header)
    roi = np.asarray(prob.data) > 0
    if not roi.any():
        return np.zeros(case.mask.shape, dtype=bool)
    return gc.segment_precise(case.ct, prob, roi, cfg.energy)


def _mean_box_at_center(boxes, header) -> BoundingBox:
    """Baseline box: mean training box size, centered in the volume."""
    sizes = np.stack([b.size for b in boxes])
    half = sizes.mean(axis=0) / 2.0
    center = np.asarray(header.dims, dtype=np.float64) * np.asarray(header.spacing) / 2.0
    lo = center - half
    hi = center + half
    return BoundingBox((lo[0], hi[0], lo[1], hi[1], lo[2], hi[2]))


def _compute_features(cases, bank, stride, n_threads):
    from concurrent.futures import ThreadPoolExecutor

    if n_threads is None:
        import os

        n_threads = os.cpu_count() or 1
    if n_threads <= 1:
        return [loc.compute_case_features(c.ct, c.fvol, bank, stride) for c in cases]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        return list(
            pool.map(lambda c: loc.compute_case_features(c.ct, c.fvol, bank, stride), cases)
        )


def run_cv(
    cases: list[Case],
    k: int,
    cfg: PipelineConfig,
    seed: int,
    with_baseline: bool = False,
    n_threads: int | None = None,
) -> CVReport:
    """Per-fold train-on-complement / test-on-fold evaluation.

    Feature banks are data-independent (seeded), so the bank and per-case
    feature matrices are computed once and shared across folds.
    """
    if not cases:
        raise ValidationError("no cases")
    channels = cases[0].fvol.channels
    from . import features as feat

    bank = feat.sample_bank(
        cfg.bank.seed,
        cfg.bank.n_diff1,
        cfg.bank.n_diff2,
        cfg.bank.n_lbp,
        cfg.bank.n_lik,
        cfg.bank.patch_size,
        channels,
    )
    cached = _compute_features(cases, bank, cfg.stride, n_threads)

    plan = make_folds(len(cases), k, seed)
    results: dict[int, CaseResult] = {}
    baseline: dict[int, CaseResult] = {}
    for fold in plan.folds:
        test = set(fold)
        train_idx = [i for i in range(len(cases)) if i not in test]
        model = loc.train_localizer_precomputed(
            [cached[i] for i in train_idx],
            [cases[i].box for i in train_idx],
            bank,
            cfg.forest,
            cfg.stride,
        )
        train_boxes = [cases[i].box for i in train_idx]
        atlas = None
        if cfg.segment:
            # build in margin-expanded box coordinates so projection into a
            # margin-expanded estimated box preserves the organ's scale
            atlas = atl.build_atlas(
                [
                    (
                        cases[i].mask,
                        atl.expand_box(cases[i].box, cfg.margin_mm, cases[i].ct.header),
                        cases[i].ct.spacing,
                    )
                    for i in train_idx
                ],
                grid=cfg.atlas_grid,
            )
        for i in fold:
            case = cases[i]
            est_box, _ = loc.estimate_box_from_features(model, *cached[i])
            face_mm, _ = loc.face_distance(est_box, case.box)
            ji_v = dice_v = float("nan")
            if cfg.segment:
                seg = _segment_case(case, atlas, est_box, cfg)
                ji_v = jaccard(seg, case.mask)
                dice_v = dice(seg, case.mask)
            results[i] = CaseResult(case.case_id, face_mm, ji_v, dice_v)
            if with_baseline:
                base_box = _mean_box_at_center(train_boxes, case.ct.header)
                b_face, _ = loc.face_distance(base_box, case.box)
                b_ji = b_dice = float("nan")
                if cfg.segment:
                    b_seg = _segment_case(case, atlas, base_box, cfg)
                    b_ji = jaccard(b_seg, case.mask)
                    b_dice = dice(b_seg, case.mask)
                baseline[i] = CaseResult(case.case_id, b_face, b_ji, b_dice)

    ordered = [results[i] for i in range(len(cases))]
    ordered_base = [baseline[i] for i in range(len(cases))] if with_baseline else []
    return CVReport(results=ordered, baseline=ordered_base)


def format_report(report: CVReport) -> str:
    """Line-oriented report: one `case_id face_mm ji dice` row per case,
    then AGGREGATE mean±sd lines (population stddev)."""
    lines = []
    for r in report.results:
        lines.append(f"{r.case_id} {r.face_mm:.6f} {r.ji:.6f} {r.dice:.6f}")
    for attr in ("face_mm", "ji", "dice"):
        mean, sd = report.aggregate(attr)
        lines.append(f"AGGREGATE {attr} {mean:.6f}±{sd:.6f}")
    if report.baseline:
        for r in report.baseline:
            lines.append(f"BASELINE {r.case_id} {r.face_mm:.6f} {r.ji:.6f} {r.dice:.6f}")
        for attr in ("face_mm", "ji", "dice"):
            mean, sd = report.aggregate(attr, baseline=True)
            lines.append(f"BASELINE_AGGREGATE {attr} {mean:.6f}±{sd:.6f}")
    return "\n".join(lines) + "\n"
