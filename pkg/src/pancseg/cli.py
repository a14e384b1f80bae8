"""Command line entry point: gen-phantom, train, localize, segment, eval, cv.

All volumes are VOLF1 files, boxes are plain-text box.txt files, and models
use the localizer bundle format.  Every subcommand takes --seed and is
deterministic under it.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import atlas as atl
from . import evaluation as ev
from . import graphcut as gc
from . import localize as loc
from . import phantom as ph
from .errors import PancsegError, ValidationError
from .forest import TrainConfig
from .geometry import read_box_file, write_box_file
from .volume import ScalarVolume, VolumeHeader, load_volume, save_volume


def parse_config_file(path) -> dict[str, str]:
    """Flat `key = value` config; '#' starts a comment."""
    out: dict[str, str] = {}
    with open(path) as f:
        for raw in f:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}: bad config line {raw.strip()!r}")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def _triple(text, cast=float):
    parts = [cast(v) for v in text.replace(",", " ").split()]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise ValidationError(f"expected 1 or 3 values, got {text!r}")
    return tuple(parts)


def _tuple_f(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def phantom_config_from_file(cfg: dict[str, str], seed_override=None) -> tuple[ph.PhantomConfig, dict]:
    seed = int(cfg.get("seed", "0")) if seed_override is None else seed_override
    pcfg = ph.PhantomConfig(
        dims=_triple(cfg.get("dims", "64"), int),
        spacing=_triple(cfg.get("spacing", "1.0")),
        n_organs=int(cfg.get("n_organs", "1")),
        organ_mean=_tuple_f(cfg.get("organ_mean", "200")),
        organ_std=_tuple_f(cfg.get("organ_std", "10")),
        background_mean=float(cfg.get("background_mean", "50")),
        background_std=float(cfg.get("background_std", "20")),
        center_jitter=float(cfg.get("center_jitter", "8")),
        radius_range=(
            float(cfg.get("radius_min", "10")),
            float(cfg.get("radius_max", "16")),
        ),
        seed=seed,
    )
    extra = {
        "cases": int(cfg.get("cases", "1")),
        "feat_channels": int(cfg.get("feat_channels", "8")),
        "feat_noise": float(cfg.get("feat_noise", "0.5")),
        "feat_blur": int(cfg.get("feat_blur", str(ph.BLUR_RADIUS))),
    }
    return pcfg, extra


def cmd_gen_phantom(args) -> int:
    cfg, extra = phantom_config_from_file(parse_config_file(args.config), args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_lines = []
    for i in range(extra["cases"]):
        case_cfg = replace(cfg, seed=cfg.seed + i)
        ct, masks, boxes = ph.generate_phantom(case_cfg)
        case_dir = out_dir / f"case_{i:03d}"
        case_dir.mkdir(exist_ok=True)
        save_volume(ct, case_dir / "ct.volf")
        fvol = ph.synth_feature_volume(
            masks[0], extra["feat_channels"], case_cfg.seed + 10_000,
            spacing=case_cfg.spacing, noise_std=extra["feat_noise"],
            blur_radius=extra["feat_blur"],
        )
        save_volume(fvol, case_dir / "feat.volf")
        mask_header = VolumeHeader(
            dims=case_cfg.dims, channels=1, spacing=case_cfg.spacing, dtype="u8"
        )
        save_volume(ScalarVolume(mask_header, masks[0].astype(np.uint8)), case_dir / "mask.volf")
        write_box_file(case_dir / "box.txt", boxes)
        rel = case_dir.name
        manifest_lines.append(f"{rel}/ct.volf {rel}/feat.volf {rel}/mask.volf {rel}/box.txt")
    (out_dir / "manifest.txt").write_text("\n".join(manifest_lines) + "\n")
    return 0


def load_manifest(path) -> list[ev.Case]:
    base = Path(path).parent
    cases = []
    with open(path) as f:
        for i, line in enumerate(f):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ValidationError(f"{path}: manifest line {i + 1} needs 4 paths")
            ct = load_volume(base / parts[0])
            fvol = load_volume(base / parts[1])
            mask = np.asarray(load_volume(base / parts[2]).data) != 0
            box = read_box_file(base / parts[3])[0]
            cases.append(ev.Case(f"case_{i:03d}", ct, fvol, mask, box))
    if not cases:
        raise ValidationError(f"{path}: empty manifest")
    return cases


def _pipeline_config(args) -> ev.PipelineConfig:
    return ev.PipelineConfig(
        bank=loc.BankParams(seed=args.seed),
        forest=TrainConfig(seed=args.seed + 1000),
        stride=args.stride,
        energy=gc.EnergyConfig(lam=args.lam),
    )


def cmd_train(args) -> int:
    cases = load_manifest(args.cases)
    cfg = _pipeline_config(args)
    model = loc.train_localizer(
        [(c.ct, c.fvol, c.box) for c in cases], cfg.bank, cfg.forest, cfg.stride
    )
    loc.save_model(model, args.out)
    if args.atlas_out:
        # margin-expanded box coordinates; must match the margin used at segment time
        atlas = atl.build_atlas(
            [
                (c.mask, atl.expand_box(c.box, args.margin, c.ct.header), c.ct.spacing)
                for c in cases
            ]
        )
        atl.save_atlas(atlas, args.atlas_out)
    return 0


def cmd_localize(args) -> int:
    model = loc.load_model(args.model)
    ct = load_volume(args.ct)
    fvol = load_volume(args.feat)
    box, _ = loc.estimate_box(model, ct, fvol)
    write_box_file(args.out, [box])
    return 0


def cmd_segment(args) -> int:
    model = loc.load_model(args.model)
    ct = load_volume(args.ct)
    fvol = load_volume(args.feat)
    atlas = atl.load_atlas(args.atlas)
    box, _ = loc.estimate_box(model, ct, fvol)
    prob = atl.project_atlas(atlas, box, args.margin, ct.header)
    roi = np.asarray(prob.data) > 0
    mask = gc.segment_precise(ct, prob, roi, gc.EnergyConfig(lam=args.lam))
    header = VolumeHeader(dims=ct.dims, channels=1, spacing=ct.spacing, dtype="u8")
    save_volume(ScalarVolume(header, mask.astype(np.uint8)), args.out)
    return 0


def cmd_eval(args) -> int:
    pred = np.asarray(load_volume(args.pred).data) != 0
    gt = np.asarray(load_volume(args.gt).data) != 0
    ji = ev.jaccard(pred, gt)
    dc = ev.dice(pred, gt)
    line = f"ji {ji:.6f} dice {dc:.6f}"
    if args.pred_box and args.gt_box:
        face, _ = loc.face_distance(read_box_file(args.pred_box)[0], read_box_file(args.gt_box)[0])
        line = f"face_mm {face:.6f} " + line
    print(line)
    return 0


def cmd_cv(args) -> int:
    cases = load_manifest(args.manifest)
    cfg = _pipeline_config(args)
    report = ev.run_cv(
        cases, args.k, cfg, args.seed, with_baseline=args.baseline, n_threads=args.threads
    )
    text = ev.format_report(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pancseg")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None,
                       help="cap worker parallelism (default: all cores)")

    p = sub.add_parser("gen-phantom", help="generate synthetic CT phantoms")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    common(p)
    # no --seed flag means: use the seed from the config file
    p.set_defaults(func=cmd_gen_phantom, seed=None)

    p = sub.add_parser("train", help="train the six-face localizer (and atlas)")
    p.add_argument("--cases", required=True, help="manifest file")
    p.add_argument("--out", required=True, help="model bundle path")
    p.add_argument("--atlas-out", default=None)
    p.add_argument("--margin", type=float, default=atl.DEFAULT_MARGIN_MM)
    p.add_argument("--stride", type=int, default=8)
    p.add_argument("--lambda", dest="lam", type=float, default=16.0)
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("localize", help="estimate a bounding box")
    p.add_argument("--model", required=True)
    p.add_argument("--ct", required=True)
    p.add_argument("--feat", required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("segment", help="localize, project atlas, graph-cut")
    p.add_argument("--ct", required=True)
    p.add_argument("--feat", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--atlas", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=16.0)
    p.add_argument("--margin", type=float, default=atl.DEFAULT_MARGIN_MM)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", help="overlap metrics between two masks")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--pred-box", default=None)
    p.add_argument("--gt-box", default=None)
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cv", help="k-fold cross validation over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--stride", type=int, default=8)
    p.add_argument("--lambda", dest="lam", type=float, default=16.0)
    p.add_argument("--baseline", action="store_true")
    p.add_argument("--out", default=None)
    common(p)
    p.set_defaults(func=cmd_cv)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PancsegError, OSError) as exc:
        print(f"pancseg: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
