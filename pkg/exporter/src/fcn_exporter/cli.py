"""`export-features` entry point."""

from __future__ import annotations

import argparse
import sys

from .errors import ExporterError
from .export import ExportConfig, export_features


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="export-features",
        description="Export 3D U-Net 64-channel features and 8-class likelihoods "
        "as half-resolution VOLF1 volumes.",
    )
    p.add_argument("--in", dest="input", required=True, help="input VOLF1 volume (C=1)")
    p.add_argument("--weights", default=None, help="optional state-dict file; "
                   "omitted: seeded random initialization")
    p.add_argument("--out-feat", required=True, help="output 64-channel feature volume")
    p.add_argument("--out-lik", required=True, help="output 8-channel likelihood volume")
    p.add_argument("--tile", type=int, default=32, help="cubic tile edge (divisible by 4)")
    p.add_argument("--seed", type=int, default=0, help="weight-init seed when no --weights")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = ExportConfig(
        input_path=args.input,
        out_feat_path=args.out_feat,
        out_lik_path=args.out_lik,
        weights_path=args.weights,
        tile=args.tile,
        seed=args.seed,
    )
    try:
        export_features(cfg)
    except (ExporterError, OSError) as exc:
        print(f"export-features: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
