"""Command-line entry point.

Commands: train, eval, predict, gradcheck, params, synth. Every command
exits 0 on success; failures print a single machine-parsable line
``error: <message>`` on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .data import save_pair_dir, synth_generate
from . import runner

GRADCHECK_TOLERANCE = 1e-4


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=str, default=None,
                   help="INI config file (defaults apply when omitted)")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="SECTION.KEY=VALUE", help="override a config value")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="changelstm",
        description="Bi-temporal change detection with matrix-memory LSTM "
                    "feature enhancement")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    _add_common(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("predict", help="write change maps for one sample")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--index", type=int, default=0,
                   help="sample index within the configured dataset")

    p = sub.add_parser("gradcheck", help="finite-difference check of the full model")
    _add_common(p)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--coords", type=int, default=32)

    p = sub.add_parser("params", help="count trainable scalars")
    _add_common(p)

    p = sub.add_parser("synth", help="generate a synthetic dataset directory")
    _add_common(p)
    p.add_argument("--out", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        if args.command == "train":
            out = runner.run_training(cfg)
            print(f"artifacts written to {out}")
        elif args.command == "eval":
            runner.run_evaluation(cfg, args.checkpoint)
        elif args.command == "predict":
            samples = runner.load_samples(cfg)
            if not 0 <= args.index < len(samples):
                raise ValueError(
                    f"sample index {args.index} out of range 0..{len(samples) - 1}")
            runner.run_prediction(cfg, args.checkpoint, samples[args.index])
        elif args.command == "gradcheck":
            worst = runner.run_gradcheck(cfg, size=args.size,
                                         max_coords=args.coords)
            print(f"max relative error {worst:.3e} "
                  f"(tolerance {GRADCHECK_TOLERANCE:.0e})")
            if worst >= GRADCHECK_TOLERANCE:
                raise ValueError(
                    f"gradient check failed: {worst:.3e} >= {GRADCHECK_TOLERANCE:.0e}")
        elif args.command == "params":
            count = runner.count_parameters(cfg)
            print(f"trainable parameters: {count} ({count / 1e6:.3f}M)")
        elif args.command == "synth":
            samples = synth_generate(cfg.data.synth_config(), cfg.data.count)
            save_pair_dir(samples, Path(args.out))
            print(f"wrote {len(samples)} pairs to {args.out}")
    except Exception as exc:  # single-line, machine-parsable failure contract
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
