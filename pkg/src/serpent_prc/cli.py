"""Command line entry point: ``serpent-prc generate | train | evaluate | sweep``.

Failures exit nonzero after printing one JSON line to stderr::

    {"error": "ConfigMismatchError", "message": "..."}
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .config import METHODS, ExperimentConfig

EXIT_USAGE = 2
EXIT_ERROR = 1


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON file with overrides on top of the profile")
    common.add_argument("--profile", metavar="NAME", choices=("full", "desk", "ci"), default=None,
                        help="full, desk or ci (default: desk, or the config file's profile)")
    common.add_argument("--seed", metavar="N", type=int, default=None, help="master seed")
    common.add_argument("--out", metavar="DIR", default=None, help="run directory")
    common.add_argument("--workers", metavar="N", type=int, default=1)
    common.add_argument("--H", type=int, default=None, help="delay-embedding window length")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="serpent-prc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="simulate sessions and write logs")
    tr = sub.add_parser("train", parents=[common], help="fit one estimator")
    tr.add_argument("--method", metavar="NAME", choices=METHODS, default="prc-mlp")
    tr.add_argument("--ridge", action="store_true", help="closed-form fit for prc-lin")
    ev = sub.add_parser("evaluate", parents=[common], help="compare trained estimators on the test split")
    ev.add_argument("--method", metavar="NAME", choices=METHODS, action="append",
                    help="restrict to these methods (repeatable)")
    sw = sub.add_parser("sweep", parents=[common], help="validation loss over window lengths")
    sw.add_argument("--method", metavar="NAME", choices=("prc-mlp",), default="prc-mlp")
    sw.add_argument("--Hs", type=int, nargs="+", default=None, help="window lengths to try")
    return p


def _config(args) -> ExperimentConfig:
    kw = {"master_seed": args.seed, "out_dir": args.out, "H": args.H}
    if args.config:
        return ExperimentConfig.from_file(args.config, args.profile, **kw)
    return ExperimentConfig.from_profile(args.profile or "desk", **kw)


def _run(args) -> dict:
    cfg = _config(args)
    if args.command == "generate":
        paths = pipeline.generate(cfg, workers=args.workers)
        return {"sessions": len(paths), "out": str(cfg.out_dir), "data_hash": cfg.data_hash}
    if args.command == "train":
        path = pipeline.train_method(cfg, args.method, ridge=args.ridge)
        return {"checkpoint": str(path), "method": args.method, "config_hash": cfg.config_hash}
    if args.command == "evaluate":
        ckpts = None
        if args.method:
            models = pipeline.Path(cfg.out_dir) / "models"
            ckpts = {m: models / f"{m}.npz" for m in args.method}
        table = pipeline.evaluate(cfg, ckpts)
        print(table.to_text())
        return {"report": str(pipeline.Path(cfg.out_dir) / "report.json")}
    result = pipeline.sweep(cfg, args.Hs, workers=args.workers)
    for h, loss in zip(result.H, result.val_loss):
        print(f"H={h:<3d} val_loss={loss:.6g}")
    return {"sweep": str(pipeline.Path(cfg.out_dir) / "sweep.csv"), "best_H": result.best_H}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code:
            print(json.dumps({"error": "UsageError", "message": "invalid arguments"}), file=sys.stderr)
            return EXIT_USAGE
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        summary = _run(args)
    except Exception as exc:  # noqa: BLE001  every failure becomes one machine-readable line
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_ERROR
    print(json.dumps({"status": "ok", "command": args.command, **summary}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
