"""Pick each readout's initial learning rate by validation loss.

Trains every method of a profile at each learning rate of a fixed grid on the
training split and prints the best validation MSE. Test data is never touched.

    python3 tools/select_lr.py --profile desk --out runs/desk [--grid 3e-4 1e-3 3e-3]
"""

import argparse
from pathlib import Path

from serpent_prc import pipeline
from serpent_prc.config import METHODS, ExperimentConfig


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--profile", default="desk")
    p.add_argument("--out", default=None)
    p.add_argument("--grid", type=float, nargs="+", default=[3e-4, 1e-3, 3e-3])
    p.add_argument("--methods", nargs="+", default=list(METHODS))
    args = p.parse_args()
    cfg = ExperimentConfig.from_profile(args.profile, out_dir=args.out)
    if not (Path(cfg.out_dir) / "sessions").exists():
        pipeline.generate(cfg)
    train, val, _, norm = pipeline.prepare(cfg)
    for method in args.methods:
        tr, va = (pipeline._inputs(method, logs, cfg.H, norm) for logs in (train, val))
        losses = {}
        for lr in args.grid:
            est = pipeline.build_estimator(cfg, method).set_params(learning_rate=lr)
            est.fit(tr.inputs, tr.targets, eval_set=(va.inputs, va.targets))
            losses[lr] = est.best_val_loss_
            print(f"{method:8s} lr={lr:<8.0e} val_loss={est.best_val_loss_:.6f} epochs={len(est.curve_)}", flush=True)
        best = min(losses, key=losses.get)
        print(f"{method:8s} best lr={best:.0e}", flush=True)


if __name__ == "__main__":
    main()
