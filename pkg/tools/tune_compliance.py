"""Calibrate the default plant perturbations.

Sweeps backlash width and compliance scale and reports the analytical
baseline's mean marker error on the default-seed test session of the full and
desk profiles. The shipped defaults were picked so that both land in 20-60 mm.

    python3 tools/tune_compliance.py [--backlash 0.06 0.08 0.1] [--scale 2e-5 4e-5]
"""

import argparse

import numpy as np

from serpent_prc.config import ExperimentConfig
from serpent_prc.dataset import split_counts
from serpent_prc.estimators import analytical_estimate
from serpent_prc.plant import DEFAULT_BACKLASH, DEFAULT_COMPLIANCE_SCALE, PlantConfig, default_compliance, run_session


def test_session_error(cfg: ExperimentConfig, plant: PlantConfig) -> float:
    n_train, n_val, _ = split_counts(cfg.sessions)
    index = n_train + n_val
    log = run_session(plant, cfg.session_seed(index), cfg.steps, cfg.target_refresh, session_index=index)
    log = log.trimmed(cfg.burnin)
    pred = analytical_estimate(log, plant.geometry)[cfg.H - 1:]
    truth = log.markers[cfg.H - 1:]
    return float(np.linalg.norm((pred - truth).reshape(-1, 9, 3), axis=2).mean())


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--backlash", type=float, nargs="+", default=[0.06, 0.07, DEFAULT_BACKLASH, 0.09, 0.1])
    p.add_argument("--scale", type=float, nargs="+", default=[DEFAULT_COMPLIANCE_SCALE])
    args = p.parse_args()
    profiles = {name: ExperimentConfig.from_profile(name) for name in ("full", "desk")}
    print("backlash  scale     " + "  ".join(f"{n:>8s}" for n in profiles))
    for w in args.backlash:
        for s in args.scale:
            base = PlantConfig()
            plant = PlantConfig(backlash_width=w, compliance=default_compliance(base.geometry.pulley_radii, s))
            errs = [test_session_error(cfg, plant) for cfg in profiles.values()]
            flag = "" if all(20 <= e <= 60 for e in errs) else "  (outside 20-60 mm)"
            print(f"{w:<9.3f} {s:<9.2e} " + "  ".join(f"{e:8.2f}" for e in errs) + flag)


if __name__ == "__main__":
    main()
