"""Spatial vs random CV for each model over several seeds."""

import argparse

import numpy as np

from geoconform.evaluation import make_random_folds, make_spatial_folds, run_cv
from geoconform.pipeline import DEFAULT_MODELS
from geoconform.models import spec_from_dict
from geoconform.synth import SynthConfig, generate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--locations", type=int, default=6)
    ap.add_argument("--records", type=int, default=60)
    ap.add_argument("--location-effect", type=float, default=8.0)
    args = ap.parse_args()

    rows = {}
    for seed in range(args.seeds):
        ds = generate(SynthConfig(n_locations=args.locations, records_per_location=args.records,
                                  location_effect=args.location_effect, seed=seed))
        for spec_dict in DEFAULT_MODELS:
            spec = spec_from_dict(spec_dict)
            sp = run_cv(ds, spec, make_spatial_folds(ds, 5), seed=seed).summary
            rd = run_cv(ds, spec, make_random_folds(ds, 5, seed), seed=seed).summary
            rows.setdefault(spec.kind, []).append((sp["rmse"][0], rd["rmse"][0],
                                                   sp["r2"][0], rd["r2"][0]))
    print(f"{'model':<16} {'RMSE sp':>8} {'RMSE rnd':>9} {'R2 sp':>7} {'R2 rnd':>7} {'gap wins':>9}")
    for kind, vals in rows.items():
        v = np.array(vals)
        wins = int(np.sum(v[:, 0] > v[:, 1]))
        print(f"{kind:<16} {v[:, 0].mean():8.2f} {v[:, 1].mean():9.2f} {v[:, 2].mean():7.3f} "
              f"{v[:, 3].mean():7.3f} {wins:>5}/{len(v)}")


if __name__ == "__main__":
    main()
