"""Small-time curves of E m, E[1/m] and E|X - g| at u0 for several power profiles.

Writes one CSV of curves and one JSON of fitted slopes per alpha, plus a
summary table comparing the slopes with 1/(2a+1) and a/(2a+1).

    python3 scripts/exponent_curves.py --alphas 1 1.5 2 --replicates 10000
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

from coalflow import verify
from coalflow.engine import geometric_grid
from coalflow.estimators import Curve, EstimatorAccumulator, fit_exponent, write_curves_csv
from coalflow.profiles import TabulatedProfile


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alphas", type=float, nargs="+", default=[1.0, 2.0])
    ap.add_argument("--u0", type=float, default=0.5)
    ap.add_argument("--C", type=float, default=1.0, help="profile amplitude")
    ap.add_argument("--level", type=int, default=10)
    ap.add_argument("--dt", type=float, default=1e-6)
    ap.add_argument("--t-end", type=float, default=1e-2)
    ap.add_argument("--lam", type=float, default=0.7)
    ap.add_argument("--n-times", type=int, default=13)
    ap.add_argument("--replicates", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/exponents")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    times = geometric_grid(args.t_end, args.lam, args.n_times)
    summary = []
    for a in args.alphas:
        prof = (TabulatedProfile.uniform(C=args.C) if a == 1.0
                else TabulatedProfile.power(a, args.u0, C=args.C))
        g, res = verify.exponent_run(prof, args.u0, times, args.replicates, args.seed, args.dt,
                                     args.level)
        m = res.mass[:, :, 0]
        samples = {"mass_at": m, "inverse_mass_at": 1.0 / m,
                   "abs_displacement": np.abs(res.position[:, :, 0] - res.initial_positions[0])}
        targets = {"mass_at": 1 / (2 * a + 1), "inverse_mass_at": -1 / (2 * a + 1),
                   "abs_displacement": a / (2 * a + 1)}
        curves = [Curve.from_accumulator(k, times, EstimatorAccumulator.from_samples(v))
                  for k, v in samples.items()]
        write_curves_csv(curves, out / f"curves_alpha{a:g}.csv")
        fits = {}
        T = np.asarray(times)
        keep = T >= verify.FIT_MIN_STEPS * args.dt
        for c in curves:
            f = fit_exponent(T[keep], c.mean[keep], c.se[keep], target=targets[c.observable])
            fits[c.observable] = f.to_dict()
            summary.append((a, c.observable, f.slope, f.stderr, targets[c.observable]))
        (out / f"fits_alpha{a:g}.json").write_text(json.dumps(fits, indent=2) + "\n")
    print(f"{'alpha':>6} {'observable':>18} {'slope':>8} {'stderr':>7} {'target':>8}")
    for a, name, s, se, tgt in summary:
        print(f"{a:6g} {name:>18} {s:8.4f} {se:7.4f} {tgt:8.4f}")


if __name__ == "__main__":
    main()
