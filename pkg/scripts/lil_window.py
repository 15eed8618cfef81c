"""Pathwise window surrogate for the small-time mass limits, with its controls.

Reports the fraction of paths whose normalized mass trends the right way
over t_n = lam**n, for the correct normalization and for exponents 0 and 1.

    python3 scripts/lil_window.py --replicates 1000
"""

from __future__ import annotations

import argparse

from coalflow import verify
from coalflow.profiles import TabulatedProfile


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--n-min", type=int, default=13)
    ap.add_argument("--n-max", type=int, default=32)
    ap.add_argument("--eps", type=float, default=0.5)
    ap.add_argument("--level", type=int, default=12)
    ap.add_argument("--dt", type=float, default=2.5e-7)
    ap.add_argument("--replicates", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    prof = (TabulatedProfile.uniform() if args.alpha == 1.0
            else TabulatedProfile.power(args.alpha, 0.5))
    for label, kind, expo in (("upper", "upper", None), ("lower", "lower", None),
                              ("upper, exponent 0", "upper", 0.0),
                              ("upper, exponent 1", "upper", 1.0)):
        rep = verify.check_lil_pathwise(prof, 0.5, 0.7, args.n_min, args.n_max, args.eps,
                                        args.replicates, args.seed, args.dt, args.level,
                                        args.alpha, kind, expo)
        frac = rep.observed.get("fraction", float("nan"))
        print(f"{label:20s} fraction={frac:.3f}  verdict={rep.verdict}")


if __name__ == "__main__":
    main()
