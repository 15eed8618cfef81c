"""Dyadic-level stabilization table for a tabulated profile.

    python3 scripts/convergence.py --levels 6 7 8 9 10 --t 0.01 --replicates 10000
"""

from __future__ import annotations

import argparse
from pathlib import Path

from coalflow import verify
from coalflow.profiles import TabulatedProfile

PROFILES = {
    "quadratic": lambda u: u * u,
    "identity": lambda u: u,
    "cubic": lambda u: (u - 0.5) ** 3,
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--profile", choices=sorted(PROFILES), default="quadratic")
    ap.add_argument("--levels", type=int, nargs="+", default=[6, 7, 8, 9, 10])
    ap.add_argument("--t", type=float, nargs="+", default=[0.0, 0.01])
    ap.add_argument("--u0", type=float, default=0.5)
    ap.add_argument("--dt", type=float, default=1e-5)
    ap.add_argument("--replicates", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/convergence")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    g = TabulatedProfile.from_function(PROFILES[args.profile])
    for t in args.t:
        rep = verify.check_dyadic_convergence(g, args.levels, t, args.u0, args.replicates,
                                              args.seed, args.dt)
        (out / f"{args.profile}_t{t:g}.json").write_text(rep.to_json() + "\n")
        print(f"t = {t:g}: {rep.verdict}")
        for row in rep.rows:
            est = " ".join(f"{v:.5g}" for v in row["estimates"])
            diff = " ".join(f"{v:.2g}" for v in row["differences"])
            print(f"  {row['statistic']:9s} estimates {est}")
            print(f"  {'':9s} differences {diff}")


if __name__ == "__main__":
    main()
