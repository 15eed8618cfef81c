"""Run verification suites and save JSON and text reports.

    python3 scripts/run_suite.py --suite all --quick --out results/suite
"""

from __future__ import annotations

import argparse
from pathlib import Path

from coalflow import verify


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--suite", default="all", help=f"all or one of {', '.join(verify.SUITES)}")
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/suite")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = verify.run_suite(args.suite, args.quick, args.seed,
                               progress=lambda r: print(f"{r.check:24s} {r.verdict:12s} "
                                                        f"{r.wall_time:7.1f}s", flush=True))
    (out / "report.json").write_text(verify.reports_to_json(reports) + "\n")
    (out / "report.txt").write_text(verify.format_reports(reports) + "\n")
    print(verify.format_reports(reports))


if __name__ == "__main__":
    main()
