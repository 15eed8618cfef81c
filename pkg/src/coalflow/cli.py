"""Command-line front end: simulate, estimate, verify, converge.

Every command writes a ``manifest.json`` next to its outputs.  The manifest's
``config`` block is a complete run configuration: passing the manifest back
with ``--config`` reproduces the outputs byte for byte.  Exit codes are 0 on
success, 1 when a verification fails and 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .batch import Probes, default_threads, iter_chunks, set_threads
from .engine import SimulationError, StepperConfig, geometric_grid, simulate, uniform_grid
from .estimators import (DEFAULT_BATCHES, OBSERVABLES, ConfigError, Curve, accumulate,
                         batch_accumulate, batch_means_se, fit_exponent,
                         write_curves_csv, write_fit_json)
from .profiles import (Profile, ProfileError, TabulatedProfile, load_profile, profile_from_dict,
                       profile_to_dict, to_step_profile)
from .rng import StreamKey
from . import verify

log = logging.getLogger("coalflow")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

TRAJECTORY_COLUMNS = ("replicate", "t", "cluster_idx", "position", "mass", "index_lo", "index_hi")
NAMED_PROFILES = ("uniform", "power", "quadratic")
OBSERVABLE_ALIASES = {"mass": "mass_at", "inverse_mass": "inverse_mass_at",
                      "displacement": "abs_displacement", "count": "cluster_count"}


@dataclass
class RunConfig:
    """Everything a command needs; ``threads`` and ``out`` never change results."""

    command: str = "simulate"
    profile: str | dict = "uniform"
    alpha: float = 1.0
    center: float = 0.5
    scale: float = 1.0
    level: int | None = 8
    dt: float = 1e-5
    bridge: bool = True
    grid: str = "uniform"
    t_end: float = 0.1
    n_times: int = 10
    lam: float = 0.7
    observable: str = "mass_at"
    u0: float | None = 0.5
    beta: float = 1.0
    fit: bool = False
    batches: int = 0
    t_range: list[float] | None = None
    suite: str = "all"
    quick: bool = False
    inject_drift: float = 0.0
    levels: list[int] = field(default_factory=list)
    replicates: int = 1
    seed: int = 0
    threads: int | None = None
    out: str = "out"

    def hashed(self) -> dict:
        doc = asdict(self)
        doc.pop("threads")
        doc.pop("out")
        return doc

    def config_hash(self) -> str:
        blob = json.dumps(self.hashed(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# --- config resolution ----------------------------------------------------------------

def resolve_profile(cfg: RunConfig) -> Profile:
    spec = cfg.profile
    if isinstance(spec, dict):
        return profile_from_dict(spec)
    if spec == "uniform":
        return TabulatedProfile.uniform(C=cfg.scale)
    if spec == "power":
        return TabulatedProfile.power(cfg.alpha, cfg.center, C=cfg.scale)
    if spec == "quadratic":
        return TabulatedProfile.from_function(lambda u: u * u)
    if spec.lstrip().startswith("{"):
        return profile_from_dict(json.loads(spec))
    path = Path(spec)
    if not path.is_file():
        raise ConfigError(f"profile file not found: {path} (or use one of {', '.join(NAMED_PROFILES)})")
    return load_profile(path)


def time_grid(cfg: RunConfig, include_zero: bool) -> tuple[float, ...]:
    if cfg.n_times < 1:
        raise ConfigError("n_times must be at least 1")
    if cfg.grid == "uniform":
        return uniform_grid(cfg.t_end, cfg.n_times, include_zero)
    if cfg.grid == "geometric":
        return geometric_grid(cfg.t_end, cfg.lam, cfg.n_times, include_zero)
    raise ConfigError(f"grid must be 'uniform' or 'geometric', got {cfg.grid!r}")


def stepper(cfg: RunConfig, times) -> StepperConfig:
    try:
        return StepperConfig(dt=cfg.dt, save_times=times, bridge_correction=cfg.bridge)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(cfg: RunConfig, out: Path, outputs: Sequence[str], extra: dict | None = None) -> Path:
    doc = {"version": __version__, "command": cfg.command, "seed": cfg.seed,
           "config_hash": cfg.config_hash(), "config": cfg.hashed(),
           "outputs": {name: _sha256(out / name) for name in outputs}}
    if isinstance(cfg.profile, str) and Path(cfg.profile).is_file():
        doc["profile"] = profile_to_dict(resolve_profile(cfg))
    if extra:
        doc.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


# --- commands ---------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig) -> int:
    if cfg.replicates < 1:
        raise ConfigError("replicates must be at least 1")
    profile = to_step_profile(resolve_profile(cfg), cfg.level)
    config = stepper(cfg, time_grid(cfg, include_zero=True))
    out = _out_dir(cfg)
    name = "trajectory.csv"
    with open(out / name, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for rep in range(cfg.replicates):
            traj = simulate(profile, config, StreamKey(cfg.seed, rep, 0))
            for s, t in enumerate(traj.save_times):
                for c in range(int(traj.counts[s])):
                    w.writerow([rep, repr(float(t)), c, repr(float(traj.positions[s, c])),
                                repr(float(traj.masses[s, c])), int(traj.index_lo[s, c]),
                                int(traj.index_hi[s, c])])
    write_manifest(cfg, out, [name], {"pieces": profile.n_pieces})
    print(f"wrote {out / name}")
    return EXIT_OK


def cmd_estimate(cfg: RunConfig) -> int:
    obs = OBSERVABLE_ALIASES.get(cfg.observable, cfg.observable)
    if obs not in OBSERVABLES:
        raise ConfigError(f"unknown observable {cfg.observable!r}; choose from {', '.join(OBSERVABLES)}")
    if cfg.replicates < 2:
        raise ConfigError("estimate needs at least two replicates")
    profile = to_step_profile(resolve_profile(cfg), cfg.level)
    times = time_grid(cfg, include_zero=False)
    config = stepper(cfg, times)
    needs_u0 = obs in ("mass_at", "inverse_mass_at", "abs_displacement", "displacement")
    if needs_u0 and cfg.u0 is None:
        raise ConfigError(f"observable {obs!r} needs --u0")
    probes = Probes(coords=(cfg.u0,) if needs_u0 else (), betas=(cfg.beta,))
    try:
        chunks = iter_chunks(profile, config, probes, cfg.seed, cfg.replicates)
        if cfg.batches:
            acc, means = batch_accumulate(chunks, obs, cfg.replicates, cfg.batches)
            curve = Curve.from_accumulator(obs, config.save_times, acc)
            curve.se = batch_means_se(means)
        else:
            accs = accumulate(chunks, [obs])
            curve = Curve.from_accumulator(obs, config.save_times, accs[obs])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _out_dir(cfg)
    outputs = ["curves.csv"]
    write_curves_csv([curve], out / "curves.csv")
    if cfg.fit:
        T = curve.times
        lo = max(verify.FIT_MIN_STEPS * cfg.dt, cfg.t_range[0] if cfg.t_range else 0.0)
        hi = cfg.t_range[1] if cfg.t_range else float(T.max())
        fit = fit_exponent(T, np.abs(curve.mean), curve.se, (lo, hi), curve.n)
        write_fit_json(fit, out / "fit.json")
        outputs.append("fit.json")
        print(f"slope {fit.slope:.4f} ± {fit.stderr:.4f} over [{fit.t_min:.3g}, {fit.t_max:.3g}]")
    write_manifest(cfg, out, outputs)
    print(f"wrote {out / 'curves.csv'}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    out = _out_dir(cfg)

    def progress(rep):
        print(f"{rep.check:24s} {rep.verdict:12s} {rep.wall_time:8.1f}s", flush=True)

    reports = verify.run_suite(cfg.suite, cfg.quick, cfg.seed, progress, drift=cfg.inject_drift)
    (out / "report.json").write_text(verify.reports_to_json(reports) + "\n")
    (out / "report.txt").write_text(verify.format_reports(reports) + "\n")
    write_manifest(cfg, out, ["report.json"])
    print(verify.format_reports(reports))
    return EXIT_FAIL if any(r.verdict == verify.FAIL for r in reports) else EXIT_OK


def cmd_converge(cfg: RunConfig) -> int:
    if len(cfg.levels) < 3:
        raise ConfigError("converge needs at least three levels")
    profile = resolve_profile(cfg)
    t = cfg.t_end
    rep = verify.check_dyadic_convergence(profile, cfg.levels, t, cfg.u0 if cfg.u0 is not None else 0.5,
                                          max(cfg.replicates, 2), cfg.seed, cfg.dt)
    out = _out_dir(cfg)
    (out / "convergence.json").write_text(rep.to_json() + "\n")
    lines = []
    for row in rep.rows:
        lines.append(f"{row['statistic']}:")
        for n, est, se in zip(row["levels"], row["estimates"], row["se"]):
            lines.append(f"  level {n:3d}  {est: .6g} ± {se:.2g}")
        lines.append("  differences " + " ".join(f"{d:.3g}" for d in row["differences"]))
    lines.append(f"verdict: {rep.verdict}")
    text = "\n".join(lines)
    (out / "convergence.txt").write_text(text + "\n")
    write_manifest(cfg, out, ["convergence.json"])
    print(text)
    return EXIT_FAIL if rep.verdict == verify.FAIL else EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "verify": cmd_verify,
            "converge": cmd_converge}


# --- argument parsing -----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global")
    g.add_argument("--seed", type=int, help="master seed (64-bit)")
    g.add_argument("--replicates", type=int, help="number of replicates")
    g.add_argument("--threads", type=int, help="worker threads (default: available cores)")
    g.add_argument("--out", help="output directory")
    g.add_argument("--config", help="JSON run configuration or a previous manifest")

    model = argparse.ArgumentParser(add_help=False)
    m = model.add_argument_group("model")
    m.add_argument("--profile", help=f"{', '.join(NAMED_PROFILES)}, inline JSON, or a profile JSON file")
    m.add_argument("--alpha", type=float, help="power-profile exponent")
    m.add_argument("--center", type=float, help="power-profile centre u0")
    m.add_argument("--scale", type=float, help="profile amplitude C")
    m.add_argument("--levels", type=int, nargs="+", help="dyadic level(s)")
    m.add_argument("--dt", type=float, help="time step")
    m.add_argument("--bridge", type=_bool, help="Brownian-bridge merge correction (default on)")
    m.add_argument("--grid", choices=("uniform", "geometric"), help="save-time grid")
    m.add_argument("--t-end", dest="t_end", type=float, help="last save time")
    m.add_argument("--n-times", dest="n_times", type=int, help="number of save times")
    m.add_argument("--lam", type=float, help="geometric grid ratio")

    parser = _Parser(prog="coalflow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"coalflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common, model], help="write trajectories as CSV")
    est = sub.add_parser("estimate", parents=[common, model], help="mean curve and exponent fit")
    est.add_argument("--observable", help=f"one of {', '.join(OBSERVABLES)} (aliases: "
                     f"{', '.join(OBSERVABLE_ALIASES)})")
    est.add_argument("--u0", type=float, help="mass coordinate of the tracked particle")
    est.add_argument("--beta", type=float, help="exponent for inverse_mass_integral")
    est.add_argument("--fit", action="store_const", const=True, help="fit a power law")
    est.add_argument("--t-range", dest="t_range", type=float, nargs=2, help="fit range")
    est.add_argument("--batches", type=int, help="standard errors from this many batch means "
                     f"(0 = pooled variance; {DEFAULT_BATCHES} is a good choice for 1/m)")
    ver = sub.add_parser("verify", parents=[common], help="run verification suites")
    ver.add_argument("--suite", help=f"all or one of {', '.join(verify.SUITES)}")
    ver.add_argument("--quick", action="store_const", const=True, help="reduced replicate counts")
    ver.add_argument("--inject-drift", dest="inject_drift", type=float, help=argparse.SUPPRESS)
    con = sub.add_parser("converge", parents=[common, model], help="dyadic-level stabilization")
    con.add_argument("--u0", type=float, help="mass coordinate of the tracked particle")
    return parser


def load_config(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if "config" in doc and isinstance(doc["config"], dict):
        doc = doc["config"]
    known = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys in {p}: {', '.join(sorted(unknown))}")
    return doc


def make_config(args: argparse.Namespace) -> RunConfig:
    base = load_config(args.config) if args.config else {}
    doc = dict(base)
    doc["command"] = args.command
    for f in fields(RunConfig):
        if f.name in ("command", "level", "levels"):
            continue
        v = getattr(args, f.name, None)
        if v is not None:
            doc[f.name] = list(v) if isinstance(v, (list, tuple)) else v
    levels = getattr(args, "levels", None)
    if levels is not None:
        doc["levels"] = list(levels)
        doc["level"] = levels[0]
    if args.command == "converge" and "levels" not in doc:
        doc["levels"] = [6, 7, 8, 9, 10]
    if args.command != "simulate" and "replicates" not in doc:
        doc["replicates"] = 1000
    cfg = RunConfig(**doc)
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = make_config(args)
        set_threads(cfg.threads if cfg.threads is not None else default_threads())
        return COMMANDS[cfg.command](cfg)
    except (ConfigError, ProfileError, ValueError, TypeError) as exc:
        print(f"coalflow {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationError as exc:
        print(f"coalflow {args.command}: simulation failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
