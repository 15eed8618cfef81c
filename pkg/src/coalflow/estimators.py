"""Streaming Monte Carlo statistics over replicates.

Moments are kept as mergeable ``(n, mean, M2)`` cells (Chan et al. parallel
update), so replicate chunks can be reduced in any grouping.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import stats

from .batch import BatchResult, Probes, iter_chunks
from .engine import StepperConfig
from .profiles import StepProfile

log = logging.getLogger(__name__)

Z95 = 1.959963984540054
MIN_FIT_REPLICATES = 100


class ConfigError(ValueError):
    """Invalid estimator or check configuration."""


@dataclass
class EstimatorAccumulator:
    """Per-cell running count, mean and sum of squared deviations."""

    n: NDArray[np.float64]
    mean: NDArray[np.float64]
    m2: NDArray[np.float64]

    @classmethod
    def empty(cls, shape) -> EstimatorAccumulator:
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape))

    @classmethod
    def from_samples(cls, samples: ArrayLike, axis: int = 0) -> EstimatorAccumulator:
        x = np.asarray(samples, dtype=np.float64)
        n = np.full(np.delete(x.shape, axis), x.shape[axis], dtype=np.float64)
        if x.shape[axis] == 0:
            return cls.empty(n.shape)
        mean = x.mean(axis=axis)
        m2 = ((x - np.expand_dims(mean, axis)) ** 2).sum(axis=axis)
        return cls(n, mean, m2)

    @property
    def shape(self):
        return self.n.shape

    def update(self, samples: ArrayLike, axis: int = 0) -> EstimatorAccumulator:
        merged = merge_accumulators(self, EstimatorAccumulator.from_samples(samples, axis))
        self.n, self.mean, self.m2 = merged.n, merged.mean, merged.m2
        return self

    @property
    def variance(self) -> NDArray[np.float64]:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.n > 1, self.m2 / np.maximum(self.n - 1, 1), np.nan)

    @property
    def se(self) -> NDArray[np.float64]:
        """Standard error of the mean, ``sqrt(M2 / (n (n - 1)))``."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.sqrt(self.variance / self.n)

    def ci(self, z: float = Z95) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        return self.mean - z * self.se, self.mean + z * self.se


def merge_accumulators(a: EstimatorAccumulator, b: EstimatorAccumulator) -> EstimatorAccumulator:
    if a.shape != b.shape:
        raise ValueError(f"accumulator layouts differ: {a.shape} vs {b.shape}")
    n = a.n + b.n
    with np.errstate(invalid="ignore", divide="ignore"):
        delta = b.mean - a.mean
        wb = np.where(n > 0, b.n / np.where(n > 0, n, 1), 0.0)
        mean = a.mean + delta * wb
        m2 = a.m2 + b.m2 + delta**2 * a.n * wb
    return EstimatorAccumulator(n, mean, m2)


# --- curves -----------------------------------------------------------------

OBSERVABLES = ("mass_at", "inverse_mass_at", "abs_displacement", "displacement", "cluster_count",
               "inverse_mass_integral", "com")


@dataclass
class Curve:
    observable: str
    times: NDArray[np.float64]
    n: NDArray[np.float64]
    mean: NDArray[np.float64]
    se: NDArray[np.float64]
    variance: NDArray[np.float64] = field(default_factory=lambda: np.empty(0))

    @property
    def ci_lo(self):
        return self.mean - Z95 * self.se

    @property
    def ci_hi(self):
        return self.mean + Z95 * self.se

    @classmethod
    def from_accumulator(cls, observable: str, times, acc: EstimatorAccumulator) -> Curve:
        return cls(observable, np.asarray(times, dtype=np.float64), acc.n, acc.mean, acc.se,
                   acc.variance)


def observable_samples(result: BatchResult, observable: str, probe: int = 0,
                       beta_index: int = 0) -> NDArray[np.float64]:
    """Per-replicate values, shape ``(replicates, save_times)``."""
    if observable == "mass_at":
        return result.mass[:, :, probe]
    if observable == "inverse_mass_at":
        return 1.0 / result.mass[:, :, probe]
    if observable == "abs_displacement":
        return np.abs(result.position[:, :, probe] - result.initial_positions[probe])
    if observable == "displacement":
        return result.position[:, :, probe] - result.initial_positions[probe]
    if observable == "cluster_count":
        return result.count.astype(np.float64)
    if observable == "inverse_mass_integral":
        return result.inv_mass_sum[:, :, beta_index]
    if observable == "com":
        return result.com
    raise ConfigError(f"unknown observable {observable!r}; choose from {', '.join(OBSERVABLES)}")


def accumulate(chunks: Iterable[BatchResult], observables: Sequence[str], probe: int = 0,
               beta_index: int = 0) -> dict[str, EstimatorAccumulator]:
    accs: dict[str, EstimatorAccumulator] = {}
    for chunk in chunks:
        for obs in observables:
            part = EstimatorAccumulator.from_samples(observable_samples(chunk, obs, probe, beta_index))
            accs[obs] = part if obs not in accs else merge_accumulators(accs[obs], part)
    return accs


DEFAULT_BATCHES = 30


def batch_means_se(batch_means: ArrayLike, axis: int = 0) -> NDArray[np.float64]:
    """Standard error of the grand mean from equal-size batch means."""
    b = np.asarray(batch_means, dtype=np.float64)
    k = b.shape[axis]
    if k < 2:
        raise ConfigError("need at least two batches")
    return b.std(axis=axis, ddof=1) / math.sqrt(k)


def batch_accumulate(chunks: Iterable[BatchResult], observable: str, replicates: int,
                     batches: int = DEFAULT_BATCHES, probe: int = 0, beta_index: int = 0,
                     first_replicate: int = 0) -> tuple[EstimatorAccumulator, NDArray[np.float64]]:
    """Pooled accumulator plus per-batch means (shape ``(batches, times)``).

    Replicate ``r`` goes to batch ``(r - first) * batches // replicates``, so the
    grouping depends only on replicate ids, never on chunking or threads.
    """
    if not 2 <= batches <= replicates:
        raise ConfigError(f"batches must be in [2, replicates], got {batches}")
    cells: list[EstimatorAccumulator | None] = [None] * batches
    for chunk in chunks:
        x = observable_samples(chunk, observable, probe, beta_index)
        ids = (chunk.replicate_ids - first_replicate) * batches // replicates
        for b in np.unique(ids):
            part = EstimatorAccumulator.from_samples(x[ids == b])
            cells[b] = part if cells[b] is None else merge_accumulators(cells[b], part)
    if any(c is None for c in cells):
        raise ConfigError("some batches received no replicates")
    pooled = cells[0]
    for c in cells[1:]:
        pooled = merge_accumulators(pooled, c)
    return pooled, np.stack([c.mean for c in cells])


def estimate_curve(observable: str, profile: StepProfile, times: Sequence[float], replicates: int,
                   seed: int, dt: float, u0: float | None = None, beta: float = 1.0,
                   bridge_correction: bool = True, chunk: int = 2048,
                   batches: int = 0) -> Curve:
    """Mean curve of one observable with 95% normal CIs.

    With ``batches > 0`` the standard error comes from that many batch means
    instead of the pooled sample variance; this is the safer choice for skewed
    observables such as ``inverse_mass_at`` at small t.
    """
    if observable not in OBSERVABLES:
        raise ConfigError(f"unknown observable {observable!r}; choose from {', '.join(OBSERVABLES)}")
    if replicates < 2:
        raise ConfigError("need at least two replicates")
    needs_u0 = observable in ("mass_at", "inverse_mass_at", "abs_displacement", "displacement")
    if needs_u0 and u0 is None:
        raise ConfigError(f"observable {observable!r} needs u0")
    probes = Probes(coords=(u0,) if needs_u0 else (), betas=(beta,))
    config = StepperConfig(dt=dt, save_times=tuple(times), bridge_correction=bridge_correction)
    chunks = iter_chunks(profile, config, probes, seed, replicates, chunk)
    if batches:
        acc, means = batch_accumulate(chunks, observable, replicates, batches)
        curve = Curve.from_accumulator(observable, config.save_times, acc)
        curve.se = batch_means_se(means)
        return curve
    accs = accumulate(chunks, [observable])
    return Curve.from_accumulator(observable, config.save_times, accs[observable])


# --- proportions ------------------------------------------------------------

def clopper_pearson_upper(k: ArrayLike, n: ArrayLike, level: float = 0.99) -> NDArray[np.float64]:
    """One-sided exact upper confidence bound for a binomial proportion."""
    k = np.asarray(k, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        ub = stats.beta.ppf(level, k + 1, n - k)
    return np.where(k >= n, 1.0, ub)


def clopper_pearson_interval(k, n, level: float = 0.95):
    """Two-sided exact interval."""
    k = np.asarray(k, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    a = 1.0 - level
    with np.errstate(invalid="ignore"):
        lo = np.where(k > 0, stats.beta.ppf(a / 2, k, n - k + 1), 0.0)
        hi = np.where(k < n, stats.beta.ppf(1 - a / 2, k + 1, n - k), 1.0)
    return lo, hi


@dataclass
class MassCDF:
    r: NDArray[np.float64]
    count: NDArray[np.int64]
    n: int
    p_hat: NDArray[np.float64]
    upper: NDArray[np.float64]
    level: float


def mass_cdf_from_samples(masses: ArrayLike, r_grid: Sequence[float], level: float = 0.99) -> MassCDF:
    m = np.asarray(masses, dtype=np.float64)
    r = np.asarray(r_grid, dtype=np.float64)
    count = (m[:, None] < r[None, :]).sum(axis=0)
    return MassCDF(r, count, m.size, count / m.size, clopper_pearson_upper(count, m.size, level), level)


def empirical_mass_cdf(u0: float, t: float, r_grid: Sequence[float], profile: StepProfile,
                       replicates: int, seed: int, dt: float, side: str = "right",
                       level: float = 0.99, chunk: int = 2048) -> MassCDF:
    """``P{m(u0, t) < r}`` on ``r_grid`` with a one-sided Clopper-Pearson bound."""
    b = profile.total_mass
    limit = b - u0 if side == "right" else u0
    if any(not 0 < r < limit for r in r_grid):
        raise ConfigError(f"r values must lie in (0, {limit}) for the {side} variant")
    config = StepperConfig(dt=dt, save_times=(t,))
    masses = np.concatenate([c.mass[:, 0, 0] for c in
                             iter_chunks(profile, config, Probes(coords=(u0,)), seed, replicates, chunk)])
    return mass_cdf_from_samples(masses, r_grid, level)


# --- quadratic variation ----------------------------------------------------

def qv_integral(times: ArrayLike, values: ArrayLike, t: float | None = None,
                exponent: float | None = None) -> float:
    """``∫_0^t y(s) ds`` for a curve sampled at ``times`` (which must not include 0
    unless the integrand is finite there).

    Trapezoid between samples; the first panel ``[0, t_1]`` assumes
    ``y ~ s**-exponent`` and integrates it in closed form.  Without an exponent
    the local slope of the first two samples is used; with fewer than two
    samples the endpoint rule ``y(t_1) * t_1`` is the fallback.
    """
    s = np.asarray(times, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if t is None:
        t = float(s[-1])
    keep = s <= t * (1 + 1e-12)
    s, y = s[keep], y[keep]
    if s.size == 0:
        raise ValueError("no samples inside [0, t]")
    if s[0] == 0.0:
        total = float(np.trapezoid(y, s))
        return total
    if exponent is None:
        if s.size >= 2 and y[0] > 0 and y[1] > 0:
            exponent = -math.log(y[1] / y[0]) / math.log(s[1] / s[0])
        else:
            warnings.warn("too few samples near 0; using the endpoint rule for the first panel")
            exponent = 0.0
    if exponent >= 1:
        raise ValueError("integrand not integrable at 0")
    first = y[0] * s[0] / (1.0 - exponent)
    return first + float(np.trapezoid(y, s))


def qv_curve(times: ArrayLike, values: ArrayLike, exponent: float | None = None) -> NDArray[np.float64]:
    """Running integral ``∫_0^{t_j} y`` at every sample time."""
    s = np.asarray(times, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if exponent is None and s.size >= 2 and s[0] > 0 and y[0] > 0 and y[1] > 0:
        exponent = -math.log(y[1] / y[0]) / math.log(s[1] / s[0])
    return np.array([qv_integral(s[: j + 1], values[: j + 1], exponent=exponent)
                     if s[0] > 0 or j > 0 else 0.0 for j in range(s.size)])


# --- exponent fits ----------------------------------------------------------

@dataclass
class ExponentFit:
    slope: float
    intercept: float
    stderr: float
    r2: float
    t_min: float
    t_max: float
    weights: list[float]
    n_points: int
    target: float | None = None

    def to_dict(self) -> dict:
        return {"slope": self.slope, "stderr": self.stderr, "intercept": self.intercept,
                "r2": self.r2, "target": self.target, "range": [self.t_min, self.t_max],
                "n_points": self.n_points}

    def contains(self, target: float, tol: float) -> bool:
        return abs(self.slope - target) <= tol


def fit_exponent(t: ArrayLike, y: ArrayLike, se: ArrayLike | None = None,
                 t_range: tuple[float, float] | None = None, n: ArrayLike | None = None,
                 target: float | None = None) -> ExponentFit:
    """Weighted least squares of ``ln y`` on ``ln t`` with weights ``(y / se)**2``.

    Points with ``y <= 0`` are dropped with a warning; points backed by fewer
    than 100 replicates (when ``n`` is given) are dropped.
    """
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    se = np.zeros_like(y) if se is None else np.asarray(se, dtype=np.float64)
    keep = np.ones(t.size, dtype=bool)
    if t_range is not None:
        keep &= (t >= t_range[0] * (1 - 1e-12)) & (t <= t_range[1] * (1 + 1e-12))
    if n is not None:
        keep &= np.asarray(n) >= MIN_FIT_REPLICATES
    nonpos = keep & (y <= 0)
    if nonpos.any():
        warnings.warn(f"dropping {int(nonpos.sum())} non-positive points from the exponent fit")
        keep &= y > 0
    t, y, se = t[keep], y[keep], se[keep]
    if t.size < 5:
        raise ConfigError(f"exponent fit needs at least 5 points, got {t.size}")
    rel = se / y
    if np.all(rel > 0):
        w = 1.0 / rel**2
    else:
        w = np.ones_like(y)
    X = np.log(t)
    Y = np.log(y)
    W = w.sum()
    xm = (w * X).sum() / W
    ym = (w * Y).sum() / W
    sxx = (w * (X - xm) ** 2).sum()
    slope = float((w * (X - xm) * (Y - ym)).sum() / sxx)
    intercept = float(ym - slope * xm)
    resid = Y - intercept - slope * X
    dof = t.size - 2
    if np.all(rel > 0):
        # weights are inverse variances: slope variance 1/Sxx, inflated by the
        # reduced chi-square when the power law does not fit within the noise
        chi2 = float((w * resid**2).sum() / dof)
        stderr = math.sqrt(max(chi2, 1.0) / sxx)
    else:
        stderr = math.sqrt(float((resid**2).sum() / dof) / float(((X - X.mean()) ** 2).sum()))
    ss_tot = float((w * (Y - ym) ** 2).sum())
    r2 = 1.0 - float((w * resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return ExponentFit(slope, intercept, stderr, r2, float(t.min()), float(t.max()),
                       w.tolist(), int(t.size), target)


# --- export -------------------------------------------------------------------

CURVE_COLUMNS = ("observable", "t", "n", "mean", "se", "ci_lo", "ci_hi")


def write_curves_csv(curves: Sequence[Curve], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for c in curves:
            for j in range(c.times.size):
                w.writerow([c.observable, repr(float(c.times[j])), int(c.n[j]), repr(float(c.mean[j])),
                            repr(float(c.se[j])), repr(float(c.ci_lo[j])), repr(float(c.ci_hi[j]))])


def write_fit_json(fit: ExponentFit, path: str | Path) -> None:
    Path(path).write_text(json.dumps(fit.to_dict(), indent=2) + "\n")
