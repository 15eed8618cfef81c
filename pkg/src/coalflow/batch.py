"""Many replicates at once, reduced to per-replicate probe observables.

Replicates are processed in fixed chunks of consecutive replicate ids; each
replicate draws only from its own keyed stream, so the outputs do not depend
on the chunk size, the thread count or the scheduling order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numba
import numpy as np
from numpy.typing import NDArray

from .engine import OK, STATUS_MESSAGES, SimulationError, StepperConfig, _run_batch
from .profiles import StepProfile, canonicalize


@dataclass(frozen=True)
class Probes:
    """What to record at every save time.

    ``coords`` are mass coordinates whose particles are tracked (position and
    cluster mass); ``betas`` select block sums ``∫ du / m**beta``;
    ``dev_power > 0`` records ``∫ |X - g|**dev_power du``; ``h_weights`` (one
    value per initial piece) records ``(X - g, h)`` and ``||pr_X h||**2``.
    """

    coords: tuple[float, ...] = ()
    betas: tuple[float, ...] = ()
    dev_power: float = 0.0
    h_weights: tuple[float, ...] | None = None


@dataclass
class BatchResult:
    """Per-replicate observables, shape ``(replicates, save_times, ...)``."""

    replicate_ids: NDArray[np.int64]
    save_times: NDArray[np.float64]
    position: NDArray[np.float64]
    mass: NDArray[np.float64]
    count: NDArray[np.int64]
    inv_mass_sum: NDArray[np.float64]
    com: NDArray[np.float64]
    deviation: NDArray[np.float64]
    h_inner: NDArray[np.float64]
    proj_h_sq: NDArray[np.float64]
    initial_positions: NDArray[np.float64] = field(default_factory=lambda: np.empty(0))
    steps: NDArray[np.int64] = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __len__(self) -> int:
        return self.replicate_ids.size


def piece_indices(profile: StepProfile, coords: Sequence[float]) -> NDArray[np.int64]:
    b = profile.total_mass
    for u in coords:
        if not 0 < u < b:
            raise ValueError(f"probe coordinate {u} outside (0, {b})")
    idx = np.searchsorted(profile.breakpoints, np.asarray(coords, dtype=np.float64), side="right") - 1
    return idx.astype(np.int64)


def set_threads(threads: int | None) -> int:
    n = numba.config.NUMBA_NUM_THREADS if threads is None else max(1, min(threads, numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def run_chunk(profile: StepProfile, config: StepperConfig, probes: Probes, seed: int,
              replicate_ids: NDArray[np.int64], check: bool = False) -> BatchResult:
    if not profile.is_canonical:
        profile = canonicalize(profile)
    d = profile.n_pieces
    R = replicate_ids.size
    S = len(config.save_times)
    pidx = piece_indices(profile, probes.coords)
    P = pidx.size
    betas = np.asarray(probes.betas, dtype=np.float64)
    if probes.h_weights is not None:
        hw = np.asarray(probes.h_weights, dtype=np.float64)
        if hw.size != d:
            raise ValueError(f"h_weights needs {d} entries, got {hw.size}")
    else:
        hw = np.empty(0)
    out = BatchResult(
        replicate_ids=np.asarray(replicate_ids, dtype=np.int64),
        save_times=np.asarray(config.save_times, dtype=np.float64),
        position=np.zeros((R, S, P)), mass=np.zeros((R, S, P)),
        count=np.zeros((R, S), dtype=np.int64), inv_mass_sum=np.zeros((R, S, betas.size)),
        com=np.zeros((R, S)), deviation=np.zeros((R, S)), h_inner=np.zeros((R, S)),
        proj_h_sq=np.zeros((R, S)), initial_positions=np.asarray(profile.values)[pidx],
        steps=np.zeros(R, dtype=np.int64))
    status = np.zeros(R, dtype=np.int64)
    _run_batch(np.ascontiguousarray(profile.values, dtype=np.float64),
               np.ascontiguousarray(profile.masses, dtype=np.float64),
               out.save_times, config.dt, config.dt_min, config.adaptive, config.adaptive_c,
               config.bridge_correction, config.fast_forward, config.drift, np.uint64(seed),
               out.replicate_ids, check, pidx, betas, float(probes.dev_power), hw,
               out.position, out.mass, out.count, out.inv_mass_sum, out.com, out.deviation,
               out.h_inner, out.proj_h_sq, status, out.steps)
    bad = np.flatnonzero(status != OK)
    if bad.size:
        r = int(out.replicate_ids[bad[0]])
        raise SimulationError(f"replicate {r}: {STATUS_MESSAGES[int(status[bad[0]])]}")
    return out


def iter_chunks(profile: StepProfile, config: StepperConfig, probes: Probes, seed: int,
                replicates: int, chunk: int = 2048, first_replicate: int = 0,
                check: bool = False) -> Iterator[BatchResult]:
    if replicates < 1:
        raise ValueError("need at least one replicate")
    for start in range(first_replicate, first_replicate + replicates, chunk):
        stop = min(start + chunk, first_replicate + replicates)
        yield run_chunk(profile, config, probes, seed, np.arange(start, stop, dtype=np.int64), check)


def run_batch(profile: StepProfile, config: StepperConfig, probes: Probes, seed: int,
              replicates: int, chunk: int = 2048, check: bool = False,
              first_replicate: int = 0) -> BatchResult:
    """All replicates in memory; use :func:`iter_chunks` for streaming."""
    parts = list(iter_chunks(profile, config, probes, seed, replicates, chunk,
                             first_replicate=first_replicate, check=check))
    if len(parts) == 1:
        return parts[0]
    first = parts[0]
    cat = {name: np.concatenate([getattr(p, name) for p in parts])
           for name in ("replicate_ids", "position", "mass", "count", "inv_mass_sum", "com",
                        "deviation", "h_inner", "proj_h_sq", "steps")}
    return BatchResult(save_times=first.save_times, initial_positions=first.initial_positions, **cat)


def default_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
