"""Finite coalescing system: Gaussian motion with variance rate 1/mass.

Clusters move independently, merge when their order is violated after a step
(pool-adjacent-violators with mass-weighted merge positions), and optionally
merge with the Brownian-bridge crossing probability for pairs that stayed
ordered.  All randomness is keyed by ``(seed, replicate)`` and the step index,
so a replicate is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numba import njit, prange
from numpy.typing import ArrayLike, NDArray

from .profiles import StepProfile, canonicalize
from .rng import (PURPOSE_BRIDGE, PURPOSE_INCREMENT, GaussianStream, StreamKey,
                  fill_normals, uniform_block)

_EPS = np.finfo(np.float64).eps
MASS_TOL = 1e-9
# exp(-40) ~ 4e-18: crossing probabilities below this are treated as zero
_BRIDGE_CUTOFF = 40.0

OK = 0
ERR_ORDER = 1
ERR_MASS = 2
ERR_BLOCKS = 3
ERR_COM = 4
ERR_COUNT = 5

STATUS_MESSAGES = {
    OK: "ok",
    ERR_ORDER: "positions not strictly increasing",
    ERR_MASS: "total mass drifted beyond tolerance",
    ERR_BLOCKS: "index blocks not contiguous",
    ERR_COM: "merge changed the mass-weighted position",
    ERR_COUNT: "cluster count increased",
}


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class StepperConfig:
    """Time stepping options.

    ``save_times`` must be strictly increasing in ``[0, T]``.  With
    ``adaptive`` on, each step is capped at ``c * gap_min**2 * mass_min / 4``
    but never below ``dt_min``.
    """

    dt: float
    save_times: tuple[float, ...] = (1.0,)
    bridge_correction: bool = True
    adaptive: bool = False
    adaptive_c: float = 1.0
    dt_min: float = 0.0
    fast_forward: bool = True
    scheme: str = "pava-bridge"
    # fault injection for negative controls; the flow itself has no drift
    drift: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "save_times", tuple(float(t) for t in self.save_times))
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        st = np.asarray(self.save_times)
        if st.size == 0 or st[0] < 0 or np.any(np.diff(st) <= 0):
            raise ValueError("save_times must be non-empty, non-negative and strictly increasing")
        if self.adaptive and not self.dt_min > 0:
            raise ValueError("adaptive stepping needs dt_min > 0")

    @property
    def horizon(self) -> float:
        return self.save_times[-1]


def uniform_grid(t_end: float, n: int, include_zero: bool = True) -> tuple[float, ...]:
    grid = np.linspace(0.0, t_end, n + 1)
    return tuple(grid if include_zero else grid[1:])


def geometric_grid(t_end: float, lam: float, n: int, include_zero: bool = False) -> tuple[float, ...]:
    """``t_j = t_end * lam**j`` for ``j = n-1 .. 0``, increasing."""
    if not 0 < lam < 1:
        raise ValueError("lam must be in (0, 1)")
    grid = t_end * lam ** np.arange(n - 1, -1, -1, dtype=np.float64)
    return tuple(([0.0] if include_zero else []) + grid.tolist())


# --- kernels -----------------------------------------------------------------

@njit(cache=True, inline="always")
def _merge(a, b, x, m, lo, hi, pl, check):
    """Merge cluster ``b`` into ``a``; returns False if the weighted sum moved."""
    ma = m[a]
    mb = m[b]
    mass = ma + mb
    before = ma * x[a] + mb * x[b]
    xn = before / mass
    ok = True
    if check:
        scale = abs(ma * x[a]) + abs(mb * x[b])
        if abs(mass * xn - before) > 8.0 * 2.220446049250313e-16 * scale + 1e-300:
            ok = False
    x[a] = xn
    m[a] = mass
    hi[a] = hi[b]
    pl[a] = pl[b]
    return ok


@njit(cache=True)
def _pava(x, m, lo, hi, pf, pl, n, check):
    """Pool adjacent violators in place; ties merge.  Returns (n, com_ok)."""
    j = 0
    ok = True
    for i in range(n):
        if j != i:
            x[j] = x[i]
            m[j] = m[i]
            lo[j] = lo[i]
            hi[j] = hi[i]
            pf[j] = pf[i]
            pl[j] = pl[i]
        while j > 0 and x[j - 1] >= x[j]:
            if not _merge(j - 1, j, x, m, lo, hi, pl, check):
                ok = False
            j -= 1
        j += 1
    return j, ok


@njit(cache=True)
def _bridge_merge(x, m, lo, hi, pf, pl, n, xold, mold, h, flag, k0, k1, step, check):
    """Merge ordered neighbours with the bridge crossing probability."""
    if n < 2:
        return n, True
    any_flag = False
    cached = -1
    u0 = u1 = u2 = u3 = 0.0
    for c in range(n - 1):
        flag[c] = False
        # isolated pairs only: both sides unchanged by this step's PAVA pass,
        # and no chaining through a cluster that already bridge-merged
        if pf[c] != pl[c] or pf[c + 1] != pl[c + 1]:
            continue
        if c > 0 and flag[c - 1]:
            continue
        g0 = xold[pf[c + 1]] - xold[pl[c]]
        g1 = x[c + 1] - x[c]
        s2 = 1.0 / mold[pl[c]] + 1.0 / mold[pf[c + 1]]
        expo = 2.0 * g0 * g1 / (s2 * h)
        if expo > _BRIDGE_CUTOFF:
            continue
        # uniform for pair c lives in lane c % 4 of block c // 4
        blk = c // 4
        if blk != cached:
            u0, u1, u2, u3 = uniform_block(k0, k1, blk, step, PURPOSE_BRIDGE)
            cached = blk
        lane = c % 4
        uc = u0 if lane == 0 else (u1 if lane == 1 else (u2 if lane == 2 else u3))
        if uc < math.exp(-expo):
            flag[c] = True
            any_flag = True
    if not any_flag:
        return n, True
    ok = True
    j = 0
    for i in range(n):
        if j != i:
            x[j] = x[i]
            m[j] = m[i]
            lo[j] = lo[i]
            hi[j] = hi[i]
            pf[j] = pf[i]
            pl[j] = pl[i]
        if i > 0 and flag[i - 1]:
            if not _merge(j - 1, j, x, m, lo, hi, pl, check):
                ok = False
        else:
            j += 1
    return j, ok


@njit(cache=True)
def _check_state(x, m, lo, hi, n, d, total_mass):
    for i in range(n - 1):
        if not x[i] < x[i + 1]:
            return ERR_ORDER
        if lo[i + 1] != hi[i] + 1:
            return ERR_BLOCKS
    if lo[0] != 0 or hi[n - 1] != d - 1:
        return ERR_BLOCKS
    for i in range(n):
        if hi[i] < lo[i]:
            return ERR_BLOCKS
    s = 0.0
    for i in range(n):
        s += m[i]
    if abs(s - total_mass) > MASS_TOL * total_mass:
        return ERR_MASS
    return OK


@njit(cache=True)
def _step(x, m, lo, hi, pf, pl, n, h, k0, k1, step, bridge, xold, mold, z, flag, check, drift):
    """One step of size ``h``.  Returns (new n, status)."""
    for i in range(n):
        xold[i] = x[i]
        mold[i] = m[i]
        pf[i] = i
        pl[i] = i
    fill_normals(z, n, k0, k1, step, PURPOSE_INCREMENT, 0)
    for i in range(n):
        x[i] += drift * h + math.sqrt(h / m[i]) * z[i]
    n2, ok = _pava(x, m, lo, hi, pf, pl, n, check)
    if bridge:
        n2, ok2 = _bridge_merge(x, m, lo, hi, pf, pl, n2, xold, mold, h, flag, k0, k1, step, check)
        ok = ok and ok2
        # rounding can leave an exact tie after a bridge merge
        n2, ok3 = _pava(x, m, lo, hi, pf, pl, n2, check)
        ok = ok and ok3
    if not ok:
        return n2, ERR_COM
    return n2, OK


@njit(cache=True)
def _cluster_of(hi, n, k):
    """Index of the cluster whose block contains initial piece ``k``."""
    a = 0
    b = n - 1
    while a < b:
        c = (a + b) // 2
        if hi[c] < k:
            a = c + 1
        else:
            b = c
    return a


@njit(cache=True)
def _record(s, x, m, lo, hi, n, x0, m0, total_mass, probe_idx, betas, dev_power, hw,
            out_pos, out_mass, out_count, out_inv, out_com, out_dev, out_hx, out_prh2):
    for p in range(probe_idx.shape[0]):
        c = _cluster_of(hi, n, probe_idx[p])
        out_pos[s, p] = x[c]
        out_mass[s, p] = m[c]
    out_count[s] = n
    for q in range(betas.shape[0]):
        acc = 0.0
        for c in range(n):
            acc += m[c] ** (1.0 - betas[q])
        out_inv[s, q] = acc
    com = 0.0
    for c in range(n):
        com += m[c] * x[c]
    out_com[s] = com / total_mass
    if dev_power > 0.0:
        acc = 0.0
        for c in range(n):
            for k in range(lo[c], hi[c] + 1):
                acc += m0[k] * abs(x[c] - x0[k]) ** dev_power
        out_dev[s] = acc
    if hw.shape[0] > 0:
        hx = 0.0
        pr = 0.0
        for c in range(n):
            blk = 0.0
            for k in range(lo[c], hi[c] + 1):
                w = hw[k] * m0[k]
                hx += w * (x[c] - x0[k])
                blk += w
            pr += blk * blk / m[c]
        out_hx[s] = hx
        out_prh2[s] = pr


@njit(cache=True)
def _run(x0, m0, save_times, dt, dt_min, adaptive, adaptive_c, bridge, fast_forward, drift,
         k0, k1, check, probe_idx, betas, dev_power, hw,
         out_pos, out_mass, out_count, out_inv, out_com, out_dev, out_hx, out_prh2,
         snap_x, snap_m, snap_lo, snap_hi, ev_t, ev_lo, ev_hi):
    """Simulate one replicate.  Returns (status, steps taken, merge events)."""
    d = x0.shape[0]
    total_mass = 0.0
    for k in range(d):
        total_mass += m0[k]
    x = x0.copy()
    m = m0.copy()
    lo = np.arange(d)
    hi = np.arange(d)
    pf = np.empty(d, dtype=np.int64)
    pl = np.empty(d, dtype=np.int64)
    xold = np.empty(d)
    mold = np.empty(d)
    z = np.empty(d + 4)
    flag = np.zeros(d, dtype=np.bool_)
    n = d
    t = 0.0
    step = 0
    n_events = 0
    status = OK
    record_snap = snap_x.shape[0] > 0
    record_events = ev_t.shape[0] > 0
    for s in range(save_times.shape[0]):
        target = save_times[s]
        while t < target and status == OK:
            remaining = target - t
            if n == 1 and fast_forward:
                h = remaining
            else:
                h = dt
                if adaptive and n > 1:
                    gmin = x[1] - x[0]
                    mmin = m[0]
                    for i in range(1, n):
                        if m[i] < mmin:
                            mmin = m[i]
                        if i < n - 1 and x[i + 1] - x[i] < gmin:
                            gmin = x[i + 1] - x[i]
                    cap = adaptive_c * gmin * gmin * mmin / 4.0
                    if cap < dt_min:
                        cap = dt_min
                    if cap < h:
                        h = cap
                if remaining <= h * (1.0 + 1e-9):
                    h = remaining
            n_prev = n
            n, status = _step(x, m, lo, hi, pf, pl, n, h, k0, k1, np.uint64(step), bridge,
                              xold, mold, z, flag, check, drift)
            step += 1
            if h == remaining:
                t = target
            else:
                t += h
            if record_events and n < n_prev:
                # one entry per surviving cluster that absorbed others this step
                for c in range(n):
                    if pf[c] != pl[c] and n_events < ev_t.shape[0]:
                        ev_t[n_events] = t
                        ev_lo[n_events] = lo[c]
                        ev_hi[n_events] = hi[c]
                        n_events += 1
            if check and status == OK:
                if n > n_prev:
                    status = ERR_COUNT
                else:
                    status = _check_state(x, m, lo, hi, n, d, total_mass)
        if status != OK:
            break
        _record(s, x, m, lo, hi, n, x0, m0, total_mass, probe_idx, betas, dev_power, hw,
                out_pos, out_mass, out_count, out_inv, out_com, out_dev, out_hx, out_prh2)
        if record_snap:
            for c in range(n):
                snap_x[s, c] = x[c]
                snap_m[s, c] = m[c]
                snap_lo[s, c] = lo[c]
                snap_hi[s, c] = hi[c]
    return status, step, n_events


@njit(cache=True, parallel=True)
def _run_batch(x0, m0, save_times, dt, dt_min, adaptive, adaptive_c, bridge, fast_forward, drift,
               seed, rep_ids, check, probe_idx, betas, dev_power, hw,
               out_pos, out_mass, out_count, out_inv, out_com, out_dev, out_hx, out_prh2,
               status, steps):
    empty_f = np.empty((0, 0))
    empty_i = np.empty((0, 0), dtype=np.int64)
    empty_t = np.empty(0)
    empty_e = np.empty(0, dtype=np.int64)
    for r in prange(rep_ids.shape[0]):
        k1 = np.uint64(rep_ids[r]) << np.uint64(24)
        st, ns, _ = _run(x0, m0, save_times, dt, dt_min, adaptive, adaptive_c, bridge,
                         fast_forward, drift, seed, k1, check, probe_idx, betas, dev_power, hw,
                         out_pos[r], out_mass[r], out_count[r], out_inv[r], out_com[r],
                         out_dev[r], out_hx[r], out_prh2[r],
                         empty_f, empty_f, empty_i, empty_i, empty_t, empty_e, empty_e)
        status[r] = st
        steps[r] = ns


# --- state API -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ClusterState:
    """Live clusters at one time.  Cluster ``c`` holds initial pieces
    ``index_lo[c] .. index_hi[c]`` (0-based, inclusive)."""

    time: float
    positions: NDArray[np.float64]
    masses: NDArray[np.float64]
    index_lo: NDArray[np.int64]
    index_hi: NDArray[np.int64]
    breakpoints: NDArray[np.float64]
    step: int = 0

    @property
    def total_mass(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def n_pieces(self) -> int:
        return self.breakpoints.size - 1

    def __len__(self) -> int:
        return self.positions.size

    def validate(self) -> None:
        x = np.ascontiguousarray(self.positions, dtype=np.float64)
        code = _check_state(x, np.ascontiguousarray(self.masses, dtype=np.float64),
                            np.ascontiguousarray(self.index_lo, dtype=np.int64),
                            np.ascontiguousarray(self.index_hi, dtype=np.int64),
                            x.size, self.n_pieces, self.total_mass)
        if code != OK:
            raise SimulationError(STATUS_MESSAGES[code])

    def com(self) -> float:
        return float(np.dot(self.masses, self.positions) / self.total_mass)


def init_state(profile: StepProfile) -> ClusterState:
    if not profile.is_canonical:
        raise ValueError("init_state needs a canonical profile (strictly increasing values)")
    d = profile.n_pieces
    return ClusterState(0.0, np.array(profile.values, dtype=np.float64),
                        np.array(profile.masses, dtype=np.float64),
                        np.arange(d, dtype=np.int64), np.arange(d, dtype=np.int64),
                        np.array(profile.breakpoints, dtype=np.float64))


def resolve_coalescence(state: ClusterState) -> ClusterState:
    """Merge out-of-order (or tied) neighbours until positions increase strictly."""
    x = np.array(state.positions, dtype=np.float64)
    m = np.array(state.masses, dtype=np.float64)
    lo = np.array(state.index_lo, dtype=np.int64)
    hi = np.array(state.index_hi, dtype=np.int64)
    n = x.size
    pf = np.arange(n, dtype=np.int64)
    pl = np.arange(n, dtype=np.int64)
    n2, _ = _pava(x, m, lo, hi, pf, pl, n, False)
    return replace(state, positions=x[:n2], masses=m[:n2], index_lo=lo[:n2], index_hi=hi[:n2])


def _stream_words(stream) -> tuple[np.uint64, np.uint64]:
    if isinstance(stream, GaussianStream):
        stream = stream.key
    if isinstance(stream, StreamKey):
        return stream.words()
    raise TypeError("expected a StreamKey or GaussianStream")


def advance(state: ClusterState, dt: float, stream, config: StepperConfig | None = None) -> ClusterState:
    """Advance by ``dt``: Gaussian increments, coalescence, optional bridge merges.

    The draws come from ``stream`` at counter ``state.step``, so a sequence of
    ``advance`` calls reproduces :func:`simulate` exactly (with fast-forward off).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    bridge = True if config is None else config.bridge_correction
    k0, k1 = _stream_words(stream)
    x = np.array(state.positions, dtype=np.float64)
    m = np.array(state.masses, dtype=np.float64)
    lo = np.array(state.index_lo, dtype=np.int64)
    hi = np.array(state.index_hi, dtype=np.int64)
    n = x.size
    pf = np.empty(n, dtype=np.int64)
    pl = np.empty(n, dtype=np.int64)
    n2, _ = _step(x, m, lo, hi, pf, pl, n, float(dt), k0, k1, np.uint64(state.step), bridge,
                  np.empty(n), np.empty(n), np.empty(n + 4), np.zeros(n, dtype=np.bool_), False,
                  0.0 if config is None else config.drift)
    return ClusterState(state.time + dt, x[:n2], m[:n2], lo[:n2], hi[:n2], state.breakpoints,
                        state.step + 1)


def mass_at(state: ClusterState, u: float) -> float:
    """Mass of the cluster carrying the particle at mass coordinate ``u``."""
    b = state.total_mass
    if not 0 < u < b:
        raise ValueError(f"mass coordinate must lie in (0, {b}), got {u}")
    k = int(np.searchsorted(state.breakpoints, u, side="right")) - 1
    c = int(np.searchsorted(state.index_hi, k, side="left"))
    return float(state.masses[c])


def position_at(state: ClusterState, u: float) -> float:
    b = state.total_mass
    if not 0 < u < b:
        raise ValueError(f"mass coordinate must lie in (0, {b}), got {u}")
    k = int(np.searchsorted(state.breakpoints, u, side="right")) - 1
    c = int(np.searchsorted(state.index_hi, k, side="left"))
    return float(state.positions[c])


def cluster_count(state: ClusterState) -> int:
    return len(state)


def inverse_mass_integral(state: ClusterState, beta: float = 1.0) -> float:
    """``∫_0^b du / m(u)**beta`` as an exact block sum."""
    return float(np.sum(state.masses ** (1.0 - beta)))


# --- trajectories ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots of one replicate on the save grid, plus the merge log.

    ``coordinates`` are the initial piece boundaries in mass coordinates; the
    rescaled views below transform them along with times, positions and masses.
    """

    save_times: NDArray[np.float64]
    counts: NDArray[np.int64]
    positions: NDArray[np.float64]
    masses: NDArray[np.float64]
    index_lo: NDArray[np.int64]
    index_hi: NDArray[np.int64]
    coordinates: NDArray[np.float64]
    event_times: NDArray[np.float64] = field(default_factory=lambda: np.empty(0))
    event_lo: NDArray[np.int64] = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    event_hi: NDArray[np.int64] = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    steps: int = 0

    def __len__(self) -> int:
        return self.save_times.size

    def state(self, s: int) -> ClusterState:
        n = int(self.counts[s])
        return ClusterState(float(self.save_times[s]), self.positions[s, :n], self.masses[s, :n],
                            self.index_lo[s, :n], self.index_hi[s, :n], self.coordinates)

    def states(self) -> list[ClusterState]:
        return [self.state(s) for s in range(len(self))]


def _validate_profile(profile: StepProfile) -> StepProfile:
    if not isinstance(profile, StepProfile):
        raise TypeError("simulate needs a StepProfile; use profiles.to_step_profile first")
    return profile if profile.is_canonical else canonicalize(profile)


def simulate(profile: StepProfile, config: StepperConfig, key: StreamKey,
             check: bool = False) -> Trajectory:
    """One replicate with full snapshots at ``config.save_times``."""
    profile = _validate_profile(profile)
    d = profile.n_pieces
    S = len(config.save_times)
    x0 = np.ascontiguousarray(profile.values, dtype=np.float64)
    m0 = np.ascontiguousarray(profile.masses, dtype=np.float64)
    k0, k1 = key.words()
    snap_x = np.zeros((S, d))
    snap_m = np.zeros((S, d))
    snap_lo = np.zeros((S, d), dtype=np.int64)
    snap_hi = np.zeros((S, d), dtype=np.int64)
    ev_t = np.zeros(max(d - 1, 1))
    ev_lo = np.zeros(max(d - 1, 1), dtype=np.int64)
    ev_hi = np.zeros(max(d - 1, 1), dtype=np.int64)
    counts = np.zeros(S, dtype=np.int64)
    dummy2 = np.zeros((S, 0))
    dummy1 = np.zeros(S)
    status, steps, n_ev = _run(
        x0, m0, np.asarray(config.save_times), config.dt, config.dt_min, config.adaptive,
        config.adaptive_c, config.bridge_correction, config.fast_forward, config.drift, k0, k1, check,
        np.empty(0, dtype=np.int64), np.empty(0), 0.0, np.empty(0),
        dummy2, dummy2, counts, dummy2, dummy1, dummy1, dummy1, dummy1,
        snap_x, snap_m, snap_lo, snap_hi, ev_t, ev_lo, ev_hi)
    if status != OK:
        raise SimulationError(f"invariant violated: {STATUS_MESSAGES[status]}")
    return Trajectory(np.asarray(config.save_times, dtype=np.float64), counts, snap_x, snap_m,
                      snap_lo, snap_hi, np.array(profile.breakpoints), ev_t[:n_ev], ev_lo[:n_ev],
                      ev_hi[:n_ev], int(steps))


@dataclass(frozen=True)
class RescaleParams:
    """Space-time rescaling ``X_rho(u, t) = rho**-alpha * X(u*rho - q, t*rho**gamma)``."""

    rho: float
    alpha: float
    q: float = 0.0

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise ValueError("rho must be in (0, 1]")
        if not self.alpha > 0.5:
            raise ValueError("alpha must exceed 1/2")

    @property
    def gamma(self) -> float:
        return 2.0 * self.alpha + 1.0


def rescale_view(traj: Trajectory, params: RescaleParams,
                 times: Sequence[float] | None = None, rtol: float = 1e-9) -> Trajectory:
    """Re-index a saved trajectory under the rescaling; nothing is re-simulated.

    Requested view times ``t`` must correspond to saved source times
    ``t * rho**gamma``; otherwise ``ValueError`` is raised.
    """
    rho, alpha, q = params.rho, params.alpha, params.q
    scale_t = rho ** params.gamma
    view_times = traj.save_times / scale_t
    if times is None:
        sel = np.arange(len(traj))
    else:
        sel = []
        for t in times:
            j = int(np.argmin(np.abs(view_times - t)))
            if abs(view_times[j] - t) > rtol * max(abs(t), 1e-300):
                raise ValueError(f"view time {t} maps to source time {t * scale_t}, "
                                 "which is not on the saved grid")
            sel.append(j)
        sel = np.asarray(sel)
    return Trajectory(view_times[sel], traj.counts[sel], traj.positions[sel] / rho ** alpha,
                      traj.masses[sel] / rho, traj.index_lo[sel], traj.index_hi[sel],
                      (traj.coordinates + q) / rho, traj.event_times / scale_t,
                      traj.event_lo, traj.event_hi, traj.steps)


def view_mass_at(traj: Trajectory, s: int, u: float) -> float:
    """``m(u, t_s)`` read from a (possibly rescaled) trajectory snapshot."""
    coords = traj.coordinates
    if not coords[0] < u < coords[-1]:
        raise ValueError(f"mass coordinate {u} outside ({coords[0]}, {coords[-1]})")
    k = int(np.searchsorted(coords, u, side="right")) - 1
    n = int(traj.counts[s])
    c = int(np.searchsorted(traj.index_hi[s, :n], k, side="left"))
    return float(traj.masses[s, c])


def view_position_at(traj: Trajectory, s: int, u: float) -> float:
    coords = traj.coordinates
    if not coords[0] < u < coords[-1]:
        raise ValueError(f"mass coordinate {u} outside ({coords[0]}, {coords[-1]})")
    k = int(np.searchsorted(coords, u, side="right")) - 1
    n = int(traj.counts[s])
    c = int(np.searchsorted(traj.index_hi[s, :n], k, side="left"))
    return float(traj.positions[s, c])
