"""Non-decreasing initial profiles on the mass interval [0, b].

A profile maps a mass coordinate ``u`` to the starting position of the
infinitesimal particle at ``u``.  Step profiles are exactly simulable; tabulated
and analytic profiles are turned into step profiles by dyadic averaging.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

TIE_TOL = 1e-12
_BP_TOL = 1e-12

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


class ProfileError(ValueError):
    """Invalid profile data."""


def _as_float_array(values: ArrayLike, name: str) -> NDArray[np.float64]:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ProfileError(f"{name} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Piecewise-constant function on [0, b]: ``values[k]`` on [a_k, a_{k+1})."""

    breakpoints: NDArray[np.float64]
    values: NDArray[np.float64]

    def __post_init__(self):
        bp = _as_float_array(self.breakpoints, "breakpoints")
        vals = _as_float_array(self.values, "values")
        if bp.size < 2:
            raise ProfileError("need at least two breakpoints")
        if bp[0] != 0.0:
            raise ProfileError(f"first breakpoint must be 0, got {bp[0]}")
        if np.any(np.diff(bp) <= 0):
            raise ProfileError("breakpoints must be strictly increasing")
        if vals.size != bp.size - 1:
            raise ProfileError(f"{vals.size} values for {bp.size - 1} intervals")
        bp.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @property
    def total_mass(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def masses(self) -> NDArray[np.float64]:
        return np.diff(self.breakpoints)

    @property
    def n_pieces(self) -> int:
        return int(self.values.size)

    def piece_index(self, u: ArrayLike) -> NDArray[np.intp]:
        idx = np.searchsorted(self.breakpoints, np.asarray(u, dtype=np.float64), side="right") - 1
        return np.clip(idx, 0, self.n_pieces - 1)

    def __call__(self, u):
        out = self.values[self.piece_index(u)]
        return float(out) if np.ndim(u) == 0 else out

    def antiderivative(self, u: ArrayLike) -> NDArray[np.float64]:
        """``∫_0^u f``, exact."""
        u = np.clip(np.asarray(u, dtype=np.float64), 0.0, self.total_mass)
        cum = np.concatenate([[0.0], np.cumsum(self.values * self.masses)])
        idx = self.piece_index(u)
        return cum[idx] + self.values[idx] * (u - self.breakpoints[idx])

    def integral(self, lo: float, hi: float) -> float:
        return float(self.antiderivative(hi) - self.antiderivative(lo))

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return (type(self) is type(other)
                and np.array_equal(self.breakpoints, other.breakpoints)
                and np.array_equal(self.values, other.values))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class StepProfile(StepFunction):
    """Non-decreasing step function; the initial condition of a finite system."""

    def __post_init__(self):
        super().__post_init__()
        if np.any(np.diff(self.values) < -TIE_TOL):
            raise ProfileError("profile values must be non-decreasing")

    @property
    def is_canonical(self) -> bool:
        return bool(np.all(np.diff(self.values) > TIE_TOL))

    @classmethod
    def from_masses(cls, masses: ArrayLike, values: ArrayLike) -> StepProfile:
        m = _as_float_array(masses, "masses")
        if np.any(m <= 0):
            raise ProfileError("piece masses must be positive")
        return cls(np.concatenate([[0.0], np.cumsum(m)]), values)


@dataclass(frozen=True)
class AnalyticFamily:
    """``g(u) = C * sgn(u - u0) * |u - u0|**alpha``; ``uniform`` is alpha=1, u0=0."""

    kind: Literal["uniform", "power"]
    alpha: float = 1.0
    u0: float = 0.0
    C: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "power"):
            raise ProfileError(f"unknown analytic family {self.kind!r}")
        if self.kind == "uniform" and (self.alpha != 1.0 or self.u0 != 0.0):
            raise ProfileError("uniform family has alpha=1, u0=0")
        if self.alpha <= 0 or self.C <= 0:
            raise ProfileError("alpha and C must be positive")

    def __call__(self, u):
        x = np.asarray(u, dtype=np.float64) - self.u0
        out = self.C * np.sign(x) * np.abs(x) ** self.alpha
        return float(out) if np.ndim(u) == 0 else out

    def antiderivative(self, u):
        x = np.asarray(u, dtype=np.float64) - self.u0
        a1 = self.alpha + 1.0
        return self.C * (np.abs(x) ** a1 - abs(self.u0) ** a1) / a1


@dataclass(frozen=True, eq=False)
class TabulatedProfile:
    """Non-decreasing profile given by samples or by an analytic family.

    ``mode="step"`` interpolates piecewise-constant; with ``convention="right"``
    the sample value holds on ``[u_i, u_{i+1})``, with ``"left"`` it holds on
    ``(u_{i-1}, u_i]``.  ``mode="linear"`` interpolates linearly.  When
    ``family`` is set the samples are ignored and ``g`` is evaluated exactly.
    """

    total_mass: float
    points: NDArray[np.float64] = field(default_factory=lambda: np.empty(0))
    values: NDArray[np.float64] = field(default_factory=lambda: np.empty(0))
    mode: Literal["step", "linear"] = "step"
    convention: Literal["right", "left"] = "right"
    family: AnalyticFamily | None = None

    def __post_init__(self):
        if not (self.total_mass > 0 and math.isfinite(self.total_mass)):
            raise ProfileError("total_mass must be positive")
        if self.mode not in ("step", "linear"):
            raise ProfileError(f"unknown interpolation mode {self.mode!r}")
        if self.convention not in ("right", "left"):
            raise ProfileError(f"unknown jump convention {self.convention!r}")
        pts = _as_float_array(self.points, "points")
        vals = _as_float_array(self.values, "values")
        object.__setattr__(self, "total_mass", float(self.total_mass))
        if self.family is None:
            if pts.size < 1 or pts.size != vals.size:
                raise ProfileError("need matching, non-empty points and values")
            if pts[0] != 0.0 or pts[-1] > self.total_mass or np.any(np.diff(pts) <= 0):
                raise ProfileError("points must start at 0, increase strictly and stay in [0, b]")
            if (self.mode == "linear" or self.convention == "left") and pts[-1] != self.total_mass:
                raise ProfileError("linear and left-continuous tabulations must end at b")
            if np.any(np.diff(vals) < -TIE_TOL):
                raise ProfileError("tabulated values must be non-decreasing")
        pts.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    @classmethod
    def uniform(cls, total_mass: float = 1.0, C: float = 1.0) -> TabulatedProfile:
        return cls(total_mass, family=AnalyticFamily("uniform", C=C), mode="linear")

    @classmethod
    def power(cls, alpha: float, u0: float, C: float = 1.0, total_mass: float = 1.0) -> TabulatedProfile:
        return cls(total_mass, family=AnalyticFamily("power", alpha=alpha, u0=u0, C=C), mode="linear")

    @classmethod
    def from_function(cls, fn: Callable, total_mass: float = 1.0, n_points: int = 4097) -> TabulatedProfile:
        pts = np.linspace(0.0, total_mass, n_points)
        return cls(total_mass, pts, np.asarray(fn(pts), dtype=np.float64), mode="linear")

    def __call__(self, u):
        u_arr = np.asarray(u, dtype=np.float64)
        if self.family is not None:
            out = self.family(u_arr)
        elif self.mode == "linear":
            out = np.interp(u_arr, self.points, self.values)
        elif self.convention == "right":
            idx = np.searchsorted(self.points, u_arr, side="right") - 1
            out = self.values[np.clip(idx, 0, self.values.size - 1)]
        else:
            idx = np.searchsorted(self.points, u_arr, side="left")
            out = self.values[np.clip(idx, 0, self.values.size - 1)]
        return float(out) if np.ndim(u) == 0 else np.asarray(out, dtype=np.float64)

    def antiderivative(self, u) -> NDArray[np.float64]:
        """``∫_0^u g``, exact for every supported representation."""
        u = np.clip(np.asarray(u, dtype=np.float64), 0.0, self.total_mass)
        if self.family is not None:
            return np.asarray(self.family.antiderivative(u), dtype=np.float64)
        if self.mode == "step":
            # the jump convention only changes values on a null set
            return self.as_step_function().antiderivative(u)
        pts, vals = self.points, self.values
        seg = 0.5 * (vals[1:] + vals[:-1]) * np.diff(pts)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        idx = np.clip(np.searchsorted(pts, u, side="right") - 1, 0, pts.size - 2)
        w = u - pts[idx]
        slope = (vals[idx + 1] - vals[idx]) / (pts[idx + 1] - pts[idx])
        return cum[idx] + vals[idx] * w + 0.5 * slope * w * w

    def as_step_function(self) -> StepFunction:
        if self.mode != "step" or self.family is not None:
            raise ProfileError("only step-mode tabulations are step functions")
        pts = self.points
        if pts[-1] < self.total_mass:
            bp = np.concatenate([pts, [self.total_mass]])
            vals = self.values
        else:
            bp = pts
            vals = self.values[:-1]
        if self.convention == "left":
            # value v_i lives on (u_{i-1}, u_i]; v_0 only at the point 0
            vals = self.values[1:]
        return StepFunction(bp, vals)


Profile = Union[StepProfile, TabulatedProfile]


@dataclass(frozen=True)
class Partition:
    """Ordered half-open intervals covering [0, b], with the value on each."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    @property
    def intervals(self) -> list[tuple[float, float]]:
        return list(zip(self.breakpoints[:-1], self.breakpoints[1:]))

    @property
    def total_mass(self) -> float:
        return self.breakpoints[-1]

    def __len__(self) -> int:
        return len(self.values)


def canonicalize(profile: StepProfile) -> StepProfile:
    """Merge adjacent pieces whose values agree within ``TIE_TOL``."""
    vals = np.asarray(profile.values)
    if np.any(np.diff(vals) < -TIE_TOL):
        raise ProfileError("profile values must be non-decreasing")
    keep = np.concatenate([[True], np.diff(vals) > TIE_TOL])
    if keep.all():
        return profile
    starts = np.flatnonzero(keep)
    bp = np.concatenate([profile.breakpoints[starts], [profile.total_mass]])
    return StepProfile(bp, vals[starts])


def increment(profile, u: float, r: float, side: Literal["right", "left"] = "right") -> float:
    """``g(u+r) - g(u)`` (right) or ``g(u) - g(u-r)`` (left)."""
    b = profile.total_mass
    if side == "right":
        if not 0 < r < b - u:
            raise ValueError(f"right increment needs 0 < r < b - u, got r={r}, u={u}, b={b}")
        return max(profile(u + r) - profile(u), 0.0)
    if side == "left":
        if not 0 < r < u:
            raise ValueError(f"left increment needs 0 < r < u, got r={r}, u={u}")
        return max(profile(u) - profile(u - r), 0.0)
    raise ValueError(f"side must be 'right' or 'left', got {side!r}")


def dyadic_step_approximation(g: Profile, n: int) -> StepProfile:
    """Average ``g`` over the ``2**n`` equal cells of [0, b]."""
    if n < 0:
        raise ValueError("level must be non-negative")
    b = g.total_mass
    bp = np.linspace(0.0, b, 2**n + 1)
    bp[-1] = b
    F = np.asarray(g.antiderivative(bp), dtype=np.float64)
    vals = np.diff(F) / np.diff(bp)
    # cell averages of a monotone function are monotone; clean rounding
    vals = np.maximum.accumulate(vals)
    return StepProfile(bp, vals)


def to_step_profile(profile: Profile, level: int | None = None) -> StepProfile:
    """Canonical step profile ready for simulation."""
    if isinstance(profile, StepProfile):
        return canonicalize(profile)
    if level is None:
        if profile.family is None and profile.mode == "step":
            sf = cadlag_modification(profile).as_step_function()
            return canonicalize(StepProfile(sf.breakpoints, sf.values))
        raise ValueError("a dyadic level is required for non-step profiles")
    return canonicalize(dyadic_step_approximation(profile, level))


def partition_of(profile: StepProfile) -> Partition:
    p = canonicalize(profile)
    return Partition(tuple(float(x) for x in p.breakpoints), tuple(float(v) for v in p.values))


def partition_leq(finer: Partition, coarser: Partition) -> bool:
    """True iff every interval of ``finer`` sits inside an interval of ``coarser``."""
    if abs(finer.total_mass - coarser.total_mass) > _BP_TOL * max(1.0, finer.total_mass):
        raise ValueError("partitions of different total mass")
    cb = np.asarray(coarser.breakpoints)
    for lo, hi in finer.intervals:
        j = int(np.searchsorted(cb, lo + _BP_TOL, side="right")) - 1
        j = min(max(j, 0), cb.size - 2)
        if hi > cb[j + 1] + _BP_TOL:
            return False
    return True


def cadlag_modification(g: TabulatedProfile) -> TabulatedProfile:
    """Right-continuous version of ``g`` (right limits at jumps, left limit at b)."""
    if g.family is not None or g.mode == "linear" or g.convention == "right":
        return g
    vals = g.values
    new_vals = np.concatenate([vals[1:], vals[-1:]])
    return TabulatedProfile(g.total_mass, g.points, new_vals, mode="step", convention="right")


def project(f: StepProfile, h: StepFunction | TabulatedProfile) -> StepFunction:
    """Block averages of ``h`` over the level sets of ``f``."""
    p = canonicalize(f)
    bp = p.breakpoints
    F = np.asarray(h.antiderivative(bp), dtype=np.float64)
    return StepFunction(bp, np.diff(F) / np.diff(bp))


def lp_norm(g, p: float) -> float:
    """``(∫_0^b |g|^p)^{1/p}``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if isinstance(g, StepFunction):
        return float(np.sum(np.abs(g.values) ** p * g.masses) ** (1.0 / p))
    if g.family is None and g.mode == "step":
        return lp_norm(cadlag_modification(g).as_step_function(), p)
    # composite Gauss-Legendre on panels split at kinks and sign changes
    cuts = [0.0, g.total_mass]
    if g.family is not None:
        cuts += list(np.linspace(0.0, g.total_mass, 65)[1:-1])
        if 0 < g.family.u0 < g.total_mass:
            cuts.append(g.family.u0)
    else:
        cuts += list(g.points)
        v = g.values
        for i in np.flatnonzero(v[:-1] * v[1:] < 0):
            cuts.append(g.points[i] - v[i] * (g.points[i + 1] - g.points[i]) / (v[i + 1] - v[i]))
    cuts = np.unique(np.clip(cuts, 0.0, g.total_mass))
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        half = 0.5 * (hi - lo)
        x = lo + half * (_GL_NODES + 1.0)
        total += half * float(np.sum(_GL_WEIGHTS * np.abs(g(x)) ** p))
    return total ** (1.0 / p)


# --- JSON ------------------------------------------------------------------

def profile_to_dict(profile: Profile) -> dict:
    if isinstance(profile, StepProfile):
        return {"total_mass": profile.total_mass, "kind": "step",
                "breakpoints": profile.breakpoints.tolist(), "values": profile.values.tolist()}
    if profile.family is not None:
        fam = profile.family
        out = {"total_mass": profile.total_mass, "kind": fam.kind, "C": fam.C}
        if fam.kind == "power":
            out.update(alpha=fam.alpha, u0=fam.u0)
        return out
    return {"total_mass": profile.total_mass, "kind": "tabulated",
            "breakpoints": profile.points.tolist(), "values": profile.values.tolist(),
            "mode": profile.mode, "convention": profile.convention}


def profile_from_dict(doc: dict) -> Profile:
    try:
        kind = doc["kind"]
        if kind == "step":
            bp = doc["breakpoints"]
            if "total_mass" in doc and not math.isclose(bp[-1], doc["total_mass"], rel_tol=1e-12):
                raise ProfileError("last breakpoint must equal total_mass")
            return StepProfile(bp, doc["values"])
        b = float(doc.get("total_mass", 1.0))
        if kind == "uniform":
            return TabulatedProfile.uniform(b, C=float(doc.get("C", 1.0)))
        if kind == "power":
            return TabulatedProfile.power(float(doc["alpha"]), float(doc["u0"]),
                                          C=float(doc.get("C", 1.0)), total_mass=b)
        if kind == "tabulated":
            return TabulatedProfile(b, doc["breakpoints"], doc["values"],
                                    mode=doc.get("mode", "step"),
                                    convention=doc.get("convention", "right"))
    except KeyError as exc:
        raise ProfileError(f"profile document missing field {exc}") from None
    raise ProfileError(f"unknown profile kind {kind!r}")


def load_profile(path: str | Path) -> Profile:
    return profile_from_dict(json.loads(Path(path).read_text()))


def dump_profile(profile: Profile, path: str | Path) -> None:
    Path(path).write_text(json.dumps(profile_to_dict(profile), indent=2))
