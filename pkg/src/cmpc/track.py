"""Reference path, road bounds, friction map, and speed profile.

Everything is sampled over path distance s and linearly interpolated, with
end values held beyond the sampled range. Lookups far outside the path
(beyond a 10 m apron) raise OutOfRangeError instead of extrapolating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGeometryError, OutOfRangeError

# Queries are tolerated this far beyond the sampled range before raising.
S_APRON = 10.0  # m

# Length of the curvature ramp joining straights to the arc in generated
# paths; keeps samples strictly increasing while the jump stays effectively
# instantaneous at vehicle scale.
_JOIN_RAMP = 1.0e-3  # m


@dataclass(frozen=True)
class Path:
    """Piecewise-linear path samples: curvature and lateral bounds over s."""

    s: np.ndarray
    kappa: np.ndarray
    e_min: np.ndarray
    e_max: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.s, dtype=float)
        for name in ("s", "kappa", "e_min", "e_max"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1 or arr.shape != s.shape:
                raise InvalidGeometryError(f"path field {name} must match s in shape")
            if not np.all(np.isfinite(arr)):
                raise InvalidGeometryError(f"path field {name} contains non-finite values")
            object.__setattr__(self, name, arr)
        if s.size < 2:
            raise InvalidGeometryError("path needs at least two samples")
        if s[0] != 0.0:
            raise InvalidGeometryError(f"path must start at s = 0, got {s[0]}")
        if not np.all(np.diff(s) > 0.0):
            raise InvalidGeometryError("path s samples must be strictly increasing")
        if not np.all(self.e_min < 0.0) or not np.all(self.e_max > 0.0):
            raise InvalidGeometryError("road bounds must satisfy e_min < 0 < e_max")

    @property
    def total_length(self) -> float:
        return float(self.s[-1])


def _check_range(path_like_s: np.ndarray, s, what: str):
    s_arr = np.asarray(s, dtype=float)
    lo = float(path_like_s[0]) - S_APRON
    hi = float(path_like_s[-1]) + S_APRON
    if np.any(s_arr < lo) or np.any(s_arr > hi):
        raise OutOfRangeError(f"{what} query at s = {s} outside [{lo}, {hi}]")
    return s_arr


def curvature_at(path: Path, s):
    """Curvature at s, linearly interpolated, end values held at the ends."""
    s_arr = _check_range(path.s, s, "curvature")
    out = np.interp(s_arr, path.s, path.kappa)
    return float(out) if np.isscalar(s) or s_arr.ndim == 0 else out


def bounds_at(path: Path, s):
    """Road bounds (e_min, e_max) at s, linearly interpolated."""
    s_arr = _check_range(path.s, s, "bounds")
    lo = np.interp(s_arr, path.s, path.e_min)
    hi = np.interp(s_arr, path.s, path.e_max)
    if np.isscalar(s) or s_arr.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def build_left_turn(
    radius: float,
    entry_len: float,
    exit_len: float,
    half_width: float,
) -> Path:
    """Straight entry, 90 degree constant-radius left turn, straight exit.

    Curvature on the arc is +1/radius; road bounds are +-half_width
    throughout. Raises InvalidGeometryError for non-positive dimensions.
    """
    if radius <= 0.0 or half_width <= 0.0:
        raise InvalidGeometryError("radius and half_width must be positive")
    if entry_len <= _JOIN_RAMP or exit_len <= _JOIN_RAMP:
        raise InvalidGeometryError("entry and exit straights must be positive")
    arc_len = 0.5 * math.pi * radius
    s_arc_start = entry_len
    s_arc_end = entry_len + arc_len
    total = s_arc_end + exit_len
    kappa = 1.0 / radius
    s = np.array(
        [
            0.0,
            s_arc_start - _JOIN_RAMP,
            s_arc_start,
            s_arc_end,
            s_arc_end + _JOIN_RAMP,
            total,
        ]
    )
    k = np.array([0.0, 0.0, kappa, kappa, 0.0, 0.0])
    e_min = np.full_like(s, -half_width)
    e_max = np.full_like(s, half_width)
    return Path(s=s, kappa=k, e_min=e_min, e_max=e_max)


@dataclass(frozen=True)
class FrictionZone:
    s_start: float
    s_end: float
    mu: float

    def __post_init__(self) -> None:
        if not self.s_end > self.s_start:
            raise InvalidGeometryError(
                f"friction zone must have s_end > s_start, got [{self.s_start}, {self.s_end}]"
            )
        if not 0.0 < self.mu <= 1.2:
            raise InvalidGeometryError(f"zone friction must lie in (0, 1.2], got {self.mu}")


@dataclass(frozen=True)
class FrictionMap:
    """Default friction with closed-left override zones: mu(s) for the plant."""

    default_mu: float
    zones: tuple[FrictionZone, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not 0.0 < self.default_mu <= 1.2:
            raise InvalidGeometryError(f"default friction must lie in (0, 1.2]")
        zones = tuple(sorted(self.zones, key=lambda z: z.s_start))
        for prev, nxt in zip(zones, zones[1:]):
            if nxt.s_start < prev.s_end:
                raise InvalidGeometryError(
                    f"friction zones overlap near s = {nxt.s_start}"
                )
        object.__setattr__(self, "zones", zones)


def friction_at(fmap: FrictionMap, s: float) -> float:
    """mu at s; a zone covers [s_start, s_end), boundaries belong to the zone on the left edge."""
    for z in fmap.zones:
        if z.s_start <= s < z.s_end:
            return z.mu
    return fmap.default_mu


@dataclass(frozen=True)
class SpeedProfile:
    """Target longitudinal speed over s, linearly interpolated, ends held."""

    s: np.ndarray
    ux: np.ndarray
    ux_min: float = 0.5

    def __post_init__(self) -> None:
        s = np.asarray(self.s, dtype=float)
        ux = np.asarray(self.ux, dtype=float)
        if s.ndim != 1 or s.shape != ux.shape or s.size < 1:
            raise InvalidGeometryError("speed profile needs matching 1-d s and ux samples")
        if s.size > 1 and not np.all(np.diff(s) > 0.0):
            raise InvalidGeometryError("speed profile s samples must be strictly increasing")
        if not np.all(np.isfinite(s)) or not np.all(np.isfinite(ux)):
            raise InvalidGeometryError("speed profile contains non-finite values")
        if np.any(ux < self.ux_min):
            raise InvalidGeometryError(
                f"speed profile dips below the {self.ux_min} m/s floor"
            )
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "ux", ux)

    def speed_at(self, s):
        out = np.interp(np.asarray(s, dtype=float), self.s, self.ux)
        return float(out) if np.isscalar(s) else out


def constant_speed_profile(ux: float, length: float) -> SpeedProfile:
    return SpeedProfile(s=np.array([0.0, max(length, 1.0)]), ux=np.array([ux, ux]))
