"""Derived kinematics: SOG/COG rates, their Gaussian fits, distances and
dead reckoning.

Units follow AIS conventions: speed in knots, course in degrees clockwise
from north, time in seconds, distance in kilometres. Rates are therefore
knots/second for SOG and degrees/second for COG.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InsufficientSamples, PoleProximity

EARTH_RADIUS_KM = 6371.0
KM_PER_DEG = 111.195
KM_PER_NM = 1.852
MAX_DR_LATITUDE = 89.0


def wrap_course(deg: float) -> float:
    """Wrap an angle into [0, 360)."""
    r = deg % 360.0
    # tiny negative inputs round up to exactly 360.0
    return 0.0 if r >= 360.0 else r


def wrap_course_array(deg: np.ndarray) -> np.ndarray:
    r = np.mod(deg, 360.0)
    r[r >= 360.0] = 0.0
    return r


def signed_course_delta(start: float, end: float) -> float:
    """Shortest signed turn from ``start`` to ``end``, in (-180, 180]."""
    d = (end - start) % 360.0
    return d - 360.0 if d > 180.0 else d


def signed_course_delta_array(start: np.ndarray, end: np.ndarray) -> np.ndarray:
    d = np.mod(np.asarray(end, dtype=float) - np.asarray(start, dtype=float), 360.0)
    return np.where(d > 180.0, d - 360.0, d)


@dataclass(frozen=True)
class RateSeries:
    """Finite-difference SOG and COG rates of one uniformly sampled track."""

    a: np.ndarray
    omega: np.ndarray
    dt: float

    def __len__(self) -> int:
        return len(self.a)


@dataclass(frozen=True)
class RateDistribution:
    mu_a: float
    sigma_a: float
    mu_omega: float
    sigma_omega: float

    def channel(self, name: str) -> tuple[float, float]:
        if name == "sog":
            return self.mu_a, self.sigma_a
        if name == "cog":
            return self.mu_omega, self.sigma_omega
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "mu_a": self.mu_a,
            "sigma_a": self.sigma_a,
            "mu_omega": self.mu_omega,
            "sigma_omega": self.sigma_omega,
        }


def rates_from_arrays(sog: np.ndarray, cog: np.ndarray, dt: float) -> RateSeries:
    sog = np.asarray(sog, dtype=float)
    cog = np.asarray(cog, dtype=float)
    a = np.diff(sog) / dt
    omega = signed_course_delta_array(cog[:-1], cog[1:]) / dt
    return RateSeries(a=a, omega=omega, dt=float(dt))


def rate_of_change(traj) -> RateSeries:
    """SOG and COG rates of a uniformly resampled trajectory.

    The COG difference is the wrapped signed turn, so a crossing of north
    (359 -> 1) is a +2 degree change, not -358.
    """
    if traj.dt is None:
        raise ValueError("trajectory is not uniformly resampled")
    return rates_from_arrays(traj.sog, traj.cog, traj.dt)


def fit_rate_distribution(rates: RateSeries | Iterable[RateSeries]) -> RateDistribution:
    """Sample mean and (n-1) standard deviation per channel.

    Accepts a single series or any iterable of series, which are pooled.
    """
    if isinstance(rates, RateSeries):
        a, omega = rates.a, rates.omega
    else:
        series = list(rates)
        if not series:
            raise InsufficientSamples("no rate series to fit")
        a = np.concatenate([r.a for r in series])
        omega = np.concatenate([r.omega for r in series])
    if len(a) < 2:
        raise InsufficientSamples(f"need at least 2 rate samples, got {len(a)}")
    return RateDistribution(
        mu_a=float(np.mean(a)),
        sigma_a=float(np.std(a, ddof=1)),
        mu_omega=float(np.mean(omega)),
        sigma_omega=float(np.std(omega, ddof=1)),
    )


def haversine_km(p: Sequence[float], q: Sequence[float]) -> float:
    """Great-circle distance between two (lat, lon) points in degrees."""
    lat1, lon1 = math.radians(p[0]), math.radians(p[1])
    lat2, lon2 = math.radians(q[0]), math.radians(q[1])
    h = (
        math.sin((lat2 - lat1) / 2.0) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def haversine_km_array(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Vectorised haversine over broadcastable arrays of degrees."""
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(x, dtype=float)) for x in (lat1, lon1, lat2, lon2))
    h = np.sin((lat2 - lat1) / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def dead_reckon(lat: float, lon: float, sog: float, cog: float, dt: float) -> tuple[float, float]:
    """Advance a position along a constant bearing for ``dt`` seconds.

    Flat rhumb-line step: the distance ``sog * dt`` is split into north and
    east components and converted to degrees at the starting latitude.
    """
    if abs(lat) > MAX_DR_LATITUDE:
        raise PoleProximity(f"latitude {lat} too close to the pole for dead reckoning")
    if sog == 0.0:
        return lat, lon
    dist = sog * KM_PER_NM * dt / 3600.0
    rad = math.radians(cog)
    new_lat = lat + dist * math.cos(rad) / KM_PER_DEG
    new_lon = lon + dist * math.sin(rad) / (KM_PER_DEG * math.cos(math.radians(lat)))
    if abs(new_lat) > MAX_DR_LATITUDE:
        raise PoleProximity(f"dead reckoning reached latitude {new_lat}")
    if not -180.0 <= new_lon < 180.0:
        new_lon = (new_lon + 180.0) % 360.0 - 180.0
    return new_lat, new_lon


def integrate_positions(
    lat0: float,
    lon0: float,
    sog: Sequence[float],
    cog: Sequence[float],
    dt: float,
    start: int = 0,
    lat: np.ndarray | None = None,
    lon: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Dead-reckon a whole position track from per-sample SOG/COG.

    Sample ``i`` is reached from sample ``i-1`` using the SOG/COG reported
    at sample ``i``. With ``start > 0`` the positions before ``start`` are
    taken from ``lat``/``lon`` unchanged and integration resumes from
    sample ``start - 1``.
    """
    n = len(sog)
    out_lat = np.empty(n) if lat is None else np.array(lat, dtype=float)
    out_lon = np.empty(n) if lon is None else np.array(lon, dtype=float)
    if start == 0:
        out_lat[0], out_lon[0] = lat0, lon0
        start = 1
    for i in range(start, n):
        out_lat[i], out_lon[i] = dead_reckon(out_lat[i - 1], out_lon[i - 1], float(sog[i]), float(cog[i]), dt)
    return out_lat, out_lon


def path_length_km(lat: np.ndarray, lon: np.ndarray) -> float:
    if len(lat) < 2:
        return 0.0
    return float(np.sum(haversine_km_array(lat[:-1], lon[:-1], lat[1:], lon[1:])))


def closure_error_km(lat, lon, sog, cog, dt) -> tuple[float, float]:
    """Max deviation of stored positions from their own dead-reckoned track.

    Returns ``(max_error_km, path_length_km)``.
    """
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    r_lat, r_lon = integrate_positions(lat[0], lon[0], sog, cog, dt)
    err = haversine_km_array(lat, lon, r_lat, r_lon)
    return float(np.max(err)), path_length_km(lat, lon)


def bearing_and_distance(lat1: float, lon1: float, lat2: float, lon2: float) -> tuple[float, float]:
    """Inverse of :func:`dead_reckon`: rhumb step (course deg, distance km)."""
    north = (lat2 - lat1) * KM_PER_DEG
    east = (lon2 - lon1) * KM_PER_DEG * math.cos(math.radians(lat1))
    dist = math.hypot(north, east)
    if dist == 0.0:
        return 0.0, 0.0
    return wrap_course(math.degrees(math.atan2(east, north))), dist
