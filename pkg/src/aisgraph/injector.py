"""Kinematic anomaly injection.

A contiguous block of ``m = round(r_node * w)`` samples starting at a
uniformly drawn index is perturbed by replacing the SOG and/or COG rate
with ``mu + sign * k_sigma * sigma`` of the track's fitted rate
distribution. Positions from the block onward are re-integrated by dead
reckoning so the track stays kinematically consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DegenerateSigma, InsufficientSamples, InvariantViolation
from .ingest import Trajectory
from .kinematics import RateDistribution, fit_rate_distribution, integrate_positions, rate_of_change, wrap_course

MIN_FIT_SAMPLES = 8
DEFAULT_K_SIGMA = 3.5
DEFAULT_SOG_MAX = 40.0


class Channel(str, Enum):
    SOG = "SOG"
    COG = "COG"
    BOTH = "BOTH"

    @property
    def names(self) -> tuple[str, ...]:
        return {"SOG": ("sog",), "COG": ("cog",), "BOTH": ("sog", "cog")}[self.value]


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class AnomalyMask:
    z: np.ndarray
    s: int
    m: int
    k_sigma: float = DEFAULT_K_SIGMA
    channel: Channel = Channel.BOTH

    @property
    def w(self) -> int:
        return len(self.z)

    @property
    def y_traj(self) -> int:
        return label_trajectory(self)

    @classmethod
    def empty(cls, w: int) -> "AnomalyMask":
        return cls(z=np.zeros(w, dtype=np.int8), s=0, m=0)

    @classmethod
    def block(cls, w: int, s: int, m: int, **kw) -> "AnomalyMask":
        z = np.zeros(w, dtype=np.int8)
        z[s : s + m] = 1
        return cls(z=z, s=s, m=m, **kw)

    def check(self) -> None:
        """Raise unless the ones in ``z`` form exactly the run ``[s, s+m)``."""
        ones = np.flatnonzero(self.z)
        if self.m == 0:
            ok = len(ones) == 0
        else:
            ok = 1 <= self.m <= self.w and len(ones) == self.m and ones[0] == self.s and ones[-1] == self.s + self.m - 1
        if not ok:
            raise InvariantViolation(f"mask (s={self.s}, m={self.m}) does not match z={self.z.tolist()}")


def sample_anomaly_block(w: int, r_node: float, rng: np.random.Generator) -> tuple[int, int, np.ndarray]:
    """Draw ``(s, m, z)``: ``s`` uniform over ``0..w-m``, ``z`` the 0/1 block."""
    if w < 1:
        raise ValueError("w must be >= 1")
    if not 0.0 < r_node <= 1.0:
        raise ValueError(f"r_node must lie in (0, 1], got {r_node}")
    m = min(w, max(1, round_half_up(r_node * w)))
    s = int(rng.integers(0, w - m + 1))
    z = np.zeros(w, dtype=np.int8)
    z[s : s + m] = 1
    return s, m, z


def label_trajectory(mask: AnomalyMask) -> int:
    return int(np.any(mask.z))


def select_anomalous_trajectories(
    group_ids: Sequence, r_traj: float, rng: np.random.Generator, total: int | None = None
) -> list:
    """Exactly ``round(N * r_traj)`` ids (half rounds up), uniformly without
    replacement, returned in input order.

    ``total`` sets N when only some of the dataset's groups are candidates;
    it defaults to ``len(group_ids)``.
    """
    n = len(group_ids)
    if not 0.0 < r_traj <= 1.0:
        raise ValueError(f"r_traj must lie in (0, 1], got {r_traj}")
    total = n if total is None else total
    count = round_half_up(total * r_traj) if total else 0
    if count > n:
        raise ValueError(f"need {count} candidate groups, only {n} available")
    picked = set(rng.choice(n, size=count, replace=False).tolist())
    return [gid for i, gid in enumerate(group_ids) if i in picked]


def fit_for_track(traj: Trajectory, pooled: RateDistribution | None) -> tuple[RateDistribution, str]:
    """Rate distribution of one clean track; the pooled corpus fit stands
    in when the track has fewer than MIN_FIT_SAMPLES rates."""
    if traj.w - 1 >= MIN_FIT_SAMPLES:
        return fit_rate_distribution(rate_of_change(traj)), "trajectory"
    if pooled is None:
        raise InsufficientSamples(f"track has {traj.w - 1} rates and no pooled fit is available")
    return pooled, "pooled"


@dataclass
class ChannelPerturbation:
    mu: float
    sigma: float
    k_sigma: float
    sign: int
    deviation: float
    source: str
    applied: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "sigma": self.sigma,
            "k_sigma": self.k_sigma,
            "sign": self.sign,
            "deviation": self.deviation,
            "source": self.source,
            "applied": list(self.applied),
        }


def _channel_params(name, dist, pooled, source) -> tuple[float, float, str]:
    mu, sigma = dist.channel(name)
    if sigma > 0:
        return mu, sigma, source
    if pooled is not None:
        mu, sigma = pooled.channel(name)
        if sigma > 0:
            return mu, sigma, "pooled"
    raise DegenerateSigma(f"{name} rate sigma is zero for the track and the pooled corpus")


def perturb_kinematics(
    traj: Trajectory,
    mask: AnomalyMask,
    dist: RateDistribution,
    rng: np.random.Generator,
    pooled: RateDistribution | None = None,
    sog_max: float = DEFAULT_SOG_MAX,
    signed: bool = True,
    dist_source: str = "trajectory",
) -> tuple[Trajectory, dict]:
    """Replace SOG/COG rates inside the mask and re-integrate positions.

    Each masked sample ``i`` gets ``x_i = x_{i-1} + rate * dt`` with the
    replacement rate; a block starting at 0 uses sample 0's clean value as
    its predecessor. SOG is clamped to ``[0, sog_max]`` (clamps are
    counted); COG is wrapped. Samples before the block are untouched.

    Returns the perturbed track and a record of what was applied.
    """
    if len(mask.z) != traj.w:
        raise ValueError(f"mask length {len(mask.z)} != trajectory length {traj.w}")
    record = {"s": mask.s, "m": mask.m, "channel": mask.channel.value, "clamp_events": 0}
    if mask.m == 0:
        return traj, record
    if not mask.k_sigma > 3.0:
        raise ValueError(f"k_sigma must exceed 3, got {mask.k_sigma}")

    dt = traj.dt
    values = {"sog": traj.sog.copy(), "cog": traj.cog.copy()}
    for name in mask.channel.names:
        mu, sigma, source = _channel_params(name, dist, pooled, dist_source)
        sign = int(rng.choice((-1, 1))) if signed else 1
        deviation = sign * (mask.k_sigma * sigma)
        rate = mu + deviation
        pert = ChannelPerturbation(mu, sigma, mask.k_sigma, sign, deviation, source)
        x = values[name]
        for i in range(mask.s, mask.s + mask.m):
            prev = x[i - 1] if i > 0 else x[0]
            pert.applied.append(rate)
            nxt = prev + rate * dt
            if name == "sog":
                if nxt < 0.0 or nxt > sog_max:
                    record["clamp_events"] += 1
                    nxt = min(max(nxt, 0.0), sog_max)
                x[i] = nxt
            else:
                x[i] = wrap_course(nxt)
        record[name] = pert.to_dict()

    return reintegrate(traj, values["sog"], values["cog"], mask.s), record


def reintegrate(traj: Trajectory, sog: np.ndarray, cog: np.ndarray, start: int) -> Trajectory:
    """New SOG/COG with positions dead-reckoned from sample ``start - 1``."""
    start = max(start, 1)
    lat, lon = integrate_positions(traj.lat[0], traj.lon[0], sog, cog, traj.dt, start=start, lat=traj.lat, lon=traj.lon)
    return replace(traj, lat=lat, lon=lon, sog=np.asarray(sog, dtype=float), cog=np.asarray(cog, dtype=float))


@dataclass(frozen=True)
class RatioConfig:
    r_node: float = 0.5
    r_traj: float = 0.1

    def __post_init__(self):
        for name in ("r_node", "r_traj"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")


@dataclass
class MemberEdit:
    """One edited group member: its index, block mask and what was done."""

    member: int
    mask: AnomalyMask
    record: dict
