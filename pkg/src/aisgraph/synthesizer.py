"""Neighbourhood augmentation.

Every focal window is turned into a group of exactly ``k_vessels``
co-temporal trajectories: real neighbours first (nearest first), then
virtual companions made by bounded perturbation of the focal track.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import InvariantViolation
from .ingest import SYNTHETIC_MMSI_BASE, MAX_MMSI, Trajectory
from .kinematics import EARTH_RADIUS_KM, haversine_km, integrate_positions, wrap_course_array
from .neighborhood import nearby_trajectories

REAL = "REAL"
SYNTHETIC = "SYNTHETIC"
NOISE_FRACTION = 0.1


@dataclass(frozen=True)
class SynthesisBounds:
    sog_jitter: float = 2.0
    cog_jitter: float = 15.0
    pos_jitter: float = 5.0
    seed: int = 0
    sog_max: float = 40.0

    def __post_init__(self):
        if min(self.sog_jitter, self.cog_jitter, self.pos_jitter) < 0:
            raise ValueError("jitters must be non-negative")

    @property
    def is_identity(self) -> bool:
        return self.sog_jitter == 0 and self.cog_jitter == 0 and self.pos_jitter == 0


@dataclass(frozen=True)
class MemberTag:
    origin: str
    source: str
    parent: int | None = None

    def to_dict(self) -> dict:
        return {"origin": self.origin, "source": self.source, "parent": self.parent}

    @classmethod
    def from_dict(cls, d: dict) -> "MemberTag":
        return cls(origin=d["origin"], source=d["source"], parent=d["parent"])


@dataclass
class AugmentedGroup:
    focal: Trajectory
    members: list[Trajectory]
    provenance: list[MemberTag]

    @property
    def k(self) -> int:
        return len(self.members)

    @property
    def n_synthetic(self) -> int:
        return sum(tag.origin == SYNTHETIC for tag in self.provenance)

    def validate(self, k_vessels: int) -> None:
        if len(self.members) != k_vessels or len(self.provenance) != k_vessels:
            raise InvariantViolation(f"group has {len(self.members)} members, expected {k_vessels}")
        for tr in self.members:
            if not np.array_equal(tr.t, self.focal.t):
                raise InvariantViolation(f"member {tr.mmsi} is not on the focal grid")
            tr.validate()
        mmsis = [tr.mmsi for tr in self.members]
        if len(set(mmsis)) != len(mmsis):
            raise InvariantViolation(f"duplicate member mmsi in group {mmsis}")


def augment_with_real_neighbors(
    focal: Trajectory, pool: Sequence[Trajectory], radius: float, k_vessels: int
) -> AugmentedGroup:
    """Adopt up to ``k_vessels - 1`` nearest real neighbours.

    Only neighbours present at every timestamp of the focal window qualify;
    they are cut down to that window.
    """
    if k_vessels < 1:
        raise ValueError("k_vessels must be >= 1")
    members = [focal]
    tags = [MemberTag(REAL, focal.provenance)]
    for other, _ in nearby_trajectories(focal, pool, radius, overlap=focal.w):
        if len(members) == k_vessels:
            break
        members.append(other.window(focal.start, focal.w))
        tags.append(MemberTag(REAL, other.provenance))
    return AugmentedGroup(focal=focal, members=members, provenance=tags)


def _displace(lat: float, lon: float, dist_km: float, bearing_deg: float) -> tuple[float, float]:
    # great-circle destination point
    phi, lam = math.radians(lat), math.radians(lon)
    delta = dist_km / EARTH_RADIUS_KM
    theta = math.radians(bearing_deg)
    phi2 = math.asin(math.sin(phi) * math.cos(delta) + math.cos(phi) * math.sin(delta) * math.cos(theta))
    lam2 = lam + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(phi), math.cos(delta) - math.sin(phi) * math.sin(phi2)
    )
    lon2 = (math.degrees(lam2) + 180.0) % 360.0 - 180.0
    return math.degrees(phi2), lon2


def synthesize_virtual_neighbor(
    focal: Trajectory, bounds: SynthesisBounds, rng: np.random.Generator, taken: Sequence[int] = ()
) -> Trajectory:
    """A companion track derived from ``focal``.

    SOG and COG get one offset per track, uniform within the jitter, plus
    per-sample noise of at most 10% of the jitter. The start point moves
    uniformly within a ``pos_jitter`` disc and the rest of the track is
    dead-reckoned from the perturbed SOG/COG. All-zero bounds yield an
    exact copy of the focal states.
    """
    w = focal.w
    # fixed draw order keeps streams stable across bound settings
    mmsi = int(rng.integers(SYNTHETIC_MMSI_BASE, MAX_MMSI + 1))
    while mmsi in taken:
        mmsi = int(rng.integers(SYNTHETIC_MMSI_BASE, MAX_MMSI + 1))
    radius = bounds.pos_jitter * math.sqrt(rng.random())
    bearing = 360.0 * rng.random()
    sog_offset = rng.uniform(-1.0, 1.0) * bounds.sog_jitter
    cog_offset = rng.uniform(-1.0, 1.0) * bounds.cog_jitter
    sog_noise = rng.uniform(-1.0, 1.0, w) * NOISE_FRACTION * bounds.sog_jitter
    cog_noise = rng.uniform(-1.0, 1.0, w) * NOISE_FRACTION * bounds.cog_jitter

    out = replace(focal, mmsi=mmsi, provenance=f"{SYNTHETIC}({focal.mmsi})")
    if bounds.is_identity:
        return out

    sog = np.clip(focal.sog + sog_offset + sog_noise, 0.0, max(bounds.sog_max, float(np.max(focal.sog))))
    cog = wrap_course_array(focal.cog + cog_offset + cog_noise)
    lat0, lon0 = _displace(float(focal.lat[0]), float(focal.lon[0]), radius, bearing)
    while haversine_km((lat0, lon0), (focal.lat[0], focal.lon[0])) > bounds.pos_jitter:
        radius *= 1.0 - 1e-9
        lat0, lon0 = _displace(float(focal.lat[0]), float(focal.lon[0]), radius, bearing)
    lat, lon = integrate_positions(lat0, lon0, sog, cog, focal.dt)
    return replace(out, lat=lat, lon=lon, sog=sog, cog=cog)


def ensure_density(
    focal: Trajectory,
    pool: Sequence[Trajectory],
    k_vessels: int,
    radius: float,
    bounds: SynthesisBounds,
    rng: np.random.Generator,
) -> AugmentedGroup:
    """Exactly ``k_vessels`` members: focal, real neighbours, then virtual fill."""
    group = augment_with_real_neighbors(focal, pool, radius, k_vessels)
    taken = {tr.mmsi for tr in group.members}
    while group.k < k_vessels:
        synth = synthesize_virtual_neighbor(focal, bounds, rng, taken)
        taken.add(synth.mmsi)
        group.members.append(synth)
        group.provenance.append(MemberTag(SYNTHETIC, synth.provenance, parent=focal.mmsi))
    return group
