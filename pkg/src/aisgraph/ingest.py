"""AIS ingestion: row parsing, region checks, per-vessel track assembly and
resampling onto a uniform time grid."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import InvariantViolation, MalformedRow, OutOfRange, TooShort, UnknownVesselType
from .kinematics import signed_course_delta_array, wrap_course_array

log = logging.getLogger(__name__)

SYNTHETIC_MMSI_BASE = 990_000_000
MAX_MMSI = 999_999_999


class VesselType(str, Enum):
    CARGO = "Cargo"
    TANKER = "Tanker"
    FISHING = "Fishing"
    PASSENGER = "Passenger"

    @classmethod
    def parse(cls, text: str) -> "VesselType":
        key = text.strip().lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise UnknownVesselType(f"unknown vessel type {text!r}")


@dataclass(frozen=True)
class AisRecord:
    mmsi: int
    t: int
    lat: float
    lon: float
    sog: float
    cog: float
    vessel_type: VesselType


@dataclass(frozen=True)
class RegionBounds:
    lon_min: float
    lon_max: float
    lat_min: float
    lat_max: float

    def __post_init__(self):
        if not (self.lon_min < self.lon_max and self.lat_min < self.lat_max):
            raise ValueError(f"degenerate region {self}")

    def contains(self, lat: float, lon: float) -> bool:
        return self.lon_min <= lon <= self.lon_max and self.lat_min <= lat <= self.lat_max


# West Australian offshore region covered by OMTAD
OMTAD_REGION = RegionBounds(lon_min=105.0, lon_max=116.0, lat_min=-36.0, lat_max=-15.0)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-ordered states of one vessel.

    ``dt`` is None for raw (irregular) tracks and the grid spacing in
    seconds once resampled. Arrays are read-only.
    """

    mmsi: int
    vessel_type: VesselType
    t: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    sog: np.ndarray
    cog: np.ndarray
    dt: int | None = None
    provenance: str = ""

    def __post_init__(self):
        for name in ("t", "lat", "lon", "sog", "cog"):
            arr = np.array(getattr(self, name), dtype=np.int64 if name == "t" else float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def w(self) -> int:
        return len(self.t)

    @property
    def start(self) -> int:
        return int(self.t[0])

    @property
    def end(self) -> int:
        return int(self.t[-1])

    def validate(self) -> None:
        n = len(self.t)
        if n < 2:
            raise InvariantViolation(f"trajectory {self.provenance} has {n} states")
        if any(len(getattr(self, f)) != n for f in ("lat", "lon", "sog", "cog")):
            raise InvariantViolation(f"trajectory {self.provenance} has ragged state arrays")
        steps = np.diff(self.t)
        if np.any(steps <= 0):
            raise InvariantViolation(f"trajectory {self.provenance} timestamps not increasing")
        if self.dt is not None and np.any(steps != self.dt):
            raise InvariantViolation(f"trajectory {self.provenance} not on a {self.dt}s grid")
        if np.any(np.abs(self.lat) > 90) or np.any(np.abs(self.lon) > 180):
            raise InvariantViolation(f"trajectory {self.provenance} position out of range")
        if np.any(self.sog < 0) or np.any((self.cog < 0) | (self.cog >= 360)):
            raise InvariantViolation(f"trajectory {self.provenance} SOG/COG out of range")

    def index_of(self, t: int) -> int | None:
        i = int(np.searchsorted(self.t, t))
        if i < len(self.t) and self.t[i] == t:
            return i
        return None

    def covers(self, start: int, w: int) -> bool:
        i = self.index_of(start)
        return i is not None and i + w <= len(self.t)

    def window(self, start: int, w: int) -> "Trajectory":
        i = self.index_of(start)
        if i is None or i + w > len(self.t):
            raise IndexError(f"trajectory {self.provenance} does not cover [{start}, +{w})")
        sl = slice(i, i + w)
        return replace(self, t=self.t[sl], lat=self.lat[sl], lon=self.lon[sl], sog=self.sog[sl], cog=self.cog[sl])

    def same_states(self, other: "Trajectory") -> bool:
        return all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in ("t", "lat", "lon", "sog", "cog")
        ) and self.dt == other.dt


@dataclass(frozen=True)
class ColumnMap:
    """Field name -> column index."""

    mmsi: int
    timestamp: int
    lat: int
    lon: int
    sog: int
    cog: int
    vessel_type: int

    FIELDS = ("mmsi", "timestamp", "lat", "lon", "sog", "cog", "vessel_type")

    @classmethod
    def from_header(cls, header: Sequence[str], aliases: Mapping[str, Iterable[str]] | None = None) -> "ColumnMap":
        aliases = {**DEFAULT_ALIASES, **(aliases or {})}
        lookup = {h.strip().lower(): i for i, h in enumerate(header)}
        idx = {}
        for name in cls.FIELDS:
            for alias in aliases[name]:
                if alias.lower() in lookup:
                    idx[name] = lookup[alias.lower()]
                    break
            else:
                raise MalformedRow(f"header lacks a column for {name!r}: {list(header)}")
        return cls(**idx)


DEFAULT_ALIASES: dict[str, tuple[str, ...]] = {
    "mmsi": ("mmsi",),
    "timestamp": ("timestamp", "time", "datetime", "basedatetime", "t"),
    "lat": ("lat", "latitude"),
    "lon": ("lon", "longitude", "long"),
    "sog": ("sog", "speed"),
    "cog": ("cog", "course"),
    "vessel_type": ("vessel_type", "vesseltype", "ship_type", "type", "category"),
}


def parse_timestamp(text: str) -> int:
    """ISO-8601 (naive means UTC) or integer epoch seconds -> epoch seconds."""
    text = text.strip()
    if text.lstrip("-").isdigit():
        return int(text)
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return math.floor(dt.timestamp())


def format_timestamp(t: int) -> str:
    return datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _float(row: Sequence[str], i: int, name: str) -> float:
    try:
        v = float(row[i])
    except (ValueError, IndexError) as exc:
        raise MalformedRow(f"bad {name} field in {list(row)}") from exc
    if not math.isfinite(v):
        raise MalformedRow(f"non-finite {name} in {list(row)}")
    return v


def parse_ais_record(row: Sequence[str], schema: ColumnMap) -> AisRecord:
    """Parse one split text row. Raises a typed error for every bad row."""
    if len(row) <= max(getattr(schema, f) for f in ColumnMap.FIELDS):
        raise MalformedRow(f"row has {len(row)} columns: {list(row)}")
    try:
        mmsi = int(row[schema.mmsi].strip())
    except ValueError as exc:
        raise MalformedRow(f"bad mmsi in {list(row)}") from exc
    try:
        t = parse_timestamp(row[schema.timestamp])
    except ValueError as exc:
        raise MalformedRow(f"bad timestamp in {list(row)}") from exc
    lat = _float(row, schema.lat, "lat")
    lon = _float(row, schema.lon, "lon")
    sog = _float(row, schema.sog, "sog")
    cog = _float(row, schema.cog, "cog")
    vtype = VesselType.parse(row[schema.vessel_type])

    # the top of the namespace is reserved for synthetic vessels
    if not 0 < mmsi < SYNTHETIC_MMSI_BASE:
        raise OutOfRange(f"mmsi {mmsi} outside [1, {SYNTHETIC_MMSI_BASE})")
    if not -90.0 <= lat <= 90.0:
        raise OutOfRange(f"lat {lat}")
    if not -180.0 <= lon <= 180.0:
        raise OutOfRange(f"lon {lon}")
    if sog < 0.0:
        raise OutOfRange(f"sog {sog}")
    if not 0.0 <= cog < 360.0:
        raise OutOfRange(f"cog {cog}")
    return AisRecord(mmsi=mmsi, t=t, lat=lat, lon=lon, sog=sog, cog=cog, vessel_type=vtype)


def validate_region(rec: AisRecord, bounds: RegionBounds = OMTAD_REGION) -> bool:
    return bounds.contains(rec.lat, rec.lon)


def iter_ais_rows(path: str | Path, delimiter: str = ",") -> Iterator[tuple[int, list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for row in reader:
            if row:
                yield reader.line_num, row


def read_ais_file(path: str | Path, delimiter: str = ",", bounds: RegionBounds | None = OMTAD_REGION) -> list[AisRecord]:
    """Read a headered delimited AIS file; out-of-region rows are dropped."""
    rows = iter_ais_rows(path, delimiter)
    try:
        _, header = next(rows)
    except StopIteration:
        raise MalformedRow(f"{path}: missing header row") from None
    schema = ColumnMap.from_header(header)
    records = []
    dropped = 0
    for line, row in rows:
        try:
            rec = parse_ais_record(row, schema)
        except (MalformedRow, OutOfRange, UnknownVesselType) as exc:
            raise type(exc)(f"{path}:{line}: {exc}") from exc
        if bounds is not None and not validate_region(rec, bounds):
            dropped += 1
            continue
        records.append(rec)
    if dropped:
        log.info("dropped %d records outside region %s", dropped, bounds)
    return records


def assemble_trajectories(records: Iterable[AisRecord], gap_threshold: float = 3600) -> list[Trajectory]:
    """Group records by vessel, sort by time and split at large gaps.

    Duplicate timestamps keep the first record seen. Segments left with a
    single record cannot form a trajectory and are dropped.
    """
    by_vessel: dict[int, list[AisRecord]] = {}
    for rec in records:
        by_vessel.setdefault(rec.mmsi, []).append(rec)

    out = []
    singletons = 0
    for mmsi in sorted(by_vessel):
        recs = sorted(by_vessel[mmsi], key=lambda r: r.t)  # stable: first duplicate wins
        unique = [recs[0]]
        for r in recs[1:]:
            if r.t != unique[-1].t:
                unique.append(r)
        segment = [unique[0]]
        for r in unique[1:] + [None]:
            if r is not None and r.t - segment[-1].t <= gap_threshold:
                segment.append(r)
                continue
            if len(segment) >= 2:
                out.append(_from_records(segment))
            else:
                singletons += 1
            segment = [r]
    if singletons:
        log.info("dropped %d single-record segments", singletons)
    return out


def _from_records(recs: list[AisRecord]) -> Trajectory:
    return Trajectory(
        mmsi=recs[0].mmsi,
        vessel_type=recs[0].vessel_type,
        t=[r.t for r in recs],
        lat=[r.lat for r in recs],
        lon=[r.lon for r in recs],
        sog=[r.sog for r in recs],
        cog=[r.cog for r in recs],
        provenance=f"{recs[0].mmsi}@{recs[0].t}",
    )


def resample_trajectory(traj: Trajectory, dt: int, align: bool = False) -> Trajectory:
    """Linear resampling onto ``t0, t0 + dt, ...``.

    COG is interpolated along the shorter arc. With ``align`` the grid is
    anchored to multiples of ``dt`` (so tracks of different vessels share
    timestamps) instead of the first sample.
    """
    t = traj.t
    t0 = int(t[0])
    if align:
        t0 = -(-t0 // dt) * dt
    if t[-1] - t0 < dt:
        raise TooShort(f"trajectory {traj.provenance} spans {int(t[-1] - t[0])}s < dt={dt}s")
    grid = np.arange(t0, int(t[-1]) + 1, dt, dtype=np.int64)

    n = len(t)
    idx = np.clip(np.searchsorted(t, grid, side="right") - 1, 0, n - 1)
    nxt = np.minimum(idx + 1, n - 1)
    span = (t[nxt] - t[idx]).astype(float)
    frac = np.divide((grid - t[idx]).astype(float), span, out=np.zeros(len(grid)), where=span > 0)

    def lerp(v: np.ndarray) -> np.ndarray:
        return v[idx] + frac * (v[nxt] - v[idx])

    cog = traj.cog[idx] + frac * signed_course_delta_array(traj.cog[idx], traj.cog[nxt])
    return replace(
        traj,
        t=grid,
        lat=lerp(traj.lat),
        lon=lerp(traj.lon),
        sog=np.maximum(lerp(traj.sog), 0.0),
        cog=wrap_course_array(cog),
        dt=int(dt),
    )


@dataclass
class IngestReport:
    records: int = 0
    segments: int = 0
    too_short: int = 0
    trajectories: int = 0
    notes: list[str] = field(default_factory=list)


def prepare_trajectories(
    records: Sequence[AisRecord], dt: int, gap_threshold: float, min_length: int
) -> tuple[list[Trajectory], IngestReport]:
    """Assemble, resample on the shared grid, and drop tracks shorter than
    ``min_length`` samples."""
    report = IngestReport(records=len(records))
    segments = assemble_trajectories(records, gap_threshold)
    report.segments = len(segments)
    out = []
    for seg in segments:
        try:
            traj = resample_trajectory(seg, dt, align=True)
        except TooShort:
            report.too_short += 1
            continue
        if traj.w < min_length:
            report.too_short += 1
            continue
        traj.validate()
        out.append(traj)
    if report.too_short:
        log.info("dropped %d trajectories shorter than %d samples", report.too_short, min_length)
    out.sort(key=lambda tr: (tr.mmsi, tr.start))
    report.trajectories = len(out)
    return out, report
