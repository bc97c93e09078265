"""Seeded generator for a small AIS corpus in the OMTAD column layout.

Tracks are dead-reckoned from slowly varying SOG/COG at an irregular
2-6 minute cadence, so they are kinematically consistent. Vessels come in
loose flotillas plus a few loners; one track has a long reporting gap and
a few rows are duplicated, as real feeds do.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import VesselType, format_timestamp
from .kinematics import dead_reckon, wrap_course

HEADER = ("mmsi", "timestamp", "lat", "lon", "sog", "cog", "vessel_type")
EPOCH = 1_577_836_800  # 2020-01-01T00:00:00Z
SOG_RELAX_S = 3600.0
SOG_SPREAD = 0.5  # kn

# corpus proportions by vessel category
TYPE_WEIGHTS = {
    VesselType.CARGO: 14384,
    VesselType.TANKER: 4020,
    VesselType.FISHING: 466,
    VesselType.PASSENGER: 254,
}


@dataclass
class SampleSpec:
    seed: int = 7
    n_flotillas: int = 6
    flotilla_size: tuple[int, int] = (3, 6)
    n_loners: int = 6
    hours: float = 12.0
    start_spread_s: int = 1800
    gap_s: int = 7200
    duplicates: int = 5


def _vessel_types(rng: np.random.Generator, n: int) -> list[VesselType]:
    kinds = list(TYPE_WEIGHTS)
    p = np.array([TYPE_WEIGHTS[k] for k in kinds], dtype=float)
    return [kinds[i] for i in rng.choice(len(kinds), size=n, p=p / p.sum())]


def _track(rng, mmsi, vtype, lat, lon, sog, cog, t0, hours):
    # SOG wanders around the cruise speed (mean-reverting over ~1 h)
    rows = []
    t = t0
    end = t0 + int(hours * 3600)
    cruise, dev = sog, 0.0
    while True:
        rows.append((mmsi, t, lat, lon, sog, cog, vtype.value))
        step = int(rng.integers(120, 361))
        if t + step > end:
            break
        t += step
        keep = math.exp(-step / SOG_RELAX_S)
        dev = dev * keep + rng.normal(0.0, SOG_SPREAD * math.sqrt(1.0 - keep * keep))
        sog = max(0.5, cruise + dev)
        cog = wrap_course(cog + rng.normal(0.0, 0.6))
        lat, lon = dead_reckon(lat, lon, sog, cog, step)
    return rows


def generate_rows(spec: SampleSpec | None = None) -> list[tuple]:
    """Rows ordered by (mmsi, t), duplicates included."""
    spec = spec or SampleSpec()
    rng = np.random.default_rng(spec.seed)
    mmsis = iter(sorted((201_000_000 + rng.choice(574_000_000, size=1000, replace=False)).tolist()))
    rows: list[tuple] = []
    lo, hi = spec.flotilla_size

    groups = [int(rng.integers(lo, hi + 1)) for _ in range(spec.n_flotillas)] + [1] * spec.n_loners
    for size in groups:
        c_lat = float(rng.uniform(-31.0, -20.0))
        c_lon = float(rng.uniform(108.0, 112.5))
        c_cog = float(rng.uniform(0.0, 360.0))
        c_sog = float(rng.uniform(6.0, 12.0))
        types = _vessel_types(rng, size)
        for vtype in types:
            ang = math.radians(rng.uniform(0.0, 360.0))
            r = 3.0 * math.sqrt(rng.random()) / 111.195
            lat = c_lat + r * math.cos(ang)
            lon = c_lon + r * math.sin(ang) / math.cos(math.radians(c_lat))
            sog = c_sog + float(rng.normal(0.0, 0.3))
            if vtype is VesselType.FISHING:
                sog = float(rng.uniform(3.0, 7.0))
            cog = wrap_course(c_cog + rng.normal(0.0, 2.0))
            t0 = EPOCH + int(rng.integers(0, spec.start_spread_s + 1))
            rows.extend(_track(rng, next(mmsis), vtype, lat, lon, sog, cog, t0, spec.hours))

    # one vessel goes silent mid-track
    if spec.gap_s and rows:
        victim = rows[0][0]
        track = [r for r in rows if r[0] == victim]
        mid = track[len(track) // 2][1]
        rows = [r for r in rows if not (r[0] == victim and mid < r[1] < mid + spec.gap_s)]
    for i in rng.choice(len(rows), size=min(spec.duplicates, len(rows)), replace=False):
        rows.append(rows[int(i)])
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def write_csv(rows, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(HEADER)
        for mmsi, t, lat, lon, sog, cog, vtype in rows:
            out.writerow([mmsi, format_timestamp(t), f"{lat:.7f}", f"{lon:.7f}", f"{sog:.3f}", f"{cog:.3f}", vtype])
    return path


def write_sample(path: str | Path, spec: SampleSpec | None = None) -> Path:
    return write_csv(generate_rows(spec), path)


def main(argv: list[str] | None = None) -> int:
    p = argparse.ArgumentParser(prog="aisgraph-sample", description="Write a seeded synthetic AIS CSV.")
    p.add_argument("output")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--flotillas", type=int, default=6)
    p.add_argument("--loners", type=int, default=6)
    p.add_argument("--hours", type=float, default=12.0)
    args = p.parse_args(argv)
    spec = SampleSpec(seed=args.seed, n_flotillas=args.flotillas, n_loners=args.loners, hours=args.hours)
    write_sample(args.output, spec)
    return 0


if __name__ == "__main__":
    sys.exit(main())
