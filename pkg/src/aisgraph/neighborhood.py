"""Co-temporal snapshots, OPTICS ordering with xi cluster extraction, and
radius queries between trajectories.

All distances are great-circle kilometres. Ties are always broken by
ascending MMSI so results do not depend on input order.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ingest import Trajectory
from .kinematics import haversine_km, haversine_km_array

NOISE = -1
UNDEFINED = math.inf


@dataclass(frozen=True)
class Snapshot:
    t: int
    points: tuple[tuple[int, float, float], ...]  # (mmsi, lat, lon), ascending mmsi

    def __len__(self) -> int:
        return len(self.points)

    @property
    def mmsis(self) -> list[int]:
        return [p[0] for p in self.points]


@dataclass
class ClusterAssignment:
    """OPTICS output for one snapshot, keyed by MMSI.

    ``labels`` stays empty until :func:`extract_clusters` fills it.
    """

    ordering: list[int]
    reachability: dict[int, float]
    core_distance: dict[int, float]
    predecessor: dict[int, int | None]
    min_samples: int
    max_eps: float
    labels: dict[int, int] = field(default_factory=dict)

    def reachability_plot(self) -> list[float]:
        return [self.reachability[m] for m in self.ordering]

    def clusters(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for mmsi in sorted(self.labels):
            if self.labels[mmsi] != NOISE:
                out.setdefault(self.labels[mmsi], []).append(mmsi)
        return out


def snapshot_at(trajs: Sequence[Trajectory], t: int) -> Snapshot:
    points = {}
    for tr in trajs:
        i = tr.index_of(t)
        if i is not None:
            points[tr.mmsi] = (tr.mmsi, float(tr.lat[i]), float(tr.lon[i]))
    return Snapshot(t=t, points=tuple(points[m] for m in sorted(points)))


def distance_matrix(snapshot: Snapshot) -> list[list[float]]:
    pts = snapshot.points
    n = len(pts)
    d = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            d[i][j] = d[j][i] = haversine_km(pts[i][1:], pts[j][1:])
    return d


def optics_order(snapshot: Snapshot, min_samples: int = 3, max_eps: float = 25.0) -> ClusterAssignment:
    """OPTICS visit order, reachability and core distances under haversine.

    The core distance counts the point itself, so with ``min_samples=2`` it
    is the distance to the nearest other vessel. Values beyond ``max_eps``
    are UNDEFINED (inf). A heap keyed on (reachability, mmsi) picks the
    next point; when it runs dry the lowest unprocessed MMSI starts a new
    component.
    """
    if min_samples < 2:
        raise ValueError("min_samples must be >= 2")
    snapshot = Snapshot(snapshot.t, tuple(sorted(snapshot.points)))
    mmsis = snapshot.mmsis
    n = len(mmsis)
    dist = distance_matrix(snapshot)

    core = [UNDEFINED] * n
    for i in range(n):
        if n >= min_samples:
            kth = sorted(dist[i])[min_samples - 1]
            if kth <= max_eps:
                core[i] = kth

    reach = [UNDEFINED] * n
    pred: list[int | None] = [None] * n
    done = [False] * n
    order: list[int] = []
    heap: list[tuple[float, int, int]] = []
    next_fresh = 0

    while len(order) < n:
        i = None
        while heap:
            r, _, j = heapq.heappop(heap)
            if not done[j] and r == reach[j]:
                i = j
                break
        if i is None:
            while done[next_fresh]:
                next_fresh += 1
            i = next_fresh
        done[i] = True
        order.append(i)
        if core[i] == UNDEFINED:
            continue
        for j in range(n):
            if done[j] or dist[i][j] > max_eps:
                continue
            r = max(core[i], dist[i][j])
            if r < reach[j]:
                reach[j] = r
                pred[j] = i
                heapq.heappush(heap, (r, mmsis[j], j))

    return ClusterAssignment(
        ordering=[mmsis[i] for i in order],
        reachability={mmsis[i]: reach[i] for i in range(n)},
        core_distance={mmsis[i]: core[i] for i in range(n)},
        predecessor={mmsis[i]: (None if pred[i] is None else mmsis[pred[i]]) for i in range(n)},
        min_samples=min_samples,
        max_eps=max_eps,
    )


def _grow_area(steep: np.ndarray, reverse: np.ndarray, start: int, min_samples: int) -> int:
    """Last index of the maximal steep area beginning at ``start``.

    The area may contain up to ``min_samples`` consecutive non-steep
    points, and ends at the first point that moves the other way.
    """
    end = start
    flat_run = 0
    for i in range(start, len(steep)):
        if steep[i]:
            flat_run = 0
            end = i
        elif reverse[i]:
            break
        else:
            flat_run += 1
            if flat_run > min_samples:
                break
    return end


def _trim_by_predecessor(plot, pred_plot, ordering, s: int, e: int):
    # shrink the right edge until its predecessor lies inside the cluster
    while s < e:
        if plot[s] > plot[e]:
            return s, e
        if pred_plot[e] in ordering[s:e]:
            return s, e
        e -= 1
    return None


def xi_cluster_spans(
    plot: Sequence[float],
    pred_plot: Sequence[int | None],
    ordering: Sequence[int],
    xi: float,
    min_samples: int,
    min_cluster_size: int,
) -> list[tuple[int, int]]:
    """Steep-area cluster extraction over a reachability plot.

    Returns inclusive (start, end) spans in plot positions, nested clusters
    listed before the clusters containing them. An infinite sentinel is
    appended so a cluster can close at the end of the plot.
    """
    r = np.append(np.asarray(plot, dtype=float), np.inf)
    keep = 1.0 - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = r[:-1] / r[1:]
    steep_up = ratio <= keep
    steep_down = ratio >= 1.0 / keep
    going_down = ratio > 1.0
    going_up = ratio < 1.0

    down_areas: list[dict] = []
    spans: list[tuple[int, int]] = []
    pos = 0
    mib = 0.0

    def filtered(areas, mib):
        if math.isinf(mib):
            return []
        kept = [a for a in areas if mib <= r[a["start"]] * keep]
        for a in kept:
            a["mib"] = max(a["mib"], mib)
        return kept

    for i in np.flatnonzero(steep_up | steep_down):
        i = int(i)
        if i < pos:
            continue
        mib = max(mib, float(np.max(r[pos : i + 1])))
        down_areas = filtered(down_areas, mib)

        if steep_down[i]:
            end = _grow_area(steep_down, going_up, i, min_samples)
            down_areas.append({"start": i, "end": end, "mib": 0.0})
            pos = end + 1
            mib = float(r[pos])
            continue

        up_start = i
        up_end = _grow_area(steep_up, going_down, i, min_samples)
        pos = up_end + 1
        mib = float(r[pos])

        found = []
        for area in down_areas:
            s, e = area["start"], up_end
            if r[e + 1] * keep < area["mib"]:
                continue
            top = r[area["start"]]
            if top * keep >= r[e + 1]:
                while r[s + 1] > r[e + 1] and s < area["end"]:
                    s += 1
            elif r[e + 1] * keep >= top:
                while r[e - 1] > top and e > up_start:
                    e -= 1
            trimmed = _trim_by_predecessor(r, pred_plot, ordering, s, e)
            if trimmed is None:
                continue
            s, e = trimmed
            if e - s + 1 < min_cluster_size or s > area["end"] or e < up_start:
                continue
            found.append((s, e))
        spans.extend(reversed(found))
    return spans


def extract_clusters(
    assignment: ClusterAssignment, xi: float = 0.05, min_cluster_size: int | None = None
) -> dict[int, int]:
    """Label every snapshot member with a cluster id or NOISE.

    Innermost clusters win; ids count up from 0 in discovery order. The
    number of clusters is not fixed in advance.
    """
    if not 0.0 < xi < 1.0:
        raise ValueError("xi must lie in (0, 1)")
    if min_cluster_size is None:
        min_cluster_size = assignment.min_samples
    ordering = assignment.ordering
    plot = assignment.reachability_plot()
    pred_plot = [assignment.predecessor[m] for m in ordering]
    spans = xi_cluster_spans(plot, pred_plot, ordering, xi, assignment.min_samples, min_cluster_size)

    by_position = [NOISE] * len(ordering)
    next_id = 0
    for s, e in spans:
        if all(lbl == NOISE for lbl in by_position[s : e + 1]):
            by_position[s : e + 1] = [next_id] * (e - s + 1)
            next_id += 1
    labels = {m: by_position[k] for k, m in enumerate(ordering)}
    assignment.labels = labels
    return labels


def cluster_snapshot(snapshot: Snapshot, min_samples: int = 3, max_eps: float = 25.0, xi: float = 0.05) -> ClusterAssignment:
    assignment = optics_order(snapshot, min_samples, max_eps)
    extract_clusters(assignment, xi)
    return assignment


def nearby_trajectories(
    focal: Trajectory, pool: Sequence[Trajectory], radius: float, overlap: int = 1
) -> list[tuple[Trajectory, float]]:
    """Pool members sharing at least ``overlap`` timestamps with ``focal``
    whose mean co-temporal distance is within ``radius`` km, nearest first."""
    if radius <= 0 or overlap < 1:
        raise ValueError("radius must be positive and overlap >= 1")
    out = []
    for other in pool:
        if other.mmsi == focal.mmsi:
            continue
        _, fi, oi = np.intersect1d(focal.t, other.t, assume_unique=True, return_indices=True)
        if len(fi) < overlap:
            continue
        total = 0.0
        for a, b in zip(fi, oi):
            total += haversine_km((focal.lat[a], focal.lon[a]), (other.lat[b], other.lon[b]))
        mean = total / len(fi)
        if mean <= radius:
            out.append((other, mean))
    out.sort(key=lambda pair: (pair[1], pair[0].mmsi, pair[0].start))
    return out


def neighbors_within(
    focal: Trajectory, pool: Sequence[Trajectory], radius: float, overlap: int = 1
) -> list[tuple[int, float]]:
    return [(tr.mmsi, d) for tr, d in nearby_trajectories(focal, pool, radius, overlap)]


def proximity_pairs(members: Sequence[Trajectory], radius: float) -> list[tuple[int, int, int]]:
    """Co-temporal member pairs within ``radius`` km as ``(a, b, t_index)``
    with ``a < b``; members must share one time grid."""
    out = []
    for a in range(len(members)):
        for b in range(a + 1, len(members)):
            d = haversine_km_array(members[a].lat, members[a].lon, members[b].lat, members[b].lon)
            out.extend((a, b, int(t)) for t in np.flatnonzero(d <= radius))
    out.sort(key=lambda x: (x[2], x[0], x[1]))
    return out
