"""Directed spatio-temporal graphs over vessel groups.

Node ``v * w + t`` is vessel ``v`` at time index ``t``. TEMPORAL edges
chain each vessel forward in time; PROXIMITY edges join co-temporal states
of different vessels within a radius, in both directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DanglingLabel, IncompleteCoverage, InvariantViolation
from .ingest import Trajectory
from .kinematics import rate_of_change
from .labels import LabelSet
from .neighborhood import proximity_pairs
from .synthesizer import AugmentedGroup

TEMPORAL = "TEMPORAL"
PROXIMITY = "PROXIMITY"
FEATURES = ("lat", "lon", "sog", "cog", "dsog_dt", "dcog_dt")


@dataclass(eq=False)
class TemporalGraph:
    graph_id: str
    k: int
    w: int
    features: np.ndarray  # (k * w, len(FEATURES))
    edges: list[tuple[int, int, str]]
    labels: LabelSet
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    def node(self, v: int, t: int) -> int:
        return v * self.w + t

    @property
    def graph_label(self) -> int:
        return self.labels.graph_label

    def edges_of_kind(self, kind: str) -> list[tuple[int, int]]:
        return [(s, d) for s, d, k in self.edges if k == kind]

    def check(self) -> None:
        """Structural invariants; raises InvariantViolation."""
        k, w = self.k, self.w
        if self.features.shape != (k * w, len(FEATURES)):
            raise InvariantViolation(f"{self.graph_id}: {self.features.shape[0]} nodes, expected {k * w}")
        temporal = self.edges_of_kind(TEMPORAL)
        expected = [(v * w + t, v * w + t + 1) for v in range(k) for t in range(w - 1)]
        if sorted(temporal) != expected:
            raise InvariantViolation(f"{self.graph_id}: temporal edges are not the k*(w-1) forward chains")
        prox = set(self.edges_of_kind(PROXIMITY))
        for s, d in prox:
            if (d, s) not in prox or s // w == d // w or s % w != d % w:
                raise InvariantViolation(f"{self.graph_id}: bad proximity edge {s}->{d}")
        if self.edges != sorted(self.edges, key=lambda e: (e[0], e[1])):
            raise InvariantViolation(f"{self.graph_id}: edges not in (src, dst) order")
        _check_labels(self, self.labels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TemporalGraph):
            return NotImplemented
        return (
            self.graph_id == other.graph_id
            and self.k == other.k
            and self.w == other.w
            and np.array_equal(self.features, other.features)
            and self.edges == other.edges
            and np.array_equal(self.labels.node_labels, other.labels.node_labels)
            and self.labels.node_sources == other.labels.node_sources
            and self.labels.edge_labels == other.labels.edge_labels
            and self.labels.scenarios == other.labels.scenarios
            and self.meta == other.meta
        )


def node_features(member: Trajectory) -> np.ndarray:
    rates = rate_of_change(member)
    dsog = np.concatenate(([0.0], rates.a))
    dcog = np.concatenate(([0.0], rates.omega))
    return np.column_stack([member.lat, member.lon, member.sog, member.cog, dsog, dcog])


def build_temporal_graph(
    group: AugmentedGroup,
    window: tuple[int, int],
    proximity_radius: float | None = 10.0,
    graph_id: str | None = None,
    labels: LabelSet | None = None,
) -> TemporalGraph:
    """Graph of ``k * w`` vessel states for one window.

    ``proximity_radius=None`` builds temporal chains only.
    """
    start, w = window
    grid = start + group.focal.dt * np.arange(w, dtype=np.int64)
    for tr in group.members:
        if tr.w != w or not np.array_equal(tr.t, grid):
            raise IncompleteCoverage(f"member {tr.mmsi} does not cover window {start}+{w}")
    k = len(group.members)
    features = np.vstack([node_features(tr) for tr in group.members])

    edges = [(v * w + t, v * w + t + 1, TEMPORAL) for v in range(k) for t in range(w - 1)]
    if proximity_radius is not None:
        for a, b, t in proximity_pairs(group.members, proximity_radius):
            edges.append((a * w + t, b * w + t, PROXIMITY))
            edges.append((b * w + t, a * w + t, PROXIMITY))
    edges.sort(key=lambda e: (e[0], e[1]))

    meta = {
        "window_start": int(start),
        "dt": int(group.focal.dt),
        "k_vessels": k,
        "w": w,
        "focal_mmsi": group.focal.mmsi,
        "proximity_radius_km": proximity_radius,
        "members": [
            {"mmsi": tr.mmsi, "vessel_type": tr.vessel_type.value, **tag.to_dict()}
            for tr, tag in zip(group.members, group.provenance)
        ],
    }
    graph = TemporalGraph(
        graph_id=graph_id or f"{group.focal.mmsi}-{start}",
        k=k,
        w=w,
        features=features,
        edges=edges,
        labels=LabelSet.empty(k, w),
        meta=meta,
    )
    if labels is not None:
        graph = attach_labels(graph, labels)
    return graph


def _check_labels(graph: TemporalGraph, labels: LabelSet) -> None:
    n = graph.k * graph.w
    if labels.node_labels.shape != (graph.k, graph.w):
        raise DanglingLabel(f"node label shape {labels.node_labels.shape} != ({graph.k}, {graph.w})")
    bad_nodes = [i for i in labels.node_sources if not 0 <= i < n]
    if bad_nodes:
        raise DanglingLabel(f"node labels reference missing nodes {bad_nodes[:5]}")
    prox = set(graph.edges_of_kind(PROXIMITY))
    bad_edges = [e for e in labels.edge_labels if e not in prox]
    if bad_edges:
        raise DanglingLabel(f"edge labels reference missing edges {bad_edges[:5]}")
    labels.check()


def attach_labels(graph: TemporalGraph, labels: LabelSet) -> TemporalGraph:
    _check_labels(graph, labels)
    return TemporalGraph(
        graph_id=graph.graph_id,
        k=graph.k,
        w=graph.w,
        features=graph.features,
        edges=graph.edges,
        labels=labels,
        meta=graph.meta,
    )


def window_plan(trajs: Sequence[Trajectory], w: int, stride: int) -> list[tuple[int, int]]:
    """(focal mmsi, window start) for every window a trajectory fully covers."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    plan = []
    for tr in trajs:
        for i in range(0, tr.w - w + 1, stride):
            plan.append((tr.mmsi, int(tr.t[i])))
    plan.sort()
    return plan
