"""Node, edge and graph labels with provenance back to the scenario that
produced them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvariantViolation
from .ingest import Trajectory
from .injector import MemberEdit
from .neighborhood import proximity_pairs


@dataclass
class LabelSet:
    """Labels for one k x w graph.

    ``node_labels[v, t]`` is 1 for anomalous states. ``edge_labels`` and
    ``node_sources`` hold positives only and map to the scenario id that
    caused them; ``scenarios`` keeps the full provenance records.
    """

    node_labels: np.ndarray
    edge_labels: dict[tuple[int, int], str] = field(default_factory=dict)
    node_sources: dict[int, str] = field(default_factory=dict)
    scenarios: list[dict] = field(default_factory=list)

    @classmethod
    def empty(cls, k: int, w: int) -> "LabelSet":
        return cls(node_labels=np.zeros((k, w), dtype=np.int8))

    @property
    def k(self) -> int:
        return self.node_labels.shape[0]

    @property
    def w(self) -> int:
        return self.node_labels.shape[1]

    @property
    def y_traj(self) -> list[int]:
        return [int(v) for v in self.node_labels.any(axis=1)]

    @property
    def graph_label(self) -> int:
        return int(any(self.y_traj) or bool(self.edge_labels))

    def check(self) -> None:
        ids = {sc["id"] for sc in self.scenarios}
        positives = set(np.flatnonzero(self.node_labels.ravel()).tolist())
        if positives != set(self.node_sources):
            raise InvariantViolation("node label provenance does not match positive nodes")
        orphans = {sid for sid in list(self.node_sources.values()) + list(self.edge_labels.values()) if sid not in ids}
        if orphans:
            raise InvariantViolation(f"labels reference unknown scenarios {sorted(orphans)}")


def generate_labels(
    edits: Sequence[MemberEdit],
    scenario,
    members: Sequence[Trajectory],
    proximity_radius: float | None,
) -> LabelSet:
    """Labels implied by a scenario's edits.

    Node labels are the union of the edit masks. A proximity edge is
    anomalous when both of its co-temporal endpoint states are; with
    ``proximity_radius=None`` the graph has no proximity edges and so no
    edge labels.
    """
    k = len(members)
    w = members[0].w if members else 0
    labels = LabelSet.empty(k, w)
    if not edits:
        return labels
    for edit in edits:
        labels.node_labels[edit.member] |= edit.mask.z.astype(np.int8)
    for node in np.flatnonzero(labels.node_labels.ravel()):
        labels.node_sources[int(node)] = scenario.id

    if proximity_radius is not None:
        for a, b, t in proximity_pairs(members, proximity_radius):
            if labels.node_labels[a, t] and labels.node_labels[b, t]:
                u, v = a * w + t, b * w + t
                labels.edge_labels[(u, v)] = scenario.id
                labels.edge_labels[(v, u)] = scenario.id

    labels.scenarios.append(
        {
            "id": scenario.id,
            "type": scenario.anomaly_type.value,
            "level": scenario.level.value,
            "severity": scenario.severity,
            "target": scenario.target.to_text(),
            "prompt_text": scenario.prompt_text,
            "rationale": _rationale(scenario, edits, members, len(labels.edge_labels)),
            "edits": [
                {"member": e.member, "mmsi": members[e.member].mmsi, "s": e.mask.s, "m": e.mask.m, **_strip(e.record)}
                for e in edits
            ],
        }
    )
    labels.check()
    return labels


def _strip(record: dict) -> dict:
    return {k: v for k, v in record.items() if k not in ("s", "m")}


def _rationale(scenario, edits, members, n_edges: int) -> str:
    vessels = ", ".join(str(members[e.member].mmsi) for e in edits)
    spans = "; ".join(f"steps {e.mask.s}-{e.mask.s + e.mask.m - 1}" for e in edits)
    text = (
        f"{scenario.id}: {scenario.rationale} Applied to vessel(s) {vessels} over {spans}; "
        f"{int(sum(e.mask.m for e in edits))} anomalous node(s), {n_edges} anomalous edge(s)."
    )
    if scenario.prompt_text:
        text += f" Prompt: {scenario.prompt_text}"
    return text
