"""On-disk dataset: one JSON graph record per line plus an index and a
run manifest.

Layout of an output directory::

    graphs.jsonl    one TemporalGraph per line, keys sorted
    index.json      graph_id -> line number, focal vessel, window, label
    manifest.json   run configuration, input/output checksums and counts

Floats are written with Python's shortest round-trip repr, so parsing a
record gives back bit-identical features.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CorruptDataset, InvariantViolation, IoError
from .graph import FEATURES, TemporalGraph
from .labels import LabelSet

GRAPHS_FILE = "graphs.jsonl"
INDEX_FILE = "index.json"
MANIFEST_FILE = "manifest.json"
FORMAT_VERSION = 1


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def graph_to_record(g: TemporalGraph) -> dict:
    nodes = [[v, t, *g.features[v * g.w + t].tolist()] for v in range(g.k) for t in range(g.w)]
    lab = g.labels
    return {
        "graph_id": g.graph_id,
        "k": g.k,
        "w": g.w,
        "node_fields": ["v", "t", *FEATURES],
        "nodes": nodes,
        "edges": [[s, d, kind] for s, d, kind in g.edges],
        "labels": {
            "graph": lab.graph_label,
            "y_traj": lab.y_traj,
            "nodes": [[n, lab.node_sources[n]] for n in sorted(lab.node_sources)],
            "edges": [[s, d, sid] for (s, d), sid in sorted(lab.edge_labels.items())],
            "scenarios": lab.scenarios,
        },
        "meta": g.meta,
    }


def record_to_graph(rec: dict) -> TemporalGraph:
    try:
        k, w = int(rec["k"]), int(rec["w"])
        nodes = rec["nodes"]
        if len(nodes) != k * w:
            raise CorruptDataset(f"{rec['graph_id']}: {len(nodes)} nodes, expected {k * w}")
        features = np.empty((k * w, len(FEATURES)))
        for row in nodes:
            v, t = int(row[0]), int(row[1])
            features[v * w + t] = row[2:]
        node_labels = np.zeros((k, w), dtype=np.int8)
        node_sources = {}
        for n, sid in rec["labels"]["nodes"]:
            node_labels[n // w, n % w] = 1
            node_sources[int(n)] = sid
        labels = LabelSet(
            node_labels=node_labels,
            edge_labels={(int(s), int(d)): sid for s, d, sid in rec["labels"]["edges"]},
            node_sources=node_sources,
            scenarios=rec["labels"]["scenarios"],
        )
        g = TemporalGraph(
            graph_id=rec["graph_id"],
            k=k,
            w=w,
            features=features,
            edges=[(int(s), int(d), kind) for s, d, kind in rec["edges"]],
            labels=labels,
            meta=rec["meta"],
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CorruptDataset(f"malformed graph record: {exc!r}") from exc
    if labels.graph_label != rec["labels"]["graph"] or labels.y_traj != rec["labels"]["y_traj"]:
        raise CorruptDataset(f"{g.graph_id}: stored labels disagree with node/edge labels")
    return g


def emit_graphs(graphs: Iterable[TemporalGraph], path: str | Path) -> list[dict]:
    """Write graphs.jsonl and index.json; returns the index entries."""
    out = Path(path)
    index = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / GRAPHS_FILE, "w", encoding="utf-8", newline="\n") as fh:
            for line, g in enumerate(graphs):
                fh.write(dumps(graph_to_record(g)) + "\n")
                index.append(
                    {
                        "graph_id": g.graph_id,
                        "line": line,
                        "focal_mmsi": g.meta.get("focal_mmsi"),
                        "window_start": g.meta.get("window_start"),
                        "graph_label": g.graph_label,
                    }
                )
        (out / INDEX_FILE).write_text(json.dumps(index, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write dataset to {out}: {exc}") from exc
    return index


def write_manifest(manifest: dict, path: str | Path) -> None:
    try:
        (Path(path) / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write manifest: {exc}") from exc


def emit_dataset(graphs: Sequence[TemporalGraph], path: str | Path, manifest: dict | None = None) -> None:
    """Graphs, index and (last) the manifest. ``manifest["counts"]`` is
    filled from the graphs when absent."""
    graphs = list(graphs)
    emit_graphs(graphs, path)
    manifest = dict(manifest or {"format_version": FORMAT_VERSION})
    manifest.setdefault("counts", summarize(graphs))
    manifest.setdefault("outputs", output_checksums(path))
    write_manifest(manifest, path)


def iter_dataset(path: str | Path):
    f = Path(path) / GRAPHS_FILE
    if not f.exists():
        raise CorruptDataset(f"{f} not found")
    with open(f, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptDataset(f"{f}:{lineno}: {exc}") from exc
            yield record_to_graph(rec)


def read_dataset(path: str | Path) -> list[TemporalGraph]:
    return list(iter_dataset(path))


def read_manifest(path: str | Path) -> dict:
    f = Path(path) / MANIFEST_FILE
    try:
        return json.loads(f.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptDataset(f"cannot read {f}: {exc}") from exc


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def output_checksums(path: str | Path) -> dict:
    return {name: sha256_file(Path(path) / name) for name in (GRAPHS_FILE, INDEX_FILE)}


def summarize(graphs: Iterable[TemporalGraph]) -> dict:
    """Dataset counts: class balance, label totals per level, vessel types,
    synthetic share and clamping events."""
    n = 0
    positive = Counter(graph=0, node=0, edge=0, trajectory=0)
    focal_types: Counter = Counter()
    member_types: Counter = Counter()
    members = synthetic = clamps = 0
    scenarios: Counter = Counter()
    for g in graphs:
        n += 1
        lab = g.labels
        positive["graph"] += lab.graph_label
        positive["node"] += int(lab.node_labels.sum())
        positive["edge"] += len(lab.edge_labels)
        positive["trajectory"] += sum(lab.y_traj)
        for i, m in enumerate(g.meta["members"]):
            member_types[m["vessel_type"]] += 1
            if i == 0:
                focal_types[m["vessel_type"]] += 1
            members += 1
            synthetic += m["origin"] == "SYNTHETIC"
        for sc in lab.scenarios:
            scenarios[sc["id"]] += 1
            clamps += sum(e.get("clamp_events", 0) for e in sc["edits"])
    return {
        "graphs": n,
        "r_traj": positive["graph"] / n if n else 0.0,
        "positive_labels": dict(sorted(positive.items())),
        "focal_vessel_types": dict(sorted(focal_types.items())),
        "member_vessel_types": dict(sorted(member_types.items())),
        "members": members,
        "synthetic_members": synthetic,
        "synthetic_fraction": synthetic / members if members else 0.0,
        "clamp_events": clamps,
        "scenarios": dict(sorted(scenarios.items())),
    }


def compute_stats(path: str | Path) -> dict:
    """Recompute dataset counts from the files on disk, validating every
    graph on the way."""
    def checked():
        for g in iter_dataset(path):
            try:
                g.check()
            except InvariantViolation as exc:
                raise CorruptDataset(str(exc)) from exc
            yield g

    return summarize(checked())
