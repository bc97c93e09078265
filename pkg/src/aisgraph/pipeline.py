"""End-to-end dataset generation.

Stages run in a fixed order: ingest, corpus rate fit, window planning,
per-window clustering and group assembly, dataset-level selection,
scenario injection, graph construction and emission. Every random draw
comes from a stream keyed on (seed, purpose, focal mmsi, window start), so
output bytes do not depend on the worker count. The manifest is written
last; its presence marks a complete run.
"""

from __future__ import annotations

import hashlib
import json
import logging
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Callable, Sequence

from . import dataset, rng as rngs
from .errors import AisGraphError, ConfigError, InputError, UnresolvableTarget
from .graph import attach_labels, build_temporal_graph, window_plan
from .ingest import OMTAD_REGION, Trajectory, prepare_trajectories, read_ais_file
from .injector import DEFAULT_K_SIGMA, DEFAULT_SOG_MAX, RatioConfig, select_anomalous_trajectories
from .kinematics import RateDistribution, fit_rate_distribution, rate_of_change
from .labels import LabelSet
from .neighborhood import NOISE, cluster_snapshot, snapshot_at
from .scenarios import InjectionContext, Scenario, default_scenario, load_scenarios, realize_scenario, resolve_targets
from .synthesizer import AugmentedGroup, SynthesisBounds, ensure_density

log = logging.getLogger(__name__)

ENV_FIELDS = ("wind_bin", "wave_bin", "current_bin", "visibility")

EnvLookup = Callable[[int, int], dict]


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


@dataclass
class PerceptionBundle:
    """Per-window input record: AIS states, derived rates, environment
    slots and source trajectory ids."""

    ais: list[dict]
    derived: list[dict]
    env: dict
    provenance: list[str]


def build_perception_bundle(
    focal: Trajectory, group: AugmentedGroup, env_lookup: EnvLookup | None = None
) -> PerceptionBundle:
    """Slot-fill the bundle for ``focal``'s window.

    Without ``env_lookup`` every environment field is an explicit None.
    A lookup receives (focal mmsi, window start) and may return any subset
    of the environment fields; absent ones stay None.
    """
    ais, derived = [], []
    for tr in group.members:
        for i in range(tr.w):
            ais.append(
                {
                    "mmsi": tr.mmsi,
                    "t": int(tr.t[i]),
                    "lat": float(tr.lat[i]),
                    "lon": float(tr.lon[i]),
                    "sog": float(tr.sog[i]),
                    "cog": float(tr.cog[i]),
                }
            )
        rates = rate_of_change(tr)
        for i in range(len(rates)):
            derived.append(
                {"mmsi": tr.mmsi, "t": int(tr.t[i + 1]), "dsog_dt": float(rates.a[i]), "dcog_dt": float(rates.omega[i])}
            )
    env = dict.fromkeys(ENV_FIELDS)
    if env_lookup is not None:
        found = env_lookup(focal.mmsi, focal.start) or {}
        env.update({k: found[k] for k in ENV_FIELDS if k in found})
    return PerceptionBundle(ais=ais, derived=derived, env=env, provenance=[tag.source for tag in group.provenance])


@dataclass
class Config:
    input: str
    output: str
    seed: int = 0
    dt: int = 600
    window_hours: float = 4.0
    stride: int | None = None
    gap_threshold: float = 3600.0
    k_vessels: int = 4
    r_node: float = 0.5
    r_traj: float = 0.1
    k_sigma: float = DEFAULT_K_SIGMA
    scenario_files: list[str] = field(default_factory=list)
    proximity_km: float = 10.0
    temporal_edges_only: bool = False
    neighbor_radius_km: float = 10.0
    optics_min_samples: int = 3
    optics_max_eps_km: float = 25.0
    optics_xi: float = 0.05
    sog_jitter: float = 2.0
    cog_jitter: float = 15.0
    pos_jitter_km: float = 5.0
    sog_max: float = DEFAULT_SOG_MAX
    exclude_synthetic_from_injection: bool = False
    positive_only: bool = False
    workers: int = 1

    @property
    def w(self) -> int:
        return int(round(self.window_hours * 3600 / self.dt))

    @property
    def proximity_radius(self) -> float | None:
        return None if self.temporal_edges_only else self.proximity_km

    def validate(self) -> None:
        """Reject bad settings before any work starts."""
        def need(ok: bool, msg: str):
            if not ok:
                raise ConfigError(msg)

        need(self.seed >= 0, "seed must be non-negative")
        need(self.dt > 0, "dt must be positive")
        need(self.window_hours > 0, "window length must be positive")
        need(abs(self.window_hours * 3600 / self.dt - self.w) < 1e-9, "window length must be a whole number of dt steps")
        need(self.w >= 2, "window must span at least two samples")
        need(self.stride is None or self.stride >= 1, "stride must be >= 1")
        need(self.gap_threshold > 0, "gap threshold must be positive")
        need(self.k_vessels >= 1, "k_vessels must be >= 1")
        for name in ("r_node", "r_traj"):
            v = getattr(self, name)
            need(0.0 < v <= 1.0, f"{name} must lie in (0, 1], got {v}")
        need(self.k_sigma > 3.0, f"k_sigma must exceed 3, got {self.k_sigma}")
        need(self.proximity_km > 0 and self.neighbor_radius_km > 0, "radii must be positive")
        need(self.optics_min_samples >= 2, "OPTICS min_samples must be >= 2")
        need(self.optics_max_eps_km > 0, "OPTICS max_eps must be positive")
        need(0.0 < self.optics_xi < 1.0, "OPTICS xi must lie in (0, 1)")
        need(min(self.sog_jitter, self.cog_jitter, self.pos_jitter_km) >= 0, "jitter bounds must be non-negative")
        need(self.sog_max > 0, "sog_max must be positive")
        need(self.workers >= 1, "workers must be >= 1")

    def parameters(self) -> dict:
        """Everything that shapes the output, minus the output location."""
        d = asdict(self)
        for key in ("output", "workers", "input"):
            d.pop(key)
        d["w"] = self.w
        d["stride"] = self.stride or self.w
        d["proximity_radius_km"] = self.proximity_radius
        return d


@dataclass
class WindowTask:
    focal: Trajectory
    pool: list[Trajectory]


@dataclass
class WindowGroup:
    focal: Trajectory
    group: AugmentedGroup
    bundle: PerceptionBundle
    eligible: list[int]  # indices into the scenario list that resolve on this group


def load_config_scenarios(cfg: Config) -> list[Scenario]:
    if not cfg.scenario_files:
        return [default_scenario(cfg.k_sigma)]
    out: list[Scenario] = []
    for f in cfg.scenario_files:
        out.extend(load_scenarios(f))
    ids = [sc.id for sc in out]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate scenario ids across files: {ids}")
    return out


def _pooled_fit(trajs: Sequence[Trajectory]) -> RateDistribution | None:
    if not trajs:
        return None
    return fit_rate_distribution([rate_of_change(tr) for tr in trajs])


def _cluster_pools(trajs: Sequence[Trajectory], plan, w: int, cfg: Config) -> list[WindowTask]:
    """Focal window plus its cluster mates at the window start."""
    by_mmsi: dict[int, list[Trajectory]] = {}
    for tr in trajs:
        by_mmsi.setdefault(tr.mmsi, []).append(tr)
    labels_at: dict[int, dict[int, int]] = {}
    tasks = []
    for mmsi, start in plan:
        focal = next(tr for tr in by_mmsi[mmsi] if tr.covers(start, w)).window(start, w)
        if start not in labels_at:
            snap = snapshot_at(trajs, start)
            labels_at[start] = cluster_snapshot(
                snap, cfg.optics_min_samples, cfg.optics_max_eps_km, cfg.optics_xi
            ).labels
        labels = labels_at[start]
        cid = labels.get(mmsi, NOISE)
        mates = {m for m, c in labels.items() if c == cid and m != mmsi} if cid != NOISE else set()
        pool = [tr for m in sorted(mates) for tr in by_mmsi[m] if tr.covers(start, w)]
        tasks.append(WindowTask(focal, pool))
    return tasks


def _assemble(args) -> WindowGroup:
    task, cfg, scenarios = args
    bounds = SynthesisBounds(cfg.sog_jitter, cfg.cog_jitter, cfg.pos_jitter_km, cfg.seed, cfg.sog_max)
    rng = rngs.keyed_rng(cfg.seed, rngs.SYNTHESIS, task.focal.mmsi, task.focal.start)
    group = ensure_density(task.focal, task.pool, cfg.k_vessels, cfg.neighbor_radius_km, bounds, rng)
    group.validate(cfg.k_vessels)
    eligible = []
    for i, sc in enumerate(scenarios):
        try:
            resolve_targets(sc, group, cfg.exclude_synthetic_from_injection)
        except UnresolvableTarget:
            continue
        eligible.append(i)
    return WindowGroup(task.focal, group, build_perception_bundle(task.focal, group), eligible)


def _realize(args):
    wg, choice, cfg, scenarios, pooled = args
    start, w = wg.focal.start, wg.focal.w
    group, labels = wg.group, LabelSet.empty(cfg.k_vessels, w)
    clamps = 0
    if choice is not None:
        ctx = InjectionContext(
            pooled=pooled,
            sog_max=cfg.sog_max,
            signed=not cfg.positive_only,
            exclude_synthetic=cfg.exclude_synthetic_from_injection,
            proximity_radius=cfg.proximity_radius,
        )
        rng = rngs.keyed_rng(cfg.seed, rngs.INJECTION, wg.focal.mmsi, start)
        group, labels = realize_scenario(scenarios[choice], wg.group, RatioConfig(cfg.r_node, cfg.r_traj), rng, ctx)
        group.validate(cfg.k_vessels)
        clamps = sum(e.get("clamp_events", 0) for sc in labels.scenarios for e in sc["edits"])
    graph = build_temporal_graph(group, (start, w), cfg.proximity_radius)
    graph.meta["clamp_events"] = clamps
    graph.meta["perception"] = {"env": wg.bundle.env, "provenance": wg.bundle.provenance}
    graph = attach_labels(graph, labels)
    graph.check()
    return graph


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def generate_graphs(
    cfg: Config, trajs: Sequence[Trajectory], scenarios: Sequence[Scenario], env_lookup: EnvLookup | None = None
):
    """Graphs for every planned window, in (focal mmsi, window start) order."""
    w = cfg.w
    plan = window_plan(trajs, w, cfg.stride or w)
    pooled = _pooled_fit(trajs)
    tasks = _cluster_pools(trajs, plan, w, cfg)
    groups = _map(_assemble, [(t, cfg, scenarios) for t in tasks], cfg.workers)
    if env_lookup is not None:
        for g in groups:
            g.bundle = build_perception_bundle(g.focal, g.group, env_lookup)

    candidates = [i for i, g in enumerate(groups) if g.eligible]
    sel_rng = rngs.keyed_rng(cfg.seed, rngs.SELECTION)
    try:
        selected = select_anomalous_trajectories(candidates, cfg.r_traj, sel_rng, total=len(groups))
    except ValueError as exc:
        raise ConfigError(f"scenario targets resolve on too few windows: {exc}") from exc
    choice: list[int | None] = [None] * len(groups)
    for j, i in enumerate(selected):
        choice[i] = groups[i].eligible[j % len(groups[i].eligible)]

    jobs = [(g, choice[i], cfg, scenarios, pooled) for i, g in enumerate(groups)]
    return _map(_realize, jobs, cfg.workers), pooled


def _config_hash(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def run_pipeline(cfg: Config, env_lookup: EnvLookup | None = None) -> dict:
    """Generate the dataset under ``cfg.output`` and return the manifest.

    On any error the files this run created are removed and the error is
    re-raised.
    """
    cfg.validate()
    scenarios = load_config_scenarios(cfg)

    inp = Path(cfg.input)
    if not inp.is_file():
        raise InputError(f"input file {inp} not found")
    out = Path(cfg.output)
    created = not out.exists()
    try:
        (out / dataset.MANIFEST_FILE).unlink(missing_ok=True)
        records = read_ais_file(inp, bounds=OMTAD_REGION)
        trajs, report = prepare_trajectories(records, cfg.dt, cfg.gap_threshold, cfg.w)
        graphs, pooled = generate_graphs(cfg, trajs, scenarios, env_lookup)

        dataset.emit_graphs(graphs, out)
        params = cfg.parameters()
        manifest = {
            "format_version": dataset.FORMAT_VERSION,
            "tool_version": tool_version(),
            "seed": cfg.seed,
            "config_hash": _config_hash(params),
            "parameters": params,
            "scenarios": [sc.to_doc() for sc in scenarios],
            "edge_semantics": {
                "temporal": "forward chain (v, t) -> (v, t+1) per vessel",
                "proximity": None if cfg.proximity_radius is None else
                f"co-temporal pairs within {cfg.proximity_radius} km, both directions",
            },
            "pooled_rates": None if pooled is None else pooled.to_dict(),
            "inputs": {"path": str(inp), "sha256": dataset.sha256_file(inp)},
            "ingest": {
                "records": report.records,
                "segments": report.segments,
                "too_short": report.too_short,
                "trajectories": report.trajectories,
            },
            "counts": dataset.summarize(graphs),
            "outputs": dataset.output_checksums(out),
        }
        dataset.write_manifest(manifest, out)
    except BaseException:
        _cleanup(out, created)
        raise
    log.info("wrote %d graphs to %s", manifest["counts"]["graphs"], out)
    return manifest


def _cleanup(out: Path, created: bool) -> None:
    if not out.exists():
        return
    if created:
        shutil.rmtree(out, ignore_errors=True)
        return
    for name in (dataset.GRAPHS_FILE, dataset.INDEX_FILE, dataset.MANIFEST_FILE):
        (out / name).unlink(missing_ok=True)


__all__ = [
    "AisGraphError",
    "Config",
    "PerceptionBundle",
    "build_perception_bundle",
    "generate_graphs",
    "run_pipeline",
]
