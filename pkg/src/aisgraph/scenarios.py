"""Scenario documents and their realization as edits of a vessel group.

A scenario is a flat key/value document::

    id: fishing-speed
    type: SPEED_SPIKE
    severity: 4.0
    target: vessel_type=Fishing
    prompt_text: fishing vessel suddenly sprints

Keys: ``id``, ``type``, ``level``, ``severity``, ``target`` (or ``targets``
as a list) and ``prompt_text``; anything else is rejected. Target
selectors are ``all``, ``focal``, ``member=0,2``, ``mmsi=...``,
``vessel_type=...`` and ``region=lon_min,lat_min,lon_max,lat_max``.

Free text goes through a :class:`ScenarioInterpreter`; the bundled
:class:`DslInterpreter` reads the document format above. Anything that
turns prose into a :class:`Scenario` (for instance a language model
client) can be plugged in instead.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np
import yaml

from .errors import DegenerateSigma, SchemaViolation, UnresolvableTarget
from .ingest import RegionBounds, VesselType
from .injector import (
    DEFAULT_K_SIGMA,
    DEFAULT_SOG_MAX,
    AnomalyMask,
    Channel,
    MemberEdit,
    RatioConfig,
    fit_for_track,
    perturb_kinematics,
    reintegrate,
    round_half_up,
    sample_anomaly_block,
)
from .kinematics import KM_PER_DEG, KM_PER_NM, RateDistribution, bearing_and_distance, dead_reckon, wrap_course, wrap_course_array
from .labels import LabelSet, generate_labels
from .synthesizer import SYNTHETIC, AugmentedGroup


class AnomalyType(str, Enum):
    SPEED_SPIKE = "SPEED_SPIKE"
    COURSE_DEVIATION = "COURSE_DEVIATION"
    KINEMATIC_BOTH = "KINEMATIC_BOTH"
    RENDEZVOUS = "RENDEZVOUS"
    LOITERING = "LOITERING"
    GROUP_DEVIATION = "GROUP_DEVIATION"


class Level(str, Enum):
    NODE = "NODE"
    EDGE = "EDGE"
    GRAPH = "GRAPH"


KINEMATIC_CHANNELS = {
    AnomalyType.SPEED_SPIKE: Channel.SOG,
    AnomalyType.COURSE_DEVIATION: Channel.COG,
    AnomalyType.KINEMATIC_BOTH: Channel.BOTH,
}
# severity is a sigma multiplier for these and must exceed 3
SIGMA_TYPES = set(KINEMATIC_CHANNELS) | {AnomalyType.GROUP_DEVIATION}

ALLOWED_LEVELS = {
    AnomalyType.SPEED_SPIKE: (Level.NODE,),
    AnomalyType.COURSE_DEVIATION: (Level.NODE,),
    AnomalyType.KINEMATIC_BOTH: (Level.NODE,),
    AnomalyType.RENDEZVOUS: (Level.EDGE,),
    AnomalyType.LOITERING: (Level.NODE, Level.GRAPH),
    AnomalyType.GROUP_DEVIATION: (Level.GRAPH,),
}

DEFAULT_TARGETS = {
    AnomalyType.RENDEZVOUS: "member=0,1",
    AnomalyType.GROUP_DEVIATION: "all",
}

DESCRIPTIONS = {
    AnomalyType.SPEED_SPIKE: "SOG rate replaced by mu {sign} {sev} sigma",
    AnomalyType.COURSE_DEVIATION: "COG rate replaced by mu {sign} {sev} sigma",
    AnomalyType.KINEMATIC_BOTH: "SOG and COG rates replaced by mu {sign} {sev} sigma",
    AnomalyType.RENDEZVOUS: "two vessels steer together and idle side by side",
    AnomalyType.LOITERING: "vessel idles below {sev} kn with erratic course",
    AnomalyType.GROUP_DEVIATION: "whole group turns together at {sev} sigma of the course rate",
}

DOC_KEYS = {"id", "type", "level", "severity", "target", "targets", "prompt_text"}
RENDEZVOUS_SEPARATION_KM = 0.1
HOLD_SOG = 0.2


@dataclass(frozen=True)
class Target:
    kind: str
    values: tuple = ()

    KINDS = ("all", "focal", "member", "mmsi", "vessel_type", "region")

    @classmethod
    def parse(cls, spec) -> "Target":
        if isinstance(spec, (list, tuple)):
            return cls._from_list(spec)
        if not isinstance(spec, str):
            raise SchemaViolation(f"target must be a string or list, got {spec!r}")
        text = spec.strip()
        if text in ("all", "focal"):
            return cls(text)
        kind, sep, rest = text.partition("=")
        kind = kind.strip()
        if not sep or kind not in cls.KINDS:
            raise SchemaViolation(f"bad target selector {spec!r}")
        items = [x.strip() for x in rest.split(",") if x.strip()]
        if not items:
            raise SchemaViolation(f"empty target selector {spec!r}")
        try:
            if kind in ("member", "mmsi"):
                return cls(kind, tuple(int(x) for x in items))
            if kind == "vessel_type":
                return cls(kind, tuple(VesselType.parse(x) for x in items))
            if kind == "region":
                lon_min, lat_min, lon_max, lat_max = (float(x) for x in items)
                RegionBounds(lon_min, lon_max, lat_min, lat_max)
                return cls(kind, (lon_min, lat_min, lon_max, lat_max))
        except Exception as exc:
            raise SchemaViolation(f"bad target selector {spec!r}: {exc}") from exc
        raise SchemaViolation(f"bad target selector {spec!r}")

    @classmethod
    def _from_list(cls, items) -> "Target":
        # a list names vessels by mmsi; "focal" and "member:N" are also accepted
        tokens = []
        for item in items:
            if isinstance(item, bool):
                raise SchemaViolation(f"bad target {item!r}")
            if isinstance(item, int):
                tokens.append(("mmsi", item))
            elif isinstance(item, str) and item.strip() == "focal":
                tokens.append(("member", 0))
            elif isinstance(item, str) and item.strip().startswith("member:"):
                try:
                    tokens.append(("member", int(item.split(":", 1)[1])))
                except ValueError as exc:
                    raise SchemaViolation(f"bad target {item!r}") from exc
            elif isinstance(item, str) and item.strip().isdigit():
                tokens.append(("mmsi", int(item)))
            else:
                raise SchemaViolation(f"bad target {item!r}")
        if not tokens:
            raise SchemaViolation("empty target list")
        return cls("list", tuple(tokens))

    def to_text(self) -> str:
        if self.kind in ("all", "focal"):
            return self.kind
        if self.kind == "list":
            return "[" + ", ".join(f"{k}:{v}" for k, v in self.values) + "]"
        if self.kind == "vessel_type":
            return "vessel_type=" + ",".join(v.value for v in self.values)
        return f"{self.kind}=" + ",".join(str(v) for v in self.values)

    def resolve(self, group: AugmentedGroup, real_only: bool = False) -> list[int]:
        """Member indices selected in ``group``, in group order."""
        members = group.members
        eligible = [
            i for i in range(len(members)) if not (real_only and group.provenance[i].origin == SYNTHETIC)
        ]
        if self.kind == "all":
            chosen = eligible
        elif self.kind == "focal":
            chosen = [0] if 0 in eligible else []
        elif self.kind == "member":
            chosen = [i for i in self.values if i in eligible]
        elif self.kind == "mmsi":
            chosen = [i for i in eligible if members[i].mmsi in self.values]
        elif self.kind == "vessel_type":
            chosen = [i for i in eligible if members[i].vessel_type in self.values]
        elif self.kind == "region":
            lon_min, lat_min, lon_max, lat_max = self.values
            chosen = [
                i for i in eligible if lon_min <= members[i].lon[0] <= lon_max and lat_min <= members[i].lat[0] <= lat_max
            ]
        else:
            by_mmsi = {members[i].mmsi: i for i in eligible}
            chosen = []
            for kind, v in self.values:
                i = by_mmsi.get(v) if kind == "mmsi" else (v if v in eligible else None)
                if i is not None and i not in chosen:
                    chosen.append(i)
        return chosen


@dataclass(frozen=True)
class Scenario:
    id: str
    anomaly_type: AnomalyType
    level: Level
    severity: float
    target: Target
    prompt_text: str = ""
    rationale: str = ""

    @property
    def channel(self) -> Channel | None:
        return KINEMATIC_CHANNELS.get(self.anomaly_type)

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "type": self.anomaly_type.value,
            "level": self.level.value,
            "severity": self.severity,
            "target": self.target.to_text(),
            "prompt_text": self.prompt_text,
        }


class ScenarioInterpreter(Protocol):
    def interpret(self, text: str) -> Scenario: ...


class DslInterpreter:
    """Reads the flat key/value scenario format (YAML syntax)."""

    def interpret(self, text: str) -> Scenario:
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise SchemaViolation(f"unparseable scenario: {exc}") from exc
        return interpret_scenario(doc)


def interpret_scenario(doc: Mapping | str, interpreter: ScenarioInterpreter | None = None) -> Scenario:
    """Validate a scenario document and fill defaults.

    Strings are handed to ``interpreter`` (the DSL reader by default).
    Severity defaults to 3.5 for sigma-scaled types and 1.0 otherwise; the
    level is inferred from the type when omitted.
    """
    if isinstance(doc, str):
        return (interpreter or DslInterpreter()).interpret(doc)
    if not isinstance(doc, Mapping):
        raise SchemaViolation(f"scenario must be a mapping, got {type(doc).__name__}")
    unknown = set(doc) - DOC_KEYS
    if unknown:
        raise SchemaViolation(f"unknown scenario keys {sorted(unknown)}")
    if "target" in doc and "targets" in doc:
        raise SchemaViolation("give either target or targets, not both")

    try:
        atype = AnomalyType(str(doc["type"]).strip().upper())
    except KeyError:
        raise SchemaViolation("scenario lacks a type") from None
    except ValueError:
        raise SchemaViolation(f"unknown anomaly type {doc['type']!r}") from None

    if doc.get("level") is None:
        level = ALLOWED_LEVELS[atype][0]
    else:
        try:
            level = Level(str(doc["level"]).strip().upper())
        except ValueError:
            raise SchemaViolation(f"unknown level {doc['level']!r}") from None
    if level not in ALLOWED_LEVELS[atype]:
        raise SchemaViolation(f"{atype.value} cannot be realised at {level.value} level")

    raw = doc.get("severity")
    if raw is None:
        severity = DEFAULT_K_SIGMA if atype in SIGMA_TYPES else 1.0
    elif isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise SchemaViolation(f"severity must be a number, got {raw!r}")
    else:
        severity = float(raw)
    if not math.isfinite(severity) or severity <= 0:
        raise SchemaViolation(f"severity must be positive, got {severity}")
    if atype in SIGMA_TYPES and not severity > 3.0:
        raise SchemaViolation(f"{atype.value} needs severity > 3 (sigma multiplier), got {severity}")
    if atype is AnomalyType.LOITERING and severity > 1.0:
        raise SchemaViolation(f"LOITERING severity is a SOG ceiling in (0, 1] kn, got {severity}")

    spec = doc.get("targets", doc.get("target"))
    if spec is None:
        spec = DEFAULT_TARGETS.get(atype, "focal")
    target = Target.parse(spec)

    prompt = doc.get("prompt_text") or ""
    if not isinstance(prompt, str):
        raise SchemaViolation("prompt_text must be a string")
    sid = doc.get("id")
    if sid is None:
        canon = json.dumps({k: str(v) for k, v in doc.items()}, sort_keys=True)
        sid = f"{atype.value.lower()}-{hashlib.sha256(canon.encode()).hexdigest()[:8]}"
    sid = str(sid)

    sign = "+/-" if atype in SIGMA_TYPES else ""
    rationale = DESCRIPTIONS[atype].format(sign=sign, sev=severity) + f" ({level.value} level, target {target.to_text()})."
    return Scenario(sid, atype, level, severity, target, prompt, rationale[0].upper() + rationale[1:])


def load_scenarios(path: str | Path) -> list[Scenario]:
    """All scenario documents in a file (documents separated by ``---``)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaViolation(f"cannot read scenario file {path}: {exc}") from exc
    try:
        docs = [d for d in yaml.safe_load_all(text) if d is not None]
    except yaml.YAMLError as exc:
        raise SchemaViolation(f"{path}: unparseable scenario file: {exc}") from exc
    if not docs:
        raise SchemaViolation(f"{path}: no scenario documents")
    out = [interpret_scenario(d) for d in docs]
    ids = [sc.id for sc in out]
    if len(set(ids)) != len(ids):
        raise SchemaViolation(f"{path}: duplicate scenario ids")
    return out


def default_scenario(k_sigma: float = DEFAULT_K_SIGMA) -> Scenario:
    """Both-channel kinematic anomaly on the focal vessel."""
    return interpret_scenario(
        {"id": "default-kinematic", "type": "KINEMATIC_BOTH", "severity": k_sigma, "target": "focal"}
    )


@dataclass
class InjectionContext:
    pooled: RateDistribution | None = None
    sog_max: float = DEFAULT_SOG_MAX
    signed: bool = True
    exclude_synthetic: bool = False
    proximity_radius: float | None = 10.0


def resolve_targets(sc: Scenario, group: AugmentedGroup, exclude_synthetic: bool = False) -> list[int]:
    chosen = sc.target.resolve(group, real_only=exclude_synthetic)
    need = 2 if sc.anomaly_type is AnomalyType.RENDEZVOUS else 1
    if len(chosen) < need:
        raise UnresolvableTarget(
            f"scenario {sc.id}: target {sc.target.to_text()} selects {len(chosen)} member(s), need {need}"
        )
    if sc.anomaly_type is AnomalyType.RENDEZVOUS:
        chosen = chosen[:2]
    return chosen


def realize_scenario(
    sc: Scenario,
    group: AugmentedGroup,
    ratios: RatioConfig,
    rng: np.random.Generator,
    ctx: InjectionContext | None = None,
) -> tuple[AugmentedGroup, LabelSet]:
    """Apply a scenario to a copy of ``group`` and label the result."""
    ctx = ctx or InjectionContext()
    targets = resolve_targets(sc, group, ctx.exclude_synthetic)
    members = list(group.members)

    if sc.anomaly_type in KINEMATIC_CHANNELS:
        edits = _kinematic(sc, members, targets, ratios, rng, ctx)
    elif sc.anomaly_type is AnomalyType.LOITERING:
        edits = _loitering(sc, members, targets, ratios, rng)
    elif sc.anomaly_type is AnomalyType.GROUP_DEVIATION:
        edits = _group_deviation(sc, members, targets, ratios, rng, ctx)
    else:
        edits = _rendezvous(sc, members, targets, ratios, rng, ctx)

    for e in edits:
        e.mask.check()
        e.record["scenario"] = sc.id
    edited = AugmentedGroup(focal=group.focal, members=members, provenance=list(group.provenance))
    return edited, generate_labels(edits, sc, members, ctx.proximity_radius)


def _kinematic(sc, members, targets, ratios, rng, ctx) -> list[MemberEdit]:
    edits = []
    for i in targets:
        clean = members[i]
        s, m, z = sample_anomaly_block(clean.w, ratios.r_node, rng)
        mask = AnomalyMask(z=z, s=s, m=m, k_sigma=sc.severity, channel=sc.channel)
        dist, source = fit_for_track(clean, ctx.pooled)
        members[i], record = perturb_kinematics(
            clean, mask, dist, rng, pooled=ctx.pooled, sog_max=ctx.sog_max, signed=ctx.signed, dist_source=source
        )
        edits.append(MemberEdit(i, mask, record))
    return edits


def _loitering(sc, members, targets, ratios, rng) -> list[MemberEdit]:
    w = members[0].w
    s, m, z = sample_anomaly_block(w, ratios.r_node, rng)
    edits = []
    for i in targets:
        tr = members[i]
        sog, cog = tr.sog.copy(), tr.cog.copy()
        # strictly below the ceiling
        sog[s : s + m] = rng.random(m) * sc.severity
        cog[s : s + m] = wrap_course_array(rng.random(m) * 360.0)
        members[i] = reintegrate(tr, sog, cog, s)
        mask = AnomalyMask(z=z.copy(), s=s, m=m, k_sigma=0.0, channel=Channel.BOTH)
        edits.append(MemberEdit(i, mask, {"channel": "BOTH", "clamp_events": 0, "sog_ceiling": sc.severity}))
    return edits


def _group_deviation(sc, members, targets, ratios, rng, ctx) -> list[MemberEdit]:
    w = members[0].w
    dt = members[0].dt
    if ctx.pooled is None or not ctx.pooled.sigma_omega > 0:
        raise DegenerateSigma("group deviation needs a pooled COG-rate sigma > 0")
    s, m, z = sample_anomaly_block(w, ratios.r_node, rng)
    sign = int(rng.choice((-1, 1))) if ctx.signed else 1
    deviation = sign * (sc.severity * ctx.pooled.sigma_omega)
    edits = []
    for i in targets:
        tr = members[i]
        cog = tr.cog.copy()
        for j, idx in enumerate(range(s, s + m), start=1):
            cog[idx] = wrap_course(tr.cog[idx] + j * deviation * dt)
        members[i] = reintegrate(tr, tr.sog.copy(), cog, s)
        mask = AnomalyMask(z=z.copy(), s=s, m=m, k_sigma=sc.severity, channel=Channel.COG)
        record = {
            "channel": "COG",
            "clamp_events": 0,
            "cog_offset_rate": {
                "sigma": ctx.pooled.sigma_omega,
                "k_sigma": sc.severity,
                "sign": sign,
                "deviation": deviation,
                "source": "pooled",
            },
        }
        edits.append(MemberEdit(i, mask, record))
    return edits


def _rendezvous(sc, members, targets, ratios, rng, ctx) -> list[MemberEdit]:
    """Both vessels steer to a common point during the first half of the
    block, then idle there side by side at HOLD_SOG on a shared course."""
    w = members[0].w
    dt = members[0].dt
    m = min(w, max(1, round_half_up(ratios.r_node * w)))
    # keep one clean sample before the block as the steering anchor
    s = int(rng.integers(1, w - m + 1)) if w - m >= 1 else 0
    first = max(s, 1)
    anchor = first - 1
    approach_end = s + max(1, math.ceil(m / 2))  # exclusive

    a, b = targets
    mid_lat = (members[a].lat[anchor] + members[b].lat[anchor]) / 2.0
    mid_lon = (members[a].lon[anchor] + members[b].lon[anchor]) / 2.0
    half = RENDEZVOUS_SEPARATION_KM / 2.0 / KM_PER_DEG
    goals = {a: (mid_lat + half, mid_lon), b: (mid_lat - half, mid_lon)}
    drift = float(members[a].cog[anchor])
    step_km = KM_PER_NM * dt / 3600.0

    edits = []
    for i in (a, b):
        tr = members[i]
        sog, cog = tr.sog.copy(), tr.cog.copy()
        lat, lon = float(tr.lat[anchor]), float(tr.lon[anchor])
        clamps = 0
        for idx in range(first, s + m):
            if idx < approach_end:
                course, dist = bearing_and_distance(lat, lon, *goals[i])
                speed = dist / (approach_end - idx) / step_km
                if speed > ctx.sog_max:
                    speed = ctx.sog_max
                    clamps += 1
                sog[idx], cog[idx] = speed, course
            else:
                sog[idx], cog[idx] = HOLD_SOG, drift
            lat, lon = dead_reckon(lat, lon, float(sog[idx]), float(cog[idx]), dt)
        members[i] = reintegrate(tr, sog, cog, s)
        z = np.zeros(w, dtype=np.int8)
        z[s : s + m] = 1
        mask = AnomalyMask(z=z, s=s, m=m, k_sigma=0.0, channel=Channel.BOTH)
        record = {
            "channel": "BOTH",
            "clamp_events": clamps,
            "partner": members[b if i == a else a].mmsi,
            "meeting_point": [mid_lat, mid_lon],
            "approach_steps": approach_end - first,
        }
        edits.append(MemberEdit(i, mask, record))
    return edits
