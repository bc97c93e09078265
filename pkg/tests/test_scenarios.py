import numpy as np
import pytest

from aisgraph.errors import DegenerateSigma, SchemaViolation, UnresolvableTarget
from aisgraph.ingest import VesselType
from aisgraph.injector import RatioConfig
from aisgraph.kinematics import RateDistribution, haversine_km, integrate_positions
from aisgraph.neighborhood import proximity_pairs
from aisgraph.scenarios import (
    AnomalyType,
    DslInterpreter,
    InjectionContext,
    Level,
    Target,
    default_scenario,
    interpret_scenario,
    load_scenarios,
    realize_scenario,
    resolve_targets,
)
from aisgraph.synthesizer import REAL, SYNTHETIC, AugmentedGroup, MemberTag
from conftest import make_traj, wiggly_traj

POOLED = RateDistribution(mu_a=0.0, sigma_a=0.001, mu_omega=0.0, sigma_omega=0.01)
CTX = InjectionContext(pooled=POOLED)


def group(w=24, synthetic_last=False, types=None):
    rng = np.random.default_rng(3)
    types = types or [VesselType.CARGO] * 4
    members = [
        wiggly_traj(rng, mmsi=300_000_000 + i, w=w, lat0=-25.0 - 0.02 * i, vtype=types[i]) for i in range(4)
    ]
    tags = [MemberTag(REAL, f"{m.mmsi}") for m in members]
    if synthetic_last:
        tags[-1] = MemberTag(SYNTHETIC, "SYNTHETIC(300000000)", parent=members[0].mmsi)
    return AugmentedGroup(members[0], members, tags)


class TestInterpret:
    def test_defaults(self):
        sc = interpret_scenario({"type": "speed_spike"})
        assert sc.anomaly_type is AnomalyType.SPEED_SPIKE and sc.level is Level.NODE
        assert sc.severity == 3.5 and sc.target == Target("focal")
        assert sc.id.startswith("speed_spike-")

    def test_level_inferred(self):
        assert interpret_scenario({"type": "RENDEZVOUS"}).level is Level.EDGE
        assert interpret_scenario({"type": "GROUP_DEVIATION"}).target == Target("all")
        assert interpret_scenario({"type": "LOITERING", "level": "GRAPH", "severity": 0.5}).level is Level.GRAPH

    @pytest.mark.parametrize(
        "doc",
        [
            {"type": "SPEED_SPIKE", "severity": 2.0},
            {"type": "COURSE_DEVIATION", "severity": 3.0},
            {"type": "SPEED_SPIKE", "severity": "high"},
            {"type": "SPEED_SPIKE", "severity": True},
            {"type": "LOITERING", "severity": 2.0},
            {"type": "RENDEZVOUS", "level": "NODE"},
            {"type": "TELEPORT"},
            {"severity": 4.0},
            {"type": "SPEED_SPIKE", "colour": "red"},
            {"type": "SPEED_SPIKE", "target": "all", "targets": [1]},
            {"type": "SPEED_SPIKE", "target": "vessel_type=Submarine"},
            {"type": "SPEED_SPIKE", "target": "member="},
            {"type": "SPEED_SPIKE", "target": "region=1,2,3"},
            {"type": "SPEED_SPIKE", "targets": [1.5]},
        ],
    )
    def test_rejected(self, doc):
        with pytest.raises(SchemaViolation):
            interpret_scenario(doc)

    def test_dsl_text(self):
        text = "id: fishing-speed\ntype: SPEED_SPIKE\nseverity: 4.0\ntarget: vessel_type=Fishing\nprompt_text: sprint\n"
        sc = DslInterpreter().interpret(text)
        assert sc.id == "fishing-speed" and sc.severity == 4.0
        assert sc.target == Target("vessel_type", (VesselType.FISHING,))
        assert interpret_scenario(sc.to_doc()) == sc
        with pytest.raises(SchemaViolation):
            interpret_scenario("type: [unclosed")

    def test_load_file(self, tmp_path):
        p = tmp_path / "s.yaml"
        p.write_text("id: a\ntype: SPEED_SPIKE\n---\nid: b\ntype: RENDEZVOUS\n")
        assert [s.id for s in load_scenarios(p)] == ["a", "b"]
        p.write_text("id: a\ntype: SPEED_SPIKE\n---\nid: a\ntype: LOITERING\n")
        with pytest.raises(SchemaViolation):
            load_scenarios(p)
        with pytest.raises(SchemaViolation):
            load_scenarios(tmp_path / "missing.yaml")

    def test_default_scenario(self):
        sc = default_scenario(4.0)
        assert sc.anomaly_type is AnomalyType.KINEMATIC_BOTH and sc.severity == 4.0


class TestTargets:
    def test_selectors(self):
        g = group(types=[VesselType.CARGO, VesselType.FISHING, VesselType.TANKER, VesselType.FISHING])
        assert Target.parse("all").resolve(g) == [0, 1, 2, 3]
        assert Target.parse("focal").resolve(g) == [0]
        assert Target.parse("member=2,0,9").resolve(g) == [2, 0]
        assert Target.parse("vessel_type=Fishing").resolve(g) == [1, 3]
        assert Target.parse(f"mmsi={g.members[2].mmsi}").resolve(g) == [2]
        assert Target.parse([g.members[3].mmsi, "focal", "member:1"]).resolve(g) == [3, 0, 1]
        lat0, lon0 = g.members[1].lat[0], g.members[1].lon[0]
        box = f"region={lon0 - 0.001},{lat0 - 0.001},{lon0 + 0.001},{lat0 + 0.001}"
        assert Target.parse(box).resolve(g) == [1]

    def test_real_only(self):
        g = group(synthetic_last=True)
        assert Target.parse("all").resolve(g, real_only=True) == [0, 1, 2]

    def test_unresolvable(self):
        g = group()
        with pytest.raises(UnresolvableTarget):
            resolve_targets(interpret_scenario({"type": "SPEED_SPIKE", "target": "vessel_type=Fishing"}), g)
        with pytest.raises(UnresolvableTarget):
            resolve_targets(interpret_scenario({"type": "RENDEZVOUS", "target": "focal"}), g)


class TestRealize:
    def test_speed_spike_only_touches_target(self):
        g = group()
        sc = interpret_scenario({"id": "s", "type": "SPEED_SPIKE", "target": "member=1"})
        out, labels = realize_scenario(sc, g, RatioConfig(0.5, 0.1), np.random.default_rng(0), CTX)
        assert labels.y_traj == [0, 1, 0, 0] and labels.graph_label == 1
        assert int(labels.node_labels[1].sum()) == 12
        for i in (0, 2, 3):
            assert out.members[i] is g.members[i]
        assert np.array_equal(out.members[1].cog, g.members[1].cog)
        edit = labels.scenarios[0]["edits"][0]
        assert abs(edit["sog"]["deviation"]) == 3.5 * edit["sog"]["sigma"]
        # the input group is left alone
        assert g.members[1].same_states(group().members[1])

    def test_group_deviation_all_members(self):
        g = group()
        sc = interpret_scenario({"id": "g", "type": "GROUP_DEVIATION", "severity": 4.0})
        out, labels = realize_scenario(sc, g, RatioConfig(0.5, 0.1), np.random.default_rng(1), CTX)
        assert labels.y_traj == [1, 1, 1, 1]
        spans = {(e["s"], e["m"]) for e in labels.scenarios[0]["edits"]}
        assert len(spans) == 1
        s, m = spans.pop()
        dev = labels.scenarios[0]["edits"][0]["cog_offset_rate"]["deviation"]
        assert abs(dev) == 4.0 * POOLED.sigma_omega
        for a, b in zip(out.members, g.members):
            turn = a.cog[s : s + m] - b.cog[s : s + m] - dev * 600 * np.arange(1, m + 1)
            assert np.allclose((turn + 180) % 360 - 180, 0.0, atol=1e-9)

    def test_group_deviation_needs_pooled_sigma(self):
        sc = interpret_scenario({"type": "GROUP_DEVIATION"})
        with pytest.raises(DegenerateSigma):
            realize_scenario(sc, group(), RatioConfig(0.5, 0.1), np.random.default_rng(0), InjectionContext())

    @pytest.mark.parametrize("seed", range(20))
    def test_rendezvous(self, seed):
        g = group()
        sc = interpret_scenario({"id": "r", "type": "RENDEZVOUS", "target": "member=1,2"})
        out, labels = realize_scenario(sc, g, RatioConfig(0.5, 0.1), np.random.default_rng(seed), CTX)
        e = labels.scenarios[0]["edits"][0]
        last = e["s"] + e["m"] - 1
        a, b = out.members[1], out.members[2]
        assert haversine_km((a.lat[last], a.lon[last]), (b.lat[last], b.lon[last])) < 0.5
        w = a.w
        expected = set()
        for u, v, t in proximity_pairs(out.members, 10.0):
            if {u, v} == {1, 2} and e["s"] <= t < e["s"] + e["m"]:
                expected |= {(u * w + t, v * w + t), (v * w + t, u * w + t)}
        assert set(labels.edge_labels) == expected and expected
        for tr in out.members:
            lat, lon = integrate_positions(tr.lat[0], tr.lon[0], tr.sog, tr.cog, tr.dt)
            assert np.allclose(lat, tr.lat, atol=1e-9) and np.allclose(lon, tr.lon, atol=1e-9)

    def test_loitering_below_ceiling(self):
        g = group()
        sc = interpret_scenario({"id": "l", "type": "LOITERING", "severity": 0.8})
        out, labels = realize_scenario(sc, g, RatioConfig(0.5, 0.1), np.random.default_rng(4), CTX)
        e = labels.scenarios[0]["edits"][0]
        block = out.members[0].sog[e["s"] : e["s"] + e["m"]]
        assert np.all(block < 0.8) and np.all(block >= 0)
        assert labels.y_traj == [1, 0, 0, 0]

    def test_exclude_synthetic(self):
        g = group(synthetic_last=True)
        sc = interpret_scenario({"type": "SPEED_SPIKE", "target": "member=3"})
        ctx = InjectionContext(pooled=POOLED, exclude_synthetic=True)
        with pytest.raises(UnresolvableTarget):
            realize_scenario(sc, g, RatioConfig(0.5, 0.1), np.random.default_rng(0), ctx)


class TestLabels:
    def test_node_edge_graph_consistency(self):
        g = group()
        sc = interpret_scenario({"id": "k", "type": "KINEMATIC_BOTH", "target": "all"})
        _, labels = realize_scenario(sc, g, RatioConfig(0.25, 0.1), np.random.default_rng(2), CTX)
        labels.check()
        assert labels.y_traj == [int(z.sum() > 0) for z in labels.node_labels]
        assert set(labels.node_sources) == set(np.flatnonzero(labels.node_labels.ravel()).tolist())
        assert set(labels.node_sources.values()) == {"k"}
        rec = labels.scenarios[0]
        assert rec["rationale"].startswith("k: ") and len(rec["edits"]) == 4

    def test_no_proximity_edges_no_edge_labels(self):
        g = group()
        sc = interpret_scenario({"type": "RENDEZVOUS"})
        ctx = InjectionContext(pooled=POOLED, proximity_radius=None)
        _, labels = realize_scenario(sc, g, RatioConfig(0.5, 0.1), np.random.default_rng(0), ctx)
        assert labels.edge_labels == {} and labels.graph_label == 1
