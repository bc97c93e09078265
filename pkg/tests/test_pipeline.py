import filecmp
import json

import numpy as np
import pytest

from aisgraph.cli import main
from aisgraph.dataset import GRAPHS_FILE, INDEX_FILE, MANIFEST_FILE, compute_stats, read_dataset
from aisgraph.errors import ConfigError, InputError
from aisgraph.graph import PROXIMITY
from aisgraph.pipeline import ENV_FIELDS, Config, build_perception_bundle, run_pipeline
from aisgraph.synthesizer import REAL, AugmentedGroup, MemberTag
from conftest import make_traj


def masks(out):
    return [(g.graph_id, g.labels.node_labels.tobytes()) for g in read_dataset(out) if g.graph_label]


class TestBundle:
    def test_rows(self):
        ms = [make_traj(i, lat0=-25.0 - 0.01 * i, w=24) for i in range(1, 5)]
        g = AugmentedGroup(ms[0], ms, [MemberTag(REAL, f"src{i}") for i in range(4)])
        b = build_perception_bundle(ms[0], g)
        assert len(b.ais) == 4 * 24 and len(b.derived) == 4 * 23
        assert b.env == dict.fromkeys(ENV_FIELDS) and b.provenance == ["src0", "src1", "src2", "src3"]

    def test_env_lookup(self):
        ms = [make_traj(1, w=5)]
        g = AugmentedGroup(ms[0], ms, [MemberTag(REAL, "x")])
        seen = []

        def lookup(mmsi, start):
            seen.append((mmsi, start))
            return {"wind_bin": 3, "unrelated": 1}

        b = build_perception_bundle(ms[0], g, lookup)
        assert b.env == {"wind_bin": 3, "wave_bin": None, "current_bin": None, "visibility": None}
        assert seen == [(1, ms[0].start)]


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            {"k_sigma": 3.0},
            {"r_traj": 0.0},
            {"r_node": 1.5},
            {"window_hours": 1.05},
            {"k_vessels": 0},
            {"optics_xi": 1.0},
            {"workers": 0},
            {"seed": -1},
        ],
    )
    def test_rejected_before_work(self, tmp_path, kw):
        out = tmp_path / "out"
        with pytest.raises(ConfigError):
            run_pipeline(Config(input=str(tmp_path / "missing.csv"), output=str(out), **kw))
        assert not out.exists()

    def test_parameters_omit_location(self):
        p = Config(input="a", output="b", workers=3).parameters()
        assert "output" not in p and "workers" not in p and "input" not in p
        assert p["w"] == 24 and p["stride"] == 24 and p["proximity_radius_km"] == 10.0


class TestRun:
    def test_manifest(self, sample_run, sample_csv):
        out, manifest = sample_run
        assert sorted(p.name for p in out.iterdir()) == [GRAPHS_FILE, INDEX_FILE, MANIFEST_FILE]
        assert json.loads((out / MANIFEST_FILE).read_text()) == manifest
        assert manifest["counts"] == compute_stats(out)
        assert manifest["seed"] == 7 and manifest["parameters"]["k_vessels"] == 4
        assert len(manifest["config_hash"]) == 64
        n = manifest["counts"]["graphs"]
        assert manifest["counts"]["positive_labels"]["graph"] == int(np.floor(n * 0.1 + 0.5))

    def test_graph_meta(self, sample_run):
        out, _ = sample_run
        for g in read_dataset(out):
            assert g.k == 4 and g.w == 24
            assert g.meta["perception"]["env"] == dict.fromkeys(ENV_FIELDS)
            assert len(g.meta["perception"]["provenance"]) == 4

    def test_missing_input(self, tmp_path):
        with pytest.raises(InputError):
            run_pipeline(Config(input=str(tmp_path / "nope.csv"), output=str(tmp_path / "o")))
        assert not (tmp_path / "o").exists()

    def test_bad_row_cleans_up(self, tmp_path, sample_csv):
        bad = tmp_path / "bad.csv"
        lines = sample_csv.read_text().splitlines()
        lines.insert(10, "123456789,not-a-time,1,2,3,4,Cargo")
        bad.write_text("\n".join(lines) + "\n")
        out = tmp_path / "out"
        with pytest.raises(InputError):
            run_pipeline(Config(input=str(bad), output=str(out)))
        assert not out.exists()

    def test_seed_changes_masks(self, tmp_path, sample_run, sample_csv):
        out, _ = sample_run
        other = tmp_path / "s8"
        run_pipeline(Config(input=str(sample_csv), output=str(other), seed=8))
        assert masks(out) != masks(other)

    def test_workers_do_not_change_bytes(self, tmp_path, sample_run, sample_csv):
        out, _ = sample_run
        par = tmp_path / "par"
        run_pipeline(Config(input=str(sample_csv), output=str(par), seed=7, workers=3))
        for name in (GRAPHS_FILE, INDEX_FILE, MANIFEST_FILE):
            assert filecmp.cmp(out / name, par / name, shallow=False), name

    def test_temporal_only(self, tmp_path, sample_csv):
        out = tmp_path / "t"
        m = run_pipeline(Config(input=str(sample_csv), output=str(out), seed=1, temporal_edges_only=True))
        assert m["edge_semantics"]["proximity"] is None
        assert all(not g.edges_of_kind(PROXIMITY) for g in read_dataset(out))

    def test_scenario_file(self, tmp_path, sample_csv):
        sc = tmp_path / "rv.yaml"
        sc.write_text("id: meet\ntype: RENDEZVOUS\n")
        out = tmp_path / "rv"
        m = run_pipeline(Config(input=str(sample_csv), output=str(out), seed=3, scenario_files=[str(sc)], r_traj=0.2))
        assert m["counts"]["scenarios"] == {"meet": m["counts"]["positive_labels"]["graph"]}
        assert m["counts"]["positive_labels"]["edge"] > 0


class TestCli:
    def test_success_and_stats(self, tmp_path, sample_csv, capsys):
        out = tmp_path / "cli"
        assert main(["--input", str(sample_csv), "--output", str(out), "--seed", "2"]) == 0
        capsys.readouterr()
        assert main(["--stats", str(out)]) == 0
        stats = json.loads(capsys.readouterr().out)
        assert stats == json.loads((out / MANIFEST_FILE).read_text())["counts"]

    def test_exit_codes(self, tmp_path, sample_csv):
        out = str(tmp_path / "x")
        assert main(["--input", str(sample_csv), "--output", out, "--k-sigma", "2.5"]) == 2
        assert main(["--input", str(tmp_path / "none.csv"), "--output", out]) == 3
        assert main(["--output", out]) == 2
        assert main(["--stats", str(tmp_path)]) == 3
        assert main(["--bogus"]) == 2

    def test_invalid_scenario_writes_nothing(self, tmp_path, sample_csv):
        sc = tmp_path / "bad.yaml"
        sc.write_text("type: SPEED_SPIKE\nseverity: 3.0\n")
        out = tmp_path / "o"
        assert main(["--input", str(sample_csv), "--output", str(out), "--scenario", str(sc)]) == 2
        assert not out.exists()
