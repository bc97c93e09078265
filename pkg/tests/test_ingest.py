import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from aisgraph.errors import InvariantViolation, MalformedRow, OutOfRange, TooShort, UnknownVesselType
from aisgraph.ingest import (
    OMTAD_REGION,
    AisRecord,
    ColumnMap,
    RegionBounds,
    Trajectory,
    VesselType,
    assemble_trajectories,
    format_timestamp,
    parse_ais_record,
    parse_timestamp,
    prepare_trajectories,
    read_ais_file,
    resample_trajectory,
    validate_region,
)
from conftest import EPOCH

HEADER = ["mmsi", "timestamp", "lat", "lon", "sog", "cog", "vessel_type"]
SCHEMA = ColumnMap.from_header(HEADER)


def row(**kw):
    base = {
        "mmsi": "123456789",
        "timestamp": "2020-01-01T00:00:00Z",
        "lat": "-25.0",
        "lon": "110.0",
        "sog": "12.4",
        "cog": "87.0",
        "vessel_type": "Cargo",
    }
    base.update(kw)
    return [base[h] for h in HEADER]


def rec(mmsi, t, lat=-25.0, lon=110.0, sog=10.0, cog=90.0):
    return AisRecord(mmsi=mmsi, t=t, lat=lat, lon=lon, sog=sog, cog=cog, vessel_type=VesselType.CARGO)


class TestParse:
    def test_valid_row(self):
        r = parse_ais_record(row(), SCHEMA)
        assert (r.lat, r.lon, r.sog, r.cog) == (-25.0, 110.0, 12.4, 87.0)
        assert r.vessel_type is VesselType.CARGO
        assert r.t == EPOCH

    def test_cog_360_is_out_of_range(self):
        with pytest.raises(OutOfRange):
            parse_ais_record(row(cog="360.0"), SCHEMA)

    def test_negative_sog(self):
        with pytest.raises(OutOfRange):
            parse_ais_record(row(sog="-1.0"), SCHEMA)

    @pytest.mark.parametrize("field,value", [("lat", "90.5"), ("lon", "-180.1"), ("mmsi", "0"), ("mmsi", "990000000")])
    def test_bounds(self, field, value):
        with pytest.raises(OutOfRange):
            parse_ais_record(row(**{field: value}), SCHEMA)

    @pytest.mark.parametrize("field,value", [("lat", "abc"), ("sog", "nan"), ("timestamp", "yesterday"), ("mmsi", "x1")])
    def test_malformed(self, field, value):
        with pytest.raises(MalformedRow):
            parse_ais_record(row(**{field: value}), SCHEMA)

    def test_short_row(self):
        with pytest.raises(MalformedRow):
            parse_ais_record(row()[:4], SCHEMA)

    def test_unknown_type(self):
        with pytest.raises(UnknownVesselType):
            parse_ais_record(row(vessel_type="Submarine"), SCHEMA)

    def test_type_is_case_insensitive(self):
        assert parse_ais_record(row(vessel_type="tanker"), SCHEMA).vessel_type is VesselType.TANKER

    def test_header_aliases_and_order(self):
        header = ["Vessel_Type", "LONGITUDE", "latitude", "MMSI", "BaseDateTime", "SOG", "COG"]
        schema = ColumnMap.from_header(header)
        r = parse_ais_record(["Fishing", "111", "-20", "5", "1577836860", "3", "4"], schema)
        assert (r.mmsi, r.t, r.lat, r.lon, r.vessel_type) == (5, EPOCH + 60, -20.0, 111.0, VesselType.FISHING)

    def test_missing_column(self):
        with pytest.raises(MalformedRow):
            ColumnMap.from_header(HEADER[:-1])

    def test_timestamp_forms_agree(self):
        assert parse_timestamp("2020-01-01T00:10:00Z") == parse_timestamp("2020-01-01T00:10:00") == EPOCH + 600
        assert parse_timestamp("2020-01-01T08:10:00+08:00") == EPOCH + 600
        assert format_timestamp(EPOCH + 600) == "2020-01-01T00:10:00Z"

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.text(max_size=12), min_size=7, max_size=7))
    def test_parsing_is_total(self, fields):
        # every row yields a record or one of the typed errors, nothing else
        try:
            parse_ais_record(fields, SCHEMA)
        except (MalformedRow, OutOfRange, UnknownVesselType):
            pass


class TestRegion:
    @pytest.mark.parametrize(
        "lon,lat,inside",
        [(110, -25, True), (104.9, -25, False), (110, -14.9, False), (105, -36, True), (116, -15, True), (116.01, -20, False)],
    )
    def test_bounds(self, lon, lat, inside):
        assert validate_region(rec(1, 0, lat=lat, lon=lon), OMTAD_REGION) is inside

    def test_degenerate_bounds_rejected(self):
        with pytest.raises(ValueError):
            RegionBounds(lon_min=110, lon_max=110, lat_min=-30, lat_max=-20)


class TestAssemble:
    def test_two_vessels(self):
        recs = [rec(m, EPOCH + 60 * i) for m in (2, 1) for i in range(10)]
        out = assemble_trajectories(recs)
        assert [(tr.mmsi, tr.w) for tr in out] == [(1, 10), (2, 10)]

    def test_gap_split(self):
        times = [EPOCH + 300 * i for i in range(10)] + [EPOCH + 2700 + 7200 + 300 * i for i in range(10)]
        out = assemble_trajectories([rec(1, t) for t in times], gap_threshold=3600)
        assert [tr.w for tr in out] == [10, 10]

    def test_gap_equal_to_threshold_does_not_split(self):
        out = assemble_trajectories([rec(1, EPOCH), rec(1, EPOCH + 3600)], gap_threshold=3600)
        assert len(out) == 1

    def test_unsorted_input_and_duplicates_keep_first(self):
        recs = [rec(1, EPOCH + 60, sog=5.0), rec(1, EPOCH), rec(1, EPOCH + 60, sog=9.0)]
        (tr,) = assemble_trajectories(recs)
        assert tr.t.tolist() == [EPOCH, EPOCH + 60]
        assert tr.sog.tolist() == [10.0, 5.0]

    def test_empty(self):
        assert assemble_trajectories([]) == []

    def test_singletons_dropped(self):
        assert assemble_trajectories([rec(1, EPOCH), rec(1, EPOCH + 10_000)]) == []

    def test_one_group_per_track(self):
        # distinct mmsi per track, no gaps: one trajectory each
        recs = [rec(m, EPOCH + 600 * i) for m in range(1, 19125) for i in range(2)]
        out = assemble_trajectories(recs)
        assert len(out) == 19124


class TestResample:
    def _raw(self, t, sog, cog, lat=None, lon=None):
        n = len(t)
        return Trajectory(
            1, VesselType.CARGO, t, lat or [-25.0] * n, lon or [110.0] * n, sog, cog, provenance="1@0"
        )

    def test_linear_midpoint(self):
        out = resample_trajectory(self._raw([0, 600], [10.0, 12.0], [0.0, 0.0]), 300)
        assert out.t.tolist() == [0, 300, 600]
        assert out.sog[1] == 11.0

    def test_course_through_north(self):
        out = resample_trajectory(self._raw([0, 600], [10.0, 10.0], [350.0, 10.0]), 300)
        assert out.cog[1] == 0.0
        assert out.cog.tolist() == [350.0, 0.0, 10.0]

    def test_uniform_identity(self):
        rng = np.random.default_rng(3)
        t = np.arange(0, 6000, 600)
        raw = self._raw(t, rng.uniform(0, 20, 10).tolist(), rng.uniform(0, 360, 10).tolist())
        out = resample_trajectory(raw, 600)
        assert np.array_equal(out.t, raw.t) and np.array_equal(out.sog, raw.sog) and np.array_equal(out.cog, raw.cog)
        assert out.dt == 600

    def test_too_short(self):
        with pytest.raises(TooShort):
            resample_trajectory(self._raw([0, 500], [1.0, 1.0], [0.0, 0.0]), 600)

    def test_aligned_grid(self):
        out = resample_trajectory(self._raw([EPOCH + 100, EPOCH + 1900], [1.0, 1.0], [0.0, 0.0]), 600, align=True)
        assert out.t.tolist() == [EPOCH + 600, EPOCH + 1200, EPOCH + 1800]

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.integers(30, 900), min_size=2, max_size=40),
        st.lists(st.floats(0, 30), min_size=41, max_size=41),
        st.lists(st.floats(0, 359.99), min_size=41, max_size=41),
        st.sampled_from([60, 300, 600]),
    )
    def test_properties(self, steps, sogs, cogs, dt):
        t = np.concatenate(([0], np.cumsum(steps)))
        n = len(t)
        raw = self._raw(t.tolist(), sogs[:n], cogs[:n])
        try:
            out = resample_trajectory(raw, dt)
        except TooShort:
            assert t[-1] < dt
            return
        out.validate()
        again = resample_trajectory(out, dt)
        assert np.allclose(again.sog, out.sog) and np.allclose(again.lat, out.lat)
        assert np.array_equal(again.t, out.t)
        # course follows the unwrapped source course, so no seam jumps appear
        turns = (np.diff(raw.cog) + 180) % 360 - 180
        assume(np.all(np.abs(turns) < 179))
        unwrapped = np.concatenate(([raw.cog[0]], raw.cog[0] + np.cumsum(turns)))
        expected = np.interp(out.t, raw.t, unwrapped)
        gap = (out.cog - expected + 180) % 360 - 180
        assert np.all(np.abs(gap) < 1e-6)


class TestTrajectory:
    def test_validate_rejects_bad_grid(self):
        tr = Trajectory(1, VesselType.CARGO, [0, 600, 1300], [0, 0, 0], [0, 0, 0], [1, 1, 1], [0, 0, 0], dt=600)
        with pytest.raises(InvariantViolation):
            tr.validate()

    def test_arrays_are_read_only(self):
        tr = Trajectory(1, VesselType.CARGO, [0, 600], [0, 0], [0, 0], [1, 1], [0, 0], dt=600)
        with pytest.raises(ValueError):
            tr.sog[0] = 5.0

    def test_window(self):
        tr = Trajectory(1, VesselType.CARGO, [0, 600, 1200, 1800], [0, 1, 2, 3], [0] * 4, [1] * 4, [0] * 4, dt=600)
        assert tr.covers(600, 3) and not tr.covers(600, 4) and not tr.covers(300, 2)
        assert tr.window(600, 2).lat.tolist() == [1.0, 2.0]
        with pytest.raises(IndexError):
            tr.window(1200, 3)


class TestFiles:
    def test_read_sample(self, sample_csv):
        recs = read_ais_file(sample_csv)
        assert len(recs) > 1000
        assert all(OMTAD_REGION.contains(r.lat, r.lon) for r in recs)

    def test_out_of_region_rows_dropped(self, tmp_path):
        f = tmp_path / "a.csv"
        f.write_text(",".join(HEADER) + "\n" + ",".join(row()) + "\n" + ",".join(row(lon="100.0")) + "\n")
        assert len(read_ais_file(f)) == 1

    def test_bad_row_reports_line(self, tmp_path):
        f = tmp_path / "a.csv"
        f.write_text(",".join(HEADER) + "\n" + ",".join(row()) + "\n" + ",".join(row(sog="-3")) + "\n")
        with pytest.raises(OutOfRange, match=":3:"):
            read_ais_file(f)

    def test_semicolon_delimiter(self, tmp_path):
        f = tmp_path / "a.csv"
        f.write_text(";".join(HEADER) + "\n" + ";".join(row()) + "\n")
        assert read_ais_file(f, delimiter=";")[0].mmsi == 123456789

    def test_prepare_drops_short_and_sorts(self):
        recs = [rec(2, EPOCH + 600 * i) for i in range(30)] + [rec(1, EPOCH + 600 * i) for i in range(5)]
        trajs, report = prepare_trajectories(recs, dt=600, gap_threshold=3600, min_length=24)
        assert [tr.mmsi for tr in trajs] == [2] and report.too_short == 1 and report.trajectories == 1
