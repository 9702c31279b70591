"""Tests for the CSV/JSON/YAML file layer."""

import numpy as np
import pytest

import commutenet
from commutenet import (
    OUTSIDE_ID,
    Aggregate,
    ConfigError,
    FlowRecord,
    LoadError,
    ODMatrix,
    RegionPlusOutsideOD,
    WeightedDistanceDistribution,
)
from commutenet import _io

from .conftest import SAMPLE_COLLAPSED, SAMPLE_FULL


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestMunicipalities:
    def test_read(self, tmp_path):
        path = _write(
            tmp_path / "m.csv",
            "id,x,y,in_region\n063001,1000.5,2000,1\n03001,0,0,0\n063002,-5,7.25,1\n",
        )
        registry = _io.read_municipalities(path)
        # Leading zeros survive: ids are strings.
        assert registry.ids == ("063001", "063002", "03001")
        assert registry.n == 2
        assert registry[registry.position("063001")].x == 1000.5

    def test_write_then_read(self, tmp_path, pair_registry):
        path = tmp_path / "out" / "municipalities.csv"
        _io.write_municipalities(path, pair_registry)
        assert path.read_text().splitlines()[0] == "id,x,y,in_region"
        again = _io.read_municipalities(path)
        assert again.ids == pair_registry.ids
        assert again.coordinates.tolist() == pair_registry.coordinates.tolist()

    def test_extra_columns_ignored(self, tmp_path):
        path = _write(tmp_path / "m.csv", "name,id,x,y,in_region\nTown,a,0,0,1\n")
        assert _io.read_municipalities(path).ids == ("a",)

    def test_missing_column(self, tmp_path):
        path = _write(tmp_path / "m.csv", "id,x,in_region\na,0,1\n")
        with pytest.raises(LoadError, match="missing required columns"):
            _io.read_municipalities(path)

    def test_bad_region_flag(self, tmp_path):
        path = _write(tmp_path / "m.csv", "id,x,y,in_region\na,0,0,2\n")
        with pytest.raises(LoadError, match="in_region"):
            _io.read_municipalities(path)

    def test_non_numeric_coordinate(self, tmp_path):
        path = _write(tmp_path / "m.csv", "id,x,y,in_region\na,0,0,1\nb,east,0,0\n")
        with pytest.raises(LoadError, match="row 2"):
            _io.read_municipalities(path)

    def test_duplicate(self, tmp_path):
        path = _write(tmp_path / "m.csv", "id,x,y,in_region\na,0,0,1\na,1,1,0\n")
        with pytest.raises(LoadError, match="duplicate"):
            _io.read_municipalities(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(LoadError, match="not found"):
            _io.read_municipalities(tmp_path / "nope.csv")

    def test_empty_file(self, tmp_path):
        with pytest.raises(LoadError):
            _io.read_municipalities(_write(tmp_path / "m.csv", ""))


class TestAggregates:
    def test_round_trip_in_given_order(self, tmp_path):
        aggregates = {"b": Aggregate(2, 3), "a": Aggregate(5, 0)}
        path = tmp_path / "agg.csv"
        _io.write_aggregates(path, aggregates, ids=["a", "b"])
        assert path.read_text() == "id,in_commuters,out_commuters\na,5,0\nb,2,3\n"
        assert _io.read_aggregates(path) == aggregates

    @pytest.mark.parametrize("value", ["-1", "2.5", ""])
    def test_bad_counts(self, tmp_path, value):
        path = _write(tmp_path / "agg.csv", f"id,in_commuters,out_commuters\na,{value},1\n")
        with pytest.raises(LoadError, match="in_commuters"):
            _io.read_aggregates(path)


class TestFlows:
    def test_read(self, tmp_path):
        path = _write(tmp_path / "f.csv", "origin_id,dest_id,count\na,b,3\nx,a,1\n")
        assert _io.read_flows(path) == [FlowRecord("a", "b", 3), FlowRecord("x", "a", 1)]

    def test_zero_count_rejected(self, tmp_path):
        path = _write(tmp_path / "f.csv", "origin_id,dest_id,count\na,b,0\n")
        with pytest.raises(LoadError, match="count"):
            _io.read_flows(path)

    def test_diagonal_rejected(self, tmp_path):
        path = _write(tmp_path / "f.csv", "origin_id,dest_id,count\na,a,2\n")
        with pytest.raises(LoadError, match="diagonal"):
            _io.read_flows(path)

    def test_header_only(self, tmp_path):
        assert _io.read_flows(_write(tmp_path / "f.csv", "origin_id,dest_id,count\n")) == []

    def test_write_full_table(self, tmp_path):
        path = tmp_path / "f.csv"
        _io.write_flows(path, ODMatrix(("a", "b"), ("a", "b", "x"), SAMPLE_FULL))
        assert path.read_text() == "origin_id,dest_id,count\na,b,1\na,x,2\nb,a,1\n"

    def test_collapsed_round_trip(self, tmp_path):
        path = tmp_path / "collapsed.csv"
        table = RegionPlusOutsideOD(("a", "b"), SAMPLE_COLLAPSED)
        _io.write_flows(path, table)
        assert f"{OUTSIDE_ID},a,2" in path.read_text()
        again = _io.read_collapsed(path, ("a", "b"))
        assert again.flows.tolist() == SAMPLE_COLLAPSED

    def test_collapsed_unknown_id(self, tmp_path):
        path = _write(tmp_path / "f.csv", "origin_id,dest_id,count\na,zz,1\n")
        with pytest.raises(LoadError, match="unknown id"):
            _io.read_collapsed(path, ("a", "b"))

    def test_deterministic_bytes(self, tmp_path, small_fixture):
        first, second = tmp_path / "1.csv", tmp_path / "2.csv"
        _io.write_flows(first, small_fixture.truth)
        _io.write_flows(second, small_fixture.truth)
        assert first.read_bytes() == second.read_bytes()
        assert b"\r\n" not in first.read_bytes()


class TestDistributions:
    def test_round_trip(self, tmp_path):
        dist = WeightedDistanceDistribution(np.array([3000.0, 1000.0, 1234.5678]), np.array([2, 1, 7]))
        path = tmp_path / "d.csv"
        _io.write_distribution(path, dist)
        again = _io.read_distribution(path)
        assert again.distances.tolist() == dist.distances.tolist()
        assert again.weights.tolist() == dist.weights.tolist()

    def test_density_columns(self, tmp_path):
        path = tmp_path / "density.csv"
        _io.write_density(path, np.array([0.0, 50.0, 100.0]), np.array([0.015, 0.005]))
        lines = path.read_text().splitlines()
        assert lines[0] == "bin_left,bin_right,density"
        assert len(lines) == 3


class TestJson:
    def test_sorted_and_numpy_safe(self, tmp_path):
        path = tmp_path / "out.json"
        _io.write_json(path, {"b": np.int64(3), "a": [np.float64(0.5), float("nan")], "c": np.arange(2)})
        text = path.read_text()
        assert text.endswith("}\n")
        assert text.index('"a"') < text.index('"b"') < text.index('"c"')
        assert _io.read_json(path) == {"a": [0.5, None], "b": 3, "c": [0, 1]}

    def test_malformed(self, tmp_path):
        with pytest.raises(LoadError, match="malformed JSON"):
            _io.read_json(_write(tmp_path / "bad.json", "{"))


class TestConfigFile:
    def test_dashes_normalized(self, tmp_path):
        path = _write(tmp_path / "c.yaml", "replications: 3\ndistance-strategy: lazy\n")
        assert _io.read_config(path) == {"replications": 3, "distance_strategy": "lazy"}

    def test_empty(self, tmp_path):
        assert _io.read_config(_write(tmp_path / "c.yaml", "")) == {}

    def test_not_a_mapping(self, tmp_path):
        with pytest.raises(ConfigError, match="mapping"):
            _io.read_config(_write(tmp_path / "c.yaml", "- 1\n- 2\n"))

    def test_malformed(self, tmp_path):
        with pytest.raises(ConfigError, match="malformed YAML"):
            _io.read_config(_write(tmp_path / "c.yaml", "a: [1, 2\n"))

    def test_missing(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            _io.read_config(tmp_path / "absent.yaml")


def test_registry_written_by_synth_reads_back(fixture_dir):
    registry = _io.read_municipalities(fixture_dir["municipalities"])
    aggregates = _io.read_aggregates(fixture_dir["aggregates"])
    assert set(aggregates) == set(registry.ids)
    assert registry.n == 20 and registry.m == 30


def test_package_root_reads_written_fixture(fixture_dir):
    registry = commutenet.read_municipalities(fixture_dir["municipalities"])
    aggregates = commutenet.read_aggregates(fixture_dir["aggregates"])
    records = commutenet.read_flows(fixture_dir["flows"])
    assert set(aggregates) == set(registry.ids)
    assert sum(r.count for r in records) >= sum(aggregates[mid].out_commuters for mid in registry.region_ids)
