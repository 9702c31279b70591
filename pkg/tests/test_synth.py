"""Tests for commutenet.synth."""

import math

import numpy as np
import pytest

from commutenet import ConfigError, ContractError, Shape
from commutenet import _io
from commutenet.synth import REGION_PRESETS, SynthConfig, synthesize

from .conftest import SAMPLE_BETA


class TestSynthConfig:
    def test_defaults(self):
        config = SynthConfig()
        assert (config.n, config.m) == (20, 30)
        assert config.beta == SAMPLE_BETA
        assert config.shape is Shape.EXPONENTIAL
        assert config.region_side == pytest.approx(100_000.0 * math.sqrt(20 / 30))

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n": 0},
            {"n": 10, "m": 5},
            {"n": 1, "m": 1},
            {"commuters": -1},
            {"extent_m": 0.0},
            {"region_extent_m": 200_000.0},
            {"seed": -3},
            {"slack": -0.1},
            {"shape": "triangular"},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            SynthConfig(**kwargs)

    def test_negative_beta(self):
        with pytest.raises(ContractError, match="non-negative"):
            SynthConfig(beta=-1.0)

    def test_preset(self):
        config = SynthConfig.from_preset("fr20", commuters=5000, seed=None)
        preset = REGION_PRESETS["FR20"]
        assert (config.n, config.m) == (36, 36 + 1245)
        assert config.commuters == 5000
        assert config.seed == 0
        assert config.preset == "FR20"
        assert config.region_side == pytest.approx(math.sqrt(176) * 1000.0)
        assert config.extent_m == pytest.approx(preset.extent_m)

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="FR34"):
            SynthConfig.from_preset("FR99")

    def test_all_presets_are_valid(self):
        assert len(REGION_PRESETS) == 34
        for preset in REGION_PRESETS.values():
            config = SynthConfig.from_preset(preset.id)
            assert config.region_side <= config.extent_m


class TestSynthesize:
    def test_marginals_match_ground_truth(self, small_fixture):
        registry, truth, aggregates = small_fixture.registry, small_fixture.truth, small_fixture.aggregates
        n = registry.n
        assert truth.origin_ids == registry.region_ids
        assert truth.dest_ids == registry.ids
        assert truth.total == 1000
        out = [aggregates[mid].out_commuters for mid in registry.region_ids]
        assert truth.row_sums().tolist() == out
        offers = np.array([aggregates[mid].in_commuters for mid in registry.ids])
        assert np.all(truth.col_sums() <= offers)
        assert offers.sum() >= math.ceil(1000 * 1.25)
        assert offers[registry.n :].sum() >= 1000

        # Region job offers are fully taken once outside residents are added.
        received = np.zeros(registry.m, dtype=np.int64)
        for record in small_fixture.flows:
            received[registry.position(record.dest_id)] += record.count
        assert received[:n].tolist() == offers[:n].tolist()

    def test_outside_out_commuters_count_inflow(self, small_fixture):
        registry = small_fixture.registry
        sent = {mid: 0 for mid in registry.outside_ids}
        for record in small_fixture.flows:
            if record.origin_id in sent:
                sent[record.origin_id] += record.count
                assert registry.position(record.dest_id) < registry.n
        for mid, count in sent.items():
            assert small_fixture.aggregates[mid].out_commuters == count

    def test_no_diagonal_records(self, small_fixture):
        assert all(r.origin_id != r.dest_id for r in small_fixture.flows)
        assert all(r.count > 0 for r in small_fixture.flows)

    def test_region_inside_central_square(self):
        config = SynthConfig(n=15, m=40, commuters=100, extent_m=10_000.0, region_extent_m=4_000.0, seed=8)
        fixture = synthesize(config)
        xy = fixture.registry.coordinates
        low, high = 3_000.0, 7_000.0
        region, outside = xy[: fixture.registry.n], xy[fixture.registry.n :]
        assert np.all((region >= low) & (region <= high))
        assert not np.any(np.all((outside >= low) & (outside <= high), axis=1))
        assert np.all((outside >= 0.0) & (outside <= 10_000.0))

    def test_deterministic(self):
        config = SynthConfig(n=10, m=15, commuters=200, seed=4)
        a, b = synthesize(config), synthesize(config)
        assert np.array_equal(a.registry.coordinates, b.registry.coordinates)
        assert np.array_equal(a.truth.flows, b.truth.flows)
        assert a.aggregates == b.aggregates
        assert a.flows == b.flows
        c = synthesize(SynthConfig(n=10, m=15, commuters=200, seed=5))
        assert not np.array_equal(a.registry.coordinates, c.registry.coordinates)

    @pytest.mark.parametrize("strategy", ["dense", "lazy"])
    def test_seed_sweep_never_strands_an_origin(self, strategy):
        for seed in range(40):
            fixture = synthesize(SynthConfig(n=10, m=15, commuters=200, seed=seed, distance_strategy=strategy))
            assert fixture.truth.total == 200

    def test_closed_region_redraws_marginals(self):
        for seed in range(10):
            fixture = synthesize(SynthConfig(n=12, m=12, commuters=300, seed=seed))
            assert fixture.truth.total == 300
            assert fixture.registry.outside_ids == ()
            out = [fixture.aggregates[mid].out_commuters for mid in fixture.registry.region_ids]
            assert fixture.truth.row_sums().tolist() == out

    def test_ground_truth_metadata(self, small_fixture):
        meta = small_fixture.truth.metadata
        assert meta["seed"] == 3
        assert meta["beta"] == SAMPLE_BETA

    def test_zero_commuters(self):
        fixture = synthesize(SynthConfig(n=3, m=5, commuters=0))
        assert fixture.truth.total == 0
        # Region job offers all go to outside residents.
        outside = set(fixture.registry.outside_ids)
        assert all(r.origin_id in outside for r in fixture.flows)

    def test_reduced_preset(self):
        fixture = synthesize(SynthConfig.from_preset("FR20", commuters=2000, seed=1))
        assert fixture.registry.n == 36
        assert fixture.registry.m == 1281
        assert fixture.truth.total == 2000


class TestWrite:
    def test_files_read_back(self, tmp_path, small_fixture):
        paths = small_fixture.write(tmp_path / "fx")
        assert set(paths) == {"municipalities", "aggregates", "flows", "metadata"}
        registry = _io.read_municipalities(paths["municipalities"])
        assert registry.ids == small_fixture.registry.ids
        assert _io.read_aggregates(paths["aggregates"]) == small_fixture.aggregates
        assert tuple(_io.read_flows(paths["flows"])) == small_fixture.flows
        meta = _io.read_json(paths["metadata"])
        assert meta["config"]["n"] == 20
        assert meta["commuters"] == 1000
        assert meta["generation"]["rng"] == "numpy.PCG64"

    def test_byte_identical_rewrites(self, tmp_path, small_fixture):
        first = small_fixture.write(tmp_path / "a")
        second = synthesize(small_fixture.config).write(tmp_path / "b")
        for key in first:
            assert first[key].read_bytes() == second[key].read_bytes()


@pytest.mark.slow
def test_large_region_preset():
    fixture = synthesize(SynthConfig.from_preset("FR10", commuters=50_000))
    assert fixture.registry.n == 3020
    assert fixture.truth.total == 50_000
