"""Tests for commutenet.config."""

from pathlib import Path

import pytest

from commutenet import PUBLISHED_BETA, AveragingMode, ConfigError, Scope, Shape
from commutenet.config import (
    BETA_CALIBRATE,
    BETA_CONSTANT,
    DEFAULT_STABILITY_THRESHOLD,
    Base,
    RunConfig,
    parse_beta,
)

INPUTS = {"municipalities": "m.csv", "aggregates": "a.csv"}
WITH_OBSERVED = {**INPUTS, "observed": "f.csv"}


class TestParseBeta:
    @pytest.mark.parametrize(
        "value, expected",
        [
            ("constant", BETA_CONSTANT),
            (" Calibrate ", BETA_CALIBRATE),
            ("2e-4", 2e-4),
            (1.5, 1.5),
            (0, 0.0),
        ],
    )
    def test_valid(self, value, expected):
        assert parse_beta(value) == expected

    @pytest.mark.parametrize("value", ["fast", "-1", "nan", None])
    def test_invalid(self, value):
        with pytest.raises(ConfigError):
            parse_beta(value)


class TestRunConfig:
    def test_generate_defaults(self):
        config = RunConfig.from_sources("generate", INPUTS)
        assert config.replications == 1
        assert config.municipalities == Path("m.csv")
        assert config.out == Path("out")
        assert config.shape is Shape.EXPONENTIAL
        assert config.base is Base.OUTSIDE
        assert config.fixed_beta == PUBLISHED_BETA
        assert config.effective_scope is Scope.REGION_AND_OUTSIDE
        assert config.stability_threshold == DEFAULT_STABILITY_THRESHOLD

    def test_compare_defaults_to_ten_replications(self):
        assert RunConfig.from_sources("compare", WITH_OBSERVED).replications == 10

    def test_flags_win_over_file(self):
        config = RunConfig.from_sources(
            "generate",
            {**INPUTS, "replications": 4},
            {"replications": 2, "seed": 9, "distance-strategy": "lazy"},
        )
        assert config.replications == 4
        assert config.seed == 9
        assert config.distance_strategy == "lazy"

    def test_unknown_file_key(self):
        with pytest.raises(ConfigError, match="Unknown configuration keys") as info:
            RunConfig.from_sources("generate", INPUTS, {"replicatoins": 3})
        assert info.value.details["keys"] == ["replicatoins"]

    def test_unknown_command(self):
        with pytest.raises(ConfigError):
            RunConfig(command="plot", **INPUTS)

    def test_strings_coerced(self):
        config = RunConfig.from_sources("generate", INPUTS, {"seed": "12", "tolerance": "1e-4"})
        assert config.seed == 12
        assert config.tolerance == 1e-4

    def test_bad_number(self):
        with pytest.raises(ConfigError, match="replications"):
            RunConfig.from_sources("generate", {**INPUTS, "replications": "ten"})

    @pytest.mark.parametrize(
        "command, values, fragment",
        [
            ("generate", {"aggregates": "a.csv"}, "--municipalities"),
            ("generate", {"municipalities": "m.csv"}, "--aggregates"),
            ("compare", INPUTS, "--observed"),
            ("calibrate", INPUTS, "--observed"),
            ("generate", {**INPUTS, "beta": "calibrate"}, "--observed"),
            ("generate", {"municipalities": "m.csv", "base": "region"}, "--observed"),
            ("generate", {**INPUTS, "replications": 0}, "replications"),
            ("generate", {**INPUTS, "seed": -1}, "seed"),
            ("generate", {**INPUTS, "bins": 0}, "bins"),
            ("generate", {**INPUTS, "jobs": 0}, "jobs"),
            ("generate", {**INPUTS, "distance_strategy": "sparse"}, "strategy"),
            ("generate", {**INPUTS, "base": "country"}, "base"),
            ("generate", {**INPUTS, "averaging": "median"}, "averaging"),
        ],
    )
    def test_validation(self, command, values, fragment):
        with pytest.raises(ConfigError, match=fragment):
            RunConfig.from_sources(command, values)

    def test_constant_needs_exponential_law(self):
        with pytest.raises(ConfigError, match="exponential"):
            RunConfig.from_sources("generate", {**INPUTS, "shape": "power"})
        explicit = RunConfig.from_sources("generate", {**INPUTS, "shape": "power", "beta": "1.5"})
        assert explicit.fixed_beta == 1.5

    def test_calibrate_ignores_constant_with_power_law(self):
        config = RunConfig.from_sources("calibrate", {**WITH_OBSERVED, "shape": "power"})
        assert config.shape is Shape.POWER

    def test_region_base(self):
        config = RunConfig.from_sources("compare", {"municipalities": "m.csv", "observed": "f.csv", "base": "region"})
        assert config.base is Base.REGION
        assert config.aggregates is None
        assert config.effective_scope is Scope.REGION_ONLY

    def test_explicit_scope_wins(self):
        config = RunConfig.from_sources("generate", {**INPUTS, "scope": "region-only"})
        assert config.effective_scope is Scope.REGION_ONLY

    def test_calibrate_beta_has_no_fixed_value(self):
        config = RunConfig.from_sources("generate", {**WITH_OBSERVED, "beta": "calibrate"})
        assert config.fixed_beta is None

    def test_calibration_config(self):
        config = RunConfig.from_sources(
            "calibrate",
            {**WITH_OBSERVED, "seed": 5, "lo": "1e-5", "hi": 1e-3, "averaging": "mean_ks", "jobs": -1},
        )
        calibration = config.calibration_config()
        assert calibration.replications == 10
        assert calibration.base_seed == 5
        assert calibration.bracket(Shape.EXPONENTIAL) == (1e-5, 1e-3)
        assert calibration.averaging is AveragingMode.MEAN_KS
        assert calibration.scope is Scope.REGION_AND_OUTSIDE
        assert calibration.jobs == -1
