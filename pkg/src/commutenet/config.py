"""Run configuration for the pipeline commands.

Values come from three layers: built-in defaults, an optional YAML file, and
explicit command-line flags. Later layers win.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from . import errors
from .calibration import PUBLISHED_BETA, AveragingMode, CalibrationConfig
from .generator import DEFAULT_REFRESH_INTERVAL, Shape
from .geodata import DEFAULT_AUTO_THRESHOLD
from .metrics import DEFAULT_BINS, Scope

BETA_CONSTANT = "constant"
BETA_CALIBRATE = "calibrate"

# Spread of CPC across replications on real data was 1.02% of the mean at most.
DEFAULT_STABILITY_THRESHOLD = 0.0102

PIPELINE_COMMANDS = ("generate", "compare", "calibrate", "distances")

_COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "generate": {"replications": 1},
    "distances": {"replications": 1},
    "compare": {"replications": 10},
    "calibrate": {"replications": 10},
}

_PATH_KEYS = ("municipalities", "aggregates", "observed", "out")


class Base(str, Enum):
    """Job-search base: the region alone, or the region plus its outside."""

    OUTSIDE = "outside"
    REGION = "region"


def parse_beta(value: Union[str, float, int]) -> Union[str, float]:
    """``"constant"``, ``"calibrate"`` or a non-negative float."""
    if isinstance(value, str) and value.strip().lower() in (BETA_CONSTANT, BETA_CALIBRATE):
        return value.strip().lower()
    try:
        beta = float(value)
    except (TypeError, ValueError):
        raise errors.ConfigError(
            f"beta must be a number, 'constant' or 'calibrate', got {value!r}"
        ) from None
    if math.isnan(beta) or beta < 0:
        raise errors.ConfigError(f"beta must be non-negative, got {value!r}")
    return beta


@dataclass(frozen=True)
class RunConfig:
    """Everything one pipeline command needs."""

    command: str
    municipalities: Optional[Path] = None
    aggregates: Optional[Path] = None
    observed: Optional[Path] = None
    out: Path = Path("out")
    shape: Shape = Shape.EXPONENTIAL
    beta: Union[float, str] = BETA_CONSTANT
    replications: int = 1
    seed: int = 0
    base: Base = Base.OUTSIDE
    scope: Optional[Scope] = None
    distance_strategy: str = "auto"
    auto_threshold: int = DEFAULT_AUTO_THRESHOLD
    refresh_interval: int = DEFAULT_REFRESH_INTERVAL
    bins: int = DEFAULT_BINS
    jobs: int = 1
    stability_threshold: float = DEFAULT_STABILITY_THRESHOLD
    lo: Optional[float] = None
    hi: Optional[float] = None
    tolerance: float = 1e-6
    averaging: AveragingMode = AveragingMode.PER_REPLICATION
    log_scale: bool = True
    max_probes: int = 200

    def __post_init__(self) -> None:
        if self.command not in PIPELINE_COMMANDS:
            raise errors.ConfigError(f"Unknown command {self.command!r}")
        for key in _PATH_KEYS:
            value = getattr(self, key)
            if value is not None:
                self._set(key, Path(value))
        self._set("shape", Shape.parse(self.shape))
        self._set("beta", parse_beta(self.beta))
        try:
            self._set("base", Base(str(getattr(self.base, "value", self.base)).lower()))
        except ValueError:
            raise errors.ConfigError(f"base must be outside or region, got {self.base!r}") from None
        if self.scope is not None:
            self._set("scope", Scope.parse(self.scope))
        try:
            self._set("averaging", AveragingMode(getattr(self.averaging, "value", self.averaging)))
        except ValueError:
            raise errors.ConfigError(
                f"averaging must be per_replication or mean_ks, got {self.averaging!r}"
            ) from None
        for key in ("replications", "seed", "auto_threshold", "refresh_interval", "bins", "jobs", "max_probes"):
            self._set(key, self._number(key, int))
        for key in ("stability_threshold", "tolerance"):
            self._set(key, self._number(key, float))
        for key in ("lo", "hi"):
            if getattr(self, key) is not None:
                self._set(key, self._number(key, float))
        self._validate()

    def _set(self, name: str, value: Any) -> None:
        object.__setattr__(self, name, value)

    def _number(self, name: str, kind: type) -> Any:
        value = getattr(self, name)
        try:
            return kind(value)
        except (TypeError, ValueError):
            raise errors.ConfigError(f"{name} must be {kind.__name__}, got {value!r}") from None

    def _validate(self) -> None:
        if self.municipalities is None:
            raise errors.ConfigError(f"{self.command} needs --municipalities")
        if self.base is Base.OUTSIDE and self.aggregates is None:
            raise errors.ConfigError(
                f"{self.command} needs --aggregates (or --base region with --observed)"
            )
        if self.observed is None:
            if self.command in ("compare", "calibrate"):
                raise errors.ConfigError(f"{self.command} needs --observed flows")
            if self.base is Base.REGION:
                raise errors.ConfigError("--base region builds its inputs from --observed flows")
            if self.beta == BETA_CALIBRATE:
                raise errors.ConfigError("--beta calibrate needs --observed flows")
        if (
            self.command != "calibrate"
            and self.beta == BETA_CONSTANT
            and self.shape is not Shape.EXPONENTIAL
        ):
            raise errors.ConfigError(
                "The published constant applies to the exponential law; pass --beta explicitly "
                "or calibrate for the power law"
            )
        if self.replications < 1:
            raise errors.ConfigError(f"replications must be >= 1, got {self.replications}")
        if self.seed < 0:
            raise errors.ConfigError(f"seed must be >= 0, got {self.seed}")
        if self.bins < 1:
            raise errors.ConfigError(f"bins must be >= 1, got {self.bins}")
        if self.jobs == 0:
            raise errors.ConfigError("jobs must be a positive count or negative (joblib style)")
        if self.distance_strategy not in ("dense", "lazy", "auto"):
            raise errors.ConfigError(
                f"distance strategy must be dense, lazy or auto, got {self.distance_strategy!r}"
            )

    @classmethod
    def from_sources(
        cls,
        command: str,
        flags: Mapping[str, Any],
        file_values: Optional[Mapping[str, Any]] = None,
    ) -> RunConfig:
        """Merge defaults < file values < explicit flags."""
        known = {f.name for f in fields(cls)} - {"command"}
        file_values = {k.replace("-", "_"): v for k, v in (file_values or {}).items()}
        unknown = sorted(set(file_values) - known)
        if unknown:
            raise errors.ConfigError(f"Unknown configuration keys: {unknown}", details={"keys": unknown})
        values: dict[str, Any] = dict(_COMMAND_DEFAULTS.get(command, {}))
        values.update(file_values)
        values.update({k: v for k, v in flags.items() if k in known})
        return cls(command=command, **values)

    @property
    def effective_scope(self) -> Scope:
        if self.scope is not None:
            return self.scope
        return Scope.REGION_ONLY if self.base is Base.REGION else Scope.REGION_AND_OUTSIDE

    @property
    def fixed_beta(self) -> Optional[float]:
        """The β to generate with, or ``None`` when it must be calibrated."""
        if self.beta == BETA_CALIBRATE:
            return None
        if self.beta == BETA_CONSTANT:
            return PUBLISHED_BETA
        return float(self.beta)

    def calibration_config(self) -> CalibrationConfig:
        return CalibrationConfig(
            replications=self.replications,
            lo=self.lo,
            hi=self.hi,
            tolerance=self.tolerance,
            scope=self.effective_scope,
            base_seed=self.seed,
            averaging=self.averaging,
            log_scale=self.log_scale,
            max_probes=self.max_probes,
            jobs=self.jobs,
        )
