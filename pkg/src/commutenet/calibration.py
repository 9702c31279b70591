"""Calibration of β against an observed commuting-distance distribution.

β is chosen to minimize the KS distance between the simulated and observed
distance distributions. Each replication fixes its seed for the whole search
(common random numbers), which makes the objective deterministic in β.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from . import errors
from .generator import DeterrenceSpec, GenerationInputs, Shape
from .metrics import Scope, WeightedDistanceDistribution, distance_distribution, ks_distance
from .od import ODMatrix

logger = logging.getLogger("commutenet.calibration")

# Mean of the exponential-law β calibrated over 34 French regions, in 1/m.
PUBLISHED_BETA = 1.94e-4

DEFAULT_BRACKETS: dict[Shape, tuple[float, float]] = {
    Shape.EXPONENTIAL: (1e-6, 1e-2),
    Shape.POWER: (0.1, 10.0),
}

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class BetaConstant:
    """A fixed β usable without calibration data."""

    value: float = PUBLISHED_BETA
    shape: Shape = Shape.EXPONENTIAL

    def spec(self) -> DeterrenceSpec:
        return DeterrenceSpec(self.shape, self.value)


def constant_beta() -> BetaConstant:
    """The published constant ``C = 1.94e-4`` (exponential law, distances in meters)."""
    return BetaConstant()


class AveragingMode(str, Enum):
    """How replications are combined.

    ``per_replication`` minimizes each replication separately and averages the
    minimizers. ``mean_ks`` minimizes the replication-averaged KS once.
    """

    PER_REPLICATION = "per_replication"
    MEAN_KS = "mean_ks"


@dataclass(frozen=True)
class CalibrationConfig:
    """Search settings; ``lo``/``hi`` default to the shape's bracket."""

    replications: int = 10
    lo: float | None = None
    hi: float | None = None
    tolerance: float = 1e-6
    scope: Scope = Scope.REGION_AND_OUTSIDE
    base_seed: int = 0
    averaging: AveragingMode = AveragingMode.PER_REPLICATION
    log_scale: bool = True
    max_probes: int = 200
    jobs: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "scope", Scope.parse(self.scope))
        object.__setattr__(self, "averaging", AveragingMode(self.averaging))
        if self.replications < 1:
            raise errors.ConfigError(f"replications must be >= 1, got {self.replications}")
        if not self.tolerance > 0:
            raise errors.ConfigError(f"tolerance must be > 0, got {self.tolerance}")
        if self.max_probes < 3:
            raise errors.ConfigError(f"max_probes must be >= 3, got {self.max_probes}")
        if self.lo is not None and self.hi is not None and not self.lo < self.hi:
            raise errors.ConfigError(f"Search bracket needs lo < hi, got [{self.lo}, {self.hi}]")

    def bracket(self, shape: Shape) -> tuple[float, float]:
        default_lo, default_hi = DEFAULT_BRACKETS[Shape.parse(shape)]
        lo = default_lo if self.lo is None else float(self.lo)
        hi = default_hi if self.hi is None else float(self.hi)
        if not lo < hi:
            raise errors.ConfigError(f"Search bracket needs lo < hi, got [{lo}, {hi}]")
        if self.log_scale and lo <= 0:
            raise errors.ConfigError("A log-scale search needs lo > 0")
        if lo < 0:
            raise errors.ConfigError("beta cannot be negative")
        return lo, hi


@dataclass(frozen=True)
class Probe:
    beta: float
    ks: float


@dataclass(frozen=True)
class ReplicationResult:
    """Outcome of the β search for one seed."""

    seed: int
    beta_star: float
    ks: float
    trace: tuple[Probe, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "beta_star": self.beta_star,
            "ks": self.ks,
            "trace": [{"beta": p.beta, "ks": p.ks} for p in self.trace],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ReplicationResult:
        return cls(
            seed=int(data["seed"]),
            beta_star=float(data["beta_star"]),
            ks=float(data["ks"]),
            trace=tuple(Probe(float(p["beta"]), float(p["ks"])) for p in data.get("trace", [])),
        )


@dataclass(frozen=True)
class CalibrationReport:
    """Per-replication minimizers and their mean, min and max."""

    shape: Shape
    scope: Scope
    averaging: AveragingMode
    per_replication: tuple[ReplicationResult, ...]
    beta_average: float = field(init=False)
    beta_min: float = field(init=False)
    beta_max: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.per_replication:
            raise errors.ContractError("A calibration report needs at least one replication")
        betas = [r.beta_star for r in self.per_replication]
        object.__setattr__(self, "per_replication", tuple(self.per_replication))
        object.__setattr__(self, "beta_average", float(np.mean(betas)))
        object.__setattr__(self, "beta_min", float(min(betas)))
        object.__setattr__(self, "beta_max", float(max(betas)))

    @property
    def replications(self) -> int:
        return len(self.per_replication)

    def to_dict(self) -> dict[str, Any]:
        return {
            "shape": self.shape.value,
            "scope": self.scope.value,
            "averaging": self.averaging.value,
            "beta_average": self.beta_average,
            "beta_min": self.beta_min,
            "beta_max": self.beta_max,
            "per_replication": [r.to_dict() for r in self.per_replication],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> CalibrationReport:
        return cls(
            shape=Shape.parse(data["shape"]),
            scope=Scope.parse(data["scope"]),
            averaging=AveragingMode(data.get("averaging", AveragingMode.PER_REPLICATION.value)),
            per_replication=tuple(
                ReplicationResult.from_dict(r) for r in data["per_replication"]
            ),
        )


def objective(
    beta: float,
    seed: int,
    inputs: GenerationInputs,
    observed: WeightedDistanceDistribution,
    scope: Union[Scope, str] = Scope.REGION_AND_OUTSIDE,
) -> float:
    """KS distance between one generation at ``(beta, seed)`` and the observed distribution."""
    simulated = inputs.generate(beta, seed)
    return ks_distance(distance_distribution(simulated, inputs.distances, scope), observed)


def golden_section(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    tolerance: float = 1e-6,
    *,
    log_scale: bool = True,
    max_probes: int = 200,
) -> tuple[Probe, tuple[Probe, ...]]:
    """Minimize ``fn`` over ``[lo, hi]`` by golden-section search.

    Stops once the bracket is narrower than ``tolerance`` relative to β.
    Returns the best probe and the full probe trace in evaluation order.
    """
    to_t: Callable[[float], float] = math.log if log_scale else float
    from_t: Callable[[float], float] = math.exp if log_scale else float
    trace: list[Probe] = []

    def probe(t: float) -> float:
        beta = from_t(t)
        value = float(fn(beta))
        trace.append(Probe(beta, value))
        logger.debug("probe beta=%.6g ks=%.6g", beta, value)
        return value

    def converged(a: float, b: float) -> bool:
        if log_scale:
            return b - a <= tolerance
        return b - a <= tolerance * max(abs(a + b) / 2.0, np.finfo(float).tiny)

    a0, b0 = to_t(lo), to_t(hi)
    a, b = a0, b0
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = probe(c), probe(d)
    while not converged(a, b):
        if len(trace) >= max_probes:
            raise errors.ConvergenceError(
                f"beta search did not reach tolerance {tolerance:g} within {max_probes} probes "
                f"(bracket [{from_t(a):.6g}, {from_t(b):.6g}])",
                details={"trace": [{"beta": p.beta, "ks": p.ks} for p in trace]},
            )
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = probe(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = probe(d)

    best = Probe(from_t(c), fc) if fc <= fd else Probe(from_t(d), fd)
    if a == a0 or b == b0:
        # The bracket never moved off one end: the minimum may lie beyond it.
        logger.warning(
            "Calibrated beta=%.6g sits on the search bracket edge [%g, %g]", best.beta, lo, hi
        )
    return best, tuple(trace)


def _calibrate_replication(
    inputs: GenerationInputs,
    observed: WeightedDistanceDistribution,
    seed: int,
    config: CalibrationConfig,
) -> ReplicationResult:
    lo, hi = config.bracket(inputs.shape)
    best, trace = golden_section(
        lambda beta: objective(beta, seed, inputs, observed, config.scope),
        lo,
        hi,
        config.tolerance,
        log_scale=config.log_scale,
        max_probes=config.max_probes,
    )
    logger.info("Replication seed=%d: beta*=%.6g ks=%.6g (%d probes)", seed, best.beta, best.ks, len(trace))
    return ReplicationResult(seed, best.beta, best.ks, trace)


def calibrate(
    inputs: GenerationInputs,
    observed: Union[ODMatrix, WeightedDistanceDistribution],
    config: CalibrationConfig | None = None,
) -> CalibrationReport:
    """Fit β for ``inputs.shape`` over ``config.replications`` seeds.

    ``observed`` is either a flow table (its distance distribution is taken
    in ``config.scope``) or a ready-made distance distribution. Replication
    ``r`` uses seed ``config.base_seed + r``.
    """
    config = config or CalibrationConfig()
    if isinstance(observed, ODMatrix):
        observed = distance_distribution(observed, inputs.distances, config.scope)
    if observed.is_degenerate:
        raise errors.DegenerateDistributionError("The observed distance distribution is empty")
    seeds = [config.base_seed + r for r in range(config.replications)]

    if config.averaging is AveragingMode.PER_REPLICATION:
        results = Parallel(n_jobs=config.jobs)(
            delayed(_calibrate_replication)(inputs, observed, seed, config) for seed in seeds
        )
    else:
        results = _calibrate_mean_ks(inputs, observed, seeds, config)

    report = CalibrationReport(inputs.shape, config.scope, config.averaging, tuple(results))
    logger.info(
        "Calibrated %s beta: average=%.6g (min %.6g, max %.6g) over %d replications",
        inputs.shape.value, report.beta_average, report.beta_min, report.beta_max,
        report.replications,
    )
    return report


def _calibrate_mean_ks(
    inputs: GenerationInputs,
    observed: WeightedDistanceDistribution,
    seeds: Sequence[int],
    config: CalibrationConfig,
) -> list[ReplicationResult]:
    lo, hi = config.bracket(inputs.shape)
    parallel = Parallel(n_jobs=config.jobs)

    def mean_ks(beta: float) -> float:
        values = parallel(
            delayed(objective)(beta, seed, inputs, observed, config.scope) for seed in seeds
        )
        return float(np.mean(values))

    best, trace = golden_section(
        mean_ks, lo, hi, config.tolerance, log_scale=config.log_scale, max_probes=config.max_probes
    )
    return [
        ReplicationResult(seed, best.beta, objective(best.beta, seed, inputs, observed, config.scope), trace)
        for seed in seeds
    ]


def pool_constant(reports: Iterable[CalibrationReport]) -> BetaConstant:
    """Average the calibrated β of several regions into one constant."""
    reports = list(reports)
    if not reports:
        raise errors.ContractError("pool_constant needs at least one calibration report")
    shapes = {r.shape for r in reports}
    if len(shapes) != 1:
        raise errors.ContractError(
            f"Cannot pool calibrations of different shapes: {sorted(s.value for s in shapes)}"
        )
    values = [r.beta_average for r in reports]
    pooled = BetaConstant(float(np.mean(values)), shapes.pop())
    logger.info(
        "Pooled beta over %d regions: %.6g (range %.6g to %.6g)",
        len(values), pooled.value, min(values), max(values),
    )
    return pooled
