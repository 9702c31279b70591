"""Stochastic commuter assignment.

Every commuter of the region is given a workplace, one at a time. Each step
draws a residence municipality uniformly among those with commuters left,
then a destination ``j`` with probability proportional to
``remaining_I[j] * f(d_ij, beta)``, and decrements both counts. The run ends
when every out-commuter is placed, so row sums always equal ``O`` exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping, Sequence, Union

import numpy as np

from . import errors
from .geodata import DistanceProvider, MunicipalityRegistry
from .od import Aggregate, Marginals, ODMatrix, assemble_with_outside_inputs, marginals_from_od

logger = logging.getLogger("commutenet.generator")

RNG_ID = "numpy.PCG64"
DEFAULT_REFRESH_INTERVAL = 4096

_WEIGHT_CHECK_RTOL = 1e-9
# A maintained total that falls below this fraction of its last fresh value is
# recomputed; subtraction then keeps it within _WEIGHT_CHECK_RTOL.
_DECAY_REFRESH = 1e-3


class Shape(str, Enum):
    """Deterrence function family."""

    POWER = "power"
    EXPONENTIAL = "exponential"

    @classmethod
    def parse(cls, value: Union[Shape, str]) -> Shape:
        if isinstance(value, Shape):
            return value
        key = str(value).strip().lower()
        if key == "exp":
            key = "exponential"
        try:
            return cls(key)
        except ValueError:
            raise errors.ConfigError(
                f"Unknown deterrence shape {value!r} (expected power or exp)"
            ) from None


@dataclass(frozen=True)
class DeterrenceSpec:
    """Shape plus β.

    β is dimensionless for the power law and in inverse meters for the
    exponential law.
    """

    shape: Shape
    beta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "shape", Shape.parse(self.shape))
        beta = float(self.beta)
        if math.isnan(beta) or beta < 0:
            raise errors.ContractError(f"beta must be non-negative, got {self.beta!r}")
        object.__setattr__(self, "beta", beta)

    def to_dict(self) -> dict[str, Any]:
        return {"shape": self.shape.value, "beta": self.beta}


def deterrence(spec: DeterrenceSpec, d: Any) -> Any:
    """Distance-decay weight ``f(d, beta)``.

    ``exp(-beta * d)`` for the exponential law, ``d ** -beta`` for the power
    law. The power law is defined as 0 at ``d == 0``. Accepts a scalar or an
    array and returns the same kind.
    """
    dist = np.asarray(d, dtype=np.float64)
    if spec.shape is Shape.EXPONENTIAL:
        weight = np.exp(-spec.beta * dist)
    else:
        positive = dist > 0
        weight = np.where(positive, np.power(np.where(positive, dist, 1.0), -spec.beta), 0.0)
    if weight.ndim == 0:
        return float(weight)
    return weight


def _weight_row(spec: DeterrenceSpec, distances: np.ndarray, origin: int, width: int) -> np.ndarray:
    """Admissible weights from ``origin`` to the first ``width`` destinations."""
    d = distances[:width]
    weights = np.array(deterrence(spec, d), dtype=np.float64, ndmin=1)
    if spec.shape is Shape.POWER:
        coincident = d == 0
        if origin < width:
            coincident[origin] = False
        if coincident.any():
            raise errors.CoincidentMunicipalitiesError(
                f"Origin {origin} shares coordinates with destinations "
                f"{np.flatnonzero(coincident)[:10].tolist()}; the power law is undefined at d=0",
                details={"origin": origin, "destinations": np.flatnonzero(coincident).tolist()},
            )
    if origin < width:
        weights[origin] = 0.0
    return weights


def choice_probabilities(
    origin: int,
    remaining_in: Sequence[int] | np.ndarray,
    spec: DeterrenceSpec,
    distances: DistanceProvider,
) -> np.ndarray:
    """Destination probabilities for one commuter living in ``origin``.

    ``P[j]`` is proportional to ``remaining_in[j] * f(d[origin, j])`` and
    ``P[origin]`` is 0.
    """
    remaining = np.asarray(remaining_in, dtype=np.float64)
    weights = remaining * _weight_row(spec, distances.row(origin), origin, remaining.size)
    total = weights.sum()
    if not total > 0:
        raise _stuck(distances.registry, origin, remaining)
    return weights / total


def _stuck(
    registry: MunicipalityRegistry, origin: int, remaining_in: np.ndarray, pending: int = 1
) -> errors.StuckOriginError:
    open_dest = np.flatnonzero(remaining_in > 0)
    capacities = {registry[int(j)].id: int(remaining_in[j]) for j in open_dest[:20]}
    origin_id = registry[origin].id
    return errors.StuckOriginError(
        f"Origin {origin_id!r} has {pending} commuters left but no admissible destination "
        f"with remaining capacity ({open_dest.size} open destinations)",
        details={
            "origin": origin_id,
            "pending": pending,
            "open_destinations": int(open_dest.size),
            "remaining_capacity": capacities,
        },
    )


def generate(
    registry: MunicipalityRegistry,
    distances: DistanceProvider,
    in_commuters: Sequence[int] | np.ndarray,
    out_commuters: Sequence[int] | np.ndarray,
    spec: DeterrenceSpec,
    seed: int,
    *,
    refresh_interval: int = DEFAULT_REFRESH_INTERVAL,
    check_weights: bool = False,
) -> ODMatrix:
    """Assign every out-commuter of the region to a workplace.

    ``in_commuters`` covers the first ``len(in_commuters)`` registry
    municipalities (all ``m`` for the extended job-search base, the ``n``
    region members for the basic model); ``out_commuters`` covers the ``n``
    region municipalities. The result is a deterministic function of the
    inputs and ``seed``.

    With a dense distance provider the per-origin totals
    ``T_i = sum_k remaining_I[k] * w[i, k]`` are maintained incrementally and
    refreshed from scratch every ``refresh_interval`` assignments, or sooner
    for any total that has decayed by three orders of magnitude; a lazy
    provider recomputes them at each draw. Destinations are always drawn
    against the fresh cumulative sum of the origin's row, so both strategies
    sample the same distribution. ``check_weights`` verifies the maintained
    totals against that fresh sum at every draw.
    """
    if distances.registry is not registry and distances.registry.ids != registry.ids:
        raise errors.ContractError("Distance provider was built for a different registry")
    if refresh_interval < 1:
        raise errors.ContractError(f"refresh_interval must be >= 1, got {refresh_interval}")
    n = registry.n
    marginals = Marginals(in_commuters=in_commuters, out_commuters=out_commuters)
    width = marginals.in_commuters.size
    if marginals.out_commuters.size != n:
        raise errors.ContractError(
            f"Expected {n} out-commuter counts, got {marginals.out_commuters.size}"
        )
    if not 1 <= width <= registry.m:
        raise errors.ContractError(
            f"Expected between 1 and {registry.m} in-commuter counts, got {width}"
        )
    marginals.check_feasible()

    rng = np.random.default_rng(seed)
    flows = np.zeros((n, width), dtype=np.int64)
    remaining_in = marginals.in_commuters.astype(np.float64)
    remaining_out = marginals.out_commuters.copy()
    active = np.flatnonzero(remaining_out > 0)
    n_active = active.size

    incremental = distances.strategy == "dense"
    weights: np.ndarray | None = None
    totals: np.ndarray | None = None
    baseline: np.ndarray | None = None
    if incremental and n_active:
        weights = np.vstack([_weight_row(spec, distances.row(i), i, width) for i in range(n)])
        totals = weights @ remaining_in
        baseline = totals.copy()

    since_refresh = 0
    assigned = 0
    while n_active:
        k = int(rng.integers(n_active))
        i = int(active[k])
        row = weights[i] if weights is not None else _weight_row(spec, distances.row(i), i, width)
        cumulative = np.cumsum(remaining_in * row)
        fresh = cumulative[-1]
        if not fresh > 0:
            raise _stuck(registry, i, remaining_in, int(remaining_out[i]))
        if check_weights and totals is not None:
            total = totals[i]
            if abs(total - fresh) > _WEIGHT_CHECK_RTOL * fresh:
                raise errors.ContractError(
                    f"Maintained weight total for origin {i} drifted: {total!r} vs {fresh!r}",
                    details={"origin": i, "maintained": float(total), "fresh": float(fresh)},
                )

        # The target is always scaled by the row's own cumulative sum.
        j = int(np.searchsorted(cumulative, rng.random() * fresh, side="right"))
        if j >= width:
            # Rounding pushed the target past the end: the last admissible destination absorbs it.
            j = int(np.searchsorted(cumulative, fresh, side="left"))

        flows[i, j] += 1
        remaining_in[j] -= 1.0
        remaining_out[i] -= 1
        assigned += 1
        if totals is not None:
            totals -= weights[:, j]  # type: ignore[index]
            since_refresh += 1
            if since_refresh >= refresh_interval:
                totals = weights @ remaining_in  # type: ignore[operator]
                baseline = totals.copy()
                since_refresh = 0
            else:
                decayed = np.flatnonzero(totals < _DECAY_REFRESH * baseline)
                if decayed.size:
                    totals[decayed] = weights[decayed] @ remaining_in  # type: ignore[index]
                    baseline[decayed] = totals[decayed]  # type: ignore[index]
                    logger.debug("Recomputed %d decayed weight totals", decayed.size)
        if remaining_out[i] == 0:
            n_active -= 1
            active[k] = active[n_active]

    from . import __version__

    metadata = {
        "version": __version__,
        "shape": spec.shape.value,
        "beta": spec.beta,
        "seed": int(seed),
        "rng": RNG_ID,
        "refresh_interval": refresh_interval,
        "distance_strategy": distances.strategy,
        "weights": "incremental" if incremental else "per-draw",
    }
    logger.debug(
        "Assigned %d commuters (%s beta=%g seed=%d)", assigned, spec.shape.value, spec.beta, seed
    )
    return ODMatrix(registry.region_ids, registry.ids[:width], flows, metadata)


def generate_regional(
    registry: MunicipalityRegistry,
    distances: DistanceProvider,
    observed: ODMatrix,
    spec: DeterrenceSpec,
    seed: int,
    **kwargs: Any,
) -> ODMatrix:
    """Basic model: the job-search base is the region itself.

    Inputs are the marginals of the observed region x region table, so the
    simulated table has the same number of commuters as the observed one.
    """
    if observed.origin_ids != registry.region_ids:
        raise errors.ContractError(
            "Observed table must be indexed by the registry's region municipalities, in order"
        )
    marginals = marginals_from_od(observed)
    return generate(
        registry, distances, marginals.in_commuters, marginals.out_commuters, spec, seed, **kwargs
    )


@dataclass(frozen=True)
class GenerationInputs:
    """Everything except β and the seed needed to run one generation."""

    registry: MunicipalityRegistry
    distances: DistanceProvider
    marginals: Marginals
    shape: Shape = Shape.EXPONENTIAL
    refresh_interval: int = DEFAULT_REFRESH_INTERVAL

    def __post_init__(self) -> None:
        object.__setattr__(self, "shape", Shape.parse(self.shape))

    @classmethod
    def from_aggregates(
        cls,
        registry: MunicipalityRegistry,
        distances: DistanceProvider,
        aggregates: Mapping[str, Aggregate],
        shape: Union[Shape, str] = Shape.EXPONENTIAL,
        **kwargs: Any,
    ) -> GenerationInputs:
        """Extended job-search base built from aggregate counts."""
        marginals = assemble_with_outside_inputs(registry, aggregates)
        return cls(registry, distances, marginals, Shape.parse(shape), **kwargs)

    @classmethod
    def from_observed(
        cls,
        registry: MunicipalityRegistry,
        distances: DistanceProvider,
        observed: ODMatrix,
        shape: Union[Shape, str] = Shape.EXPONENTIAL,
        **kwargs: Any,
    ) -> GenerationInputs:
        """Basic job-search base built from an observed region x region table."""
        if observed.origin_ids != registry.region_ids:
            raise errors.ContractError(
                "Observed table must be indexed by the registry's region municipalities, in order"
            )
        return cls(registry, distances, marginals_from_od(observed), Shape.parse(shape), **kwargs)

    @property
    def has_outside(self) -> bool:
        return self.marginals.in_commuters.size > self.registry.n

    def spec(self, beta: float) -> DeterrenceSpec:
        return DeterrenceSpec(self.shape, beta)

    def generate(self, beta: float, seed: int) -> ODMatrix:
        return generate(
            self.registry,
            self.distances,
            self.marginals.in_commuters,
            self.marginals.out_commuters,
            self.spec(beta),
            seed,
            refresh_interval=self.refresh_interval,
        )
