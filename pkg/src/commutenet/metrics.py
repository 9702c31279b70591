"""Network comparison indices and commuting-distance distributions."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from . import errors
from .geodata import DistanceProvider
from .od import ODMatrix, RegionPlusOutsideOD

DEFAULT_BINS = 50

Network = Union[ODMatrix, RegionPlusOutsideOD]


class Scope(str, Enum):
    """Which commuters enter a distance distribution."""

    REGION_ONLY = "region_only"
    REGION_AND_OUTSIDE = "region_and_outside"

    @classmethod
    def parse(cls, value: Union[Scope, str]) -> Scope:
        if isinstance(value, Scope):
            return value
        try:
            return cls(str(value).strip().lower().replace("-", "_"))
        except ValueError:
            raise errors.ConfigError(
                f"Unknown distance scope {value!r} (expected region_only or region_and_outside)"
            ) from None


def _as_od(network: Network) -> ODMatrix:
    return network.as_od() if isinstance(network, RegionPlusOutsideOD) else network


def _aligned(simulated: Network, observed: Network) -> tuple[np.ndarray, np.ndarray]:
    s, r = _as_od(simulated), _as_od(observed)
    if s.origin_ids != r.origin_ids or s.dest_ids != r.dest_ids:
        raise errors.ContractError(
            f"Networks are indexed differently ({s.shape} vs {r.shape}); compare like with like"
        )
    return s.flows, r.flows


def ncc(simulated: Network, observed: Network) -> int:
    """Number of common commuters: ``sum(min(S, R))``."""
    s, r = _aligned(simulated, observed)
    return int(np.minimum(s, r).sum())


def nc(network: Network) -> int:
    """Number of commuters in a network."""
    return int(_as_od(network).flows.sum())


def cpc(simulated: Network, observed: Network) -> float:
    """Common part of commuters (Sørensen index) between two networks.

    1 when every flow is identical, 0 when no flow is shared.
    """
    common = ncc(simulated, observed)
    denominator = nc(simulated) + nc(observed)
    if denominator == 0:
        raise errors.DegenerateDistributionError("CPC is undefined for two empty networks")
    return 2.0 * common / denominator


def cpc_regional_block(simulated: Network, observed: ODMatrix) -> float:
    """CPC restricted to region -> region commuters.

    ``simulated`` may be a collapsed table or an ``n x m`` generation; only
    the block indexed by ``observed``'s ids is compared.
    """
    block = _as_od(simulated).submatrix(observed.origin_ids, observed.dest_ids)
    return cpc(block, observed)


@dataclass(frozen=True)
class WeightedDistanceDistribution:
    """Commuting distances (meters) weighted by integer commuter counts."""

    distances: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        d = np.array(self.distances, dtype=np.float64).ravel()
        w = np.array(self.weights, dtype=np.int64).ravel()
        if d.shape != w.shape:
            raise errors.ContractError("distances and weights must have the same length")
        if w.size and w.min() < 0:
            raise errors.ContractError("weights must be non-negative")
        order = np.argsort(d, kind="stable")
        d, w = d[order], w[order]
        d.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "distances", d)
        object.__setattr__(self, "weights", w)

    @property
    def total_weight(self) -> int:
        return int(self.weights.sum())

    @property
    def is_degenerate(self) -> bool:
        return self.total_weight == 0

    def steps(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct distances and the cumulative integer weight at each."""
        if self.distances.size == 0:
            return self.distances, self.weights
        values, first = np.unique(self.distances, return_index=True)
        cumulative = np.cumsum(self.weights)
        last = np.append(first[1:], self.distances.size) - 1
        return values, cumulative[last]

    def ecdf(self, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """Right-continuous weighted ECDF evaluated at ``x``."""
        if self.is_degenerate:
            raise errors.DegenerateDistributionError("ECDF of an empty distribution")
        values, cumulative = self.steps()
        padded = np.concatenate(([0], cumulative))
        idx = np.searchsorted(values, x, side="right")
        result = padded[idx] / self.total_weight
        return float(result) if np.ndim(result) == 0 else result


def distance_distribution(
    network: ODMatrix,
    distances: DistanceProvider,
    scope: Union[Scope, str] = Scope.REGION_AND_OUTSIDE,
) -> WeightedDistanceDistribution:
    """Each nonzero flow contributes its origin-destination distance once, weighted by the count.

    ``region_only`` keeps region destinations only; ``region_and_outside``
    also keeps commuters working outside.
    """
    scope = Scope.parse(scope)
    registry = distances.registry
    rows = registry.positions(network.origin_ids)
    cols = registry.positions(network.dest_ids)
    if rows.size and rows.max() >= registry.n:
        raise errors.ContractError("Distance distributions need region-resident origins")
    keep = cols < registry.n if scope is Scope.REGION_ONLY else np.ones(cols.size, dtype=bool)
    flows = network.flows[:, keep]
    kept_cols = cols[keep]
    oi, dj = np.nonzero(flows)
    sample = np.empty(oi.size, dtype=np.float64)
    # np.nonzero is row-major, so each origin's entries form one contiguous run.
    bounds = np.searchsorted(oi, np.arange(flows.shape[0] + 1))
    for origin in np.flatnonzero(np.diff(bounds)):
        start, stop = bounds[origin], bounds[origin + 1]
        sample[start:stop] = distances.row(int(rows[origin]))[kept_cols[dj[start:stop]]]
    return WeightedDistanceDistribution(sample, flows[oi, dj])


def ks_distance(a: WeightedDistanceDistribution, b: WeightedDistanceDistribution) -> float:
    """Largest gap between two weighted ECDFs.

    Evaluated exactly over the union of both step points, in integer
    arithmetic until the final division.
    """
    if a.is_degenerate or b.is_degenerate:
        raise errors.DegenerateDistributionError(
            "KS distance needs two non-empty distributions",
            details={"weight_a": a.total_weight, "weight_b": b.total_weight},
        )
    va, ca = a.steps()
    vb, cb = b.steps()
    points = np.union1d(va, vb)
    fa = np.concatenate(([0], ca))[np.searchsorted(va, points, side="right")]
    fb = np.concatenate(([0], cb))[np.searchsorted(vb, points, side="right")]
    wa, wb = a.total_weight, b.total_weight
    if wa * wb >= 2**62:
        fa, fb = fa.astype(object), fb.astype(object)
    gap = int(np.abs(fa * wb - fb * wa).max())
    return gap / (wa * wb)


def binned_density(
    dist: WeightedDistanceDistribution,
    bins: int = DEFAULT_BINS,
    max_distance: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width display histogram over ``[0, max_distance]``.

    Returns ``(edges, density)``; ``sum(density * width) == 1``. For plotting
    only; KS never uses bins.
    """
    if dist.is_degenerate:
        raise errors.DegenerateDistributionError("Cannot bin an empty distribution")
    if bins < 1:
        raise errors.ConfigError(f"bins must be >= 1, got {bins}")
    upper = float(dist.distances.max()) if max_distance is None else float(max_distance)
    if upper <= 0:
        upper = 1.0
    density, edges = np.histogram(
        dist.distances, bins=bins, range=(0.0, upper), weights=dist.weights, density=True
    )
    return edges, density
