"""Origin-destination matrices, marginals and the region-plus-outside collapse."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from . import errors
from .geodata import MunicipalityRegistry

logger = logging.getLogger("commutenet.od")

OUTSIDE_ID = "__OUTSIDE__"


class FlowRecord(NamedTuple):
    """One row of a detailed flows file."""

    origin_id: str
    dest_id: str
    count: int


class Aggregate(NamedTuple):
    """Aggregate commuter counts of one municipality."""

    in_commuters: int
    out_commuters: int


def _as_flow_array(flows: Any) -> np.ndarray:
    arr = np.asarray(flows)
    if arr.ndim != 2:
        raise errors.ContractError(f"Flow matrix must be 2-D, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        as_int = arr.astype(np.int64)
        if not np.array_equal(as_int, arr):
            raise errors.ContractError("Flow matrix entries must be integers")
        arr = as_int
    arr = np.array(arr, dtype=np.int64)
    if arr.size and arr.min() < 0:
        raise errors.ContractError("Flow matrix entries must be non-negative")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ODMatrix:
    """Integer commuter counts between an ordered origin set and destination set.

    Entries whose origin id equals the destination id are always zero: a
    commuter by definition works outside their municipality of residence.
    """

    origin_ids: tuple[str, ...]
    dest_ids: tuple[str, ...]
    flows: np.ndarray = field(compare=False)
    metadata: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "origin_ids", tuple(self.origin_ids))
        object.__setattr__(self, "dest_ids", tuple(self.dest_ids))
        flows = _as_flow_array(self.flows)
        if flows.shape != (len(self.origin_ids), len(self.dest_ids)):
            raise errors.ContractError(
                f"Flow matrix shape {flows.shape} does not match "
                f"{len(self.origin_ids)} origins x {len(self.dest_ids)} destinations"
            )
        object.__setattr__(self, "flows", flows)
        for i, j in self._self_pairs():
            if flows[i, j] != 0:
                raise errors.ContractError(
                    f"Nonzero self-flow for municipality {self.origin_ids[i]!r}",
                    details={"id": self.origin_ids[i], "count": int(flows[i, j])},
                )

    def _self_pairs(self) -> list[tuple[int, int]]:
        dest_pos = {d: j for j, d in enumerate(self.dest_ids)}
        return [(i, dest_pos[o]) for i, o in enumerate(self.origin_ids) if o in dest_pos]

    @property
    def shape(self) -> tuple[int, int]:
        return self.flows.shape  # type: ignore[return-value]

    @property
    def total(self) -> int:
        return int(self.flows.sum())

    @property
    def is_square(self) -> bool:
        return self.origin_ids == self.dest_ids

    def row_sums(self) -> np.ndarray:
        return self.flows.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.flows.sum(axis=0)

    def submatrix(self, origin_ids: Sequence[str], dest_ids: Sequence[str]) -> ODMatrix:
        """Restrict to the given ids (in the given order)."""
        opos = {o: i for i, o in enumerate(self.origin_ids)}
        dpos = {d: j for j, d in enumerate(self.dest_ids)}
        missing = [x for x in origin_ids if x not in opos] + [x for x in dest_ids if x not in dpos]
        if missing:
            raise errors.ContractError(
                f"Ids not present in the matrix: {missing[:5]}", details={"missing": missing}
            )
        rows = [opos[o] for o in origin_ids]
        cols = [dpos[d] for d in dest_ids]
        return ODMatrix(
            tuple(origin_ids), tuple(dest_ids), self.flows[np.ix_(rows, cols)], dict(self.metadata)
        )

    def records(self) -> Iterable[FlowRecord]:
        """Nonzero entries as flow records, origin-major."""
        for i, j in zip(*np.nonzero(self.flows)):
            yield FlowRecord(self.origin_ids[i], self.dest_ids[j], int(self.flows[i, j]))


@dataclass(frozen=True)
class Marginals:
    """In-commuters per destination (``I``) and out-commuters per origin (``O``)."""

    in_commuters: np.ndarray
    out_commuters: np.ndarray

    def __post_init__(self) -> None:
        for name in ("in_commuters", "out_commuters"):
            arr = np.array(getattr(self, name), dtype=np.int64).ravel()
            if arr.size and arr.min() < 0:
                raise errors.ContractError(f"{name} must be non-negative")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def is_feasible(self) -> bool:
        return int(self.in_commuters.sum()) >= int(self.out_commuters.sum())

    def check_feasible(self) -> None:
        total_in = int(self.in_commuters.sum())
        total_out = int(self.out_commuters.sum())
        if total_in < total_out:
            raise errors.InfeasibleInputsError(
                f"Job offers cannot absorb demand: sum(I)={total_in} < sum(O)={total_out} "
                f"(deficit {total_out - total_in})",
                details={"sum_in": total_in, "sum_out": total_out, "deficit": total_out - total_in},
            )


@dataclass(frozen=True)
class RegionPlusOutsideOD:
    """Square ``(n+1) x (n+1)`` table; index ``n`` is the aggregated outside."""

    region_ids: tuple[str, ...]
    flows: np.ndarray = field(compare=False)
    metadata: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "region_ids", tuple(self.region_ids))
        flows = _as_flow_array(self.flows)
        size = len(self.region_ids) + 1
        if flows.shape != (size, size):
            raise errors.ContractError(
                f"Collapsed table must be {size}x{size}, got {flows.shape}"
            )
        if np.any(np.diag(flows) != 0):
            raise errors.ContractError("Collapsed table must have a zero diagonal")
        object.__setattr__(self, "flows", flows)

    @property
    def n(self) -> int:
        return len(self.region_ids)

    @property
    def ids(self) -> tuple[str, ...]:
        return self.region_ids + (OUTSIDE_ID,)

    @property
    def region_block(self) -> np.ndarray:
        return self.flows[: self.n, : self.n]

    def as_od(self) -> ODMatrix:
        return ODMatrix(self.ids, self.ids, self.flows, dict(self.metadata))


def marginals_from_od(observed: ODMatrix) -> Marginals:
    """Column sums (``I``) and row sums (``O``) of a square regional table."""
    if not observed.is_square:
        raise errors.ContractError(
            "marginals_from_od needs a square table over one municipality set"
        )
    return Marginals(in_commuters=observed.col_sums(), out_commuters=observed.row_sums())


def assemble_with_outside_inputs(
    registry: MunicipalityRegistry,
    aggregates: Mapping[str, Aggregate],
) -> Marginals:
    """Generation inputs for the extended (region + outside) job-search base.

    ``I`` spans all ``m`` municipalities; ``O`` covers region residents only,
    since outside residents are never assigned.
    """
    missing = [mid for mid in registry.ids if mid not in aggregates]
    if missing:
        raise errors.LoadError(
            f"Missing aggregates for {len(missing)} municipalities (first: {missing[0]!r})",
            details={"missing": missing},
        )
    in_commuters = [int(aggregates[mid].in_commuters) for mid in registry.ids]
    out_commuters = [int(aggregates[mid].out_commuters) for mid in registry.region_ids]
    marginals = Marginals(in_commuters=in_commuters, out_commuters=out_commuters)
    marginals.check_feasible()
    return marginals


def collapse_to_region_plus_outside(
    full: ODMatrix,
    in_totals: Sequence[int] | np.ndarray,
) -> RegionPlusOutsideOD:
    """Fold the outside destinations of an ``n x m`` table into one node.

    ``in_totals`` are the aggregate in-commuter counts of the ``n`` region
    municipalities; the outside->region row is obtained by difference.
    """
    n = len(full.origin_ids)
    if full.dest_ids[:n] != full.origin_ids:
        raise errors.ContractError(
            "The first n destinations must be the region origins, in the same order"
        )
    totals = np.asarray(in_totals, dtype=np.int64)
    if totals.shape != (n,):
        raise errors.ContractError(f"Expected {n} in-commuter totals, got {totals.shape}")

    region = full.flows[:, :n]
    from_outside = totals - region.sum(axis=0)
    negative = np.flatnonzero(from_outside < 0)
    if negative.size:
        ids = [full.origin_ids[j] for j in negative]
        raise errors.InconsistentInputsError(
            f"Generated inflow exceeds the in-commuter total for {len(ids)} "
            f"municipalities (first: {ids[0]!r})",
            details={"ids": ids, "differences": [int(from_outside[j]) for j in negative]},
        )

    collapsed = np.zeros((n + 1, n + 1), dtype=np.int64)
    collapsed[:n, :n] = region
    collapsed[:n, n] = full.flows[:, n:].sum(axis=1)
    collapsed[n, :n] = from_outside
    return RegionPlusOutsideOD(full.origin_ids, collapsed, dict(full.metadata))


def od_from_records(
    records: Iterable[FlowRecord],
    origin_ids: Sequence[str],
    dest_ids: Sequence[str],
) -> ODMatrix:
    """Dense matrix from flow records; duplicate pairs are summed."""
    opos = {o: i for i, o in enumerate(origin_ids)}
    dpos = {d: j for j, d in enumerate(dest_ids)}
    flows = np.zeros((len(origin_ids), len(dest_ids)), dtype=np.int64)
    for rec in records:
        if rec.origin_id == rec.dest_id:
            raise errors.LoadError(
                f"Diagonal flow {rec.origin_id!r} -> {rec.dest_id!r} is not a commute",
                details={"id": rec.origin_id},
            )
        try:
            flows[opos[rec.origin_id], dpos[rec.dest_id]] += rec.count
        except KeyError as exc:
            raise errors.LoadError(
                f"Flow {rec.origin_id!r} -> {rec.dest_id!r} references an unknown municipality",
                details={"id": exc.args[0]},
            ) from None
    return ODMatrix(tuple(origin_ids), tuple(dest_ids), flows)


def _split_records(
    records: Iterable[FlowRecord], registry: MunicipalityRegistry
) -> tuple[list[FlowRecord], np.ndarray]:
    """Region-resident records, plus outside->region inflow per region municipality."""
    n = registry.n
    resident: list[FlowRecord] = []
    from_outside = np.zeros(n, dtype=np.int64)
    for rec in records:
        for mid in (rec.origin_id, rec.dest_id):
            if mid not in registry:
                raise errors.LoadError(
                    f"Flow references unknown municipality {mid!r}", details={"id": mid}
                )
        if registry.position(rec.origin_id) < n:
            resident.append(rec)
        else:
            dest = registry.position(rec.dest_id)
            if dest < n:
                from_outside[dest] += rec.count
    return resident, from_outside


def observed_full(records: Iterable[FlowRecord], registry: MunicipalityRegistry) -> ODMatrix:
    """Observed ``n x m`` table of region residents (outside origins dropped)."""
    resident, _ = _split_records(records, registry)
    return od_from_records(resident, registry.region_ids, registry.ids)


def collapse_observed(
    records: Iterable[FlowRecord], registry: MunicipalityRegistry
) -> RegionPlusOutsideOD:
    """Observed ``(n+1) x (n+1)`` table; outside->outside flows are dropped."""
    records = list(records)
    resident, from_outside = _split_records(records, registry)
    full = od_from_records(resident, registry.region_ids, registry.ids)
    n = registry.n
    collapsed = np.zeros((n + 1, n + 1), dtype=np.int64)
    collapsed[:n, :n] = full.flows[:, :n]
    collapsed[:n, n] = full.flows[:, n:].sum(axis=1)
    collapsed[n, :n] = from_outside
    return RegionPlusOutsideOD(registry.region_ids, collapsed)
