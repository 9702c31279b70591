"""Municipality registry and planar distances.

Coordinates are projected (Lambert-style) eastings/northings in **meters**.
All distances in the library are meters, which is what makes the published
exponential constant ``C = 1.94e-4`` (a decay length of about 5.2 km) usable
as is.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence, Union

import numpy as np

from . import errors

logger = logging.getLogger("commutenet.geodata")

Strategy = Literal["dense", "lazy", "auto"]

DEFAULT_AUTO_THRESHOLD = 10_000_000


@dataclass(frozen=True)
class Municipality:
    """A node of the commuting network."""

    id: str
    x: float
    y: float
    in_region: bool = True

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise errors.ContractError(
                f"Municipality {self.id!r} has non-finite coordinates ({self.x}, {self.y})",
                details={"id": self.id},
            )


@dataclass(frozen=True)
class MunicipalityRegistry:
    """Municipalities in canonical order: region members first, then the outside.

    Any input order is normalized on construction (stable within each group),
    so positions ``0..n-1`` are the region and ``n..m-1`` the outside.
    """

    municipalities: tuple[Municipality, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)
    _coords: np.ndarray = field(init=False, repr=False, compare=False)
    n: int = field(init=False)

    def __init__(self, municipalities: Iterable[Municipality]):
        items = list(municipalities)
        ordered = tuple(
            [mu for mu in items if mu.in_region] + [mu for mu in items if not mu.in_region]
        )
        index: dict[str, int] = {}
        for pos, mu in enumerate(ordered):
            if mu.id in index:
                raise errors.LoadError(
                    f"Duplicate municipality id: {mu.id!r}", details={"id": mu.id}
                )
            index[mu.id] = pos
        n = sum(1 for mu in ordered if mu.in_region)
        if n < 1:
            raise errors.LoadError("The registry contains no region municipality")

        coords = np.array([[mu.x, mu.y] for mu in ordered], dtype=np.float64).reshape(-1, 2)
        coords.setflags(write=False)
        object.__setattr__(self, "municipalities", ordered)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_coords", coords)
        object.__setattr__(self, "n", n)

    @property
    def m(self) -> int:
        return len(self.municipalities)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(mu.id for mu in self.municipalities)

    @property
    def region_ids(self) -> tuple[str, ...]:
        return self.ids[: self.n]

    @property
    def outside_ids(self) -> tuple[str, ...]:
        return self.ids[self.n :]

    @property
    def coordinates(self) -> np.ndarray:
        """Read-only ``(m, 2)`` array of ``(x, y)`` in canonical order."""
        return self._coords

    def position(self, municipality_id: str) -> int:
        try:
            return self._index[municipality_id]
        except KeyError:
            raise errors.ContractError(
                f"Unknown municipality id: {municipality_id!r}",
                details={"id": municipality_id},
            ) from None

    def positions(self, ids: Sequence[str]) -> np.ndarray:
        return np.fromiter((self.position(i) for i in ids), dtype=np.int64, count=len(ids))

    def __contains__(self, municipality_id: object) -> bool:
        return municipality_id in self._index

    def __getitem__(self, position: int) -> Municipality:
        return self.municipalities[position]

    def __len__(self) -> int:
        return len(self.municipalities)


def euclidean_distance(a: Municipality, b: Municipality) -> float:
    """Planar Euclidean distance in meters."""
    dx = np.float64(a.x) - np.float64(b.x)
    dy = np.float64(a.y) - np.float64(b.y)
    return float(np.sqrt(dx * dx + dy * dy))


def _row_distances(coords: np.ndarray, i: int, stop: int) -> np.ndarray:
    # Same float operations as euclidean_distance, so results are bit-identical.
    dx = coords[i, 0] - coords[:stop, 0]
    dy = coords[i, 1] - coords[:stop, 1]
    return np.sqrt(dx * dx + dy * dy)


class DistanceProvider:
    """Answers ``d(i, j)`` for region origins ``i < n`` and destinations ``j < m``.

    Use :func:`build_distance_provider` rather than instantiating directly.
    """

    strategy: str = ""

    def __init__(self, registry: MunicipalityRegistry):
        self._registry = registry

    @property
    def registry(self) -> MunicipalityRegistry:
        return self._registry

    @property
    def n(self) -> int:
        return self._registry.n

    @property
    def m(self) -> int:
        return self._registry.m

    def row(self, i: int) -> np.ndarray:
        """Distances from origin ``i`` to every destination ``0..m-1``."""
        raise NotImplementedError

    def distance(self, i: int, j: int) -> float:
        self._check(i, j)
        return float(self.row(i)[j])

    def matrix(self) -> np.ndarray:
        """The full ``n x m`` table (materialized on demand for lazy providers)."""
        raise NotImplementedError

    def _check(self, i: int, j: int) -> None:
        if not (0 <= i < self.n and 0 <= j < self.m):
            raise errors.ContractError(
                f"Distance query ({i}, {j}) outside the {self.n}x{self.m} range"
            )


class DenseDistances(DistanceProvider):
    """Precomputed ``n x m`` float64 table, row-major by origin."""

    strategy = "dense"

    def __init__(self, registry: MunicipalityRegistry):
        super().__init__(registry)
        n, m = registry.n, registry.m
        try:
            table = np.empty((n, m), dtype=np.float64)
        except MemoryError as exc:
            raise errors.CapacityError(
                f"Cannot allocate a dense {n}x{m} distance matrix "
                f"({n * m * 8 / 2**20:.0f} MiB); use the lazy strategy",
                details={"n": n, "m": m},
            ) from exc
        coords = registry.coordinates
        for i in range(n):
            table[i] = _row_distances(coords, i, m)
        table.setflags(write=False)
        self._table = table

    def row(self, i: int) -> np.ndarray:
        return self._table[i]

    def distance(self, i: int, j: int) -> float:
        self._check(i, j)
        return float(self._table[i, j])

    def matrix(self) -> np.ndarray:
        return self._table


class LazyDistances(DistanceProvider):
    """Evaluates rows from registry coordinates on every query."""

    strategy = "lazy"

    def row(self, i: int) -> np.ndarray:
        if not 0 <= i < self.n:
            raise errors.ContractError(f"Origin {i} outside the region range 0..{self.n - 1}")
        return _row_distances(self._registry.coordinates, i, self.m)

    def matrix(self) -> np.ndarray:
        return np.vstack([self.row(i) for i in range(self.n)])


def build_distance_provider(
    registry: MunicipalityRegistry,
    strategy: Union[Strategy, str] = "auto",
    auto_threshold: int = DEFAULT_AUTO_THRESHOLD,
) -> DistanceProvider:
    """Build a distance provider for ``registry``.

    ``auto`` picks the dense table when ``n * m <= auto_threshold`` cells and
    falls back to lazy evaluation otherwise.
    """
    if len(registry) == 0:
        raise errors.ContractError("Cannot build distances for an empty registry")
    if strategy == "auto":
        strategy = "dense" if registry.n * registry.m <= auto_threshold else "lazy"
    if strategy == "dense":
        provider: DistanceProvider = DenseDistances(registry)
    elif strategy == "lazy":
        provider = LazyDistances(registry)
    else:
        raise errors.ConfigError(
            f"Unknown distance strategy {strategy!r} (expected dense, lazy or auto)"
        )
    logger.debug(
        "Distance provider: %s for %d origins x %d destinations",
        provider.strategy, registry.n, registry.m,
    )
    return provider
