"""Synthetic region fixtures with a known (planted) β.

A fixture is three files that look like real inputs: municipalities with
coordinates, aggregate in/out counts, and a detailed ground-truth flow table
produced by one generation at the planted β. The aggregates are exactly the
marginals of that ground truth, so a calibration run on the fixture should
recover the planted value.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, NamedTuple, Union

import numpy as np

from . import _io, errors
from .calibration import PUBLISHED_BETA
from .generator import DeterrenceSpec, Shape, deterrence, generate
from .geodata import Municipality, MunicipalityRegistry, build_distance_provider
from .od import Aggregate, FlowRecord, ODMatrix

logger = logging.getLogger("commutenet.synth")

# Independent stream for fixture randomness (coordinates, marginals, outside
# inflow); the ground-truth generation itself uses the plain seed.
_FIXTURE_STREAM = 1
# Redraws of the marginals when a region without outside municipalities strands an origin.
_MARGINAL_ATTEMPTS = 32

MUNICIPALITIES_FILE = "municipalities.csv"
AGGREGATES_FILE = "aggregates.csv"
FLOWS_FILE = "flows.csv"
METADATA_FILE = "synth.json"


class RegionPreset(NamedTuple):
    """Size of one studied region."""

    id: str
    name: str
    n: int
    outside: int
    area_km2: float
    commuters: int

    @property
    def m(self) -> int:
        return self.n + self.outside

    @property
    def region_extent_m(self) -> float:
        """Side of a square with the region's area."""
        return math.sqrt(self.area_km2) * 1000.0

    @property
    def extent_m(self) -> float:
        """Side of the surrounding square, at the region's municipality density."""
        return self.region_extent_m * math.sqrt(self.m / self.n)


REGION_PRESETS: dict[str, RegionPreset] = {
    p.id: p
    for p in (
        RegionPreset("FR1", "Auvergne", 1310, 3463, 26013, 295776),
        RegionPreset("FR2", "Bretagne", 1269, 1447, 27208, 653710),
        RegionPreset("FR3", "Ain", 419, 2809, 5762, 162370),
        RegionPreset("FR4", "Alsace", 903, 3081, 8280, 440961),
        RegionPreset("FR5", "Aquitaine", 2296, 2835, 41309, 700452),
        RegionPreset("FR6", "Mayenne", 261, 3124, 5175, 69915),
        RegionPreset("FR7", "Lozère", 185, 1859, 5167, 12273),
        RegionPreset("FR8", "Poitou-Charente", 1464, 2467, 25810, 375363),
        RegionPreset("FR9", "Centre", 1842, 4718, 39151, 624693),
        RegionPreset("FR10", "Midi-Pyrénée", 3020, 3845, 45348, 546162),
        RegionPreset("FR11", "Limousin", 747, 3169, 16942, 139481),
        RegionPreset("FR12", "Franche-Comté", 1786, 3317, 16202, 268399),
        RegionPreset("FR13", "Haute-Normandie", 1420, 3536, 12317, 469335),
        RegionPreset("FR14", "Haute-Marne", 433, 3914, 6211, 42690),
        RegionPreset("FR15", "Vosges", 515, 3808, 5874, 92053),
        RegionPreset("FR16", "Lorraine", 2339, 3067, 23547, 547457),
        RegionPreset("FR17", "Creuse", 260, 1814, 5565, 23949),
        RegionPreset("FR18", "Languedoc-Roussillon", 1545, 3046, 27367, 409116),
        RegionPreset("FR19", "Charente-Maritime", 1948, 1983, 25606, 375363),
        RegionPreset("FR20", "Haut-de-Seine", 36, 1245, 176, 973173),
        RegionPreset("FR21", "Yveline", 262, 1543, 2284, 618741),
        RegionPreset("FR22", "Val d'Oise", 185, 1707, 1246, 526600),
        RegionPreset("FR23", "Val de Marne", 47, 1234, 245, 642092),
        RegionPreset("FR24", "Haut-Rhin", 377, 2283, 3525, 183504),
        RegionPreset("FR25", "Tarn et Garonne", 195, 2338, 3718, 41600),
        RegionPreset("FR26", "Pyrénée-Atlantique", 547, 449, 4116, 65469),
        RegionPreset("FR27", "Alpes-Maritimes", 163, 353, 4299, 163445),
        RegionPreset("FR28", "Loire", 327, 2788, 4781, 178828),
        RegionPreset("FR29", "Territoire de Belfort", 102, 2031, 609, 45185),
        RegionPreset("FR30", "Seine-Saint-Denis", 40, 783, 236, 655200),
        RegionPreset("FR31", "Essonne", 196, 1597, 1804, 518321),
        RegionPreset("FR32", "Ardennes", 463, 2588, 5229, 59963),
        RegionPreset("FR33", "Aube", 433, 2728, 6004, 75561),
        RegionPreset("FR34", "Corréze", 286, 2088, 5857, 49815),
    )
}


@dataclass(frozen=True)
class SynthConfig:
    """Fixture parameters.

    Region municipalities are scattered uniformly over a central square of
    side ``region_extent_m`` (default: the share of ``extent_m`` matching
    ``n / m``); outside municipalities fill the rest of the
    ``extent_m x extent_m`` square. Total job offers exceed the demand by at
    least ``slack``; when outside municipalities exist they jointly offer at
    least one job per region commuter, so no origin is left with only its own
    jobs.
    """

    n: int = 20
    m: int = 30
    commuters: int = 1000
    extent_m: float = 100_000.0
    region_extent_m: float | None = None
    beta: float = PUBLISHED_BETA
    shape: Shape = Shape.EXPONENTIAL
    seed: int = 0
    slack: float = 0.25
    dispersion: float = 1.0
    distance_strategy: str = "auto"
    preset: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "shape", Shape.parse(self.shape))
        if self.n < 1:
            raise errors.ConfigError(f"n must be >= 1, got {self.n}")
        if self.m < self.n or self.m < 2:
            raise errors.ConfigError(f"m must be >= max(n, 2), got n={self.n} m={self.m}")
        if self.commuters < 0:
            raise errors.ConfigError(f"commuters must be >= 0, got {self.commuters}")
        if not self.extent_m > 0:
            raise errors.ConfigError(f"extent must be > 0, got {self.extent_m}")
        if self.region_extent_m is not None and not 0 < self.region_extent_m <= self.extent_m:
            raise errors.ConfigError(
                f"region extent must lie in (0, {self.extent_m}], got {self.region_extent_m}"
            )
        if self.seed < 0:
            raise errors.ConfigError(f"seed must be >= 0, got {self.seed}")
        if self.slack < 0 or self.dispersion < 0:
            raise errors.ConfigError("slack and dispersion must be non-negative")
        DeterrenceSpec(self.shape, self.beta)

    @classmethod
    def from_preset(cls, preset_id: str, **overrides: Any) -> SynthConfig:
        """Sizes and extents of a studied region; ``overrides`` win."""
        try:
            preset = REGION_PRESETS[preset_id.upper()]
        except KeyError:
            raise errors.ConfigError(
                f"Unknown region preset {preset_id!r} (expected FR1..FR{len(REGION_PRESETS)})"
            ) from None
        values: dict[str, Any] = {
            "n": preset.n,
            "m": preset.m,
            "commuters": preset.commuters,
            "extent_m": preset.extent_m,
            "region_extent_m": preset.region_extent_m,
            "preset": preset.id,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @property
    def region_side(self) -> float:
        if self.region_extent_m is not None:
            return float(self.region_extent_m)
        return float(self.extent_m) * math.sqrt(self.n / self.m)

    def spec(self) -> DeterrenceSpec:
        return DeterrenceSpec(self.shape, self.beta)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["shape"] = self.shape.value
        data["region_extent_m"] = self.region_side
        return data


@dataclass(frozen=True)
class SynthFixture:
    config: SynthConfig
    registry: MunicipalityRegistry
    aggregates: dict[str, Aggregate]
    flows: tuple[FlowRecord, ...]
    truth: ODMatrix = field(repr=False)

    def write(self, out_dir: Union[str, Path]) -> dict[str, Path]:
        """Write the tri-file fixture plus a metadata sidecar into ``out_dir``."""
        out = Path(out_dir)
        paths = {
            "municipalities": out / MUNICIPALITIES_FILE,
            "aggregates": out / AGGREGATES_FILE,
            "flows": out / FLOWS_FILE,
            "metadata": out / METADATA_FILE,
        }
        _io.write_municipalities(paths["municipalities"], self.registry)
        _io.write_aggregates(paths["aggregates"], self.aggregates, self.registry.ids)
        ids = self.registry.ids
        _io.write_records(paths["flows"], self.flows)
        _io.write_json(
            paths["metadata"],
            {
                "config": self.config.to_dict(),
                "generation": self.truth.metadata,
                "commuters": self.truth.total,
                "outside_inflow": sum(
                    r.count for r in self.flows if self.registry.position(r.origin_id) >= self.registry.n
                ),
            },
        )
        logger.info("Wrote fixture (%d municipalities, %d flow records) to %s", len(ids), len(self.flows), out)
        return paths


def _ids(prefix: str, count: int) -> list[str]:
    width = max(4, len(str(count)))
    return [f"{prefix}{k + 1:0{width}d}" for k in range(count)]


def _scatter(rng: np.random.Generator, config: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    extent = float(config.extent_m)
    side = config.region_side
    low = (extent - side) / 2.0
    region = low + rng.random((config.n, 2)) * side

    count = config.m - config.n
    outside = np.empty((0, 2))
    if side >= extent:
        outside = rng.random((count, 2)) * extent
    else:
        # Rejection sampling outside the central square.
        while outside.shape[0] < count:
            batch = rng.random((2 * (count - outside.shape[0]) + 8, 2)) * extent
            inside = np.all((batch >= low) & (batch <= low + side), axis=1)
            outside = np.vstack([outside, batch[~inside]])
        outside = outside[:count]
    return region, outside


def _weights(rng: np.random.Generator, size: int, dispersion: float) -> np.ndarray:
    w = rng.lognormal(mean=0.0, sigma=dispersion, size=size)
    return w / w.sum()


def _marginals(
    rng: np.random.Generator, config: SynthConfig, n: int, m: int
) -> tuple[np.ndarray, np.ndarray]:
    out_commuters = rng.multinomial(config.commuters, _weights(rng, n, config.dispersion))
    offers = int(math.ceil(config.commuters * (1.0 + config.slack)))
    in_commuters = rng.multinomial(offers, _weights(rng, m, config.dispersion))
    shortfall = config.commuters - int(in_commuters[n:].sum())
    if m > n and shortfall > 0:
        in_commuters[n:] += rng.multinomial(shortfall, _weights(rng, m - n, config.dispersion))
    return out_commuters, in_commuters


def synthesize(config: SynthConfig) -> SynthFixture:
    """Build a fixture; every random choice derives from ``config.seed``."""
    rng = np.random.default_rng([config.seed, _FIXTURE_STREAM])
    region_xy, outside_xy = _scatter(rng, config)
    region_ids = _ids("R", config.n)
    outside_ids = _ids("X", config.m - config.n)
    registry = MunicipalityRegistry(
        [Municipality(mid, float(x), float(y), True) for mid, (x, y) in zip(region_ids, region_xy)]
        + [Municipality(mid, float(x), float(y), False) for mid, (x, y) in zip(outside_ids, outside_xy)]
    )
    distances = build_distance_provider(registry, config.distance_strategy)
    n, m = registry.n, registry.m

    spec = config.spec()
    for attempt in range(_MARGINAL_ATTEMPTS):
        if attempt:
            rng = np.random.default_rng([config.seed, _FIXTURE_STREAM, attempt])
        out_commuters, in_commuters = _marginals(rng, config, n, m)
        try:
            truth = generate(registry, distances, in_commuters, out_commuters, spec, config.seed)
            break
        except errors.StuckOriginError as exc:
            if m > n or attempt + 1 == _MARGINAL_ATTEMPTS:
                raise
            logger.debug("Redrawing marginals after stuck origin %s", exc.details["origin"])

    # Unused region job offers are taken by outside residents, drawn with the
    # same deterrence so the inflow is spatially plausible.
    taken = truth.col_sums()[:n]
    leftover = in_commuters[:n] - taken
    inflow = np.zeros((m - n, n), dtype=np.int64)
    if m > n:
        for j in np.flatnonzero(leftover):
            w = np.asarray(deterrence(spec, distances.row(int(j))[n:]), dtype=np.float64)
            p = w / w.sum() if w.sum() > 0 else np.full(m - n, 1.0 / (m - n))
            inflow[:, j] = rng.multinomial(int(leftover[j]), p)
        region_in = in_commuters[:n]
    else:
        region_in = taken

    aggregates: dict[str, Aggregate] = {}
    for k, mid in enumerate(registry.region_ids):
        aggregates[mid] = Aggregate(int(region_in[k]), int(out_commuters[k]))
    for k, mid in enumerate(registry.outside_ids):
        aggregates[mid] = Aggregate(int(in_commuters[n + k]), int(inflow[k].sum()))

    records = list(truth.records())
    ids = registry.ids
    for k, j in zip(*np.nonzero(inflow)):
        records.append(FlowRecord(ids[n + int(k)], ids[int(j)], int(inflow[k, j])))

    logger.info(
        "Synthesized %s fixture: n=%d m=%d commuters=%d planted beta=%g",
        config.shape.value, n, m, truth.total, config.beta,
    )
    return SynthFixture(config, registry, aggregates, tuple(records), truth)
