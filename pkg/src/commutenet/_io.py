"""File layer: CSV and JSON ingestion/emission via pandas.

Every reader maps pandas and OS failures to :class:`~commutenet.errors.LoadError`,
so a malformed file never escapes as a raw traceback. Writers are
byte-deterministic (fixed column order, ``\\n`` line endings, sorted JSON keys).
The CSV readers and writers are re-exported from the package root.
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, Union

import numpy as np
import pandas as pd

from . import errors
from .geodata import Municipality, MunicipalityRegistry
from .metrics import WeightedDistanceDistribution
from .od import OUTSIDE_ID, Aggregate, FlowRecord, ODMatrix, RegionPlusOutsideOD

logger = logging.getLogger("commutenet.io")

PathLike = Union[str, Path]

MUNICIPALITY_COLUMNS = ("id", "x", "y", "in_region")
AGGREGATE_COLUMNS = ("id", "in_commuters", "out_commuters")
FLOW_COLUMNS = ("origin_id", "dest_id", "count")
DISTRIBUTION_COLUMNS = ("distance_m", "weight")
DENSITY_COLUMNS = ("bin_left", "bin_right", "density")


def _read_csv(path: PathLike, columns: Sequence[str], id_columns: Sequence[str]) -> pd.DataFrame:
    """Read a CSV with a required header; id columns are kept as strings."""
    try:
        frame = pd.read_csv(
            path,
            dtype={c: str for c in id_columns},
            keep_default_na=False,
            float_precision="round_trip",
            encoding="utf-8",
        )
    except FileNotFoundError:
        raise errors.LoadError(f"File not found: {path}", details={"path": str(path)}) from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError, OSError) as exc:
        raise errors.LoadError(f"Cannot parse {path}: {exc}", details={"path": str(path)}) from exc
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise errors.LoadError(
            f"{path}: missing required columns {missing} (expected header {','.join(columns)})",
            details={"path": str(path), "missing": missing},
        )
    return frame[list(columns)]


def _int_column(frame: pd.DataFrame, column: str, path: PathLike, minimum: int = 0) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna() | (values != values.round()) | (values < minimum)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise errors.LoadError(
            f"{path}: column {column!r} needs integers >= {minimum} (row {row + 1}: "
            f"{frame[column].iloc[row]!r})",
            details={"path": str(path), "column": column, "row": row + 1},
        )
    return values.to_numpy(dtype=np.int64)


def _float_column(frame: pd.DataFrame, column: str, path: PathLike) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise errors.LoadError(
            f"{path}: column {column!r} needs finite numbers (row {row + 1})",
            details={"path": str(path), "column": column, "row": row + 1},
        )
    return values


def _check_unique(ids: Sequence[str], path: PathLike) -> None:
    seen: set[str] = set()
    for mid in ids:
        if mid in seen:
            raise errors.LoadError(f"{path}: duplicate id {mid!r}", details={"id": mid})
        seen.add(mid)


def _write_frame(frame: pd.DataFrame, path: PathLike) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


# -- Municipalities --

def read_municipalities(path: PathLike) -> MunicipalityRegistry:
    frame = _read_csv(path, MUNICIPALITY_COLUMNS, id_columns=("id",))
    ids = frame["id"].tolist()
    _check_unique(ids, path)
    xs = _float_column(frame, "x", path)
    ys = _float_column(frame, "y", path)
    flags = _int_column(frame, "in_region", path)
    if (flags > 1).any():
        raise errors.LoadError(f"{path}: in_region must be 0 or 1", details={"path": str(path)})
    registry = MunicipalityRegistry(
        Municipality(mid, float(x), float(y), bool(flag)) for mid, x, y, flag in zip(ids, xs, ys, flags)
    )
    logger.info("Loaded %d municipalities (%d in region) from %s", registry.m, registry.n, path)
    return registry


def write_municipalities(path: PathLike, registry: MunicipalityRegistry) -> None:
    frame = pd.DataFrame(
        {
            "id": list(registry.ids),
            "x": [mu.x for mu in registry.municipalities],
            "y": [mu.y for mu in registry.municipalities],
            "in_region": [int(mu.in_region) for mu in registry.municipalities],
        },
        columns=list(MUNICIPALITY_COLUMNS),
    )
    _write_frame(frame, path)


# -- Aggregates --

def read_aggregates(path: PathLike) -> dict[str, Aggregate]:
    frame = _read_csv(path, AGGREGATE_COLUMNS, id_columns=("id",))
    ids = frame["id"].tolist()
    _check_unique(ids, path)
    ins = _int_column(frame, "in_commuters", path)
    outs = _int_column(frame, "out_commuters", path)
    return {mid: Aggregate(int(i), int(o)) for mid, i, o in zip(ids, ins, outs)}


def write_aggregates(
    path: PathLike, aggregates: Mapping[str, Aggregate], ids: Sequence[str] | None = None
) -> None:
    order = list(ids) if ids is not None else list(aggregates)
    frame = pd.DataFrame(
        {
            "id": order,
            "in_commuters": [aggregates[mid].in_commuters for mid in order],
            "out_commuters": [aggregates[mid].out_commuters for mid in order],
        },
        columns=list(AGGREGATE_COLUMNS),
    )
    _write_frame(frame, path)


# -- Flows --

def read_flows(path: PathLike) -> list[FlowRecord]:
    """Detailed flows; absent pairs mean zero, diagonal pairs are rejected."""
    frame = _read_csv(path, FLOW_COLUMNS, id_columns=("origin_id", "dest_id"))
    counts = _int_column(frame, "count", path, minimum=1)
    records = [
        FlowRecord(o, d, int(c))
        for o, d, c in zip(frame["origin_id"].tolist(), frame["dest_id"].tolist(), counts)
    ]
    for rec in records:
        if rec.origin_id == rec.dest_id:
            raise errors.LoadError(
                f"{path}: diagonal flow for {rec.origin_id!r}", details={"id": rec.origin_id}
            )
    return records


def write_flows(path: PathLike, network: Union[ODMatrix, RegionPlusOutsideOD]) -> None:
    """Nonzero entries of a table, origin-major."""
    od = network.as_od() if isinstance(network, RegionPlusOutsideOD) else network
    write_records(path, od.records())


def write_records(path: PathLike, records: Iterable[FlowRecord]) -> None:
    records = list(records)
    frame = pd.DataFrame(
        {
            "origin_id": [r.origin_id for r in records],
            "dest_id": [r.dest_id for r in records],
            "count": np.array([r.count for r in records], dtype=np.int64),
        },
        columns=list(FLOW_COLUMNS),
    )
    _write_frame(frame, path)


def read_collapsed(path: PathLike, region_ids: Sequence[str]) -> RegionPlusOutsideOD:
    """Read a region-plus-outside table written by :func:`write_flows`."""
    ids = tuple(region_ids) + (OUTSIDE_ID,)
    pos = {mid: k for k, mid in enumerate(ids)}
    flows = np.zeros((len(ids), len(ids)), dtype=np.int64)
    for rec in read_flows(path):
        try:
            flows[pos[rec.origin_id], pos[rec.dest_id]] += rec.count
        except KeyError as exc:
            raise errors.LoadError(
                f"{path}: unknown id {exc.args[0]!r}", details={"id": exc.args[0]}
            ) from None
    return RegionPlusOutsideOD(tuple(region_ids), flows)


# -- Distributions --

def write_distribution(path: PathLike, dist: WeightedDistanceDistribution) -> None:
    frame = pd.DataFrame(
        {"distance_m": dist.distances, "weight": dist.weights}, columns=list(DISTRIBUTION_COLUMNS)
    )
    _write_frame(frame, path)


def read_distribution(path: PathLike) -> WeightedDistanceDistribution:
    frame = _read_csv(path, DISTRIBUTION_COLUMNS, id_columns=())
    return WeightedDistanceDistribution(
        _float_column(frame, "distance_m", path), _int_column(frame, "weight", path)
    )


def write_density(path: PathLike, edges: np.ndarray, density: np.ndarray) -> None:
    frame = pd.DataFrame(
        {"bin_left": edges[:-1], "bin_right": edges[1:], "density": density},
        columns=list(DENSITY_COLUMNS),
    )
    _write_frame(frame, path)


# -- JSON --

def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    return value


def write_json(path: PathLike, data: Mapping[str, Any]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_jsonable(data), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_json(path: PathLike) -> dict[str, Any]:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise errors.LoadError(f"File not found: {path}", details={"path": str(path)}) from None
    except ValueError as exc:
        raise errors.LoadError(f"{path}: malformed JSON: {exc}", details={"path": str(path)}) from exc


def read_config(path: PathLike) -> dict[str, Any]:
    """Optional YAML run configuration (same keys as the CLI flags)."""
    import yaml

    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise errors.ConfigError(f"Config file not found: {path}", details={"path": str(path)}) from None
    except yaml.YAMLError as exc:
        raise errors.ConfigError(f"{path}: malformed YAML: {exc}", details={"path": str(path)}) from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise errors.ConfigError(f"{path}: expected a mapping at the top level")
    return {str(k).replace("-", "_"): v for k, v in data.items()}
