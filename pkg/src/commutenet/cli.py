"""Command-line front end.

Subcommands: ``generate``, ``compare``, ``calibrate``, ``distances``, ``synth``.
Files written for one replication live in their own ``rep_XX`` directory so
replications can run in parallel without sharing output files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from . import __version__, _io, errors
from .calibration import CalibrationReport, calibrate
from .config import BETA_CALIBRATE, Base, RunConfig, parse_beta
from .generator import RNG_ID, GenerationInputs
from .geodata import DistanceProvider, MunicipalityRegistry, build_distance_provider
from .metrics import (
    WeightedDistanceDistribution,
    binned_density,
    cpc,
    cpc_regional_block,
    distance_distribution,
    ks_distance,
    nc,
    ncc,
)
from .od import (
    FlowRecord,
    ODMatrix,
    RegionPlusOutsideOD,
    collapse_observed,
    collapse_to_region_plus_outside,
    observed_full,
)
from .synth import SynthConfig, synthesize

logger = logging.getLogger("commutenet.cli")

COMPARE_FILE = "compare.json"
CALIBRATION_FILE = "calibration.json"


@dataclass(frozen=True)
class Pipeline:
    """Inputs loaded once and shared by every replication of a command."""

    config: RunConfig
    registry: MunicipalityRegistry
    distances: DistanceProvider
    inputs: GenerationInputs
    records: Optional[tuple[FlowRecord, ...]] = None

    @classmethod
    def load(cls, config: RunConfig) -> Pipeline:
        registry = _io.read_municipalities(config.municipalities)  # type: ignore[arg-type]
        distances = build_distance_provider(
            registry, config.distance_strategy, config.auto_threshold
        )
        records = tuple(_io.read_flows(config.observed)) if config.observed is not None else None
        if config.base is Base.REGION:
            region = observed_full(records or (), registry).submatrix(
                registry.region_ids, registry.region_ids
            )
            inputs = GenerationInputs.from_observed(
                registry, distances, region, config.shape, refresh_interval=config.refresh_interval
            )
        else:
            aggregates = _io.read_aggregates(config.aggregates)  # type: ignore[arg-type]
            inputs = GenerationInputs.from_aggregates(
                registry, distances, aggregates, config.shape, refresh_interval=config.refresh_interval
            )
        logger.info(
            "Loaded inputs: n=%d m=%d commuters=%d base=%s",
            registry.n, registry.m, int(inputs.marginals.out_commuters.sum()), config.base.value,
        )
        return cls(config, registry, distances, inputs, records)

    @property
    def has_observed(self) -> bool:
        return self.records is not None

    def _require_observed(self) -> tuple[FlowRecord, ...]:
        if self.records is None:
            raise errors.ConfigError(f"{self.config.command} needs --observed flows")
        return self.records

    @cached_property
    def observed_resident(self) -> ODMatrix:
        """Observed flows of region residents, indexed like a simulated table."""
        full = observed_full(self._require_observed(), self.registry)
        if self.config.base is Base.REGION:
            return full.submatrix(self.registry.region_ids, self.registry.region_ids)
        return full

    @cached_property
    def observed_region(self) -> ODMatrix:
        return self.observed_resident.submatrix(self.registry.region_ids, self.registry.region_ids)

    @cached_property
    def observed_collapsed(self) -> RegionPlusOutsideOD:
        return collapse_observed(self._require_observed(), self.registry)

    @cached_property
    def observed_distribution(self) -> WeightedDistanceDistribution:
        return distance_distribution(
            self.observed_resident, self.distances, self.config.effective_scope
        )

    @cached_property
    def max_distance(self) -> float:
        """Longest possible commute, so every density table shares its bins."""
        width = self.inputs.marginals.in_commuters.size
        return max(float(self.distances.row(i)[:width].max()) for i in range(self.registry.n))

    def prepare_observed(self) -> None:
        """Build the observed views once, before replications fan out to workers."""
        _ = self.observed_distribution, self.observed_region, self.max_distance
        if self.config.base is Base.OUTSIDE:
            _ = self.observed_collapsed

    def simulate(self, beta: float, seed: int) -> tuple[ODMatrix, Optional[RegionPlusOutsideOD]]:
        full = self.inputs.generate(beta, seed)
        if self.config.base is Base.REGION:
            return full, None
        in_totals = self.inputs.marginals.in_commuters[: self.registry.n]
        return full, collapse_to_region_plus_outside(full, in_totals)

    def resolve_beta(self) -> tuple[float, Optional[CalibrationReport]]:
        beta = self.config.fixed_beta
        if beta is not None:
            return beta, None
        report = calibrate(
            self.inputs, self.observed_distribution, self.config.calibration_config()
        )
        return report.beta_average, report

    def replication_seeds(self) -> list[int]:
        return [self.config.seed + r for r in range(self.config.replications)]

    def replication_dir(self, r: int) -> Path:
        width = max(2, len(str(self.config.replications - 1)))
        return self.config.out / f"rep_{r:0{width}d}"

    def run_metadata(self) -> dict[str, Any]:
        cfg = self.config
        return {
            "version": __version__,
            "rng": RNG_ID,
            "base": cfg.base.value,
            "shape": cfg.shape.value,
            "beta_source": cfg.beta if isinstance(cfg.beta, str) else "explicit",
            "distance_strategy": self.distances.strategy,
            "scope": cfg.effective_scope.value,
            "replications": cfg.replications,
            "base_seed": cfg.seed,
            "inputs": {
                key: str(getattr(cfg, key))
                for key in ("municipalities", "aggregates", "observed")
                if getattr(cfg, key) is not None
            },
        }


def _parallel(config: RunConfig) -> Parallel:
    return Parallel(n_jobs=config.jobs)


# -- generate --

def _write_generation(pipeline: Pipeline, beta: float, r: int, seed: int) -> Path:
    out = pipeline.replication_dir(r)
    full, collapsed = pipeline.simulate(beta, seed)
    _io.write_flows(out / "flows_full.csv", full)
    if collapsed is not None:
        _io.write_flows(out / "flows_collapsed.csv", collapsed)
    _io.write_json(
        out / "metadata.json",
        {**pipeline.run_metadata(), **full.metadata, "replication": r, "commuters": full.total},
    )
    return out


def cmd_generate(config: RunConfig) -> list[Path]:
    """One flow table set per replication, plus a calibration report when β is fitted."""
    pipeline = Pipeline.load(config)
    beta, report = pipeline.resolve_beta()
    if report is not None:
        _write_calibration(pipeline, report)
    dirs = _parallel(config)(
        delayed(_write_generation)(pipeline, beta, r, seed)
        for r, seed in enumerate(pipeline.replication_seeds())
    )
    logger.info("Generated %d replications at beta=%g into %s", len(dirs), beta, config.out)
    return list(dirs)


# -- compare --

def _compare_replication(pipeline: Pipeline, beta: float, seed: int) -> dict[str, Any]:
    full, collapsed = pipeline.simulate(beta, seed)
    if collapsed is not None:
        simulated: Union[ODMatrix, RegionPlusOutsideOD] = collapsed
        observed: Union[ODMatrix, RegionPlusOutsideOD] = pipeline.observed_collapsed
    else:
        simulated, observed = full, pipeline.observed_region
    sim_dist = distance_distribution(full, pipeline.distances, pipeline.config.effective_scope)
    return {
        "replication_seed": seed,
        "scope": pipeline.config.effective_scope.value,
        "ncc": ncc(simulated, observed),
        "nc_simulated": nc(simulated),
        "nc_observed": nc(observed),
        "cpc": cpc(simulated, observed),
        "cpc_regional": cpc_regional_block(full, pipeline.observed_region),
        "ks": ks_distance(sim_dist, pipeline.observed_distribution),
    }


def summarize(values: Sequence[float]) -> dict[str, float]:
    """Mean, min, max and coefficient of variation of replication values."""
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    std = float(arr.std())
    return {
        "mean": mean,
        "min": float(arr.min()),
        "max": float(arr.max()),
        "std": std,
        "cv": std / mean if mean > 0 else 0.0,
    }


def cmd_compare(config: RunConfig) -> dict[str, Any]:
    """CPC and KS of ``replications`` generations against the observed flows."""
    pipeline = Pipeline.load(config)
    beta, report = pipeline.resolve_beta()
    pipeline.prepare_observed()
    rows = _parallel(config)(
        delayed(_compare_replication)(pipeline, beta, seed) for seed in pipeline.replication_seeds()
    )
    summary = {key: summarize([row[key] for row in rows]) for key in ("cpc", "cpc_regional", "ks")}
    stable = summary["cpc"]["cv"] <= config.stability_threshold
    if not stable:
        logger.warning(
            "CPC spread across replications is %.2f%% of the mean (threshold %.2f%%)",
            100 * summary["cpc"]["cv"], 100 * config.stability_threshold,
        )
    result: dict[str, Any] = {
        **pipeline.run_metadata(),
        "beta": beta,
        "per_replication": rows,
        "summary": summary,
        "stability_threshold": config.stability_threshold,
        "stable": stable,
    }
    if report is not None:
        result["calibration"] = report.to_dict()
    _io.write_json(config.out / COMPARE_FILE, result)
    logger.info(
        "Mean CPC %.4f (min %.4f, max %.4f) over %d replications",
        summary["cpc"]["mean"], summary["cpc"]["min"], summary["cpc"]["max"], len(rows),
    )
    return result


# -- calibrate --

def _write_calibration(pipeline: Pipeline, report: CalibrationReport) -> Path:
    path = pipeline.config.out / CALIBRATION_FILE
    _io.write_json(path, {**pipeline.run_metadata(), **report.to_dict()})
    return path


def cmd_calibrate(config: RunConfig) -> CalibrationReport:
    """Fit β against the observed distance distribution."""
    pipeline = Pipeline.load(config)
    report = calibrate(pipeline.inputs, pipeline.observed_distribution, config.calibration_config())
    _write_calibration(pipeline, report)
    return report


# -- distances --

def _write_distances(
    pipeline: Pipeline,
    beta: float,
    r: int,
    seed: int,
    observed: Optional[WeightedDistanceDistribution],
    upper: float,
) -> Path:
    out = pipeline.replication_dir(r)
    full, _ = pipeline.simulate(beta, seed)
    dist = distance_distribution(full, pipeline.distances, pipeline.config.effective_scope)
    _io.write_distribution(out / "simulated_distances.csv", dist)
    edges, density = binned_density(dist, pipeline.config.bins, upper)
    _io.write_density(out / "simulated_density.csv", edges, density)
    if observed is not None:
        _io.write_json(
            out / "ks.json",
            {
                "ks": ks_distance(dist, observed),
                "seed": seed,
                "beta": beta,
                "scope": pipeline.config.effective_scope.value,
            },
        )
    return out


def cmd_distances(config: RunConfig) -> list[Path]:
    """Weighted distance samples and display densities for external plotting."""
    pipeline = Pipeline.load(config)
    beta, report = pipeline.resolve_beta()
    if report is not None:
        _write_calibration(pipeline, report)
    upper = pipeline.max_distance
    observed = None
    if pipeline.has_observed:
        observed = pipeline.observed_distribution
        _io.write_distribution(config.out / "observed_distances.csv", observed)
        edges, density = binned_density(observed, config.bins, upper)
        _io.write_density(config.out / "observed_density.csv", edges, density)
    dirs = _parallel(config)(
        delayed(_write_distances)(pipeline, beta, r, seed, observed, upper)
        for r, seed in enumerate(pipeline.replication_seeds())
    )
    return list(dirs)


# -- synth --

def synth_config_from_sources(
    flags: Mapping[str, Any], file_values: Optional[Mapping[str, Any]] = None
) -> tuple[SynthConfig, Path]:
    """Merge defaults < preset < file values < explicit flags."""
    known = set(SynthConfig.__dataclass_fields__) | {"out"}
    file_values = {k.replace("-", "_"): v for k, v in (file_values or {}).items()}
    unknown = sorted(set(file_values) - known)
    if unknown:
        raise errors.ConfigError(f"Unknown configuration keys: {unknown}", details={"keys": unknown})
    values = {**file_values, **{k: v for k, v in flags.items() if k in known}}
    out = Path(values.pop("out", "out"))
    if "beta" in values:
        beta = parse_beta(values["beta"])
        if beta == BETA_CALIBRATE:
            raise errors.ConfigError("synth plants a fixed beta; 'calibrate' is not accepted")
        if isinstance(beta, str):
            values.pop("beta")
        else:
            values["beta"] = beta
    preset = values.pop("preset", None)
    try:
        if preset:
            return SynthConfig.from_preset(str(preset), **values), out
        return SynthConfig(**values), out
    except TypeError as exc:
        raise errors.ConfigError(f"Invalid synth settings: {exc}") from exc


def cmd_synth(config: SynthConfig, out: Union[str, Path]) -> dict[str, Path]:
    """Write a fixture (municipalities, aggregates, ground-truth flows)."""
    return synthesize(config).write(out)


# -- entry point --

def _pipeline_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--municipalities", type=Path, help="CSV with id,x,y,in_region (meters)")
    p.add_argument("--aggregates", type=Path, help="CSV with id,in_commuters,out_commuters")
    p.add_argument("--observed", type=Path, help="CSV with origin_id,dest_id,count")
    p.add_argument("--beta", help="a number, 'constant' (C=1.94e-4) or 'calibrate'")
    p.add_argument("--replications", type=int)
    p.add_argument("--base", choices=[b.value for b in Base], help="job-search base")
    p.add_argument("--scope", choices=["region_only", "region_and_outside"])
    p.add_argument("--auto-threshold", type=int, dest="auto_threshold")
    p.add_argument("--refresh-interval", type=int, dest="refresh_interval")
    p.add_argument("--bins", type=int)
    p.add_argument("--jobs", type=int, help="parallel replications (joblib n_jobs)")
    p.add_argument("--lo", type=float, help="lower end of the beta search bracket")
    p.add_argument("--hi", type=float, help="upper end of the beta search bracket")
    p.add_argument("--tolerance", type=float)
    p.add_argument("--averaging", choices=["per_replication", "mean_ks"])
    p.add_argument("--linear", action="store_false", dest="log_scale", help="search beta linearly")
    p.add_argument("--max-probes", type=int, dest="max_probes")
    p.add_argument("--stability-threshold", type=float, dest="stability_threshold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commutenet", description="Synthesize and evaluate commuting networks."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="count", help="more logging (repeatable)")
    common.add_argument("-q", "--quiet", action="store_true", help="errors only")
    common.add_argument("--config", type=Path, help="YAML file with the same keys as the flags")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--shape", choices=["power", "exp", "exponential"])
    common.add_argument(
        "--distance-strategy", choices=["dense", "lazy", "auto"], dest="distance_strategy"
    )

    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "generate": "generate flow tables from aggregate counts",
        "compare": "compare generated and observed flows (CPC, KS)",
        "calibrate": "fit beta against observed commuting distances",
        "distances": "emit weighted distance samples and density tables",
    }
    for name, help_text in descriptions.items():
        p = sub.add_parser(
            name, parents=[common], help=help_text, argument_default=argparse.SUPPRESS
        )
        _pipeline_args(p)

    p = sub.add_parser(
        "synth", parents=[common], help="write a synthetic fixture with a planted beta",
        argument_default=argparse.SUPPRESS,
    )
    p.add_argument("--preset", help="region size preset, FR1..FR34")
    p.add_argument("--n", type=int, help="region municipalities")
    p.add_argument("--m", type=int, help="all municipalities (region + outside)")
    p.add_argument("--commuters", type=int)
    p.add_argument("--extent", type=float, dest="extent_m", help="side of the square extent (m)")
    p.add_argument(
        "--region-extent", type=float, dest="region_extent_m", help="side of the region square (m)"
    )
    p.add_argument("--beta", help="planted beta, a number or 'constant'")
    p.add_argument("--slack", type=float, help="job offers in excess of demand (fraction)")
    p.add_argument("--dispersion", type=float, help="lognormal sigma of municipality sizes")
    return parser


def _configure_logging(verbose: int, quiet: bool) -> None:
    if quiet:
        level = logging.ERROR
    elif verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )
    logging.getLogger("commutenet").setLevel(level)


_COMMANDS: dict[str, Callable[[RunConfig], Any]] = {
    "generate": cmd_generate,
    "compare": cmd_compare,
    "calibrate": cmd_calibrate,
    "distances": cmd_distances,
}


def run(command: str, flags: Mapping[str, Any], file_values: Optional[Mapping[str, Any]] = None) -> Any:
    """Build the configuration for ``command`` and execute it."""
    if command == "synth":
        config, out = synth_config_from_sources(flags, file_values)
        return cmd_synth(config, out)
    return _COMMANDS[command](RunConfig.from_sources(command, flags, file_values))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(getattr(args, "verbose", 0) or 0, getattr(args, "quiet", False))
    flags = {
        k: v for k, v in vars(args).items()
        if k not in ("command", "config", "verbose", "quiet")
    }
    try:
        config_path = getattr(args, "config", None)
        file_values = _io.read_config(config_path) if config_path is not None else {}
        run(args.command, flags, file_values)
    except errors.CommuteError as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(json.dumps(exc.to_dict(), sort_keys=True, default=str), file=sys.stderr)
        return errors.exit_code_for(exc)
    except Exception as exc:
        logger.exception("%s failed unexpectedly", args.command)
        payload = {"error": type(exc).__name__, "code": "internal", "message": str(exc), "details": {}}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 1
    return 0
