"""commutenet - synthetic municipality-level commuting networks."""

__version__ = "1.0.0"

from ._io import (
    read_aggregates,
    read_distribution,
    read_flows,
    read_municipalities,
    write_aggregates,
    write_distribution,
    write_flows,
    write_municipalities,
)
from .calibration import (
    PUBLISHED_BETA,
    AveragingMode,
    BetaConstant,
    CalibrationConfig,
    CalibrationReport,
    ReplicationResult,
    calibrate,
    constant_beta,
    golden_section,
    objective,
    pool_constant,
)
from .errors import (
    CapacityError,
    CoincidentMunicipalitiesError,
    CommuteError,
    ConfigError,
    ContractError,
    ConvergenceError,
    DegenerateDistributionError,
    GenerationError,
    InconsistentInputsError,
    InfeasibleInputsError,
    LoadError,
    StuckOriginError,
)
from .generator import (
    DeterrenceSpec,
    GenerationInputs,
    Shape,
    choice_probabilities,
    deterrence,
    generate,
    generate_regional,
)
from .geodata import (
    DistanceProvider,
    Municipality,
    MunicipalityRegistry,
    build_distance_provider,
    euclidean_distance,
)
from .metrics import (
    Scope,
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
    OUTSIDE_ID,
    Aggregate,
    FlowRecord,
    Marginals,
    ODMatrix,
    RegionPlusOutsideOD,
    assemble_with_outside_inputs,
    collapse_observed,
    collapse_to_region_plus_outside,
    marginals_from_od,
    observed_full,
    od_from_records,
)

__all__ = [
    "__version__",
    # Errors
    "CommuteError",
    "LoadError",
    "ConfigError",
    "ContractError",
    "InfeasibleInputsError",
    "InconsistentInputsError",
    "CapacityError",
    "GenerationError",
    "StuckOriginError",
    "CoincidentMunicipalitiesError",
    "DegenerateDistributionError",
    "ConvergenceError",
    # Geography
    "Municipality",
    "MunicipalityRegistry",
    "DistanceProvider",
    "build_distance_provider",
    "euclidean_distance",
    # OD tables
    "OUTSIDE_ID",
    "FlowRecord",
    "Aggregate",
    "ODMatrix",
    "Marginals",
    "RegionPlusOutsideOD",
    "marginals_from_od",
    "assemble_with_outside_inputs",
    "collapse_to_region_plus_outside",
    "od_from_records",
    "observed_full",
    "collapse_observed",
    # Generation
    "Shape",
    "DeterrenceSpec",
    "deterrence",
    "choice_probabilities",
    "generate",
    "generate_regional",
    "GenerationInputs",
    # Metrics
    "Scope",
    "ncc",
    "nc",
    "cpc",
    "cpc_regional_block",
    "WeightedDistanceDistribution",
    "distance_distribution",
    "ks_distance",
    "binned_density",
    # Calibration
    "PUBLISHED_BETA",
    "BetaConstant",
    "constant_beta",
    "AveragingMode",
    "CalibrationConfig",
    "ReplicationResult",
    "CalibrationReport",
    "objective",
    "golden_section",
    "calibrate",
    "pool_constant",
    # Files
    "read_municipalities",
    "write_municipalities",
    "read_aggregates",
    "write_aggregates",
    "read_flows",
    "write_flows",
    "read_distribution",
    "write_distribution",
]
