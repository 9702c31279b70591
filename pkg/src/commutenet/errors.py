"""Exception hierarchy for the commutenet library."""

from __future__ import annotations

from typing import Any


class CommuteError(Exception):
    """Base exception for all commutenet errors.

    ``details`` carries machine-readable diagnostics (offending ids, counts,
    the calibration trace, ...) that the CLI prints alongside the message.
    """

    code = "error"

    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(message)
        self.details = dict(details or {})

    def to_dict(self) -> dict[str, Any]:
        return {
            "error": type(self).__name__,
            "code": self.code,
            "message": str(self),
            "details": self.details,
        }


class LoadError(CommuteError):
    """An input file is missing, malformed, or inconsistent with the registry."""

    code = "load"


class ConfigError(CommuteError):
    """Invalid configuration value or flag combination."""

    code = "config"


class ContractError(CommuteError):
    """An operation was called with arguments violating its pre-conditions."""

    code = "contract"


class InfeasibleInputsError(CommuteError):
    """Total job offers cannot absorb the total job demand (sum I < sum O)."""

    code = "infeasible"


class InconsistentInputsError(CommuteError):
    """A by-difference flow came out negative.

    The generated column sum of a region municipality exceeded its aggregate
    in-commuter total, which means the inputs contradict each other.
    """

    code = "inconsistent"


class CapacityError(CommuteError):
    """A dense distance matrix could not be allocated."""

    code = "capacity"


class GenerationError(CommuteError):
    """The assignment loop could not complete."""

    code = "generation"


class StuckOriginError(GenerationError):
    """An origin still has commuters but no admissible destination has weight."""

    code = "stuck-origin"


class CoincidentMunicipalitiesError(GenerationError):
    """Two distinct municipalities share coordinates under the power law.

    ``d ** -beta`` has no finite value at ``d == 0``; only the exponential law
    accepts coincident centroids.
    """

    code = "coincident"


class DegenerateDistributionError(CommuteError):
    """A distance distribution or network pair carries no commuters."""

    code = "degenerate"


class ConvergenceError(CommuteError):
    """The β search exhausted its probe budget before reaching tolerance."""

    code = "convergence"


_EXIT_MAP: dict[type[CommuteError], int] = {
    LoadError: 2,
    ConfigError: 2,
    InfeasibleInputsError: 3,
    InconsistentInputsError: 3,
    GenerationError: 4,
    CapacityError: 4,
    ConvergenceError: 5,
}


def exit_code_for(exc: BaseException) -> int:
    """Return the CLI exit status for an exception (never 0)."""
    for cls in type(exc).__mro__:
        code = _EXIT_MAP.get(cls)  # type: ignore[arg-type]
        if code is not None:
            return code
    return 1
