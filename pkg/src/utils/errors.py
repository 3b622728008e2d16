"""Error hierarchy shared by every ablatron module."""

from typing import Optional


class AblatronError(Exception):
    """Base class for all simulator errors."""

    kind = "ablatron-error"
    exit_code = 3


class ConfigError(AblatronError, ValueError):
    """Configuration document could not be turned into a valid RunConfig."""

    kind = "config-error"
    exit_code = 2

    def __init__(self, key: str, constraint: str):
        """Initialize config error.

        Args:
            key: Dotted ``section.key`` that failed
            constraint: Human readable constraint that was violated
        """
        self.key = key
        self.constraint = constraint
        super().__init__(f"{self.kind}: {key}: {constraint}")


class MalformedDocumentError(ConfigError):
    kind = "malformed-document"


class UnknownKeyError(ConfigError):
    kind = "unknown-key"


class InvariantViolationError(ConfigError):
    kind = "invariant-violation"


class PhysicsError(AblatronError):
    """Raised when a physics operation is asked to work outside its domain."""

    kind = "physics-error"
    exit_code = 3


class RateOutOfRangeError(PhysicsError):
    kind = "rate-out-of-range"


class PulseOutsideGateError(PhysicsError):
    kind = "pulse-outside-gate"


class UnknownIsotopeError(PhysicsError):
    kind = "unknown-isotope"


class UnknownTransitionError(PhysicsError):
    kind = "unknown-transition"


class UnstableTrapError(PhysicsError):
    kind = "unstable-trap"


class DegenerateTraceError(PhysicsError):
    kind = "degenerate-trace"


class UnstableTimestepError(PhysicsError):
    kind = "unstable-timestep"


class DegenerateDataError(PhysicsError):
    kind = "degenerate-data"


class NonBracketableError(PhysicsError):
    """Calibration target lies above what the physics can deliver."""

    kind = "non-bracketable"

    def __init__(self, message: str, achievable_rate: float):
        self.achievable_rate = achievable_rate
        super().__init__(f"{message} (achievable maximum {achievable_rate:.6g} ions/s)")


class ScenarioError(PhysicsError):
    """Module error raised inside a running scenario."""

    kind = "scenario-error"

    def __init__(self, scenario: str, sim_time: Optional[float], cause: Exception):
        self.scenario = scenario
        self.sim_time = sim_time
        self.cause_kind = getattr(cause, "kind", type(cause).__name__)
        where = f" at t={sim_time:.6g} s" if sim_time is not None else ""
        super().__init__(f"scenario '{scenario}'{where}: {cause}")
        self.exit_code = getattr(cause, "exit_code", PhysicsError.exit_code)
