"""Exception types shared across the simulator."""


class SimulationError(Exception):
    """Base class for all simulator errors."""


class ConfigError(SimulationError):
    """A cluster or run configuration violates a structural constraint."""


class PlacementError(SimulationError):
    """Block placement cannot satisfy its replication constraints."""


class NoCompletedTasks(SimulationError):
    """A timing statistic was requested before any task completed."""


class DivisionByZeroDemand(SimulationError):
    """A phase duration was requested with zero slots for a non-empty phase."""


class ContractViolation(SimulationError):
    """An operation was called with arguments outside its contract."""


class DuplicateJob(SimulationError):
    """A job id was registered twice with a scheduler."""


class ParseError(SimulationError):
    """A workload, profile, or trace file is malformed."""


class ComparisonError(SimulationError):
    """Two reports cannot be compared (different workload identities)."""


class RunawaySimulation(SimulationError):
    """The event loop exceeded its safety ceiling without quiescing."""


class UsageError(SimulationError):
    """Bad command-line arguments."""
