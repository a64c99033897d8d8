"""Exception types shared across the package."""


class CapflowError(Exception):
    """Base class for all errors raised by capflow."""


class GraphError(CapflowError, ValueError):
    """Invalid graph construction input (bad index, self-loop, duplicate pair)."""


class ScenarioError(CapflowError, ValueError):
    """Scenario file failed parsing or validation."""


class DensityFloorError(CapflowError, RuntimeError):
    """A density snapshot dropped below the positivity floor."""


class SolverBreakdownError(CapflowError, RuntimeError):
    """A linear solve inside the splitting scheme failed its residual check."""


class OracleInfeasibleError(CapflowError, RuntimeError):
    """The reference solver certified that no strictly feasible point exists."""


class OracleSizeError(CapflowError, ValueError):
    """Instance exceeds the size the reference solver is willing to handle."""
