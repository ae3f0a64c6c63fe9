"""Exception hierarchy shared by every layer of the simulator."""


class SimulationError(Exception):
    """Base class for all errors raised by this package."""


class RegistryError(SimulationError, ValueError):
    pass


class ModeError(SimulationError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class IncompatibleSpaceError(SimulationError, ValueError):
    pass


class DegenerateStateError(SimulationError, ValueError):
    pass


class NormalizationError(SimulationError, ValueError):
    pass


class GeometryError(SimulationError, ValueError):
    pass


class DomainError(SimulationError, ValueError):
    pass


class UnitarityError(SimulationError, ValueError):
    pass


class TopologyError(SimulationError, ValueError):
    pass


class EmptyBranchError(SimulationError, ValueError):
    pass


class TimingContractError(SimulationError, ValueError):
    pass


class SupportError(SimulationError, ValueError):
    pass


class VariantError(SimulationError, TypeError):
    pass


class GridError(SimulationError, ValueError):
    pass


class InsufficientStatisticsError(SimulationError):
    """No trials survived the conditioning step of an estimator."""

    def __init__(self, message: str, n: int = 0):
        super().__init__(message)
        self.n = n


class ConfigError(SimulationError, ValueError):
    """Invalid run configuration; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
