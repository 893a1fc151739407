"""Exception types shared across the toolkit."""


class MvipError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(MvipError):
    """Invalid parameters, degenerate geometry, or malformed config input."""


class DivergenceError(MvipError):
    """Simulation state became non-finite."""


class CollisionError(MvipError):
    """Floater exceeded the actuator stroke bounds (physical contact)."""


class AllocationError(MvipError):
    """Wrench cannot be distributed over the actuators (singular KKT block)."""


class StrokeLimitError(MvipError):
    """Actuator current stiffness too close to zero at this coil position."""


class DesignError(MvipError):
    """Controller synthesis produced an unrealizable (improper/unstable) block."""


class DatasetError(MvipError):
    """Training data is malformed, empty, or degenerate."""


class ArtifactError(MvipError):
    """A required input artifact (network file, dataset) is missing."""
