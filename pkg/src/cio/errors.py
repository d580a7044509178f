"""Exception hierarchy shared by all modules."""


class CIOError(Exception):
    """Base class for all toolkit errors."""


class InfeasibleAllocation(CIOError):
    """Desired wrench needs a negative squared rotor speed."""


class SingularInertia(CIOError):
    """Assembled multibody mass matrix is numerically singular."""


class NonFiniteState(CIOError):
    """A state or covariance entry became NaN or Inf."""


class ZeroForce(CIOError):
    """Contact force too small to define a direction."""


class IllConditionedInnovation(CIOError):
    """Innovation covariance condition number exceeds the allowed bound."""


class NoRealSolution(CIOError):
    """Wrench is inconsistent with a contact on the wheel circle."""


class DegenerateWrench(CIOError):
    """Contact direction cannot be observed from the wrench."""


class ParallelDegenerate(CIOError):
    """Reference velocity is parallel to the contact force; rotation axis undefined."""


class DegenerateAcceleration(CIOError):
    """Desired acceleration too small to define a thrust direction."""


class TunnelingDetected(CIOError):
    """Body crossed into an obstacle within one integration step."""


class ConfigError(CIOError):
    """Scenario configuration is malformed. ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class SimulationError(CIOError):
    """A module error raised inside the scenario loop, tagged with the sim time."""

    def __init__(self, t, cause):
        super().__init__(f"t={t:.4f}s: {type(cause).__name__}: {cause}")
        self.t = t
        self.cause = cause
