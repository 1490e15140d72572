"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid mesh, operator, or run configuration."""


class ConfigurationWarning(UserWarning):
    """Configuration is legal but loses a structural property (e.g. coercivity)."""


class ShapeError(ValueError):
    """Arrays do not match the mesh or noise layout they are used with."""


class DegenerateFrameError(ArithmeticError):
    """An ALE frame cannot be built (non-positive Jacobian or weight)."""


class InjectivityError(DegenerateFrameError):
    """The boundary reparametrization z -> z + eta_z(z) is not injective."""


class AssemblyError(RuntimeError):
    """Inconsistent dof layouts handed to an assembler."""


class SolverError(RuntimeError):
    """A linear solve failed; carries the time step index when known."""

    def __init__(self, message, step=None, info=None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step
        self.info = info or {}
