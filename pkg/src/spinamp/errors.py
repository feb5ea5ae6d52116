"""Exception types shared across the solvers."""


class IntegrationError(RuntimeError):
    """ODE integration failed or violated a conservation check."""

    def __init__(self, message, residual=None):
        super().__init__(message if residual is None
                         else f"{message} (residual {residual:.3e})")
        self.residual = residual


class ResourceError(MemoryError):
    """Requested problem size exceeds the solver's configured limit."""


class CutoffError(RuntimeError):
    """Fock-space truncation is too small for the evolved state."""
