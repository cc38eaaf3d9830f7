"""Exception types shared across the toolkit."""


class BandfwiError(Exception):
    """Base class for all toolkit errors."""


class InvalidModelError(BandfwiError):
    """Model vector violates positivity or ball constraints."""


class GridMismatchError(BandfwiError):
    """Fields defined on incompatible voxel grids."""


class SingularKernelError(BandfwiError):
    """Kernel evaluated at coincident points."""


class SolverStagnationError(BandfwiError):
    """Krylov iteration failed to reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateFrequencyError(BandfwiError):
    """Interface or Dirichlet system is singular at machine scale."""


class ScaleTooLargeError(BandfwiError):
    """Perturbation scale violates the contraction precondition."""


class DeltaTooLargeError(BandfwiError):
    """Weight exponent delta too large for the profile (2B/E >= 1)."""


class StiffnessError(BandfwiError):
    """ODE integration rejected too many steps."""


class ValidationError(BandfwiError):
    """Scenario configuration failed validation."""
