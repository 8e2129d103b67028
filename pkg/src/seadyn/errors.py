"""Exception types raised across the package."""


class NonHermitianError(ValueError):
    """Input operator is not Hermitian beyond the symmetrization tolerance."""

    def __init__(self, asymmetry: float, tol: float):
        super().__init__(
            f"operator is not Hermitian: max|A - A^dagger| = {asymmetry:.3e} > {tol:.1e}"
        )
        self.asymmetry = asymmetry


class DimensionError(ValueError):
    pass


class PositivityError(ValueError):
    """A density matrix has an eigenvalue below the positivity tolerance."""

    def __init__(self, min_eigenvalue: float):
        super().__init__(f"positivity violation: smallest eigenvalue {min_eigenvalue:.3e}")
        self.min_eigenvalue = min_eigenvalue


class DomainError(ValueError):
    pass


class DegenerateConstraintsError(ValueError):
    """Constraint operators are linearly dependent on H, I, or each other."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class InternalConsistencyError(RuntimeError):
    pass


class InfeasibleEnergyError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


class IntegrationError(RuntimeError):
    """Step-size underflow or RHS failure; carries the trajectory up to the last good state."""

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
