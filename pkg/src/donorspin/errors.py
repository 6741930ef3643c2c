"""Exception types shared across the package."""


class DonorSpinError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(DonorSpinError, ValueError):
    """Invalid user-supplied configuration.

    ``field`` carries the dotted path of the offending entry so CLI error
    messages can point at the exact key.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericalError(DonorSpinError, RuntimeError):
    """Numerical failure (trace drift, negativity, overflow) beyond the error budget."""


class ClassificationError(DonorSpinError, RuntimeError):
    """Eigenstate electron-spin character is ambiguous (population exactly 1/2)."""
