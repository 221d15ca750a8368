"""Exception types shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 2, NumericalError -> 3,
CapacityError -> 4.
"""


class RydlgtError(Exception):
    """Base class for all package errors."""


class ConfigError(RydlgtError):
    """Invalid user input: lattice spec, schedule, config file, units."""


class CapacityError(RydlgtError):
    """A requested computation exceeds a configured size bound."""


class NumericalError(RydlgtError):
    """An iterative method failed to reach its tolerance."""
