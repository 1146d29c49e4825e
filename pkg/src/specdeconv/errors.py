"""Exception types shared by the library and the CLI.

The CLI maps them onto exit codes: ``ConfigError`` -> 1, ``DataError`` -> 2,
``NumericalError`` -> 3.
"""


class ConfigError(ValueError):
    """Invalid configuration, unknown key, or missing rule input."""


class DataError(ValueError):
    """Unreadable or empty sample/report files."""


class NumericalError(ArithmeticError):
    """Bracketing failure, inadequate grid, or a divergent quantity where a finite one is required."""


class GridMismatchError(ValueError):
    """Spectral functions defined on different frequency grids were combined."""


class UnguaranteedDerivativeError(ValueError):
    """Derivative order exceeds the Sobolev index the risk guarantee covers."""
