"""
Exception hierarchy shared by the core modules and the CLI exit-code mapping
"""


class IgmrfError(Exception):
    """Base class for every error raised by the library"""

    exit_code = 1


class ConfigError(IgmrfError):
    """Invalid usage, flags or configuration values"""

    exit_code = 2


class LatticeError(ConfigError, IndexError):
    """Lattice dimensions or coordinates outside their valid range"""


class StencilError(ConfigError):
    """Invalid stencil configuration"""


class NumericalError(IgmrfError):
    """Numerical failure: singular retained spectrum, undefined formula, solver failure"""

    exit_code = 1


class DimensionCapError(ConfigError):
    """Matrix too large for the dense eigen-solve without the long-running opt-in"""
