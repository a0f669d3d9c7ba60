"""Bindings for the operator-regression core."""

from ._opreg import *  # noqa: F401,F403
from ._opreg import ConfigError, FormatError, NumericalError, Grid

__all__ = [name for name in dir() if not name.startswith("_")]
