"""Gaussian-process emulators for Bayesian inversion of linear PDE parameters."""

from ._pdegp import *  # noqa: F401,F403
from ._pdegp import __version__  # noqa: F401
