"""Covariate-shift scoring and leave-one-domain-out benchmarking over clip features."""

from ._driftbench import *  # noqa: F401,F403
from ._driftbench import DriftbenchError, __doc__  # noqa: F401

__version__ = "0.1.0"
