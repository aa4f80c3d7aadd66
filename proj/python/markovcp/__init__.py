"""Prediction sets for discrete-state Markov chains.

The native module carries the implementation: i-block conformal prediction
sets, likelihood-based highest-density sets, a conflict-state labeling
pipeline, and a Monte Carlo coverage harness.
"""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
