"""Simulation and statistical verification of coalescing mass-carrying diffusions."""

import os

# the TBB layer in this environment is too old and only produces warnings
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

__version__ = "0.1.0"
