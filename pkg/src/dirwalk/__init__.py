"""Simulation and bound checks for directed submartingales on the lattice."""
import os

import numba

if "NUMBA_THREADING_LAYER" not in os.environ:
    # Avoid probing an outdated TBB; fall back gracefully where OpenMP is absent.
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

__version__ = "0.1.0"
