"""Compressible Navier-Stokes finite-difference solver with selectable
kernel storage plans (BL, RA, RS, SN, SS)."""

import os

# Allow worker counts beyond the visible core count (scaling sweeps may
# oversubscribe).  Must be set before numba is first imported.
os.environ.setdefault("NUMBA_NUM_THREADS", "16")
# OpenMP supports set_num_threads and is quiet about TBB versions.
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

__version__ = "0.1.0"
