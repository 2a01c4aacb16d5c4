"""Reaction-diffusion SIRS modelling: forward and adjoint solvers, infection-rate
fitting, seasonal ODE/SDE models, stability analysis and data handling.

Set ``SIRSFIT_THREADS`` before the first import to cap the BLAS/OpenMP thread
count.
"""
import os as _os

_threads = _os.environ.get("SIRSFIT_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"

from .grid import Grid  # noqa: E402
from .model import Params, StateTriple  # noqa: E402

__all__ = ["Grid", "Params", "StateTriple", "__version__"]
