"""Backend selection for the quadrature kernels.

The compiled extension is used when importable; setting the environment
variable ``NLSGRAPH_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
if not os.environ.get("NLSGRAPH_PURE_PYTHON"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

power_integral = _impl.power_integral
nonlinear_load = _impl.nonlinear_load
weight_entries = _impl.weight_entries

__all__ = ["BACKEND", "power_integral", "nonlinear_load", "weight_entries"]
