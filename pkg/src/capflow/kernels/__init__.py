"""Hot numerical kernels with a compiled core and a pure-Python fallback.

The Cython extension ``_core`` is preferred when importable; setting the
environment variable ``CAPFLOW_PURE_PYTHON`` to a nonempty value forces the
numpy fallback. The active backend name is exposed as ``BACKEND``.
"""

import os

from . import _fallback

if os.environ.get("CAPFLOW_PURE_PYTHON"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

greenshields_caps = _impl.greenshields_caps
clamp_with_caps = _impl.clamp_with_caps
kinetic_weights = _impl.kinetic_weights
weighted_energy = _impl.weighted_energy
solve_symmetric_tridiag = _impl.solve_symmetric_tridiag
scatter_kinetic_coeff = _impl.scatter_kinetic_coeff
density_newton = _impl.density_newton

__all__ = [
    "BACKEND",
    "greenshields_caps",
    "clamp_with_caps",
    "kinetic_weights",
    "weighted_energy",
    "solve_symmetric_tridiag",
    "scatter_kinetic_coeff",
    "density_newton",
]
