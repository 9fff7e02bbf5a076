"""Backend selection for the pointwise kernels.

The compiled extension is used when it imports; setting the environment
variable ``NLSS_PURE_PYTHON=1`` forces the numpy fallback.  ``BACKEND``
names the active implementation.
"""
import os

import numpy as np

from . import _kernels_py

_compiled = None
if os.environ.get("NLSS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

_impl = _compiled if _compiled is not None else _kernels_py
BACKEND = "cython" if _compiled is not None else "numpy"


def _c(u):
    return np.ascontiguousarray(u, dtype=np.complex128)


def density(u):
    return _impl.density(_c(u))


def coupling_closed(u):
    return _impl.coupling_closed(_c(u))


def coupling_triples(u, triples):
    return _impl.coupling_triples(_c(u), np.ascontiguousarray(triples, dtype=np.int64))


def phase_rotate(u, dt):
    """Rotate ``u`` in place; ``u`` must already be C-contiguous complex128."""
    if u.dtype != np.complex128 or not u.flags.c_contiguous:
        raise TypeError("phase_rotate needs a C-contiguous complex128 array")
    _impl.phase_rotate(u, float(dt))
    return u
