"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy
fallback.  Setting ``LABELBRIDGE_PURE_PYTHON=1`` forces the fallback.
"""

import os

import numpy as np

from labelbridge.substrate import _pykernels

python_backend = _pykernels

try:
    from labelbridge.substrate import _ckernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and os.environ.get("LABELBRIDGE_PURE_PYTHON", "") in ("", "0"):
    _impl = compiled_backend
    BACKEND = "cython"
else:
    _impl = _pykernels
    BACKEND = "python"


def use_backend(name):
    """Switch backend at runtime ("cython" or "python"); returns the previous name."""
    global _impl, BACKEND
    prev = BACKEND
    if name == "cython":
        if compiled_backend is None:
            raise RuntimeError("compiled extension is not available")
        _impl = compiled_backend
    elif name == "python":
        _impl = _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name
    return prev


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def gru_forward(xp, u_r, u_u, u_c, h0):
    return _impl.gru_forward(_c(xp), _c(u_r), _c(u_u), _c(u_c), _c(h0))


def gru_backward(dhs, cache, u_r, u_u, u_c):
    return _impl.gru_backward(_c(dhs), cache, _c(u_r), _c(u_u), _c(u_c))


def hmm_posteriors(lik, start, trans):
    return _impl.hmm_posteriors(_c(lik), _c(start), _c(trans))
