"""Kernel backend selection.

The compiled extension is used when it imports; set ``BOTAMP_PURE_PYTHON=1``
to force the numpy implementations.  ``BACKEND`` names the active one.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("BOTAMP_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "numpy"

sigmoid = _kernels_py.sigmoid
PROB_EPS = _kernels_py.PROB_EPS


def _resolve(impl):
    if impl is None:
        return _impl
    if impl == "numpy":
        return _kernels_py
    if impl == "compiled":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown kernel backend {impl!r}")


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def logistic_loss_grad(X, y, w, b, l2, impl=None):
    impl = _resolve(impl)
    return impl.logistic_loss_grad(_f64(X), _f64(y), _f64(w), float(b), float(l2))


def hinge_loss_subgrad(X, ys, w, b, l2, impl=None):
    impl = _resolve(impl)
    return impl.hinge_loss_subgrad(_f64(X), _f64(ys), _f64(w), float(b), float(l2))


def knn_vote(X, y, Q, k, impl=None):
    impl = _resolve(impl)
    return impl.knn_vote(_f64(X), np.ascontiguousarray(y, dtype=np.uint8), _f64(Q), int(k))


def available():
    """Names of the backends importable here, compiled first."""
    out = []
    try:
        from . import _ckernels  # noqa: F401
        out.append("compiled")
    except ImportError:
        pass
    out.append("numpy")
    return out
