"""Pick the kernel implementation at import time.

The compiled extension is used when it was built; set
``WAVEDIFF_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

import numpy as np

from . import _pykernels

if os.environ.get("WAVEDIFF_PURE_PYTHON", "") not in ("", "0"):
    kernels = _pykernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:  # extension not built
        kernels = _pykernels

BACKEND = kernels.NAME


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def conv1d_forward(x, w, b, dilation=1):
    return kernels.conv1d_forward(_c(x), _c(w), _c(b), int(dilation))


def conv1d_backward(x, w, gout, dilation=1):
    return kernels.conv1d_backward(_c(x), _c(w), _c(gout), int(dilation))


def dwt_analysis(x, lo, hi):
    return kernels.dwt_analysis(_c(x), _c(lo), _c(hi))


def dwt_synthesis(cA, cD, slo, shi):
    return kernels.dwt_synthesis(_c(cA), _c(cD), _c(slo), _c(shi))
