"""Convolution kernel backend selection.

The compiled Cython kernels are preferred when the extension built;
``SENSAL_KERNELS=python`` forces the numpy fallback, ``=native`` requires
the compiled module. Both backends share one contract and are compared
by tests and by ``benchmarks/bench_kernels.py``.
"""

import os

from . import _fallback

_requested = os.environ.get("SENSAL_KERNELS", "auto").lower()

if _requested not in ("auto", "native", "python"):
    raise ValueError(f"SENSAL_KERNELS must be auto|native|python, got {_requested!r}")

_impl = None
if _requested in ("auto", "native"):
    try:
        from . import _native as _impl
    except ImportError:
        if _requested == "native":
            raise ImportError("SENSAL_KERNELS=native but the compiled extension is missing")

if _impl is None:
    _impl = _fallback

BACKEND = "python" if _impl is _fallback else "native"

conv1d_forward = _impl.conv1d_forward
conv1d_backward = _impl.conv1d_backward
conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward
