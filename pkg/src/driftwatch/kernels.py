"""Backend selection for the numeric kernels.

The compiled extension is used when it was built; otherwise the pure-Python
fallback is loaded. Set ``DRIFTWATCH_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from driftwatch import _pykernels

if os.environ.get("DRIFTWATCH_PURE_PYTHON"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from driftwatch import _ckernels as _impl
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"
    else:
        BACKEND = "cython"

bin_counts = _impl.bin_counts
kl_bits = _impl.kl_bits
js_bits = _impl.js_bits
js_rows = _impl.js_rows

__all__ = ["BACKEND", "bin_counts", "kl_bits", "js_bits", "js_rows"]
