"""Kernel backend selection.

The hot dense kernels (matmul variants and row log-softmax) exist twice:
a Cython extension (``_core``) and a NumPy fallback (``_numpy``). The
environment variable ``VOOD_BACKEND`` picks one:

* ``auto`` (default): compiled extension if importable, else NumPy;
* ``cython``: require the extension, raise if missing;
* ``numpy``: force the fallback.

``BACKEND`` records which one won. ``benchmarks/bench_kernels.py``
compares the two.
"""

import os

_requested = os.environ.get("VOOD_BACKEND", "auto").lower()

if _requested not in ("auto", "cython", "numpy"):
    raise ImportError(f"VOOD_BACKEND must be auto, cython or numpy, got {_requested!r}")

if _requested == "numpy":
    from . import _numpy as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        from . import _numpy as _impl

        BACKEND = "numpy"

matmul_nn = _impl.matmul_nn
matmul_nt = _impl.matmul_nt
matmul_tn = _impl.matmul_tn
log_softmax_rows = _impl.log_softmax_rows

__all__ = ["BACKEND", "matmul_nn", "matmul_nt", "matmul_tn", "log_softmax_rows"]
