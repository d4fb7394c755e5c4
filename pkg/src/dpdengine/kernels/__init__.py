"""Kernel backend dispatch.

The hot GRU loops run through numba-jitted kernels by default; setting
``DPD_ENGINE_BACKEND=numpy`` selects the pure-numpy fallback (useful where
numba is unavailable or for debugging).  ``DPD_ENGINE_BACKEND=numba`` makes
a missing numba an error instead of a silent fallback.

Fixed-point and fake-quantized results are bit-identical across backends;
the plain float path agrees to summation-order rounding.
"""

from __future__ import annotations

import os

_choice = os.environ.get("DPD_ENGINE_BACKEND", "auto").lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"DPD_ENGINE_BACKEND must be auto, numba or numpy, got {_choice!r}"
    )

if _choice == "numpy":
    from . import _gru_numpy as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _gru_numba as _impl

        BACKEND = "numba"
    except ImportError:
        if _choice == "numba":
            raise
        from . import _gru_numpy as _impl

        BACKEND = "numpy"

forward_infer_float = _impl.forward_infer_float
forward_infer_fxp = _impl.forward_infer_fxp
forward_train = _impl.forward_train
backward_train = _impl.backward_train


def backend_name() -> str:
    return BACKEND
