"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-numpy
reference implementation is the fallback. Selection can be forced through
the FSCOND_BACKEND environment variable ("compiled" or "python"), read once
at import time.
"""

from __future__ import annotations

import os

from . import codes  # noqa: F401  (re-exported for callers)

_requested = os.environ.get("FSCOND_BACKEND", "auto").strip().lower()

if _requested in ("auto", "", "compiled", "c"):
    try:
        from . import _ckernels as _impl

        BACKEND = "compiled"
    except ImportError:
        if _requested in ("compiled", "c"):
            raise ImportError(
                "FSCOND_BACKEND=compiled but the fscond.backends._ckernels "
                "extension is not built; reinstall with a C compiler or use "
                "FSCOND_BACKEND=python"
            )
        from . import reference as _impl

        BACKEND = "python"
elif _requested in ("python", "reference"):
    from . import reference as _impl

    BACKEND = "python"
else:
    raise ImportError(f"unknown FSCOND_BACKEND value: {_requested!r}")

run_gates = _impl.run_gates
z_expectations = _impl.z_expectations
covariance_metric = _impl.covariance_metric
z_shift_sweep = _impl.z_shift_sweep
jacobi_eigh = _impl.jacobi_eigh
