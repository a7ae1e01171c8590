"""Kernel backend selection.

The information-gain inner loops (candidate gain sweeps, subset objective
evaluation, brute-force subset search) exist twice: a numba ``@njit``
version and a vectorized pure-numpy fallback.  Selection happens once at
import time from the ``BEACONOPT_BACKEND`` environment variable:

    auto   use numba when importable, else numpy (default)
    numba  require numba, raise if unavailable
    numpy  force the pure-numpy path

Both implementations share a signature contract; see
``_kernels_numpy.py`` for the reference documentation.
"""

from __future__ import annotations

import os
import warnings

_choice = os.environ.get("BEACONOPT_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise RuntimeError(f"BEACONOPT_BACKEND={_choice!r} not one of auto|numba|numpy")

if _choice == "numpy":
    from . import _kernels_numpy as _impl

    USING_NUMBA = False
else:
    try:
        from . import _kernels_numba as _impl

        USING_NUMBA = True
    except ImportError:
        if _choice == "numba":
            raise
        warnings.warn("numba unavailable, falling back to numpy kernels")
        from . import _kernels_numpy as _impl

        USING_NUMBA = False

BACKEND = "numba" if USING_NUMBA else "numpy"

beacon_gains = _impl.beacon_gains
subset_objective = _impl.subset_objective
brute_force_search = _impl.brute_force_search
