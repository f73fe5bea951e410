"""Backend selection for the hot loops.

Numba is used when importable unless ``MLMC_LASSO_DISABLE_NUMBA`` is set to a
truthy value, in which case every kernel runs through its pure-numpy twin.
The flag is read once, at import time.
"""

import functools
import os

_FALSY = {"", "0", "false", "no", "off"}

DISABLE_NUMBA = os.environ.get("MLMC_LASSO_DISABLE_NUMBA", "").strip().lower() not in _FALSY

try:
    import numba as _nb
except ImportError:  # pragma: no cover - numba is a declared dependency
    _nb = None

NUMBA_AVAILABLE = _nb is not None
USE_NUMBA = NUMBA_AVAILABLE and not DISABLE_NUMBA
BACKEND = "numba" if USE_NUMBA else "numpy"

if NUMBA_AVAILABLE:
    njit = functools.partial(_nb.njit, cache=True, nogil=True)
else:  # pragma: no cover

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
