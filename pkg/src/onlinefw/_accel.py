"""numba switch.

Set ``ONLINEFW_NO_NUMBA=1`` in the environment to run every kernel on its
pure-numpy path. Also falls back silently when numba is not importable.
"""

import functools
import os

_flag = os.environ.get("ONLINEFW_NO_NUMBA", "").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    import numba as _nb
except ImportError:  # pragma: no cover - numba is a declared dependency
    _nb = None

HAVE_NUMBA = _nb is not None
NUMBA_ENABLED = HAVE_NUMBA and not _disabled

if HAVE_NUMBA:
    njit = functools.partial(_nb.njit, cache=True, nogil=True)
else:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


def pick(jitted, fallback):
    return jitted if NUMBA_ENABLED else fallback
