"""Numba switch.

Set ``MORASLICE_NUMBA=0`` in the environment before import to force the
pure-numpy kernels. When numba is missing the numpy path is used silently.
"""

import os

_FLAG = os.environ.get("MORASLICE_NUMBA", "1").strip().lower()
_WANTED = _FLAG not in ("0", "false", "no", "off")

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False
    _njit = None

USE_NUMBA = HAVE_NUMBA and _WANTED


def njit(func=None, **kwargs):
    """``numba.njit(cache=True)`` when available, identity otherwise."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        if not HAVE_NUMBA:
            return f
        return _njit(**kwargs)(f)

    if func is not None:
        return wrap(func)
    return wrap


def pick(nb_impl, np_impl):
    return nb_impl if USE_NUMBA else np_impl
