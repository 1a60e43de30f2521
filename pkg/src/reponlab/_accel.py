"""Backend selection for the hot kernels.

Every kernel in :mod:`reponlab.kernels` exists twice: a loop-style version
compiled with ``numba.njit`` and a pure-numpy version. ``REPONLAB_BACKEND``
picks one at call time (``numba`` or ``numpy``). When numba cannot be
imported the numpy path is used regardless of the flag.
"""
from __future__ import annotations

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

ENV_VAR = "REPONLAB_BACKEND"
BACKENDS = ("numba", "numpy")


def backend() -> str:
    name = os.environ.get(ENV_VAR, "numba").strip().lower()
    if name not in BACKENDS:
        raise ValueError(f"{ENV_VAR}={name!r}; expected one of {BACKENDS}")
    if name == "numba" and not HAVE_NUMBA:
        return "numpy"
    return name


def njit(func):
    """``numba.njit(cache=True)`` when available, identity otherwise."""
    if HAVE_NUMBA:
        return numba.njit(cache=True)(func)
    return func


def dispatch(numba_impl, numpy_impl):
    """Return a callable routing to one of two implementations per call."""

    def call(*args, **kwargs):
        if backend() == "numba":
            return numba_impl(*args, **kwargs)
        return numpy_impl(*args, **kwargs)

    call.__name__ = numpy_impl.__name__.removesuffix("_numpy")
    call.__doc__ = numpy_impl.__doc__
    call.numba_impl = numba_impl
    call.numpy_impl = numpy_impl
    return call
