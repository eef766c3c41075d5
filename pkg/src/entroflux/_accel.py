"""Numba switch.

Hot kernels are compiled with numba unless ``ENTROFLUX_DISABLE_NUMBA`` is set
to a truthy value or numba is not importable; in that case every kernel runs
its pure-numpy twin. The backend can also be switched at runtime with
:func:`set_backend`, which the benchmark and the cross-backend tests use.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_FLAG = os.environ.get("ENTROFLUX_DISABLE_NUMBA", "").strip().lower()
_state = {"backend": "numba" if HAVE_NUMBA and _FLAG in ("", "0", "false", "no") else "numpy"}


def njit(fn):
    """Compile ``fn`` in nopython mode when numba is available."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def backend():
    """Return the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return _state["backend"]


def set_backend(name):
    """Select the kernel backend and return the previous one."""
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    previous = _state["backend"]
    _state["backend"] = name
    return previous
