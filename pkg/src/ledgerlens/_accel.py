"""Kernel dispatch between numba-compiled loops and pure-numpy fallbacks.

Set ``LEDGERLENS_DISABLE_JIT=1`` to run every hot kernel through its numpy
implementation. Both paths are always importable when numba is installed so
tests and the benchmark can compare them directly.
"""

from __future__ import annotations

import contextlib
import os

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

_FALSY = {"", "0", "false", "no", "off"}

_enabled = HAS_NUMBA and os.environ.get("LEDGERLENS_DISABLE_JIT", "").strip().lower() in _FALSY


def jit_enabled() -> bool:
    return _enabled


@contextlib.contextmanager
def use_jit(flag: bool):
    """Temporarily force the numba (True) or numpy (False) path."""
    global _enabled
    previous = _enabled
    _enabled = bool(flag) and HAS_NUMBA
    try:
        yield
    finally:
        _enabled = previous


def njit(*args, **kwargs):
    """``numba.njit`` with caching and GIL release on by default.

    Without numba the decorated function is returned unchanged, so the
    numba-path kernels still run (slowly) as plain Python.
    """
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    if not HAS_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
    return numba.njit(*args, **kwargs)


def pick(nb_impl, np_impl):
    return nb_impl if _enabled else np_impl
