"""Numba backend switch.

Hot kernels are compiled with numba unless HYBRIDSA_DISABLE_NUMBA is set
(or numba is missing), in which case the pure-numpy fallbacks in
``_kernels`` are used. ``benchmarks/bench_kernels.py`` compares both paths.
"""

from __future__ import annotations

import os

_DISABLED = os.environ.get("HYBRIDSA_DISABLE_NUMBA", "").strip() not in ("", "0")

if not _DISABLED:
    try:
        from numba import njit  # type: ignore

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):  # type: ignore
        """No-op decorator standing in for numba.njit."""

        def wrap(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return wrap


__all__ = ["NUMBA_ENABLED", "njit"]
