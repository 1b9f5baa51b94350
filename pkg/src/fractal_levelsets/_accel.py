"""JIT selection and worker-count plumbing.

Hot kernels are written once in a numba-compatible subset of Python and
compiled with ``njit`` unless ``FLL_NO_JIT=1`` is set, in which case the
pure-numpy fallbacks in :mod:`fractal_levelsets.kernels` are used instead.
"""
from __future__ import annotations

import os

try:  # pragma: no cover - exercised implicitly
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


def jit_enabled() -> bool:
    """True when numba kernels should be used (read on every call)."""
    return HAS_NUMBA and not _env_flag("FLL_NO_JIT")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise."""
    if not HAS_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return numba.njit(*args, **kwargs)


def max_workers() -> int:
    """Worker cap from ``FLL_THREADS`` (defaults to the CPU count)."""
    raw = os.environ.get("FLL_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"FLL_THREADS must be an integer, got {raw!r}") from None
    return max(1, os.cpu_count() or 1)
