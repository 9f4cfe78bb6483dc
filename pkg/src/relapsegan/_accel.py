"""Optional numba acceleration.

Set ``RELAPSEGAN_NUMBA=0`` to force the pure-numpy kernels even when numba is
installed. The flag is read once at import time.
"""
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("RELAPSEGAN_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or an identity decorator without numba."""
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def tune_allocator() -> bool:
    """Keep large freed blocks inside glibc malloc instead of returning them.

    Training allocates and drops many multi-megabyte im2col buffers; by
    default glibc serves each through a fresh mmap and pays the page faults
    again. Raising the mmap and trim thresholds avoids that (about a third
    faster on one core) without changing any numeric result. Returns False
    when the C library does not offer ``mallopt``.
    """
    import ctypes
    import ctypes.util

    name = ctypes.util.find_library("c")
    if name is None:
        return False
    try:
        libc = ctypes.CDLL(name)
        mallopt = libc.mallopt
    except (OSError, AttributeError):
        return False
    M_TRIM_THRESHOLD, M_MMAP_THRESHOLD = -1, -3
    ok = mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024)
    ok &= mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024)
    return bool(ok)
