"""Numba toggle shared by the hot kernels.

Set MIMICGAME_NO_NUMBA=1 to force the pure-numpy kernel implementations;
the flag also flips automatically when numba is not importable.
"""

import os

NUMBA_ENABLED = False
njit = None

if not os.environ.get("MIMICGAME_NO_NUMBA"):
    try:
        from numba import njit  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        njit = None
        NUMBA_ENABLED = False
