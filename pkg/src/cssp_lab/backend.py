"""Backend selection: numba-jitted kernels with a pure-NumPy fallback.

The environment variable ``CSSP_LAB_BACKEND`` picks the implementation:

* unset or ``"numba"`` -- use numba if importable, else fall back silently;
* ``"numpy"``          -- force the pure NumPy/Python reference path.

Both paths produce bit-identical simulation traces (the reference path uses
scalar ``math.log``/``math.exp``, which bind to the same libm calls the
jitted code emits). ``benchmarks/bench_backends.py`` compares their speed.
"""

from __future__ import annotations

import os

_requested = os.environ.get("CSSP_LAB_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"CSSP_LAB_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

HAS_NUMBA = False
if _requested != "numpy":
    try:
        import numba  # noqa: F401

        HAS_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise


def active_backend() -> str:
    """Name of the kernel implementation in use: 'numba' or 'numpy'."""
    return "numba" if HAS_NUMBA else "numpy"


if HAS_NUMBA:
    from numba import njit
else:

    def njit(*args, **kwargs):
        """No-op stand-in so kernel modules can decorate unconditionally."""

        def wrap(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return wrap
