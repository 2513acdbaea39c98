"""Selects the numba or pure-numpy implementation of the hot kernels.

The environment variable ``LPRESIM_BACKEND`` controls the choice:

  auto   (default) use numba if importable, else fall back to numpy
  numba  require numba, raise if it cannot be imported
  numpy  force the pure-numpy fallback

The selected module is exposed as ``kernels``; ``BACKEND`` names the winner.
Both implementations satisfy the same contracts and agree to ~1e-12 (they
differ only in floating-point summation order).
"""

from __future__ import annotations

import os

_CHOICES = ("auto", "numba", "numpy")


def _select():
    mode = os.environ.get("LPRESIM_BACKEND", "auto").strip().lower()
    if mode not in _CHOICES:
        raise ValueError(
            f"LPRESIM_BACKEND={mode!r} not understood; expected one of {_CHOICES}"
        )
    if mode != "numpy":
        try:
            from . import _kernels_numba

            return _kernels_numba, "numba"
        except ImportError:
            if mode == "numba":
                raise
    from . import _kernels_numpy

    return _kernels_numpy, "numpy"


kernels, BACKEND = _select()


def active_backend() -> str:
    """Name of the kernel backend in use ('numba' or 'numpy')."""
    return BACKEND
