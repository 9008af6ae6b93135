"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``IDSCODE_PURE`` is set to a non-empty value other than
``0``, the numpy implementation takes over.
"""
from __future__ import annotations

import os

from . import _fallback

_force_pure = os.environ.get("IDSCODE_PURE", "") not in ("", "0")

_impl = _fallback
BACKEND = "numpy"
if not _force_pure:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass

gamma_all = _impl.gamma_all
forward_backward = _impl.forward_backward
forward_only = _impl.forward_only

__all__ = ["BACKEND", "gamma_all", "forward_backward", "forward_only"]
