"""Kernel selection: compiled extension when importable, numpy otherwise.

Set ``ANISOPSIDO_PURE=1`` to force the numpy path.
"""
from __future__ import annotations

import os

from . import _rademacher_py

BACKEND = "python"
sign_sum = _rademacher_py.sign_sum

if not os.environ.get("ANISOPSIDO_PURE"):
    try:
        from . import _rademacher_ext
    except ImportError:  # extension not built
        pass
    else:
        sign_sum = _rademacher_ext.sign_sum
        BACKEND = "compiled"

norm_pow = _rademacher_py.norm_pow

__all__ = ["BACKEND", "sign_sum", "norm_pow"]
