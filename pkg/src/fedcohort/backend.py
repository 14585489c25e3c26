"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
functionally identical (same visit order, same update rule) and is used when
the extension was not built. ``FEDCOHORT_BACKEND`` forces a choice:

* ``auto`` (default) - compiled if available, else python
* ``compiled``       - require the extension, fail otherwise
* ``python``         - always use the numpy fallback
"""

from __future__ import annotations

import os

_mode = os.environ.get("FEDCOHORT_BACKEND", "auto")
if _mode not in ("auto", "compiled", "python"):
    raise ValueError(f"FEDCOHORT_BACKEND must be auto|compiled|python, got '{_mode}'")

kernels = None
if _mode in ("auto", "compiled"):
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:
        if _mode == "compiled":
            raise ImportError("FEDCOHORT_BACKEND=compiled but the extension is not built") from None
if kernels is None:
    from . import _kernels_py as kernels

BACKEND_NAME: str = kernels.BACKEND_NAME
