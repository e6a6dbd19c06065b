"""Kernel backend selection.

Imports the compiled ``_speedups`` extension when it is built, otherwise the
NumPy fallbacks. ``SAFEFIRST_BACKEND=pure|compiled|auto`` forces a choice
(``compiled`` raises if the extension is missing).
"""

from __future__ import annotations

import os

_requested = os.environ.get("SAFEFIRST_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "compiled", "pure"):
    raise ImportError(
        f"SAFEFIRST_BACKEND must be 'auto', 'compiled' or 'pure', got {_requested!r}"
    )

if _requested == "pure":
    from . import _kernels_py as _impl
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "compiled":
            raise
        from . import _kernels_py as _impl  # type: ignore[no-redef]

BACKEND: str = "compiled" if _impl.__name__.endswith("_speedups") else "pure"

normal_cdf = _impl.normal_cdf
rowwise_argmax_tie = _impl.rowwise_argmax_tie
knn_mean = _impl.knn_mean
