"""Select the compiled metric kernels, falling back to pure Python.

Set ``HSTDOC_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os
from array import array

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("HSTDOC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass


def implementation(name: str | None = None):
    """Kernel module by name ("python" or "cython"); ``None`` is the selected backend."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def pack_boxes(boxes) -> array:
    flat = array("q")
    for b in boxes:
        flat.extend(int(v) for v in b)
    return flat


def _resolve(impl):
    return implementation(impl) if impl is None or isinstance(impl, str) else impl


def overlap_sum(boxes, impl=None) -> float:
    flat = pack_boxes(boxes)
    return _resolve(impl).overlap_sum(flat, len(flat) // 4)


def alignment_sum(boxes, width: float, impl=None) -> float:
    flat = pack_boxes(boxes)
    return _resolve(impl).alignment_sum(flat, len(flat) // 4, float(width))
