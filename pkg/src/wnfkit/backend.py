"""Kernel backend selection.

The compiled extension (wnfkit._core) is used when importable; otherwise the
vectorized numpy fallback takes over. Set WNFKIT_PURE_PYTHON=1 to force the
fallback (used by the benchmark and the backend-equivalence tests). Both
backends expose the same three entry points with identical semantics:

    winding_exact_batch(q, v0, v1, v2, nthreads)
    winding_fast_batch(q, left, right, start, count, centroid, dipole,
                       radius, v0, v1, v2, beta, nthreads)
    udist_batch(q, left, right, bbmin, bbmax, start, count, v0, v1, v2,
                nthreads)
"""

from __future__ import annotations

import os

from . import _pykernels

_forced_pure = os.environ.get("WNFKIT_PURE_PYTHON", "0") == "1"

if not _forced_pure:
    try:
        from . import _core  # type: ignore[attr-defined]
    except ImportError:  # pragma: no cover - depends on build environment
        _core = None
else:
    _core = None

_active = _core if _core is not None else _pykernels


def compiled_available() -> bool:
    return _core is not None


def backend_name() -> str:
    return "compiled" if _active is _core and _core is not None else "python"


def get():
    """Module implementing the kernel entry points."""
    return _active


def get_pure():
    """Always the numpy fallback (for cross-checking the compiled core)."""
    return _pykernels
