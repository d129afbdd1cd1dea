"""Hot-kernel dispatch: compiled extension when built, pure fallback otherwise.

Set HARMKIT_PURE=1 to force the fallback (used by tests and the kernel
benchmark to exercise both paths).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("HARMKIT_PURE"):
    _impl = _kernels_py
    COMPILED = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        COMPILED = True
    except ImportError:
        _impl = _kernels_py
        COMPILED = False

assign_nearest = _impl.assign_nearest
ngram_hash_counts = _impl.ngram_hash_counts


def implementations():
    """Both kernel modules, for cross-checking and benchmarks."""
    impls = {"python": _kernels_py}
    try:
        from . import _kernels
        impls["compiled"] = _kernels
    except ImportError:
        pass
    return impls
