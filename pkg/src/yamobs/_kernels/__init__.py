"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-Python twins in
``_fallback`` carry identical contracts.  Set YO_KERNELS=python to force the
fallback, YO_KERNELS=compiled to require the extension.
"""

import os

import numpy as np

from . import _fallback

_mode = os.environ.get("YO_KERNELS", "auto")

if _mode == "python":
    _impl = _fallback
elif _mode == "compiled":
    from . import _compiled as _impl
else:
    try:
        from . import _compiled as _impl
    except ImportError:
        _impl = _fallback

BACKEND = "compiled" if _impl is not _fallback else "python"


def pgs_sweeps(csr_matrix, bound, x, omega=1.5, nsweeps=1):
    """Run projected SOR sweeps on the selected backend; updates x in place."""
    if not csr_matrix.has_sorted_indices:
        csr_matrix = csr_matrix.copy()
        csr_matrix.sort_indices()
    if np.any(csr_matrix.diagonal() == 0):
        raise ValueError("pgs_sweeps requires a fully populated diagonal")
    indptr = np.asarray(csr_matrix.indptr, dtype=np.int64)
    indices = np.asarray(csr_matrix.indices, dtype=np.int64)
    data = np.ascontiguousarray(csr_matrix.data, dtype=np.float64)
    return _impl.pgs_sweeps(indptr, indices, data,
                            np.ascontiguousarray(bound, dtype=np.float64),
                            x, float(omega), int(nsweeps))


def p1_tet_triplets(vertices, cells):
    """Stiffness triplets + cell volumes on the selected backend."""
    verts = np.ascontiguousarray(vertices, dtype=np.float64)
    cls = np.ascontiguousarray(cells, dtype=np.int64)
    return _impl.p1_tet_triplets(verts, cls)
