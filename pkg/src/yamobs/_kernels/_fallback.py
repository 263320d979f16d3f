"""Pure-Python twins of the compiled kernels.

Same contracts and iteration order as ``_compiled``; used when the extension
was not built or when YO_KERNELS=python.
"""

import numpy as np


def pgs_sweeps(indptr, indices, data, bound, x, omega, nsweeps):
    """Projected SOR sweeps for min x'Ax subject to x >= bound, in place.

    A is given in CSR form; the sweep order is ascending index, so a single
    sweep is deterministic.
    """
    n = x.shape[0]
    for _ in range(nsweeps):
        for i in range(n):
            lo, hi = indptr[i], indptr[i + 1]
            cols = indices[lo:hi]
            vals = data[lo:hi]
            acc = vals @ x[cols]
            k = np.searchsorted(cols, i)
            diag = vals[k]
            acc -= diag * x[i]
            xi = (1.0 - omega) * x[i] - omega * acc / diag
            x[i] = xi if xi > bound[i] else bound[i]
    return x


def p1_tet_triplets(vertices, cells):
    """P1 stiffness triplets and cell volumes for a tetrahedral mesh.

    Returns (rows, cols, vals, vols) where (rows, cols, vals) assemble the
    unscaled stiffness matrix int grad(phi_a) . grad(phi_b) and vols are the
    positive cell volumes.
    """
    verts = np.asarray(vertices, dtype=np.float64)
    cells = np.asarray(cells, dtype=np.int64)
    x0 = verts[cells[:, 0]]
    e = np.stack(
        [verts[cells[:, k]] - x0 for k in (1, 2, 3)], axis=1
    )  # (C, 3, 3) rows = edges
    det = np.linalg.det(e)
    vols = det / 6.0
    einv = np.linalg.inv(e)
    # gradients of the barycentric coordinates 1..3 are the columns of e^{-1}
    g = np.transpose(einv, (0, 2, 1))  # (C, 3, 3): g[c, i] = grad(lambda_{i+1})
    g0 = -g.sum(axis=1, keepdims=True)
    grads = np.concatenate([g0, g], axis=1)  # (C, 4, 3)
    local = vols[:, None, None] * np.einsum("cai,cbi->cab", grads, grads)
    rows = np.repeat(cells, 4, axis=1).reshape(-1)
    cols = np.tile(cells, (1, 4)).reshape(-1)
    return rows, cols, local.reshape(-1), vols
