# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: projected SOR sweeps and P1 tetrahedral assembly."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def pgs_sweeps(cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices,
               double[::1] data, double[::1] bound, double[::1] x,
               double omega, Py_ssize_t nsweeps):
    """Projected SOR sweeps for min x'Ax subject to x >= bound, in place."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t s, i, k
    cdef cnp.int64_t lo, hi, j
    cdef double acc, diag, xi
    with nogil:
        for s in range(nsweeps):
            for i in range(n):
                lo = indptr[i]
                hi = indptr[i + 1]
                acc = 0.0
                diag = 0.0
                for k in range(lo, hi):
                    j = indices[k]
                    if j == i:
                        diag = data[k]
                    else:
                        acc += data[k] * x[j]
                xi = (1.0 - omega) * x[i] - omega * acc / diag
                x[i] = xi if xi > bound[i] else bound[i]
    return np.asarray(x)


def p1_tet_triplets(double[:, ::1] vertices, cnp.int64_t[:, ::1] cells):
    """P1 stiffness triplets and cell volumes for a tetrahedral mesh."""
    cdef Py_ssize_t ncells = cells.shape[0]
    rows_arr = np.empty(16 * ncells, dtype=np.int64)
    cols_arr = np.empty(16 * ncells, dtype=np.int64)
    vals_arr = np.empty(16 * ncells, dtype=np.float64)
    vols_arr = np.empty(ncells, dtype=np.float64)
    cdef cnp.int64_t[::1] rows = rows_arr
    cdef cnp.int64_t[::1] cols = cols_arr
    cdef double[::1] vals = vals_arr
    cdef double[::1] vols = vols_arr

    cdef Py_ssize_t c, a, b, out
    cdef cnp.int64_t v0, v1, v2, v3
    cdef double e11, e12, e13, e21, e22, e23, e31, e32, e33
    cdef double c11, c12, c13, c21, c22, c23, c31, c32, c33
    cdef double det, inv_det, vol
    cdef double g[4][3]

    with nogil:
        for c in range(ncells):
            v0 = cells[c, 0]; v1 = cells[c, 1]; v2 = cells[c, 2]; v3 = cells[c, 3]
            e11 = vertices[v1, 0] - vertices[v0, 0]
            e12 = vertices[v1, 1] - vertices[v0, 1]
            e13 = vertices[v1, 2] - vertices[v0, 2]
            e21 = vertices[v2, 0] - vertices[v0, 0]
            e22 = vertices[v2, 1] - vertices[v0, 1]
            e23 = vertices[v2, 2] - vertices[v0, 2]
            e31 = vertices[v3, 0] - vertices[v0, 0]
            e32 = vertices[v3, 1] - vertices[v0, 1]
            e33 = vertices[v3, 2] - vertices[v0, 2]
            # cofactors of the edge matrix: inverse columns give the gradients
            c11 = e22 * e33 - e23 * e32
            c21 = e23 * e31 - e21 * e33
            c31 = e21 * e32 - e22 * e31
            c12 = e13 * e32 - e12 * e33
            c22 = e11 * e33 - e13 * e31
            c32 = e12 * e31 - e11 * e32
            c13 = e12 * e23 - e13 * e22
            c23 = e13 * e21 - e11 * e23
            c33 = e11 * e22 - e12 * e21
            det = e11 * c11 + e12 * c21 + e13 * c31
            vol = det / 6.0
            vols[c] = vol
            inv_det = 1.0 / det
            # grad(lambda_k) = column k of inv(E), entries adj_{ik} / det
            g[1][0] = c11 * inv_det; g[1][1] = c21 * inv_det; g[1][2] = c31 * inv_det
            g[2][0] = c12 * inv_det; g[2][1] = c22 * inv_det; g[2][2] = c32 * inv_det
            g[3][0] = c13 * inv_det; g[3][1] = c23 * inv_det; g[3][2] = c33 * inv_det
            g[0][0] = -(g[1][0] + g[2][0] + g[3][0])
            g[0][1] = -(g[1][1] + g[2][1] + g[3][1])
            g[0][2] = -(g[1][2] + g[2][2] + g[3][2])
            out = 16 * c
            for a in range(4):
                for b in range(4):
                    rows[out] = cells[c, a]
                    cols[out] = cells[c, b]
                    vals[out] = vol * (g[a][0] * g[b][0] + g[a][1] * g[b][1]
                                       + g[a][2] * g[b][2])
                    out += 1
    return rows_arr, cols_arr, vals_arr, vols_arr
