"""Tetrahedral meshes of the unit ball and P1 assembly of the energy form.

The seed mesh is the octahedron fan: the origin joined to the six unit
vectors, eight tetrahedra.  Each refinement splits every tetrahedron into
eight (corner cells plus an inner octahedron cut along its shortest
diagonal) and projects boundary vertices radially onto the unit sphere.

Assembly produces the flat-ball pairing

    A = 4(n-1)/(n-2) K + diag(R lumped dV) + 2(n-1) diag(H lumped dS)

with P1 stiffness K and lumped volume/boundary masses, so the boundary
measure is a diagonal weight vector and all conformal identities hold
exactly at the matrix level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .core import BoundaryStructure, EnergyForm, as_factor, cholesky_ok, pullback_form
from .errors import AssemblyError, DomainError, InputError
from .quotients import fit_robin_constant

MAX_REFINEMENT = 6

#: seed mesh size, fixed by construction
SEED_VERTEX_COUNT = 7
SEED_CELL_COUNT = 8


@dataclass(frozen=True)
class SimplicialMesh:
    """Tetrahedral mesh of the closed unit ball."""

    vertices: np.ndarray       # (V, 3) float
    cells: np.ndarray          # (C, 4) int, positively oriented
    boundary_faces: np.ndarray # (F, 3) int, sorted rows, lexicographic order
    boundary_vertices: np.ndarray  # (B,) int, sorted

    dim_ambient: int = 3

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_cells(self) -> int:
        return self.cells.shape[0]

    def cell_volumes(self) -> np.ndarray:
        v = self.vertices
        c = self.cells
        e = np.stack([v[c[:, k]] - v[c[:, 0]] for k in (1, 2, 3)], axis=1)
        return np.linalg.det(e) / 6.0

    def boundary_face_areas(self) -> np.ndarray:
        v = self.vertices
        f = self.boundary_faces
        a = v[f[:, 1]] - v[f[:, 0]]
        b = v[f[:, 2]] - v[f[:, 0]]
        return 0.5 * np.linalg.norm(np.cross(a, b), axis=1)

    def h_max(self) -> float:
        """Longest edge over all cells."""
        v = self.vertices
        c = self.cells
        h = 0.0
        for i in range(4):
            for j in range(i + 1, 4):
                h = max(h, float(np.linalg.norm(v[c[:, i]] - v[c[:, j]], axis=1).max()))
        return h

    def interior_mask(self) -> np.ndarray:
        mask = np.ones(self.num_vertices, dtype=bool)
        mask[self.boundary_vertices] = False
        return mask


@dataclass(frozen=True)
class MetricData:
    """Pointwise curvature data: scalar curvature per vertex, mean curvature
    per boundary vertex, optional conformal factor."""

    R_field: np.ndarray
    H_field: np.ndarray
    conformal_w: object = None

    @classmethod
    def flat(cls, mesh: SimplicialMesh) -> "MetricData":
        """Flat-ball preset: R = 0, H = 1."""
        return cls(
            R_field=np.zeros(mesh.num_vertices),
            H_field=np.ones(mesh.boundary_vertices.size),
        )


def _orient(vertices, cells):
    e = np.stack(
        [vertices[cells[:, k]] - vertices[cells[:, 0]] for k in (1, 2, 3)], axis=1
    )
    det = np.linalg.det(e)
    flip = det < 0
    cells = cells.copy()
    cells[flip, 2], cells[flip, 3] = cells[flip, 3].copy(), cells[flip, 2].copy()
    return cells


def _boundary_of(cells, num_vertices):
    faces = np.vstack(
        [cells[:, [1, 2, 3]], cells[:, [0, 2, 3]], cells[:, [0, 1, 3]], cells[:, [0, 1, 2]]]
    )
    faces = np.sort(faces, axis=1)
    uniq, counts = np.unique(faces, axis=0, return_counts=True)
    boundary_faces = uniq[counts == 1]
    order = np.lexsort((boundary_faces[:, 2], boundary_faces[:, 1], boundary_faces[:, 0]))
    boundary_faces = boundary_faces[order]
    boundary_vertices = np.unique(boundary_faces)
    return boundary_faces, boundary_vertices


def _seed_mesh() -> tuple[np.ndarray, np.ndarray]:
    vertices = np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ]
    )
    xs, ys, zs = (1, 2), (3, 4), (5, 6)
    cells = np.array(
        [[0, i, j, k] for i in xs for j in ys for k in zs], dtype=np.int64
    )
    return vertices, _orient(vertices, cells)


# local edges of a tetrahedron, in midpoint order m01..m23
_EDGES = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]

# inner-octahedron split: for diagonal d, the equator cycle in midpoint indices
_DIAGONALS = [(0, 5), (1, 4), (2, 3)]   # (m01,m23), (m02,m13), (m03,m12)
_EQUATORS = [(1, 2, 4, 3), (0, 2, 5, 3), (0, 1, 5, 4)]


def _refine_once(vertices, cells):
    nv = vertices.shape[0]
    pairs = np.vstack([np.sort(cells[:, e], axis=1) for e in _EDGES])
    keys = pairs[:, 0] * (2 ** 31) + pairs[:, 1]
    uniq_keys, inverse = np.unique(keys, return_inverse=True)
    uniq_pairs = np.empty((uniq_keys.size, 2), dtype=np.int64)
    uniq_pairs[:, 0] = uniq_keys // (2 ** 31)
    uniq_pairs[:, 1] = uniq_keys % (2 ** 31)
    mid_coords = 0.5 * (vertices[uniq_pairs[:, 0]] + vertices[uniq_pairs[:, 1]])
    new_vertices = np.vstack([vertices, mid_coords])

    ncells = cells.shape[0]
    mids = nv + inverse.reshape(6, ncells).T  # (C, 6) midpoint vertex ids

    corner = [
        np.column_stack([cells[:, 0], mids[:, 0], mids[:, 1], mids[:, 2]]),
        np.column_stack([cells[:, 1], mids[:, 0], mids[:, 3], mids[:, 4]]),
        np.column_stack([cells[:, 2], mids[:, 1], mids[:, 3], mids[:, 5]]),
        np.column_stack([cells[:, 3], mids[:, 2], mids[:, 4], mids[:, 5]]),
    ]

    # choose the shortest diagonal of the inner octahedron, ties to lowest index
    dlen = np.stack(
        [
            np.linalg.norm(new_vertices[mids[:, a]] - new_vertices[mids[:, b]], axis=1)
            for a, b in _DIAGONALS
        ],
        axis=1,
    )
    choice = np.argmin(dlen, axis=1)
    inner = []
    for v, (a, b) in enumerate(_DIAGONALS):
        sel = choice == v
        if not np.any(sel):
            continue
        m = mids[sel]
        cyc = _EQUATORS[v]
        for k in range(4):
            c0, c1 = cyc[k], cyc[(k + 1) % 4]
            inner.append(np.column_stack([m[:, a], m[:, b], m[:, c0], m[:, c1]]))

    new_cells = np.vstack(corner + inner).astype(np.int64)
    return new_vertices, _orient(new_vertices, new_cells)


def build_ball_mesh(refinement_level: int) -> SimplicialMesh:
    """Octahedron-seeded ball mesh after `refinement_level` regular splits.

    Boundary vertices are projected onto the unit sphere after each split;
    output is deterministic for a given level.
    """
    if refinement_level < 0 or refinement_level > MAX_REFINEMENT:
        raise InputError(
            f"refinement level must be in [0, {MAX_REFINEMENT}], got {refinement_level}"
        )
    vertices, cells = _seed_mesh()
    for _ in range(refinement_level):
        vertices, cells = _refine_once(vertices, cells)
        bf, bv = _boundary_of(cells, vertices.shape[0])
        norms = np.linalg.norm(vertices[bv], axis=1)
        vertices[bv] /= norms[:, None]
        cells = _orient(vertices, cells)
    bf, bv = _boundary_of(cells, vertices.shape[0])
    mesh = SimplicialMesh(
        vertices=vertices, cells=cells, boundary_faces=bf, boundary_vertices=bv
    )
    if np.any(mesh.cell_volumes() <= 0):
        raise AssemblyError("mesh refinement produced a non-positive cell volume")
    return mesh


def lumped_boundary_weights(mesh: SimplicialMesh) -> np.ndarray:
    """Lumped boundary measure: one third of each incident triangle area."""
    areas = mesh.boundary_face_areas()
    w = np.zeros(mesh.num_vertices)
    np.add.at(w, mesh.boundary_faces.reshape(-1), np.repeat(areas / 3.0, 3))
    return w[mesh.boundary_vertices]


def assemble(
    mesh: SimplicialMesh, metric: MetricData, n: int = 3
) -> tuple[EnergyForm, BoundaryStructure]:
    """P1 assembly of the pairing and the lumped boundary structure.

    Raises AssemblyError when the assembled form is not positive definite,
    i.e. when the data violate the standing hypothesis mu(M, dM, [g]) > 0.
    """
    if n != 3:
        raise InputError("only n = 3 meshes are supported; use the algebraic layer for general n")
    nv = mesh.num_vertices
    if metric.R_field.shape != (nv,):
        raise InputError("R_field must have one value per vertex")
    if metric.H_field.shape != (mesh.boundary_vertices.size,):
        raise InputError("H_field must have one value per boundary vertex")

    rows, cols, vals, vols = _kernels.p1_tet_triplets(mesh.vertices, mesh.cells)
    stiff = sp.coo_matrix((vals, (rows, cols)), shape=(nv, nv)).tocsr()

    lump_vol = np.zeros(nv)
    np.add.at(lump_vol, mesh.cells.reshape(-1), np.repeat(vols / 4.0, 4))

    bw = lumped_boundary_weights(mesh)
    a_n = float(4 * (n - 1)) / (n - 2)
    b_n = float(2 * (n - 1))

    diag = metric.R_field * lump_vol
    diag_b = np.zeros(nv)
    diag_b[mesh.boundary_vertices] = b_n * metric.H_field * bw
    matrix = (a_n * stiff + sp.diags(diag + diag_b)).tocsr()
    # duplicate summation order is not transpose-stable; symmetrize exactly
    matrix = ((matrix + matrix.T) * 0.5).tocsr()
    matrix.sort_indices()

    form = EnergyForm(matrix, n=n)
    bs = BoundaryStructure(
        dim=nv, indices=mesh.boundary_vertices, weights=bw, n=n
    )
    if not cholesky_ok(matrix):
        raise AssemblyError(
            "assembled form is not positive definite: the hypothesis "
            "mu(M, dM, [g]) > 0 is violated by the supplied curvature data"
        )
    if metric.conformal_w is not None:
        form = pullback_form(form, as_factor(metric.conformal_w, nv))
    return form, bs


def curvature_residual(mesh: SimplicialMesh, form: EnergyForm, bs: BoundaryStructure, u):
    """Euler-Lagrange residuals of a candidate solution.

    Returns (r_interior, r_boundary, c_est): the relative interior residual
    of A u, and the constant + relative misfit of the boundary fit
    (A u)_j ~ c m_j u_j^{n/(n-2)}.
    """
    u = np.asarray(u, dtype=np.float64)
    if np.any(u <= 0):
        raise DomainError("curvature residual requires a strictly positive state")
    ax = form.matvec(u)
    interior = mesh.interior_mask()
    r_interior = float(
        np.linalg.norm(ax[interior]) / max(np.linalg.norm(ax), 1e-300)
    )
    c_est, r_boundary = fit_robin_constant(form, bs, u)
    return r_interior, r_boundary, c_est
