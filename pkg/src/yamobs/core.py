"""Discrete energy forms, lumped boundary structures, and exact conformal pullback.

The conformal change g -> g_w = w^{4/(n-2)} g acts on the discrete objects by
diagonal congruence (forms) and by the weight w^{2#} on the lumped boundary
measure.  Because the boundary measure is lumped, the conformal identities

    <u, u>_{g_w} = <wu, wu>_g        and
    ||u||_{2#, g_w} = ||w u||_{2#, g}

hold exactly at the matrix level, not just to discretization order.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee
from scipy.sparse.linalg import eigsh, splu

from .errors import DomainError, InputError

#: boundary entries of admissible states must stay above this floor
EPS_FLOOR = 1e-12

#: above this size, positive-definiteness of sparse forms is probed iteratively
_DENSE_SPD_LIMIT = 20000


def coeff_grad(n: int) -> Fraction:
    """Coefficient of the gradient term, 4(n-1)/(n-2)."""
    return Fraction(4 * (n - 1), n - 2)


def coeff_mean_curv(n: int) -> int:
    """Coefficient of the boundary mean-curvature term, 2(n-1)."""
    return 2 * (n - 1)


def trace_exponent(n: int) -> Fraction:
    """Critical trace exponent 2# = 2(n-1)/(n-2)."""
    return Fraction(2 * (n - 1), n - 2)


def volume_exponent(n: int) -> Fraction:
    """Critical volume exponent 2* = 2n/(n-2)."""
    return Fraction(2 * n, n - 2)


def _is_exactly_symmetric(matrix) -> bool:
    if sp.issparse(matrix):
        diff = matrix - matrix.T
        return diff.nnz == 0 or not np.any(diff.data)
    return np.array_equal(matrix, matrix.T)


@dataclass(frozen=True)
class EnergyForm:
    """Symmetric positive-definite pairing <u, v> = u^T A v.

    ``matrix`` may be a dense ndarray or a scipy sparse matrix; it must be
    stored exactly symmetrically.  ``n`` is the manifold dimension parameter
    (>= 3) fixing the coefficients 4(n-1)/(n-2) and 2(n-1) that were used to
    build the matrix, and the critical exponents of any paired boundary
    structure.
    """

    matrix: object
    n: int = 3

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InputError(f"form matrix must be square, got shape {m.shape}")
        if self.n < 3:
            raise DomainError(f"dimension parameter n must be >= 3, got {self.n}")
        if not _is_exactly_symmetric(m):
            raise InputError("form matrix must be stored exactly symmetrically")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def a_n(self) -> Fraction:
        return coeff_grad(self.n)

    @property
    def b_n(self) -> int:
        return coeff_mean_curv(self.n)

    def matvec(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.matrix @ u)

    def is_positive_definite(self) -> bool:
        return cholesky_ok(self.matrix)


@dataclass(frozen=True)
class BoundaryStructure:
    """Boundary index set with lumped measure weights and critical exponents."""

    dim: int
    indices: np.ndarray
    weights: np.ndarray
    n: int = 3

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        wts = np.asarray(self.weights, dtype=np.float64)
        if idx.size == 0:
            raise InputError("boundary index set must be nonempty")
        if idx.min() < 0 or idx.max() >= self.dim:
            raise InputError("boundary indices out of range")
        if np.unique(idx).size != idx.size:
            raise InputError("boundary indices must be distinct")
        if idx.size != wts.size:
            raise InputError("boundary weights must align with boundary indices")
        if np.any(wts <= 0):
            raise DomainError("boundary measure weights must be strictly positive")
        if self.n < 3:
            raise DomainError(f"dimension parameter n must be >= 3, got {self.n}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", wts)

    @property
    def two_sharp(self) -> Fraction:
        return trace_exponent(self.n)

    @property
    def two_star(self) -> Fraction:
        return volume_exponent(self.n)

    @property
    def critical_p(self) -> Fraction:
        """Exponent p for which p + 1 = 2#."""
        return self.two_sharp - 1

    def interior_mask(self) -> np.ndarray:
        mask = np.ones(self.dim, dtype=bool)
        mask[self.indices] = False
        return mask


@dataclass(frozen=True)
class PositiveField:
    """Strictly positive nodal field (a conformal factor)."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
            raise DomainError("conformal factor must be strictly positive and finite")
        object.__setattr__(self, "values", vals)

    def reciprocal(self) -> "PositiveField":
        return PositiveField(1.0 / self.values)

    def __len__(self) -> int:
        return len(self.values)


def as_factor(w, dim: int | None = None) -> np.ndarray:
    """Coerce a PositiveField or array-like to a validated factor array."""
    vals = w.values if isinstance(w, PositiveField) else np.asarray(w, dtype=np.float64)
    if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        raise DomainError("conformal factor must be strictly positive and finite")
    if dim is not None and vals.shape != (dim,):
        raise InputError(f"factor has length {vals.shape}, expected ({dim},)")
    return vals


def pair(form: EnergyForm, u, v) -> float:
    """Evaluate the discrete pairing u^T A v."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != (form.dim,) or v.shape != (form.dim,):
        raise InputError(
            f"pair: vectors of length {u.shape}/{v.shape} against form of dim {form.dim}"
        )
    return float(u @ form.matvec(v))


def energy_norm(form: EnergyForm, u) -> float:
    """sqrt(<u, u>), clipped at zero against roundoff."""
    return float(np.sqrt(max(pair(form, u, u), 0.0)))


def pullback_form(form: EnergyForm, w) -> EnergyForm:
    """Congruence D_w A D_w realizing the conformal change of the pairing.

    The entries are computed as A_ij * (w_i * w_j), which keeps the result
    exactly symmetric and makes <u,u>_new == <w u, w u>_old hold to roundoff.
    """
    w = as_factor(w, form.dim)
    m = form.matrix
    if sp.issparse(m):
        coo = m.tocoo(copy=True)
        coo.data = coo.data * (w[coo.row] * w[coo.col])
        return EnergyForm(coo.tocsr(), n=form.n)
    return EnergyForm(m * (w[:, None] * w[None, :]), n=form.n)


def push_field(w, u) -> np.ndarray:
    """Entrywise product w * u (transport of states under conformal change)."""
    w = as_factor(w)
    u = np.asarray(u, dtype=np.float64)
    if w.shape != u.shape:
        raise InputError(f"push_field: shapes {w.shape} and {u.shape} differ")
    return w * u


def boundary_norm(bs: BoundaryStructure, u, q: float, w=None) -> float:
    """Lumped boundary L^q norm, optionally in the conformal measure of w.

    Returns (sum_j m_j w_j^{2#} |u_j|^q)^{1/q} over boundary nodes j, with the
    w factor omitted when w is None.  At q = 2# this equals the norm of w*u in
    the base measure, exactly.
    """
    q = float(q)
    if q < 2:
        raise DomainError(f"boundary norm exponent q must be >= 2, got {q}")
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (bs.dim,):
        raise InputError(f"boundary_norm: state length {u.shape} != dim {bs.dim}")
    terms = bs.weights * np.abs(u[bs.indices]) ** q
    if w is not None:
        w = as_factor(w, bs.dim)
        terms = terms * w[bs.indices] ** float(bs.two_sharp)
    return float(np.sum(terms) ** (1.0 / q))


def check_admissible(bs: BoundaryStructure, u, eps_floor: float = EPS_FLOOR) -> np.ndarray:
    """Validate membership in the discrete positive cone.

    Boundary entries must be >= eps_floor, interior entries >= 0 (interior
    zeros are allowed).  Returns the validated array.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (bs.dim,):
        raise InputError(f"state length {u.shape} != dim {bs.dim}")
    if not np.all(np.isfinite(u)):
        raise DomainError("state has non-finite entries")
    if np.any(u[bs.indices] < eps_floor):
        raise DomainError("admissible states must be strictly positive on the boundary")
    if np.any(u[bs.interior_mask()] < 0):
        raise DomainError("admissible states must be nonnegative in the interior")
    return u


def cholesky_ok(matrix) -> bool:
    """Whether the (symmetric) matrix is positive definite.

    Dense matrices go through numpy's Cholesky.  Sparse matrices are RCM
    reordered and LU-factored without pivoting, so positive pivots are
    equivalent to positive definiteness; very large instances fall back to a
    smallest-eigenvalue probe.
    """
    if not sp.issparse(matrix):
        try:
            np.linalg.cholesky(np.asarray(matrix, dtype=np.float64))
            return True
        except np.linalg.LinAlgError:
            return False
    n = matrix.shape[0]
    if n > _DENSE_SPD_LIMIT:
        try:
            lam = eigsh(matrix.tocsr(), k=1, which="SA", tol=1e-6,
                        maxiter=50 * n, return_eigenvectors=False)
            return bool(lam[0] > 0)
        except Exception:
            return False
    perm = reverse_cuthill_mckee(matrix.tocsr(), symmetric_mode=True)
    m = matrix.tocsr()[perm][:, perm].tocsc()
    try:
        lu = splu(m, permc_spec="NATURAL", diag_pivot_thresh=0.0,
                  options={"SymmetricMode": True})
    except RuntimeError:
        return False
    if not np.array_equal(lu.perm_r, np.arange(n)):
        # pivoting kicked in: a diagonal pivot was unusable, not SPD
        return False
    return bool(np.all(lu.U.diagonal() > 0))
