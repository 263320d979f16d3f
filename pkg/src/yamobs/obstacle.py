"""Boundary obstacle problem: minimize v'Av subject to v >= bound.

The lower bound carries the boundary trace of an admissible state on the
boundary nodes and zero in the interior, so the feasible set is the discrete
version of {v in H^1_+ : tr(v) >= tr(u)}.  The unique minimizer defines the
state map T; its fixed points contain every quotient minimizer.

The default solver is a primal-dual active set iteration with direct solves
on the inactive block.  If the active set ever repeats without converging the
solver falls back to projected Gauss-Seidel sweeps (compiled kernel when
available) followed by an active-set polish.  An exhaustive enumeration
oracle over all active subsets provides an independent check on small
instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import _kernels
from .core import BoundaryStructure, EnergyForm, EPS_FLOOR, check_admissible, pair
from .errors import DomainError, IllConditionedError, InputError, SolverError

#: dense condition number beyond which an instance is flagged, not solved
COND_LIMIT = 1e12

#: PDAS tie-break: activation scores within this relative slack count as inactive
TIE_TOL = 1e-14

_ORACLE_LIMIT = 14


@dataclass(frozen=True)
class LowerBound:
    """Unilateral lower bound: tr(u) on boundary indices, 0 in the interior."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "values", np.asarray(self.values, dtype=np.float64)
        )


@dataclass
class ObstacleSolution:
    """Minimizer of v'Av over {v >= bound} with KKT diagnostics."""

    state: np.ndarray
    active_set: np.ndarray
    multipliers: np.ndarray
    energy: float
    kkt_residual: float
    iterations: int
    method: str = "pdas"


def make_bound(bs: BoundaryStructure, u, eps_floor: float = EPS_FLOOR) -> LowerBound:
    """Build the obstacle from an admissible state: its trace on the boundary."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (bs.dim,):
        raise InputError(f"state length {u.shape} != dim {bs.dim}")
    if np.any(u[bs.indices] < eps_floor):
        raise DomainError(
            "bound requires strictly positive boundary entries (>= eps_floor)"
        )
    values = np.zeros(bs.dim)
    values[bs.indices] = u[bs.indices]
    return LowerBound(values)


def _solve_on_inactive(A, b, active, factor_cache=None):
    """x with x=b on the active set and (Ax)=0 on the inactive set."""
    x = np.array(b, dtype=np.float64)
    free = ~active
    if not np.any(free):
        return x
    if sp.issparse(A):
        csr = A.tocsr()
        aff = csr[free][:, free]
        rhs = -(csr[free][:, active] @ b[active]) if np.any(active) else np.zeros(
            int(free.sum())
        )
        if factor_cache is not None:
            key = np.packbits(active).tobytes()
            fac = factor_cache.get(key)
            if fac is None:
                fac = splu(aff.tocsc())
                factor_cache[key] = fac
            x[free] = fac.solve(rhs)
        else:
            x[free] = splu(aff.tocsc()).solve(rhs)
    else:
        aff = A[np.ix_(free, free)]
        rhs = -(A[np.ix_(free, active)] @ b[active]) if np.any(active) else np.zeros(
            int(free.sum())
        )
        try:
            x[free] = np.linalg.solve(aff, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular inactive block: {exc}") from exc
    return x


def _kkt_residual(A, b, x, active):
    """Relative KKT residual combining stationarity, feasibility, dual sign."""
    ax = np.asarray(A @ x)
    lam = np.where(active, ax, 0.0)
    scale_ax = max(float(np.linalg.norm(ax)), 1e-300)
    scale_x = max(float(np.abs(b).max(initial=0.0)), float(np.abs(x).max(initial=0.0)), 1.0)
    scale_l = max(float(np.abs(ax).max(initial=0.0)), 1.0)
    r_stat = float(np.linalg.norm(ax - lam)) / scale_ax
    r_primal = float(np.maximum(b - x, 0.0).max(initial=0.0)) / scale_x
    r_dual = float(np.maximum(-lam, 0.0).max(initial=0.0)) / scale_l
    r_comp = float(np.abs((x - b) * lam).max(initial=0.0)) / (scale_x * scale_l)
    return max(r_stat, r_primal, r_dual, r_comp), lam


def _pgs_solve(A, b, x0, tol, max_sweeps, omega=1.5):
    """Projected SOR until the derived active set yields a KKT point."""
    csr = sp.csr_matrix(A) if not sp.issparse(A) else A.tocsr()
    x = np.maximum(np.array(x0, dtype=np.float64), b)
    block = 20
    sweeps = 0
    best = None
    while sweeps < max_sweeps:
        _kernels.pgs_sweeps(csr, b, x, omega=omega, nsweeps=block)
        sweeps += block
        gap = x - b
        scale = max(float(np.abs(b).max(initial=0.0)), float(np.abs(x).max(initial=0.0)), 1.0)
        active = gap <= 1e-9 * scale
        cand = _solve_on_inactive(A, b, active)
        res, lam = _kkt_residual(A, b, cand, active)
        if best is None or res < best[0]:
            best = (res, cand, active, lam, sweeps)
        if res <= tol:
            return cand, active, lam, res, sweeps
    res, cand, active, lam, sweeps = best
    raise SolverError(
        f"projected Gauss-Seidel did not reach tol={tol} in {max_sweeps} sweeps",
        best_state=cand, residual=res, iterations=sweeps,
    )


def solve_obstacle(
    form: EnergyForm,
    bound: LowerBound,
    tol: float = 1e-10,
    x0=None,
    method: str = "auto",
    max_iter: int | None = None,
    factor_cache: dict | None = None,
    check_cond: bool = True,
) -> ObstacleSolution:
    """Solve min v'Av over {v >= bound}.

    method "auto" runs primal-dual active set (PDAS) and falls back to
    projected Gauss-Seidel on active-set cycling; "pdas" and "pgs" force one
    route.  x0, when given, warm-starts the active set estimate (it is
    projected onto the feasible set first).  factor_cache, when given, reuses
    sparse factorizations across calls keyed by active set.
    """
    A = form.matrix
    b = np.asarray(bound.values, dtype=np.float64)
    if b.shape != (form.dim,):
        raise InputError(f"bound length {b.shape} != form dim {form.dim}")
    if check_cond and not sp.issparse(A) and form.dim <= 600:
        cond = np.linalg.cond(A)
        if cond > COND_LIMIT:
            raise IllConditionedError(
                f"instance flagged: condition number {cond:.3e} > {COND_LIMIT:.0e}"
            )
    if max_iter is None:
        max_iter = max(60, 2 * form.dim)

    x_start = b if x0 is None else np.maximum(np.asarray(x0, dtype=np.float64), b)
    e_start = float(x_start @ (A @ x_start))

    if method == "pgs":
        x, active, lam, res, sweeps = _pgs_solve(A, b, x_start, tol, max_sweeps=200 * max_iter)
        return _finish(form, b, x, active, lam, res, sweeps, "pgs", e_start)
    if method not in ("auto", "pdas"):
        raise InputError(f"unknown method {method!r}")

    diag = A.diagonal() if sp.issparse(A) else np.diag(A)
    c_scale = float(np.mean(diag))
    scale_b = max(float(np.abs(b).max(initial=0.0)), 1.0)
    active = x_start - b <= TIE_TOL * scale_b
    history = {np.packbits(active).tobytes()}
    x = x_start
    best = None
    for it in range(1, max_iter + 1):
        x = _solve_on_inactive(A, b, active, factor_cache)
        ax = np.asarray(A @ x)
        score = ax + c_scale * (b - x)
        tie = TIE_TOL * max(float(np.abs(ax).max(initial=0.0)), c_scale * scale_b)
        new_active = score > tie
        res, lam = _kkt_residual(A, b, x, active)
        if best is None or res < best[0]:
            best = (res, x, active, lam, it)
        if np.array_equal(new_active, active) and res <= tol:
            return _finish(form, b, x, active, lam, res, it, "pdas", e_start)
        key = np.packbits(new_active).tobytes()
        if key in history and not np.array_equal(new_active, active):
            if method == "pdas":
                raise SolverError(
                    "PDAS cycled", best_state=best[1], residual=best[0], iterations=it
                )
            x, active, lam, res, sweeps = _pgs_solve(
                A, b, x, tol, max_sweeps=200 * max_iter
            )
            return _finish(form, b, x, active, lam, res, it + sweeps, "pdas+pgs", e_start)
        history.add(key)
        active = new_active
    res, x, active, lam, it = best
    raise SolverError(
        f"PDAS did not converge in {max_iter} iterations",
        best_state=x, residual=res, iterations=it,
    )


def _finish(form, b, x, active, lam, res, iterations, method, e_start):
    energy = float(x @ (form.matrix @ x))
    if energy > e_start * (1 + 1e-9) + 1e-300:
        raise SolverError(
            "minimality violated against the warm start; instance likely degenerate",
            best_state=x, residual=res, iterations=iterations,
        )
    return ObstacleSolution(
        state=x,
        active_set=np.flatnonzero(active),
        multipliers=lam,
        energy=energy,
        kkt_residual=res,
        iterations=iterations,
        method=method,
    )


def oracle_enumerate(form: EnergyForm, bound: LowerBound, tol: float = 1e-9) -> ObstacleSolution:
    """Exhaustive KKT search over all active subsets (independent oracle).

    Solves the equality-constrained system for each of the 2^dim subsets,
    keeps the candidates that are primal feasible with nonnegative
    multipliers, and returns the one of least energy.  Refuses instances with
    more than 14 constrained indices.
    """
    dim = form.dim
    if dim > _ORACLE_LIMIT:
        raise InputError(
            f"oracle_enumerate limited to {_ORACLE_LIMIT} constrained indices, got {dim}"
        )
    A = np.asarray(form.matrix.todense()) if sp.issparse(form.matrix) else np.asarray(form.matrix)
    b = np.asarray(bound.values, dtype=np.float64)
    scale = max(float(np.abs(A).max()), 1.0) * max(float(np.abs(b).max(initial=0.0)), 1.0)
    best = None
    tried = 0
    for mask in range(2 ** dim):
        active = np.array([(mask >> k) & 1 for k in range(dim)], dtype=bool)
        tried += 1
        try:
            x = _solve_on_inactive(A, b, active)
        except SolverError:
            continue
        ax = A @ x
        if np.any(b - x > tol * scale):
            continue
        if np.any(ax[active] < -tol * scale):
            continue
        energy = float(x @ ax)
        if best is None or energy < best[0] - 0.0:
            lam = np.where(active, ax, 0.0)
            res, _ = _kkt_residual(A, b, x, active)
            best = (energy, x, active, lam, res)
    if best is None:
        raise SolverError("enumeration found no KKT point within tolerance")
    energy, x, active, lam, res = best
    return ObstacleSolution(
        state=x,
        active_set=np.flatnonzero(active),
        multipliers=lam,
        energy=energy,
        kkt_residual=res,
        iterations=tried,
        method="enumerate",
    )


def is_fixed_point(
    form: EnergyForm,
    bs: BoundaryStructure,
    u,
    tol: float,
    solver_tol: float = 1e-10,
    factor_cache: dict | None = None,
):
    """Whether T(u) = u, together with the relative distance in the A-norm."""
    u = check_admissible(bs, u)
    sol = solve_obstacle(
        form, make_bound(bs, u), tol=solver_tol, x0=u, factor_cache=factor_cache
    )
    diff = sol.state - u
    denom = np.sqrt(max(pair(form, u, u), 1e-300))
    dist = float(np.sqrt(max(pair(form, diff, diff), 0.0)) / denom)
    return dist <= tol, dist
