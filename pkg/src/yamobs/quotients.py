"""Trace quotients, their deficits under the state map, and minimization.

Two quotients act on admissible states u:

    E_p(u) = <u,u> / ||u||_{p+1}^2          (energy quotient)
    I_p(u) = <u,u> / ||T(u)||_{p+1}^2       (control quotient)

with T the obstacle state map.  I_p <= E_p everywhere, the two agree on the
range of T, and both drop when u is replaced by T(u); the infima coincide.
The minimizer drives E_p with projected gradient steps and pushes every
iterate through T, which realizes a minimizing sequence made of fixed points
and makes the final state a fixed point by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    BoundaryStructure,
    EnergyForm,
    EPS_FLOOR,
    as_factor,
    boundary_norm,
    check_admissible,
    pair,
)
from .errors import DomainError, InputError
from .obstacle import make_bound, solve_obstacle


def _check_p(bs: BoundaryStructure, p: float) -> float:
    p = float(p)
    if not (1.0 <= p <= float(bs.two_sharp) - 1.0 + 1e-12):
        raise DomainError(
            f"exponent p must lie in [1, 2#-1] = [1, {float(bs.two_sharp) - 1}], got {p}"
        )
    return p


def energy_quotient(form: EnergyForm, bs: BoundaryStructure, u, p, w=None) -> float:
    """E_p(u) = <u,u> / ||u||_{p+1}^2 (boundary norm in the w-measure if given)."""
    p = _check_p(bs, p)
    u = np.asarray(u, dtype=np.float64)
    nrm = boundary_norm(bs, u, p + 1.0, w)
    if nrm <= 0:
        raise DomainError("energy quotient undefined for zero boundary trace")
    return pair(form, u, u) / nrm**2


def control_quotient(
    form: EnergyForm, bs: BoundaryStructure, u, p, tol: float = 1e-10, w=None,
    factor_cache=None,
) -> float:
    """I_p(u) = <u,u> / ||T(u)||_{p+1}^2."""
    p = _check_p(bs, p)
    u = check_admissible(bs, u)
    sol = solve_obstacle(form, make_bound(bs, u), tol=tol, x0=u, factor_cache=factor_cache)
    nrm = boundary_norm(bs, sol.state, p + 1.0, w)
    return pair(form, u, u) / nrm**2


def deficit_energy(form, bs, u, p, tol=1e-10, w=None):
    """Monotonicity deficit of E_p: returns (lhs, rhs) with lhs >= rhs >= 0.

    lhs = E_p(u) - E_p(T u); rhs = (<u,u> - <Tu,Tu>) / ||Tu||_{p+1}^2.
    """
    p = _check_p(bs, p)
    u = check_admissible(bs, u)
    tu = solve_obstacle(form, make_bound(bs, u), tol=tol, x0=u).state
    lhs = energy_quotient(form, bs, u, p, w) - energy_quotient(form, bs, tu, p, w)
    rhs = (pair(form, u, u) - pair(form, tu, tu)) / boundary_norm(bs, tu, p + 1.0, w) ** 2
    return lhs, rhs


def deficit_control(form, bs, u, p, tol=1e-10, w=None):
    """Monotonicity identity of I_p: returns (lhs, rhs) with lhs = rhs exactly.

    lhs = I_p(u) - I_p(T u); rhs as in deficit_energy.  Equality encodes the
    idempotency of T.
    """
    p = _check_p(bs, p)
    u = check_admissible(bs, u)
    tu = solve_obstacle(form, make_bound(bs, u), tol=tol, x0=u).state
    lhs = control_quotient(form, bs, u, p, tol, w) - control_quotient(
        form, bs, tu, p, tol, w
    )
    rhs = (pair(form, u, u) - pair(form, tu, tu)) / boundary_norm(bs, tu, p + 1.0, w) ** 2
    return lhs, rhs


def composed_equality_gap(form, bs, u, p, tol=1e-10, w=None) -> float:
    """|E_p(T u) - I_p(T u)|; vanishes because T is idempotent."""
    p = _check_p(bs, p)
    u = check_admissible(bs, u)
    tu = solve_obstacle(form, make_bound(bs, u), tol=tol, x0=u).state
    return abs(
        energy_quotient(form, bs, tu, p, w)
        - control_quotient(form, bs, tu, p, tol, w)
    )


def quotient_gradient(form, bs, u, p, w=None) -> np.ndarray:
    """Analytic gradient of E_p at u.

    With P = <u,u>, S = sum m~_j |u_j|^q, N = S^{1/q} and q = p+1:
    grad = (2/N^2) (A u - E N gradN), gradN_j = N^{1-q} m~_j |u_j|^{q-1} sgn u_j
    on boundary nodes, where m~ folds the conformal weight w^{2#} if given.
    """
    p = _check_p(bs, p)
    q = p + 1.0
    u = np.asarray(u, dtype=np.float64)
    weights = bs.weights.copy()
    if w is not None:
        wv = as_factor(w, bs.dim)
        weights = weights * wv[bs.indices] ** float(bs.two_sharp)
    ub = u[bs.indices]
    s = float(np.sum(weights * np.abs(ub) ** q))
    if s <= 0:
        raise DomainError("gradient undefined for zero boundary trace")
    nrm = s ** (1.0 / q)
    e_val = pair(form, u, u) / nrm**2
    grad_n = np.zeros(bs.dim)
    grad_n[bs.indices] = nrm ** (1.0 - q) * weights * np.abs(ub) ** (q - 1.0) * np.sign(ub)
    return (2.0 / nrm**2) * (form.matvec(u) - e_val * nrm * grad_n)


def grad_check(form, bs, u, p, h_fd: float = 1e-6, w=None) -> float:
    """Max relative error of the analytic gradient against central differences."""
    u = np.asarray(u, dtype=np.float64)
    g = quotient_gradient(form, bs, u, p, w)
    g_fd = np.empty_like(g)
    for j in range(bs.dim):
        up = u.copy(); up[j] += h_fd
        dn = u.copy(); dn[j] -= h_fd
        g_fd[j] = (
            energy_quotient(form, bs, up, p, w) - energy_quotient(form, bs, dn, p, w)
        ) / (2.0 * h_fd)
    scale = max(float(np.abs(g).max()), float(np.abs(g_fd).max()), 1e-300)
    return float(np.abs(g - g_fd).max() / scale)


@dataclass
class QuotientReport:
    """Values of both quotients and derived quantities at a state."""

    p: float
    q: float
    E_value: float
    I_value: float
    deficit_E: float
    deficit_I: float
    c_mean_curvature: float
    mu_estimate: float
    mu_oc_estimate: float
    meta: dict = field(default_factory=dict)


@dataclass
class MinimizeTrace:
    """Accepted-iterate log of a minimize run.

    iterates rows are (E_value, I_value, gradient_norm, step_size,
    fixed_point_distance); the first row describes the normalized init.
    """

    iterates: list
    converged: bool
    final_state: np.ndarray
    message: str = ""


@dataclass
class MinimizeOptions:
    tol: float = 1e-10
    max_iters: int = 500
    gtol: float = 1e-8
    solver_tol: float = 1e-10
    eps_floor: float = EPS_FLOOR
    eta0: float | None = None


def fit_robin_constant(form: EnergyForm, bs: BoundaryStructure, u):
    """Least-squares fit of (A u)_j ~ c m_j u_j^{n/(n-2)} over boundary rows.

    Returns (c_est, relative misfit).  At a critical point of E the fit is
    exact and c relates the state to the mean curvature of its conformal
    metric.
    """
    u = np.asarray(u, dtype=np.float64)
    if np.any(u[bs.indices] <= 0):
        raise DomainError("curvature fit requires strictly positive boundary trace")
    kappa = float(form.n) / (form.n - 2.0)
    ax_b = form.matvec(u)[bs.indices]
    basis = bs.weights * u[bs.indices] ** kappa
    denom = float(basis @ basis)
    c_est = float(ax_b @ basis) / denom
    misfit = float(np.linalg.norm(ax_b - c_est * basis))
    return c_est, misfit / max(float(np.linalg.norm(ax_b)), 1e-300)


def _clip_cone(bs, x, eps_floor):
    out = np.maximum(x, 0.0)
    out[bs.indices] = np.maximum(out[bs.indices], eps_floor)
    return out


def minimize(
    form: EnergyForm,
    bs: BoundaryStructure,
    p,
    init,
    opts: MinimizeOptions | None = None,
    w=None,
    meta: dict | None = None,
):
    """Minimize E_p over the discrete positive cone via T-projected descent.

    Iterates u_{k+1} = T(clip_+(u_k - eta_k grad E_p(u_k))), renormalized to
    unit boundary norm; eta_k backtracks until the pre-projection energy
    decreases, and the projection through T can only decrease it further.
    Returns (MinimizeTrace, QuotientReport) with the mu estimates taken at
    the final state, which is a fixed point of T by construction.
    """
    opts = opts or MinimizeOptions()
    p = _check_p(bs, p)
    q = p + 1.0
    cache: dict = {}

    def normalize(x):
        return x / boundary_norm(bs, x, q, w)

    def e_val(x):
        return energy_quotient(form, bs, x, p, w)

    def t_apply(x):
        return solve_obstacle(
            form, make_bound(bs, x, opts.eps_floor), tol=opts.solver_tol,
            x0=x, factor_cache=cache,
        ).state

    def fp_distance(x):
        tx = t_apply(x)
        diff = tx - x
        return np.sqrt(max(pair(form, diff, diff), 0.0)) / np.sqrt(
            max(pair(form, x, x), 1e-300)
        ), tx

    u = normalize(_clip_cone(bs, check_admissible(bs, init, opts.eps_floor), opts.eps_floor))
    e_cur = e_val(u)
    if opts.eta0 is not None:
        eta_hi = opts.eta0
    else:
        m = form.matrix
        row_sum = np.abs(m).sum(axis=1)
        lam_max = float(row_sum.max())
        eta_hi = 1.0 / (2.0 * lam_max)

    fp0, tu0 = fp_distance(u)
    g = quotient_gradient(form, bs, u, p, w)
    rows = [(
        e_cur,
        pair(form, u, u) / boundary_norm(bs, tu0, q, w) ** 2,
        float(np.linalg.norm(g)),
        0.0,
        fp0,
    )]
    converged = False
    message = ""
    eta_start = eta_hi
    for _ in range(opts.max_iters):
        gnorm = float(np.linalg.norm(g))
        gnorm_rel = gnorm / max(2.0 * float(np.linalg.norm(form.matvec(u))), 1e-300)
        accepted = False
        eta = eta_start
        while eta >= 1e-16:
            cand = _clip_cone(bs, u - eta * g, opts.eps_floor)
            nrm = boundary_norm(bs, cand, q, w)
            if nrm > 0:
                e_cand = e_val(cand)
                if e_cand < e_cur:
                    v = normalize(t_apply(cand))
                    e_new = e_val(v)
                    if e_new < e_cur:
                        accepted = True
                        break
            eta *= 0.5
        if not accepted:
            converged = gnorm_rel <= opts.gtol
            message = (
                "stationary: no descent direction"
                if converged
                else f"line search failed with gradient norm {gnorm:.3e}"
            )
            break
        fp_d, tv = fp_distance(v)
        i_new = pair(form, v, v) / boundary_norm(bs, tv, q, w) ** 2
        rows.append((e_new, i_new, gnorm, eta, fp_d))
        drop = e_cur - e_new
        u, e_cur = v, e_new
        g = quotient_gradient(form, bs, u, p, w)
        eta_start = min(eta * 4.0, eta_hi)
        if drop <= opts.tol * max(e_cur, 1e-300):
            converged = True
            message = "relative energy change below tol"
            break
    else:
        message = f"max_iters={opts.max_iters} reached"

    d_e = deficit_energy(form, bs, u, p, opts.solver_tol, w)
    d_i = deficit_control(form, bs, u, p, opts.solver_tol, w)
    c_est, _ = fit_robin_constant(form, bs, u)
    final_i = rows[-1][1]
    report = QuotientReport(
        p=p,
        q=q,
        E_value=e_cur,
        I_value=final_i,
        deficit_E=d_e[0],
        deficit_I=d_i[0],
        c_mean_curvature=c_est,
        mu_estimate=e_cur,
        mu_oc_estimate=final_i,
        meta=dict(meta or {}, iterations=len(rows) - 1, converged=converged),
    )
    trace = MinimizeTrace(
        iterates=rows, converged=converged, final_state=u, message=message
    )
    return trace, report
