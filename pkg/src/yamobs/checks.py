"""Identity suites over random instances.

Each check measures the worst relative residual of one exact identity of the
state map or the quotients across seeded random instances.  These back the
`verify-lemmas` command and the acceptance tests.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .core import boundary_norm, energy_norm, pair, pullback_form, push_field
from .errors import SolverError
from .obstacle import is_fixed_point, make_bound, oracle_enumerate, solve_obstacle
from .quotients import (
    composed_equality_gap,
    control_quotient,
    deficit_control,
    deficit_energy,
    energy_quotient,
    grad_check,
)
from .synth import random_admissible, random_factor, random_instance

LAMBDAS = (0.1, 2.0, 10.0)


@dataclass
class CheckRecord:
    name: str
    max_residual: float
    tolerance: float
    passed: bool
    samples: int

    def as_dict(self):
        return asdict(self)


def _rel_gap(a: float, b: float, floor: float = 1.0) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def run_lemma_suite(base_seed: int, n_seeds: int, dim_max: int = 40,
                    n: int = 3, tol: float = 1e-8,
                    solver_tol: float = 1e-10) -> list[CheckRecord]:
    """Worst residuals of the state-map and quotient identities."""
    names = [
        "idempotency",
        "homogeneity",
        "scale_invariance",
        "conformal_covariance",
        "fix_set_covariance",
        "boundary_norm_covariance",
        "control_below_energy",
        "composed_equality",
        "deficit_inequality",
        "deficit_equality",
    ]
    worst = {k: 0.0 for k in names}

    for i in range(n_seeds):
        form, bs, rng = random_instance([base_seed, i], dim_max, n)
        u = random_admissible(rng, bs)
        w = random_factor(rng, bs.dim)
        p = float(rng.uniform(1.0, float(bs.two_sharp) - 1.0))

        tu = solve_obstacle(form, make_bound(bs, u), tol=solver_tol, x0=u).state
        ttu = solve_obstacle(form, make_bound(bs, tu), tol=solver_tol, x0=tu).state
        ntu = max(energy_norm(form, tu), 1e-300)
        worst["idempotency"] = max(
            worst["idempotency"], energy_norm(form, ttu - tu) / ntu
        )

        i_u = pair(form, u, u) / boundary_norm(bs, tu, p + 1.0) ** 2
        for lam in LAMBDAS:
            tlu = solve_obstacle(
                form, make_bound(bs, lam * u), tol=solver_tol, x0=lam * u
            ).state
            worst["homogeneity"] = max(
                worst["homogeneity"], energy_norm(form, tlu - lam * tu) / (lam * ntu)
            )
            i_lu = pair(form, lam * u, lam * u) / boundary_norm(bs, tlu, p + 1.0) ** 2
            worst["scale_invariance"] = max(
                worst["scale_invariance"], _rel_gap(i_lu, i_u, floor=1e-300)
            )

        form_w = pullback_form(form, w)
        twu = solve_obstacle(
            form_w, make_bound(bs, u), tol=solver_tol, x0=u
        ).state
        t_base = solve_obstacle(
            form, make_bound(bs, push_field(w, u)), tol=solver_tol, x0=push_field(w, u)
        ).state
        expected = t_base / w
        worst["conformal_covariance"] = max(
            worst["conformal_covariance"],
            energy_norm(form_w, twu - expected) / max(energy_norm(form_w, expected), 1e-300),
        )

        # t_base is a fixed point of T; its pullback must fix T_w and back
        _, d_base = is_fixed_point(form, bs, t_base, tol=np.inf, solver_tol=solver_tol)
        _, d_pull = is_fixed_point(form_w, bs, t_base / w, tol=np.inf, solver_tol=solver_tol)
        worst["fix_set_covariance"] = max(worst["fix_set_covariance"], d_base, d_pull)

        q_sharp = float(bs.two_sharp)
        worst["boundary_norm_covariance"] = max(
            worst["boundary_norm_covariance"],
            _rel_gap(
                boundary_norm(bs, twu, q_sharp, w),
                boundary_norm(bs, t_base, q_sharp),
                floor=1e-300,
            ),
        )

        e_u = energy_quotient(form, bs, u, p)
        worst["control_below_energy"] = max(
            worst["control_below_energy"], max(0.0, i_u - e_u) / max(e_u, 1e-300)
        )

        e_tu = energy_quotient(form, bs, tu, p)
        i_tu = pair(form, tu, tu) / boundary_norm(bs, ttu, p + 1.0) ** 2
        worst["composed_equality"] = max(
            worst["composed_equality"], _rel_gap(e_tu, i_tu, floor=1e-300)
        )

        rhs = (pair(form, u, u) - pair(form, tu, tu)) / boundary_norm(bs, tu, p + 1.0) ** 2
        lhs_e = e_u - e_tu
        lhs_i = i_u - i_tu
        scale = max(e_u, 1.0)
        worst["deficit_inequality"] = max(
            worst["deficit_inequality"],
            max(0.0, rhs - lhs_e) / scale,
            max(0.0, -rhs) / scale,
        )
        worst["deficit_equality"] = max(
            worst["deficit_equality"], abs(lhs_i - rhs) / scale
        )

    return [
        CheckRecord(name=k, max_residual=worst[k], tolerance=tol,
                    passed=worst[k] <= tol, samples=n_seeds)
        for k in names
    ]


def run_oracle_suite(base_seed: int, n_seeds: int, dim_max: int = 10,
                     n: int = 3, tol: float = 1e-9,
                     solver_tol: float = 1e-10) -> CheckRecord:
    """Agreement between the PDAS solver and exhaustive enumeration."""
    worst = 0.0
    for i in range(n_seeds):
        form, bs, rng = random_instance([base_seed, 7_000_000 + i], dim_max, n)
        u = random_admissible(rng, bs)
        bound = make_bound(bs, u)
        fast = solve_obstacle(form, bound, tol=solver_tol, x0=u)
        slow = oracle_enumerate(form, bound)
        ref = max(energy_norm(form, slow.state), 1.0)
        worst = max(worst, energy_norm(form, fast.state - slow.state) / ref)
    return CheckRecord(name="oracle_agreement", max_residual=worst,
                       tolerance=tol, passed=worst <= tol, samples=n_seeds)


def run_gradient_suite(base_seed: int, n_seeds: int, dim_max: int = 20,
                       n: int = 3, h_fd: float = 1e-6,
                       tol: float = 1e-5) -> CheckRecord:
    """Analytic quotient gradient against central finite differences."""
    worst = 0.0
    for i in range(n_seeds):
        form, bs, rng = random_instance([base_seed, 9_000_000 + i], dim_max, n)
        u = random_admissible(rng, bs)
        u[bs.indices] = np.maximum(u[bs.indices], 0.5)  # stay well inside the cone
        p = float(rng.uniform(1.0, float(bs.two_sharp) - 1.0))
        worst = max(worst, grad_check(form, bs, u, p, h_fd))
    return CheckRecord(name="gradient_check", max_residual=worst,
                       tolerance=tol, passed=worst <= tol, samples=n_seeds)
