"""Random well-conditioned instances for property suites and the CLI checks."""

from __future__ import annotations

import numpy as np

from .core import BoundaryStructure, EnergyForm

MAX_BOUNDARY = 12


def random_form(rng: np.random.Generator, dim: int, n: int = 3,
                eig_range=(0.5, 50.0)) -> EnergyForm:
    """Random SPD form with eigenvalues log-uniform in eig_range."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    lam = np.exp(rng.uniform(np.log(eig_range[0]), np.log(eig_range[1]), dim))
    a = (q * lam) @ q.T
    return EnergyForm((a + a.T) / 2.0, n=n)


def random_boundary(rng: np.random.Generator, dim: int, n: int = 3,
                    max_boundary: int = MAX_BOUNDARY) -> BoundaryStructure:
    k = int(rng.integers(1, min(max_boundary, dim) + 1))
    idx = np.sort(rng.choice(dim, size=k, replace=False))
    weights = rng.uniform(0.2, 2.0, k)
    return BoundaryStructure(dim=dim, indices=idx, weights=weights, n=n)


def random_instance(seed, dim_max: int = 40, n: int = 3,
                    max_boundary: int = MAX_BOUNDARY):
    """Deterministic (form, boundary structure) pair for a seed."""
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(3, dim_max + 1))
    return random_form(rng, dim, n), random_boundary(rng, dim, n, max_boundary), rng


def random_admissible(rng: np.random.Generator, bs: BoundaryStructure) -> np.ndarray:
    """Admissible state: positive boundary trace, nonnegative interior."""
    u = rng.uniform(0.0, 2.0, bs.dim)
    u[bs.indices] = rng.uniform(0.2, 3.0, bs.indices.size)
    return u


def random_factor(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Strictly positive conformal factor."""
    return rng.uniform(0.3, 3.0, dim)
