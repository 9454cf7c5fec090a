"""Lagrange-multiplier solver for empirical-likelihood weights.

Given evaluated constraints ``u_j = u(Z_j)`` (rows of an ``(n, m)`` matrix),
the EL weights are ``pi_j = 1 / (n * (1 + zeta @ u_j))`` where ``zeta``
solves ``sum_j u_j / (1 + zeta @ u_j) = 0``.  That equation is the
stationarity condition of the convex dual

    R(zeta) = -sum_j log(1 + zeta @ u_j),

which is minimized here by damped Newton with a feasibility-preserving
backtracking line search, started from ``zeta = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainViolation,
    HullViolation,
    NonConvergence,
    SingularConstraints,
)

# relative eigenvalue floor for declaring the constraint covariance singular
SINGULAR_RTOL = 1e-12
# a denominator 1 + zeta'u this large means a weight below 1e-10 / n; treat as divergence
DIVERGENCE_BOUND = 1e10


@dataclass(frozen=True)
class ConstraintMatrix:
    """Evaluated constraint functions, one row per observation.

    Attributes:
        u_values: ``(n, m)`` array, row ``j`` is ``u(Z_j)``.
        recipe: whatever produced the matrix (kept for provenance only).
    """

    u_values: np.ndarray
    recipe: Any = field(default=None, compare=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.u_values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DimensionMismatch(f"constraint values must be 2-d, got shape {values.shape}")
        n, m = values.shape
        if m < 1:
            raise DimensionMismatch("need at least one constraint column")
        if n < m + 1:
            raise DimensionMismatch(f"need n >= m + 1 observations, got n={n}, m={m}")
        if not np.all(np.isfinite(values)):
            raise DomainViolation("constraint values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "u_values", values)

    @property
    def n(self) -> int:
        return self.u_values.shape[0]

    @property
    def m(self) -> int:
        return self.u_values.shape[1]


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rules for :func:`solve_dual`.

    ``tolerance`` bounds both ``||sum_j pi_j u_j||`` and ``|sum_j pi_j - 1|``
    at the returned multiplier.
    """

    tolerance: float = 1e-10
    max_iterations: int = 100
    line_search_shrink: float = 0.5

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0 < self.line_search_shrink < 1:
            raise ValueError("line_search_shrink must lie in (0, 1)")


@dataclass(frozen=True)
class ELSolution:
    zeta: np.ndarray
    pi: np.ndarray
    iterations: int
    residual_norm: float
    converged: bool


def _values(u: ConstraintMatrix | np.ndarray) -> np.ndarray:
    if isinstance(u, ConstraintMatrix):
        return u.u_values
    return ConstraintMatrix(u).u_values


def _denominators(values: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    if zeta.shape != (values.shape[1],):
        raise DimensionMismatch(f"zeta has shape {zeta.shape}, expected ({values.shape[1]},)")
    denom = 1.0 + values @ zeta
    if np.any(denom <= 0):
        raise DomainViolation("1 + zeta'u_j must be positive for every row")
    return denom


def dual_objective(u: ConstraintMatrix | np.ndarray, zeta: np.ndarray) -> float:
    """Return ``-sum_j log(1 + zeta'u_j)``."""
    values = _values(u)
    return float(-np.sum(np.log(_denominators(values, zeta))))


def dual_gradient(u: ConstraintMatrix | np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """Gradient ``-sum_j u_j / (1 + zeta'u_j)`` of :func:`dual_objective`."""
    values = _values(u)
    inv = 1.0 / _denominators(values, zeta)
    return -(values * inv[:, None]).sum(axis=0)


def dual_hessian(u: ConstraintMatrix | np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """Hessian ``sum_j u_j u_j' / (1 + zeta'u_j)^2``; positive semidefinite."""
    values = _values(u)
    inv = 1.0 / _denominators(values, zeta)
    scaled = values * inv[:, None]
    return scaled.T @ scaled


def weights_from_zeta(u: ConstraintMatrix | np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """EL weights ``1 / (n (1 + zeta'u_j))``, without renormalization."""
    values = _values(u)
    return 1.0 / (values.shape[0] * _denominators(values, zeta))


def check_rank(values: np.ndarray) -> None:
    """Raise :class:`SingularConstraints` if the row covariance is rank deficient."""
    cov = np.atleast_2d(np.cov(values, rowvar=False))
    eig = np.linalg.eigvalsh(cov)
    if eig[-1] <= 0 or eig[0] <= SINGULAR_RTOL * eig[-1]:
        raise SingularConstraints(
            f"constraint covariance is singular (eigenvalues {eig[0]:.3g} .. {eig[-1]:.3g})"
        )


def _polish(values, zeta, inv, scaled, grad, mean_resid, floor):
    """One extra full Newton step; quadratic convergence makes it nearly free accuracy."""
    n = len(values)
    try:
        step = np.linalg.solve(scaled.T @ scaled, -grad)
    except np.linalg.LinAlgError:
        return zeta, inv, mean_resid
    trial = zeta + step
    denom = 1.0 + values @ trial
    if denom.min() < floor:
        return zeta, inv, mean_resid
    trial_inv = 1.0 / denom
    trial_resid = np.linalg.norm(values.T @ trial_inv) / n
    if trial_resid < mean_resid and abs(trial_inv.sum() / n - 1.0) <= abs(inv.sum() / n - 1.0) + 1e-15:
        return trial, trial_inv, trial_resid
    return zeta, inv, mean_resid


def solve_dual(
    u: ConstraintMatrix | np.ndarray,
    cfg: SolverConfig | None = None,
    *,
    raise_on_failure: bool = True,
) -> ELSolution:
    """Solve ``sum_j u_j / (1 + zeta'u_j) = 0`` for the EL multiplier.

    Args:
        u: constraint matrix, ``(n, m)``.
        cfg: stopping rules; defaults to :class:`SolverConfig`.
        raise_on_failure: when False, hitting ``max_iterations`` returns an
            unconverged solution instead of raising :class:`NonConvergence`.

    Returns:
        ELSolution with the multiplier, the weights and diagnostics.

    Raises:
        SingularConstraints: rank-deficient constraint covariance.
        HullViolation: zero is not interior to the convex hull of the rows,
            detected by a collapsing line search or diverging iterates.
        NonConvergence: iteration cap reached above tolerance.
    """
    cfg = cfg or SolverConfig()
    values = _values(u)
    n, m = values.shape
    check_rank(values)
    if m == 1 and (values.min() >= 0 or values.max() <= 0):
        raise HullViolation("all constraint values lie on one side of zero")

    floor = 1.0 / n**2
    zeta = np.zeros(m)
    denom = np.ones(n)
    objective = 0.0
    iteration = 0
    while True:
        inv = 1.0 / denom
        scaled = values * inv[:, None]
        grad = -scaled.sum(axis=0)
        mean_resid = np.linalg.norm(grad) / n
        mass_resid = abs(inv.sum() / n - 1.0)
        if mean_resid <= cfg.tolerance and mass_resid <= cfg.tolerance:
            zeta, inv, mean_resid = _polish(values, zeta, inv, scaled, grad, mean_resid, floor)
            return ELSolution(zeta, inv / n, iteration, float(mean_resid), True)
        if iteration >= cfg.max_iterations:
            break
        iteration += 1

        hess = scaled.T @ scaled
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
        slope = float(grad @ step)
        grad_norm = np.linalg.norm(grad)

        t = 1.0
        while True:
            trial = zeta + t * step
            trial_denom = 1.0 + values @ trial
            if trial_denom.min() >= floor:
                trial_obj = -np.sum(np.log(trial_denom))
                if trial_obj <= objective + 1e-4 * t * slope:
                    break
                # Armijo can stall on rounding once R is flat; accept any gradient decrease
                trial_grad = (values / trial_denom[:, None]).sum(axis=0)
                if np.linalg.norm(trial_grad) < grad_norm:
                    break
            t *= cfg.line_search_shrink
            if t < 1e-14:
                raise HullViolation("line search collapsed; zero is not interior to the hull")
        zeta, denom, objective = trial, trial_denom, trial_obj
        if denom.max() > DIVERGENCE_BOUND:
            raise HullViolation("multiplier iterates diverge; zero is not interior to the hull")

    inv = 1.0 / denom
    resid = float(np.linalg.norm(values.T @ inv)) / n
    if raise_on_failure:
        raise NonConvergence(
            f"EL dual solve did not converge in {cfg.max_iterations} iterations "
            f"(residual {resid:.3g})"
        )
    return ELSolution(zeta, inv / n, iteration, resid, False)
