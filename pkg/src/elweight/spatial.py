"""Spatial signs, (EL-weighted) spatial depth and weighted spatial medians."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constraints import ConstraintRecipe, build_constraints
from .distributions import Sample
from .errors import DegenerateSample, DimensionMismatch, NonConvergence, WeightMismatch
from .solver import ELSolution, SolverConfig, solve_dual

WEIGHT_ATOL = 1e-8


@dataclass(frozen=True)
class DepthQuery:
    point: np.ndarray
    depth_value: float


@dataclass(frozen=True)
class MedianConfig:
    tol: float = 1e-9
    max_iter: int = 500


@dataclass(frozen=True)
class SpatialResult:
    """Output of :func:`weighted_spatial_median`.

    ``gradient_norm`` is the norm of the minimal subgradient of the weighted
    Fermat-Weber objective at ``median``, i.e. ``||sum_j w_j S(M - X_j)||``
    away from data points.  ``objective_trace`` holds the objective value at
    every iterate, starting with the initial point.
    """

    median: np.ndarray
    iterations: int
    gradient_norm: float
    J_hat: np.ndarray
    K_hat: np.ndarray
    weights: np.ndarray = field(repr=False)
    objective_trace: tuple[float, ...] = field(default=(), repr=False)
    el_solution: ELSolution | None = field(default=None, repr=False)


def spatial_sign(x) -> np.ndarray:
    """``x / ||x||``, with the zero vector mapped to itself."""
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x)
    if norm == 0:
        return np.zeros_like(x)
    return x / norm


def sign_hessian(x) -> np.ndarray:
    """``(I - x x'/||x||^2) / ||x||``, the Jacobian of :func:`spatial_sign`; zero at 0."""
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    norm = np.linalg.norm(x)
    if norm == 0:
        return np.zeros((d, d))
    unit = x / norm
    return (np.eye(d) - np.outer(unit, unit)) / norm


def _signs(diff: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise spatial signs and norms; zero rows keep a zero sign."""
    norms = np.linalg.norm(diff, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    return diff / safe[:, None], norms


def _points(sample: Sample | np.ndarray) -> np.ndarray:
    return sample.data if isinstance(sample, Sample) else Sample(sample).data


def _check_weights(weights, n: int) -> np.ndarray:
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape != (n,):
        raise WeightMismatch(f"expected {n} weights, got {w.size}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise WeightMismatch("weights must be positive and finite")
    if abs(w.sum() - 1.0) > WEIGHT_ATOL:
        raise WeightMismatch(f"weights sum to {w.sum():.12g}, not 1")
    return w


def depth(sample: Sample | np.ndarray, x, weights=None) -> DepthQuery:
    """Spatial depth ``1 - ||sum_j w_j S(x - X_j)||`` (uniform ``w`` by default)."""
    pts = _points(sample)
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != (pts.shape[1],):
        raise DimensionMismatch(f"query point has length {x.size}, sample dimension is {pts.shape[1]}")
    w = _check_weights(weights, pts.shape[0])
    signs, _ = _signs(x - pts)
    value = 1.0 - np.linalg.norm(w @ signs)
    return DepthQuery(x, float(min(1.0, max(0.0, value))))


def componentwise_weighted_median(points: np.ndarray, weights: np.ndarray) -> np.ndarray:
    out = np.empty(points.shape[1])
    half = 0.5 * weights.sum()
    for k in range(points.shape[1]):
        order = np.argsort(points[:, k], kind="stable")
        cum = np.cumsum(weights[order])
        out[k] = points[order[np.searchsorted(cum, half)], k]
    return out


def weiszfeld(
    points: np.ndarray, weights: np.ndarray, start: np.ndarray, tol: float, max_iter: int
) -> tuple[np.ndarray, int, float, list[float]]:
    """Weighted Weiszfeld iteration with the Vardi-Zhang step at data points.

    Returns ``(x, iterations, gradient_norm, objective_trace)``.
    """
    x = start.astype(float)
    scale = max(1.0, float(np.abs(points).max()))
    trace = []
    for it in range(max_iter + 1):
        diff = x - points
        dist = np.linalg.norm(diff, axis=1)
        trace.append(float(weights @ dist))
        at = dist <= 1e-14 * scale
        eta = float(weights[at].sum())
        free = ~at
        inv = weights[free] / dist[free]
        pull = inv @ (points[free] - x)
        r = float(np.linalg.norm(pull))
        grad_norm = max(0.0, r - eta) if eta > 0 else r
        if grad_norm <= tol:
            return x, it, grad_norm, trace
        if it == max_iter:
            break
        target = inv @ points[free] / inv.sum()
        if eta > 0:
            # x sits on a data point that is not the median: move off along the pull
            step = min(1.0, eta / r)
            x = (1.0 - step) * target + step * x
        else:
            x = target
    raise NonConvergence(
        f"Weiszfeld iteration did not reach tol={tol:g} in {max_iter} iterations (gradient {grad_norm:.3g})"
    )


def plugin_matrices(points: np.ndarray, weights: np.ndarray, center: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``J = sum_j w_j S S'`` and ``K = sum_j w_j H`` evaluated at ``center - X_j``."""
    signs, norms = _signs(center - points)
    J = (signs * weights[:, None]).T @ signs
    d = points.shape[1]
    live = norms > 0
    coef = np.zeros_like(norms)
    coef[live] = weights[live] / norms[live]
    K = coef.sum() * np.eye(d) - (signs * coef[:, None]).T @ signs
    return 0.5 * (J + J.T), 0.5 * (K + K.T)


def weighted_spatial_median(
    sample: Sample | np.ndarray,
    weights=None,
    tol: float = 1e-9,
    max_iter: int = 500,
) -> SpatialResult:
    """Minimizer of ``sum_j w_j ||x - X_j||``, the maximizer of the weighted depth.

    Raises:
        DegenerateSample: ``d < 2`` or the centred sample has rank below ``d``.
        NonConvergence: the subgradient norm stays above ``tol``.
    """
    pts = _points(sample)
    n, d = pts.shape
    if d < 2:
        raise DegenerateSample("spatial median needs dimension >= 2")
    w = _check_weights(weights, n)
    centred = pts - pts.mean(axis=0)
    if np.linalg.matrix_rank(centred) < d:
        raise DegenerateSample("sample points are collinear (centred rank below dimension)")
    start = componentwise_weighted_median(pts, w)
    x, iters, grad_norm, trace = weiszfeld(pts, w, start, tol, max_iter)
    J, K = plugin_matrices(pts, w, x)
    return SpatialResult(x, iters, grad_norm, J, K, w, tuple(trace))


def el_weighted_median_pipeline(
    sample: Sample | np.ndarray,
    recipe: ConstraintRecipe,
    solver_cfg: SolverConfig | None = None,
    median_cfg: MedianConfig | None = None,
) -> SpatialResult:
    """Build constraints, solve for the EL weights once, then take the weighted median."""
    median_cfg = median_cfg or MedianConfig()
    u = build_constraints(sample, recipe)
    sol = solve_dual(u, solver_cfg)
    # pi sums to 1 up to the solver tolerance
    res = weighted_spatial_median(sample, sol.pi, median_cfg.tol, median_cfg.max_iter)
    return SpatialResult(
        res.median, res.iterations, res.gradient_norm, res.J_hat, res.K_hat, res.weights, res.objective_trace, sol
    )
