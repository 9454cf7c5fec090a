"""EL-weighted estimates of linear functionals ``theta = E psi(Z)``."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .constraints import (
    CDF,
    ConstraintRecipe,
    EqualMarginalsEstimated,
    KnownMarginals,
    SymmetryEstimatedF,
    build_constraints,
)
from .distributions import Sample
from .errors import DimensionMismatch, PsiNonFinite
from .solver import SolverConfig, solve_dual


class GrowthConditionWarning(UserWarning):
    """The number of constraints is large relative to the sample size."""


@dataclass(frozen=True)
class FunctionalSpec:
    """A vector functional ``psi: R^d -> R^r`` applied row-wise.

    ``psi`` receives the full ``(n, d)`` data matrix and must return an
    ``(n,)`` or ``(n, r)`` array.
    """

    psi: Callable[[np.ndarray], np.ndarray]
    r: int = 1
    description: str = ""

    def evaluate(self, data: np.ndarray) -> np.ndarray:
        out = np.asarray(self.psi(data), dtype=float)
        if out.ndim == 1:
            out = out[:, None]
        if out.shape != (data.shape[0], self.r):
            raise DimensionMismatch(f"psi returned shape {out.shape}, expected ({data.shape[0]}, {self.r})")
        if not np.all(np.isfinite(out)):
            raise PsiNonFinite(f"psi {self.description!r} returned non-finite values")
        return out


@dataclass(frozen=True)
class EstimateReport:
    theta_plain: np.ndarray
    theta_el: np.ndarray
    zeta: np.ndarray
    m_used: int


def rectangle_indicator(s: float = 0.5, t: float = 0.5) -> FunctionalSpec:
    return FunctionalSpec(
        lambda z: ((z[:, 0] <= s) & (z[:, 1] <= t)).astype(float), 1, f"1[x<={s}, y<={t}]"
    )


def coordinate_sum() -> FunctionalSpec:
    return FunctionalSpec(lambda z: z[:, 0] + z[:, 1], 1, "x+y")


def coordinate_difference() -> FunctionalSpec:
    return FunctionalSpec(lambda z: z[:, 0] - z[:, 1], 1, "x-y")


def coordinate_product() -> FunctionalSpec:
    return FunctionalSpec(lambda z: z[:, 0] * z[:, 1], 1, "x*y")


def mean_vector(dim: int) -> FunctionalSpec:
    return FunctionalSpec(lambda z: z, dim, "mean")


def spatial_sign_at(point) -> FunctionalSpec:
    """``psi(z) = S(point - z)``; its EL-weighted mean is the weighted sign average."""
    point = np.asarray(point, dtype=float)

    def psi(z):
        diff = point - z
        norms = np.linalg.norm(diff, axis=1)
        return diff / np.where(norms > 0, norms, 1.0)[:, None]

    return FunctionalSpec(psi, point.size, f"S({point.tolist()} - z)")


BUILTIN_PSI = {
    "rectangle": rectangle_indicator,
    "sum": coordinate_sum,
    "difference": coordinate_difference,
    "product": coordinate_product,
}


def _check_growth(recipe: ConstraintRecipe, n: int) -> None:
    m = getattr(recipe, "m", None)
    if m is None:
        return
    estimated = isinstance(recipe, (SymmetryEstimatedF, EqualMarginalsEstimated))
    power = 6 if estimated else 4
    if m**power > n:
        warnings.warn(
            f"m={m} is large for n={n}: m^{power}={m**power} exceeds n",
            GrowthConditionWarning,
            stacklevel=3,
        )


def el_estimate(
    sample: Sample | np.ndarray,
    spec: FunctionalSpec,
    recipe: ConstraintRecipe,
    solver_cfg: SolverConfig | None = None,
) -> EstimateReport:
    """Plain mean and EL-weighted mean of ``psi`` under the constraints of ``recipe``."""
    data = sample.data if isinstance(sample, Sample) else Sample(sample).data
    values = spec.evaluate(data)
    _check_growth(recipe, data.shape[0])
    u = build_constraints(data, recipe)
    sol = solve_dual(u, solver_cfg)
    n = data.shape[0]
    denom = 1.0 + u.u_values @ sol.zeta
    theta_el = (values / denom[:, None]).sum(axis=0) / n
    return EstimateReport(values.sum(axis=0) / n, theta_el, sol.zeta, u.m)


def known_marginals_estimate(
    xy_sample: Sample | np.ndarray,
    spec: FunctionalSpec,
    m: int,
    F: CDF,
    G: CDF,
    solver_cfg: SolverConfig | None = None,
) -> EstimateReport:
    """EL estimate using ``2m`` cosine constraints from the known marginals ``F`` and ``G``."""
    return el_estimate(xy_sample, spec, KnownMarginals(m, F, G), solver_cfg)


def equal_marginals_estimate(
    xy_sample: Sample | np.ndarray,
    spec: FunctionalSpec,
    m: int,
    solver_cfg: SolverConfig | None = None,
) -> EstimateReport:
    """EL estimate using ``m`` pooled-EDF cosine differences (equal, unknown marginals)."""
    return el_estimate(xy_sample, spec, EqualMarginalsEstimated(m), solver_cfg)
