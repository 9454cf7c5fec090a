"""Constraint recipes turning side information into a ConstraintMatrix.

Supported regimes:

* known componentwise medians (indicator constraints);
* symmetry of a linear combination ``c'X`` about a known centre, with the
  distribution function of ``c'X - centre`` either known or replaced by the
  symmetrized EDF, expanded in the sine basis;
* known marginals of a bivariate sample, expanded in the cosine basis;
* equal but unknown marginals, using the pooled EDF.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .distributions import Sample
from .errors import ConfigError, DimensionMismatch, DomainViolation
from .solver import ConstraintMatrix

CDF = Callable[[np.ndarray], np.ndarray]

_SLACK = 1e-12


@dataclass(frozen=True)
class StepFunctionCDF:
    """Right-continuous step CDF on a sorted support.

    ``cumulative[k]`` is the CDF value on ``[sorted_support[k], sorted_support[k+1])``.
    """

    sorted_support: np.ndarray
    cumulative: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.sorted_support, dtype=float)
        c = np.asarray(self.cumulative, dtype=float)
        if s.shape != c.shape or s.ndim != 1 or s.size == 0:
            raise DimensionMismatch("support and cumulative must be equal-length 1-d arrays")
        if np.any(np.diff(s) <= 0):
            raise ConfigError("support must be strictly increasing")
        if c[0] < 0 or np.any(np.diff(c) < 0) or not np.isclose(c[-1], 1.0, atol=1e-12):
            raise ConfigError("cumulative values must be nondecreasing from >= 0 up to 1")
        object.__setattr__(self, "sorted_support", s)
        object.__setattr__(self, "cumulative", c)

    @classmethod
    def from_points(cls, points: np.ndarray, weights: np.ndarray | None = None) -> "StepFunctionCDF":
        points = np.asarray(points, dtype=float).ravel()
        if points.size == 0:
            raise ConfigError("need at least one point")
        support, inverse = np.unique(points, return_inverse=True)
        if weights is None:
            # integer counts keep k/N exact, so symmetric identities hold bit-for-bit
            counts = np.bincount(inverse, minlength=support.size)
            return cls(support, np.cumsum(counts) / points.size)
        mass = np.bincount(inverse, weights=weights, minlength=support.size)
        cumulative = np.cumsum(mass) / mass.sum()
        cumulative[-1] = 1.0
        return cls(support, np.minimum(cumulative, 1.0))

    def __call__(self, x) -> np.ndarray:
        idx = np.searchsorted(self.sorted_support, np.asarray(x, dtype=float), side="right")
        padded = np.concatenate([[0.0], self.cumulative])
        return padded[idx]

    def left_limit(self, x) -> np.ndarray:
        """``F(x-)``, the mass strictly below ``x``."""
        idx = np.searchsorted(self.sorted_support, np.asarray(x, dtype=float), side="left")
        padded = np.concatenate([[0.0], self.cumulative])
        return padded[idx]


@dataclass(frozen=True)
class KnownComponentwiseMedians:
    medians: tuple[float, ...]


@dataclass(frozen=True)
class SymmetryKnownF:
    axis: tuple[float, ...]
    center: float
    m: int
    F: CDF


@dataclass(frozen=True)
class SymmetryEstimatedF:
    axis: tuple[float, ...]
    center: float
    m: int


@dataclass(frozen=True)
class KnownMarginals:
    m: int
    F: CDF
    G: CDF


@dataclass(frozen=True)
class EqualMarginalsEstimated:
    m: int


@dataclass(frozen=True)
class RadialIndicator:
    """``1[||x - center|| <= radius] - 1/2``; carries no directional information.

    With ``radius`` the population median of ``||X - center||`` this is a valid
    constraint, and for spherical laws it is independent of every spatial sign,
    which makes it a no-gain control.
    """

    center: tuple[float, ...]
    radius: float


ConstraintRecipe = Union[
    KnownComponentwiseMedians,
    SymmetryKnownF,
    SymmetryEstimatedF,
    KnownMarginals,
    EqualMarginalsEstimated,
    RadialIndicator,
]


def recipe_width(recipe: ConstraintRecipe, dim: int) -> int:
    """Number of constraint columns ``recipe`` produces."""
    if isinstance(recipe, KnownComponentwiseMedians):
        return dim
    if isinstance(recipe, RadialIndicator):
        return 1
    if isinstance(recipe, KnownMarginals):
        return 2 * recipe.m
    return recipe.m


def _data(sample: Sample | np.ndarray) -> np.ndarray:
    if isinstance(sample, Sample):
        return sample.data
    return Sample(sample).data


def median_indicator_constraints(sample: Sample | np.ndarray, medians) -> ConstraintMatrix:
    """Rows ``1[x_jk <= m_k] - 1/2`` for each coordinate ``k``."""
    x = _data(sample)
    medians = np.asarray(medians, dtype=float).ravel()
    if medians.shape != (x.shape[1],):
        raise DimensionMismatch(f"need {x.shape[1]} medians, got {medians.size}")
    return ConstraintMatrix((x <= medians).astype(float) - 0.5, KnownComponentwiseMedians(tuple(medians)))


def _check_range(t: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if np.any(t < lo - _SLACK) or np.any(t > hi + _SLACK) or np.any(np.isnan(t)):
        raise DomainViolation(f"basis argument outside [{lo}, {hi}]")
    return np.clip(t, lo, hi)


def sine_basis(t, m: int) -> np.ndarray:
    """``(sin(pi t), ..., sin(m pi t))`` for ``t`` in [-1, 1].

    Vectorized: an array of shape ``s`` maps to shape ``s + (m,)``.
    """
    if m < 1:
        raise ConfigError("m must be at least 1")
    t = _check_range(np.asarray(t, dtype=float), -1.0, 1.0)
    k = np.arange(1, m + 1)
    return np.sin(np.pi * t[..., None] * k)


def cosine_basis(t, m: int) -> np.ndarray:
    """``sqrt(2) cos(k pi t)``, ``k = 1..m``, for ``t`` in [0, 1]."""
    if m < 1:
        raise ConfigError("m must be at least 1")
    t = _check_range(np.asarray(t, dtype=float), 0.0, 1.0)
    k = np.arange(1, m + 1)
    return np.sqrt(2.0) * np.cos(np.pi * t[..., None] * k)


def symmetrized_edf(residuals) -> StepFunctionCDF:
    """EDF of the multiset ``{+e_j, -e_j}``, each point carrying mass 1/(2n)."""
    e = np.asarray(residuals, dtype=float).ravel()
    if e.size == 0:
        raise ConfigError("need at least one residual")
    return StepFunctionCDF.from_points(np.concatenate([e, -e]))


def pooled_edf(x, y) -> StepFunctionCDF:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size or x.size == 0:
        raise DimensionMismatch("x and y must have the same positive length")
    return StepFunctionCDF.from_points(np.concatenate([x, y]))


def _residuals(x: np.ndarray, axis, center: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float).ravel()
    if axis.shape != (x.shape[1],):
        raise DimensionMismatch(f"axis has length {axis.size}, sample dimension is {x.shape[1]}")
    if not np.any(axis):
        raise ConfigError("symmetry axis must be nonzero")
    return x @ axis - center


def _bivariate(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if x.shape[1] != 2:
        raise DimensionMismatch(f"marginal recipes need a 2-column sample, got {x.shape[1]}")
    return x[:, 0], x[:, 1]


def _check_m(m: int) -> None:
    if m < 1:
        raise ConfigError("m must be at least 1")


def build_constraints(sample: Sample | np.ndarray, recipe: ConstraintRecipe) -> ConstraintMatrix:
    """Evaluate the constraint functions described by ``recipe`` on ``sample``."""
    x = _data(sample)
    n = x.shape[0]
    if isinstance(recipe, KnownComponentwiseMedians):
        return median_indicator_constraints(x, recipe.medians)
    if isinstance(recipe, SymmetryKnownF):
        _check_m(recipe.m)
        eps = _residuals(x, recipe.axis, recipe.center)
        g = 2.0 * np.asarray(recipe.F(eps), dtype=float) - 1.0
        return ConstraintMatrix(sine_basis(g, recipe.m), recipe)
    if isinstance(recipe, SymmetryEstimatedF):
        _check_m(recipe.m)
        eps = _residuals(x, recipe.axis, recipe.center)
        g = 2.0 * symmetrized_edf(eps)(eps) - 1.0
        edge = 1.0 - 1.0 / (2 * n)
        return ConstraintMatrix(sine_basis(np.clip(g, -edge, edge), recipe.m), recipe)
    if isinstance(recipe, KnownMarginals):
        _check_m(recipe.m)
        a, b = _bivariate(x)
        fa = np.asarray(recipe.F(a), dtype=float)
        gb = np.asarray(recipe.G(b), dtype=float)
        return ConstraintMatrix(np.hstack([cosine_basis(fa, recipe.m), cosine_basis(gb, recipe.m)]), recipe)
    if isinstance(recipe, EqualMarginalsEstimated):
        _check_m(recipe.m)
        a, b = _bivariate(x)
        h = pooled_edf(a, b)
        edge = 1.0 / (4 * n)
        ha = np.clip(h(a), edge, 1 - edge)
        hb = np.clip(h(b), edge, 1 - edge)
        return ConstraintMatrix(cosine_basis(ha, recipe.m) - cosine_basis(hb, recipe.m), recipe)
    if isinstance(recipe, RadialIndicator):
        center = np.asarray(recipe.center, dtype=float).ravel()
        if center.shape != (x.shape[1],):
            raise DimensionMismatch(f"center has length {center.size}, sample dimension is {x.shape[1]}")
        inside = np.linalg.norm(x - center, axis=1) <= recipe.radius
        return ConstraintMatrix(inside.astype(float)[:, None] - 0.5, recipe)
    raise ConfigError(f"unknown constraint recipe {recipe!r}")
