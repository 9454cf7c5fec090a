"""Seeded samplers for the simulation distributions.

Every variate is produced by inverse-CDF transforms of uniforms drawn from a
``PCG64`` bit generator, so a seed pins the output on every platform numpy
supports.  Seeds are either a plain integer or a tuple ``(master_seed, *keys)``;
the tuple form maps to ``SeedSequence(master_seed, spawn_key=keys)``, which is
how the Monte Carlo harness derives one independent stream per repetition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import special, stats

from .errors import ConfigError, DomainViolation, InvalidCorrelationMatrix

GENERATOR_NAME = "PCG64"
SEED_RULE = "SeedSequence(master_seed;spawn_key=(rep))"
GENERATOR_TAG = f"{GENERATOR_NAME}:{SEED_RULE}"

KINDS = ("cauchy", "t3", "copula", "laplace")
DEFAULT_SKEW = 0.8

COPULA2_CORR = np.array([[1.0, 0.5], [0.5, 1.0]])
COPULA3_CORR = np.array([[1.0, 0.5, 0.1], [0.5, 1.0, 0.1], [0.1, 0.1, 1.0]])

Seed = int | tuple[int, ...]


@dataclass(frozen=True)
class DistributionSpec:
    """A simulation distribution.

    ``kind`` is one of ``cauchy`` (spherical multivariate t, 1 df),
    ``t3`` (spherical multivariate t, 3 df), ``copula`` (Gaussian copula
    with normal / t(3) marginals) and ``laplace`` (independent asymmetric
    Laplace components, each shifted to median zero).
    """

    kind: str
    dim: int = 2
    seed: Seed = 0
    skew: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown distribution {self.kind!r}; choose from {KINDS}")
        if self.dim not in (2, 3):
            raise ConfigError("dim must be 2 or 3")
        if self.kind == "laplace":
            skew = tuple(float(s) for s in (self.skew or (DEFAULT_SKEW,) * self.dim))
            if len(skew) != self.dim or not all(np.isfinite(s) and s > 0 for s in skew):
                raise ConfigError("skew must hold one positive finite value per dimension")
            object.__setattr__(self, "skew", skew)
        elif self.skew is not None:
            raise ConfigError("skew only applies to the laplace family")

    def with_seed(self, seed: Seed) -> "DistributionSpec":
        return DistributionSpec(self.kind, self.dim, seed, self.skew)

    @property
    def label(self) -> str:
        return self.kind


@dataclass(frozen=True)
class Sample:
    """An ``(n, d)`` data matrix plus the distribution that generated it."""

    data: np.ndarray
    spec: DistributionSpec | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2 or data.shape[0] < 1:
            raise ConfigError(f"sample data must be a non-empty 2-d array, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DomainViolation("sample contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def make_rng(seed: Seed) -> np.random.Generator:
    """PCG64 generator for an integer seed or a ``(master, *spawn_key)`` tuple."""
    if isinstance(seed, (tuple, list)):
        master, *keys = (int(s) for s in seed)
        ss = np.random.SeedSequence(master, spawn_key=tuple(keys))
    else:
        ss = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.PCG64(ss))


def uniforms(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1) built from 53-bit integers."""
    k = rng.integers(0, 2**53, size=size, dtype=np.int64)
    return (k.astype(float) + 0.5) / 2.0**53


def std_normals(rng: np.random.Generator, size) -> np.ndarray:
    return special.ndtri(uniforms(rng, size))


def _chi2(rng: np.random.Generator, df: int, n: int) -> np.ndarray:
    return (std_normals(rng, (n, df)) ** 2).sum(axis=1)


def _spherical_t(rng: np.random.Generator, df: int, n: int, dim: int) -> np.ndarray:
    z = std_normals(rng, (n, dim))
    return z / np.sqrt(_chi2(rng, df, n) / df)[:, None]


def gaussian_copula_uniforms(rng: np.random.Generator, corr: np.ndarray, n: int) -> np.ndarray:
    corr = np.asarray(corr, dtype=float)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1] or not np.allclose(corr, corr.T):
        raise InvalidCorrelationMatrix("correlation matrix must be square and symmetric")
    try:
        chol = np.linalg.cholesky(corr)
    except np.linalg.LinAlgError as exc:
        raise InvalidCorrelationMatrix("correlation matrix is not positive definite") from exc
    z = std_normals(rng, (n, corr.shape[0])) @ chol.T
    return special.ndtr(z)


def _copula(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    if dim == 2:
        u = gaussian_copula_uniforms(rng, COPULA2_CORR, n)
        return np.column_stack([special.ndtri(u[:, 0]), stats.t.ppf(u[:, 1], 3)])
    u = gaussian_copula_uniforms(rng, COPULA3_CORR, n)
    return np.column_stack([special.ndtri(u[:, 0]), special.ndtri(u[:, 1]), stats.t.ppf(u[:, 2], 3)])


@lru_cache(maxsize=None)
def _laplace_median(kappa: float) -> float:
    return float(stats.laplace_asymmetric.ppf(0.5, kappa))


def _laplace(rng: np.random.Generator, n: int, skew: Sequence[float]) -> np.ndarray:
    u = uniforms(rng, (n, len(skew)))
    cols = [stats.laplace_asymmetric.ppf(u[:, k], s) - _laplace_median(s) for k, s in enumerate(skew)]
    return np.column_stack(cols)


def sample(spec: DistributionSpec, n: int, rng: np.random.Generator | None = None) -> Sample:
    """Draw ``n`` observations; deterministic in ``spec.seed`` unless ``rng`` is given."""
    if n < 1:
        raise ConfigError("n must be at least 1")
    rng = rng if rng is not None else make_rng(spec.seed)
    if spec.kind == "cauchy":
        data = _spherical_t(rng, 1, n, spec.dim)
    elif spec.kind == "t3":
        data = _spherical_t(rng, 3, n, spec.dim)
    elif spec.kind == "copula":
        data = _copula(rng, n, spec.dim)
    else:
        data = _laplace(rng, n, spec.skew)
    return Sample(data, spec)


def marginal_cdf(spec: DistributionSpec, coord: int = 0) -> Callable[[np.ndarray], np.ndarray]:
    """CDF of one coordinate of ``spec`` (used by known-F symmetry constraints)."""
    if not 0 <= coord < spec.dim:
        raise ConfigError(f"coordinate {coord} out of range for dim {spec.dim}")
    if spec.kind == "cauchy":
        return stats.cauchy.cdf
    if spec.kind == "t3":
        return stats.t(3).cdf
    if spec.kind == "copula":
        t_coord = 1 if spec.dim == 2 else 2
        return stats.t(3).cdf if coord == t_coord else special.ndtr
    kappa = spec.skew[coord]
    shift = _laplace_median(kappa)
    return lambda x: stats.laplace_asymmetric.cdf(np.asarray(x) + shift, kappa)


@lru_cache(maxsize=None)
def _numeric_median(kind: str, dim: int, skew, n: int, seed: int) -> tuple[float, ...]:
    from .spatial import weighted_spatial_median

    big = sample(DistributionSpec(kind, dim, seed, skew), n)
    return tuple(weighted_spatial_median(big, tol=1e-8, max_iter=5000).median)


def true_spatial_median(spec: DistributionSpec, n: int = 10**6, seed: int = 20240601) -> np.ndarray:
    """Population spatial median of ``spec``.

    The spherical families have their median at the origin.  The copula and
    Laplace families are handled by a large-sample Weiszfeld run, cached per
    distribution.
    """
    if spec.kind in ("cauchy", "t3"):
        return np.zeros(spec.dim)
    return np.array(_numeric_median(spec.kind, spec.dim, spec.skew, n, seed))


def median_radius(spec: DistributionSpec) -> float:
    """Population median of ``||X||`` for the spherical families.

    For a spherical t with ``nu`` df, ``||X||^2 / d`` follows ``F(d, nu)``.
    """
    if spec.kind not in ("cauchy", "t3"):
        raise ConfigError("median radius is only available for the spherical families")
    nu = 1 if spec.kind == "cauchy" else 3
    return float(np.sqrt(spec.dim * stats.f.ppf(0.5, spec.dim, nu)))
