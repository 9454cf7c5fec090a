"""Monte Carlo driver for the efficiency-ratio tables.

Each cell draws ``reps`` independent samples, computes the unweighted and the
EL-weighted spatial median of each, and compares the largest eigenvalues of
the two across-repetition covariance matrices.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .constraints import (
    ConstraintRecipe,
    KnownComponentwiseMedians,
    RadialIndicator,
    SymmetryEstimatedF,
    SymmetryKnownF,
    build_constraints,
)
from .distributions import GENERATOR_TAG, DistributionSpec, make_rng, marginal_cdf, median_radius, sample
from .errors import AsymmetricInput, ConfigError, HullViolation, NonConvergence, SingularConstraints, TooManyFailures
from .solver import solve_dual
from .spatial import MedianConfig, weighted_spatial_median

REGIMES = ("medians", "symmetry-known", "symmetry-estimated", "control")
FORMATS = ("csv", "markdown")
COLUMNS = (
    "distribution",
    "dim",
    "n",
    "m",
    "regime",
    "lambda_tilde",
    "lambda",
    "ratio",
    "failures",
    "seed",
    "generator",
)
FLOAT_COLUMNS = ("lambda_tilde", "lambda", "ratio")
INT_COLUMNS = ("dim", "n", "m", "failures", "seed")

FAILURE_CAP = 0.05
DESK_REPS = 500
FULL_REPS = 2000
TABLE_N = (50, 100, 200, 500)
TABLE_M = (1, 3, 5)
SYMMETRY_TABLES = {2: "cauchy", 3: "t3", 4: "copula", 5: "laplace"}

# repetitions whose EL solve fails are dropped, everything else propagates
_DROPPABLE = (HullViolation, NonConvergence, SingularConstraints)
_MEDIAN_CFG = MedianConfig(tol=1e-9, max_iter=5000)


# ---------------------------------------------------------------- eigenvalues


def max_eigenvalue(mat, symmetry_tol: float = 1e-10, sweeps: int = 50) -> float:
    """Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.

    Raises:
        AsymmetricInput: ``mat`` is not square or ``|a_ij - a_ji|`` exceeds
            ``symmetry_tol`` (relative to the largest entry when that is above 1).
    """
    a = np.array(mat, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise AsymmetricInput(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise AsymmetricInput("matrix has non-finite entries")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.T).max() > symmetry_tol * scale:
        raise AsymmetricInput("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    d = a.shape[0]
    for _ in range(sweeps):
        off = math.sqrt(float((np.triu(a, 1) ** 2).sum()))
        if off <= 1e-15 * max(float(np.abs(np.diag(a)).max()), 1e-300):
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(d)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
    return float(np.diag(a).max())


# ---------------------------------------------------------------- configuration


@dataclass(frozen=True)
class SimConfig:
    """One Monte Carlo cell.

    ``m`` is the number of sieve terms for the symmetry regimes; for the
    median-indicator regime it must equal the dimension and for the control
    regime it must be 1.
    """

    distribution: DistributionSpec
    n: int
    m: int
    regime: str = "medians"
    reps: int = DESK_REPS
    master_seed: int = 20240601
    output_format: str = "csv"
    workers: int = 1
    strict: bool = False

    def __post_init__(self) -> None:
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}; choose from {REGIMES}")
        if self.output_format not in FORMATS:
            raise ConfigError(f"unknown output format {self.output_format!r}")
        if self.reps < 2:
            raise ConfigError("reps must be at least 2")
        if self.m < 1:
            raise ConfigError("m must be at least 1")
        if self.n < 2 * self.m + 2:
            raise ConfigError(f"n={self.n} is too small for m={self.m} (need n >= 2m + 2)")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be non-negative")
        if self.regime == "medians" and self.m != self.distribution.dim:
            raise ConfigError("the medians regime uses one constraint per coordinate: m must equal dim")
        if self.regime == "control":
            if self.m != 1:
                raise ConfigError("the control regime has a single constraint: m must be 1")
            median_radius(self.distribution)

    def growth_advisory(self) -> str | None:
        """A note when ``m`` is large for ``n`` under the sieve growth rates, else None."""
        if self.regime not in ("symmetry-known", "symmetry-estimated"):
            return None
        power = 6 if self.regime == "symmetry-estimated" else 4
        if self.m**power > self.n:
            return f"m={self.m} is large for n={self.n} (m^{power} > n); asymptotics may be poor"
        return None

    def recipe(self) -> ConstraintRecipe:
        spec = self.distribution
        dim = spec.dim
        if self.regime == "medians":
            return KnownComponentwiseMedians((0.0,) * dim)
        axis = (1.0,) + (0.0,) * (dim - 1)
        if self.regime == "symmetry-known":
            return SymmetryKnownF(axis, 0.0, self.m, marginal_cdf(spec, 0))
        if self.regime == "symmetry-estimated":
            return SymmetryEstimatedF(axis, 0.0, self.m)
        return RadialIndicator((0.0,) * dim, median_radius(spec))


@dataclass(frozen=True)
class SimRow:
    distribution: str
    dim: int
    n: int
    m: int
    regime: str
    lambda_tilde: float
    lambda_: float
    ratio: float
    failures: int
    seed: int
    generator: str = GENERATOR_TAG
    reps_used: int = 0
    valid: bool = True
    ratio_se: float = float("nan")

    def as_dict(self) -> dict:
        return {
            "distribution": self.distribution,
            "dim": self.dim,
            "n": self.n,
            "m": self.m,
            "regime": self.regime,
            "lambda_tilde": self.lambda_tilde,
            "lambda": self.lambda_,
            "ratio": self.ratio,
            "failures": self.failures,
            "seed": self.seed,
            "generator": self.generator,
        }


@dataclass
class SimReport:
    rows: list[SimRow] = field(default_factory=list)
    title: str = ""


# ---------------------------------------------------------------- one cell


@dataclass(frozen=True)
class RepOutcome:
    """Unweighted and weighted medians of one repetition, or ``None`` on failure."""

    index: int
    plain: np.ndarray | None
    weighted: np.ndarray | None
    error: str = ""


def run_rep(cfg: SimConfig, k: int) -> RepOutcome:
    """Repetition ``k`` of ``cfg``; its stream is ``SeedSequence(master_seed, spawn_key=(k,))``."""
    data = sample(cfg.distribution, cfg.n, make_rng((cfg.master_seed, k))).data
    plain = weighted_spatial_median(data, tol=_MEDIAN_CFG.tol, max_iter=_MEDIAN_CFG.max_iter).median
    try:
        sol = solve_dual(build_constraints(data, cfg.recipe()))
    except _DROPPABLE as exc:
        return RepOutcome(k, None, None, type(exc).__name__)
    weighted = weighted_spatial_median(data, sol.pi, _MEDIAN_CFG.tol, _MEDIAN_CFG.max_iter).median
    return RepOutcome(k, plain, weighted)


def _run_chunk(args: tuple[SimConfig, list[int]]) -> list[RepOutcome]:
    cfg, ks = args
    return [run_rep(cfg, k) for k in ks]


def collect_reps(cfg: SimConfig) -> list[RepOutcome]:
    """All repetitions of ``cfg`` ordered by index, serially or over a process pool."""
    ks = list(range(cfg.reps))
    if cfg.workers == 1:
        return [run_rep(cfg, k) for k in ks]
    chunks = [ks[i :: cfg.workers] for i in range(cfg.workers)]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        outcomes = [o for part in pool.map(_run_chunk, [(cfg, c) for c in chunks]) for o in part]
    return sorted(outcomes, key=lambda o: o.index)


def covariance_eigen(estimates: np.ndarray) -> float:
    """Largest eigenvalue of the across-rep covariance (centred at the mean, divisor M - 1)."""
    cov = np.atleast_2d(np.cov(np.asarray(estimates, dtype=float), rowvar=False, ddof=1))
    return max(max_eigenvalue(cov), 0.0)


def block_bootstrap_se(plain: np.ndarray, weighted: np.ndarray, blocks: int = 20, draws: int = 200, seed: int = 0) -> float:
    """Bootstrap SE of ``lambda_tilde / lambda`` resampling contiguous rep-blocks."""
    M = len(plain)
    blocks = min(blocks, M // 2)
    if blocks < 2:
        return float("nan")
    edges = np.linspace(0, M, blocks + 1).astype(int)
    groups = [np.arange(edges[i], edges[i + 1]) for i in range(blocks)]
    rng = make_rng(seed)
    ratios = []
    for _ in range(draws):
        idx = np.concatenate([groups[i] for i in rng.integers(0, blocks, size=blocks)])
        lam = covariance_eigen(plain[idx])
        if lam > 0:
            ratios.append(covariance_eigen(weighted[idx]) / lam)
    return float(np.std(ratios, ddof=1)) if len(ratios) > 1 else float("nan")


def summarize(cfg: SimConfig, outcomes: list[RepOutcome], with_se: bool = False) -> SimRow:
    ok = [o for o in outcomes if o.plain is not None]
    failures = len(outcomes) - len(ok)
    if len(ok) < 2 or (cfg.strict and failures > FAILURE_CAP * cfg.reps):
        raise TooManyFailures(f"{failures} of {cfg.reps} repetitions failed")
    plain = np.array([o.plain for o in ok])
    weighted = np.array([o.weighted for o in ok])
    lam = covariance_eigen(plain)
    lam_t = covariance_eigen(weighted)
    ratio = lam_t / lam if lam > 0 else float("nan")
    return SimRow(
        distribution=cfg.distribution.kind,
        dim=cfg.distribution.dim,
        n=cfg.n,
        m=cfg.m,
        regime=cfg.regime,
        lambda_tilde=lam_t,
        lambda_=lam,
        ratio=ratio,
        failures=failures,
        seed=cfg.master_seed,
        reps_used=len(ok),
        valid=failures <= FAILURE_CAP * cfg.reps,
        ratio_se=block_bootstrap_se(plain, weighted) if with_se else float("nan"),
    )


def run_cell(cfg: SimConfig, with_se: bool = False) -> SimRow:
    """Run every repetition of ``cfg`` and reduce to one table row.

    Raises:
        TooManyFailures: fewer than two repetitions survived, or ``cfg.strict``
            is set and more than 5% of them failed.
    """
    return summarize(cfg, collect_reps(cfg), with_se)


# ---------------------------------------------------------------- tables


def table_configs(table_id: int, reps: int = DESK_REPS, master_seed: int = 20240601, workers: int = 1,
                  n_values=TABLE_N, m_values=TABLE_M, strict: bool = False) -> list[SimConfig]:
    """The grid of cells behind table ``table_id`` (1 to 5)."""
    common = dict(reps=reps, master_seed=master_seed, workers=workers, strict=strict)
    if table_id == 1:
        return [
            SimConfig(DistributionSpec(kind, dim), n, dim, "medians", **common)
            for kind in ("cauchy", "t3", "copula", "laplace")
            for dim in (2, 3)
            for n in n_values
        ]
    if table_id in SYMMETRY_TABLES:
        spec = DistributionSpec(SYMMETRY_TABLES[table_id], 3)
        return [
            SimConfig(spec, n, m, regime, **common)
            for regime in ("symmetry-known", "symmetry-estimated")
            for m in m_values
            for n in n_values
        ]
    raise ConfigError(f"table_id must be in 1..5, got {table_id}")


def run_table(table_id: int, overrides: dict | None = None) -> SimReport:
    """Run every cell of a table; ``overrides`` feeds :func:`table_configs` keywords."""
    overrides = dict(overrides or {})
    if overrides.pop("full", False):
        overrides.setdefault("reps", FULL_REPS)
    cfgs = table_configs(table_id, **overrides)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rows = [run_cell(c) for c in cfgs]
    return SimReport(rows, f"Table {table_id}")


# ---------------------------------------------------------------- output


def _fmt(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.4f}"
    return str(value)


def _cells(row: SimRow) -> list[str]:
    d = row.as_dict()
    return [_fmt(d[c]) for c in COLUMNS]


def emit(report: SimReport, fmt: str = "csv") -> str:
    """Render ``report`` as CSV or as a Markdown table with the same columns."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in report.rows:
            writer.writerow(_cells(row))
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(COLUMNS) + " |", "|" + "|".join("---" for _ in COLUMNS) + "|"]
        lines += ["| " + " | ".join(_cells(row)) + " |" for row in report.rows]
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown output format {fmt!r}")


def parse_report(text: str) -> list[dict]:
    """Read rows back from :func:`emit` output in either format."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if lines and lines[0].startswith("|"):
        table = [[c.strip() for c in ln.strip("|").split("|")] for ln in lines if not set(ln) <= set("|-: ")]
    else:
        table = list(csv.reader(lines))
    if not table:
        return []
    header, body = table[0], table[1:]
    rows = []
    for rec in (dict(zip(header, cells)) for cells in body):
        for c in INT_COLUMNS:
            rec[c] = int(rec[c])
        for c in FLOAT_COLUMNS:
            rec[c] = float(rec[c])
        rows.append(rec)
    return rows
