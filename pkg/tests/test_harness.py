import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elweight.distributions import GENERATOR_TAG, DistributionSpec
from elweight.errors import AsymmetricInput, ConfigError, TooManyFailures
from elweight.harness import (
    COLUMNS,
    RepOutcome,
    SimConfig,
    SimReport,
    SimRow,
    collect_reps,
    covariance_eigen,
    emit,
    max_eigenvalue,
    parse_report,
    run_cell,
    summarize,
    table_configs,
)
from oracles import cubic_max_root


def cfg(kind="t3", dim=2, n=100, m=None, regime="medians", reps=10, **kw):
    m = m if m is not None else (dim if regime == "medians" else 1)
    return SimConfig(DistributionSpec(kind, dim), n, m, regime, reps, **kw)


# ---------------------------------------------------------------- eigenvalues


def test_max_eigenvalue_examples():
    assert max_eigenvalue(np.diag([1.0, 2.0, 3.0])) == 3.0
    assert max_eigenvalue([[2.0, 1.0], [1.0, 2.0]]) == pytest.approx(3.0, rel=1e-12)
    assert max_eigenvalue([[-4.0]]) == -4.0
    assert max_eigenvalue(np.zeros((3, 3))) == 0.0


def test_max_eigenvalue_rejects_asymmetric():
    with pytest.raises(AsymmetricInput):
        max_eigenvalue([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(AsymmetricInput):
        max_eigenvalue(np.ones((2, 3)))
    # within tolerance is accepted
    assert max_eigenvalue([[1.0, 1e-12], [0.0, 1.0]]) == pytest.approx(1.0)


def test_max_eigenvalue_matches_cubic_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a = rng.normal(size=(3, 3)) * rng.uniform(0.01, 100)
        a = a + a.T
        ref = cubic_max_root(a)
        assert max_eigenvalue(a) == pytest.approx(ref, abs=1e-8 * max(1.0, abs(ref)))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 3))
def test_max_eigenvalue_relative_accuracy(seed, d):
    rng = np.random.default_rng(seed)
    b = rng.normal(size=(d, d))
    cov = b @ b.T
    ref = np.linalg.eigvalsh(cov).max()
    assert max_eigenvalue(cov) == pytest.approx(ref, rel=1e-10, abs=1e-300)


# ---------------------------------------------------------------- configuration


def test_config_validation():
    with pytest.raises(ConfigError):
        cfg(reps=1)
    with pytest.raises(ConfigError):
        cfg(regime="symmetry-known", n=11, m=5, dim=3)
    with pytest.raises(ConfigError):
        cfg(regime="median-ish")
    with pytest.raises(ConfigError):
        cfg(regime="medians", m=1)
    with pytest.raises(ConfigError):
        cfg(kind="laplace", regime="control")
    with pytest.raises(ConfigError):
        cfg(output_format="xml")
    cfg(regime="symmetry-known", n=12, m=5, dim=3)


def test_growth_advisory():
    assert cfg(regime="symmetry-known", dim=3, n=50, m=3).growth_advisory() is not None
    assert cfg(regime="symmetry-known", dim=3, n=500, m=3).growth_advisory() is None
    assert cfg(regime="symmetry-estimated", dim=3, n=500, m=3).growth_advisory() is not None
    assert cfg(regime="medians").growth_advisory() is None


def test_table_grids():
    t1 = table_configs(1, reps=2)
    assert len(t1) == 32
    assert {c.m for c in t1} == {2, 3}
    for tid, kind in ((2, "cauchy"), (3, "t3"), (4, "copula"), (5, "laplace")):
        cells = table_configs(tid, reps=2)
        assert len(cells) == 24
        assert {c.distribution.kind for c in cells} == {kind}
        assert {c.distribution.dim for c in cells} == {3}
        assert {c.regime for c in cells} == {"symmetry-known", "symmetry-estimated"}
        assert {c.m for c in cells} == {1, 3, 5}
    assert {c.master_seed for c in t1} == {20240601}
    with pytest.raises(ConfigError):
        table_configs(6)


# ---------------------------------------------------------------- cells


def test_two_reps_give_rank_one_covariance():
    c = cfg(reps=2)
    outcomes = collect_reps(c)
    row = summarize(c, outcomes)
    diff = outcomes[0].plain - outcomes[1].plain
    # with two points the covariance is diff diff^T / 2
    assert row.lambda_ == pytest.approx(diff @ diff / 2, rel=1e-10)
    assert row.reps_used == 2


@pytest.mark.parametrize(
    "kind,dim,regime,m",
    [
        ("cauchy", 2, "medians", 2),
        ("copula", 3, "medians", 3),
        ("laplace", 3, "symmetry-known", 3),
        ("t3", 3, "symmetry-estimated", 5),
        ("cauchy", 3, "control", 1),
    ],
)
def test_smoke_ten_reps(kind, dim, regime, m):
    row = run_cell(cfg(kind, dim, 60, m, regime, reps=10))
    assert row.lambda_ >= 0 and row.lambda_tilde >= 0
    assert row.ratio == pytest.approx(row.lambda_tilde / row.lambda_)
    assert row.failures + row.reps_used == 10
    lines = emit(SimReport([row])).splitlines()
    assert len(lines) == 2 and len(lines[1].split(",")) == len(COLUMNS)


def test_reproducible_and_worker_independent():
    c = cfg("cauchy", 3, 80, 3, "symmetry-estimated", reps=12)
    a = emit(SimReport([run_cell(c)]))
    b = emit(SimReport([run_cell(c)]))
    p = emit(SimReport([run_cell(SimConfig(**{**c.__dict__, "workers": 2}))]))
    assert a == b == p
    other = emit(SimReport([run_cell(SimConfig(**{**c.__dict__, "master_seed": 1}))]))
    assert other != a


def test_failures_counted_and_capped():
    c = cfg(reps=20)
    ok = collect_reps(c)
    broken = [RepOutcome(o.index, None, None, "HullViolation") if o.index < 2 else o for o in ok]
    row = summarize(c, broken)
    assert row.failures == 2 and row.reps_used == 18 and not row.valid
    assert summarize(c, ok).valid
    with pytest.raises(TooManyFailures):
        summarize(SimConfig(**{**c.__dict__, "strict": True}), broken)
    with pytest.raises(TooManyFailures):
        summarize(c, [RepOutcome(o.index, None, None, "x") for o in ok[:-1]] + ok[-1:])


def test_informative_cell_beats_one():
    row = run_cell(cfg("cauchy", 2, 200, regime="medians", reps=300), with_se=True)
    assert row.ratio < 1 - 3 * row.ratio_se


def test_control_cell_near_one():
    row = run_cell(cfg("t3", 2, 200, regime="control", reps=400), with_se=True)
    assert abs(row.ratio - 1) <= 3 * row.ratio_se


def test_scale_decay():
    lam = {n: run_cell(cfg("t3", 2, n, reps=300)).lambda_ for n in (100, 500)}
    assert 0.1 <= lam[500] / lam[100] <= 0.4


def test_more_sieve_terms_do_not_hurt():
    pooled = {}
    for m in (1, 5):
        rows = [run_cell(cfg("cauchy", 3, n, m, "symmetry-known", reps=200)) for n in (200, 500)]
        pooled[m] = sum(r.lambda_tilde for r in rows) / sum(r.lambda_ for r in rows)
    assert pooled[5] <= pooled[1] + 0.1


@pytest.mark.parametrize("kind,dim,limit", [("cauchy", 2, 1 - 8 / np.pi**2), ("t3", 2, 1 - 8 / np.pi**2), ("cauchy", 3, 0.25)])
def test_median_indicator_ratio_matches_spherical_limit(kind, dim, limit):
    # spherical law: V = I/d, Var(u) = I/4 and Cov(S, u) = -E|S_1|/2 I,
    # with E|S_1| = 2/pi in 2-d and 1/2 in 3-d
    row = run_cell(cfg(kind, dim, 500, reps=800), with_se=True)
    assert abs(row.ratio - limit) <= 3 * row.ratio_se + 0.02


def test_covariance_eigen_uses_unbiased_divisor():
    x = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 0.0]])
    assert covariance_eigen(x) == pytest.approx(1.0)


# ---------------------------------------------------------------- output


def _row(**kw):
    base = dict(
        distribution="cauchy", dim=2, n=500, m=2, regime="medians",
        lambda_tilde=0.00071, lambda_=0.00604, ratio=0.11742, failures=0, seed=7,
    )
    base.update(kw)
    return SimRow(**base)


def test_emit_header_only():
    assert emit(SimReport([])) == ",".join(COLUMNS) + "\n"


def test_emit_single_row_format():
    text = emit(SimReport([_row()]))
    header, line = text.splitlines()
    assert header.split(",") == list(COLUMNS)
    assert line == f"cauchy,2,500,2,medians,0.0007,0.0060,0.1174,0,7,{GENERATOR_TAG}"


def test_markdown_round_trip():
    report = SimReport([_row(), _row(distribution="t3", n=50, ratio=0.5, failures=3)])
    from_md = parse_report(emit(report, "markdown"))
    from_csv = parse_report(emit(report, "csv"))
    assert from_md == from_csv
    assert from_csv[1]["failures"] == 3 and from_csv[0]["ratio"] == 0.1174
    assert parse_report(emit(SimReport([]), "markdown")) == []
    with pytest.raises(ConfigError):
        emit(report, "xml")
