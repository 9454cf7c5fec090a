"""Command-line entry point: ``elweight {table,cell,estimate,median}``."""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

import numpy as np

from .constraints import (
    EqualMarginalsEstimated,
    KnownComponentwiseMedians,
    KnownMarginals,
    SymmetryEstimatedF,
    SymmetryKnownF,
)
from .distributions import KINDS, DistributionSpec
from .errors import ConfigError, ELWeightError, NumericalError
from .estimators import BUILTIN_PSI, el_estimate
from .harness import DESK_REPS, FORMATS, FULL_REPS, REGIMES, SimConfig, SimReport, emit, run_cell, run_table
from .spatial import el_weighted_median_pipeline, weighted_spatial_median

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

# config-file key -> (argparse dest, converter)
_CONFIG_KEYS = {
    "dist": ("dist", str),
    "dim": ("dim", int),
    "n": ("n", int),
    "m": ("m", int),
    "regime": ("regime", str),
    "reps": ("reps", int),
    "seed": ("seed", int),
    "format": ("format", str),
    "out": ("out", str),
    "workers": ("workers", int),
}


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def read_config(path: str) -> dict:
    """Parse a ``key = value`` file (``#`` comments allowed) into argparse defaults."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"bad config file {path}: {exc}") from exc
    out = {}
    for key, raw in parser["run"].items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        dest, conv = _CONFIG_KEYS[key]
        try:
            out[dest] = conv(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return out


def read_csv_data(path: str) -> np.ndarray:
    """Header row then one numeric observation per line."""
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read data from {path}: {exc}") from exc
    return data


def _floats(text: str | None, what: str) -> tuple[float, ...] | None:
    if text is None:
        return None
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"{what} must be comma-separated numbers, got {text!r}") from exc


def _marginal(name: str):
    from scipy import stats

    table = {
        "uniform": lambda x: np.clip(np.asarray(x, dtype=float), 0.0, 1.0),
        "normal": stats.norm.cdf,
        "t3": stats.t(3).cdf,
        "cauchy": stats.cauchy.cdf,
    }
    if name not in table:
        raise ConfigError(f"unknown marginal {name!r}; choose from {sorted(table)}")
    return table[name]


def build_recipe(args, dim: int):
    """Constraint recipe from ``--recipe`` and its companion flags."""
    kind = args.recipe
    if kind is None:
        return None
    axis = _floats(args.axis, "--axis") or (1.0,) + (0.0,) * (dim - 1)
    if kind == "medians":
        return KnownComponentwiseMedians(_floats(args.medians, "--medians") or (0.0,) * dim)
    if kind == "symmetry-known":
        return SymmetryKnownF(axis, args.center, args.m, _marginal(args.marginal))
    if kind == "symmetry-estimated":
        return SymmetryEstimatedF(axis, args.center, args.m)
    if kind == "known-marginals":
        F = _marginal(args.marginal)
        return KnownMarginals(args.m, F, F)
    if kind == "equal-marginals":
        return EqualMarginalsEstimated(args.m)
    raise ConfigError(f"unknown recipe {kind!r}")


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_table(args) -> int:
    overrides = {"master_seed": args.seed, "workers": args.workers, "strict": args.strict}
    overrides["reps"] = args.reps if args.reps is not None else (FULL_REPS if args.full else DESK_REPS)
    report = run_table(args.table_id, overrides)
    _write(emit(report, args.format), args.out)
    return EXIT_OK


def _cmd_cell(args) -> int:
    for name in ("dist", "n"):
        if getattr(args, name) is None:
            raise ConfigError(f"--{name} is required (flag or config file)")
    spec = DistributionSpec(args.dist, args.dim)
    m = args.m if args.m is not None else (spec.dim if args.regime == "medians" else 1)
    cfg = SimConfig(spec, args.n, m, args.regime, args.reps, args.seed, args.format, args.workers, args.strict)
    note = cfg.growth_advisory()
    if note:
        print(f"note: {note}", file=sys.stderr)
    row = run_cell(cfg)
    if not row.valid:
        print(f"warning: {row.failures} of {cfg.reps} repetitions failed; row is flagged invalid", file=sys.stderr)
    _write(emit(SimReport([row]), args.format), args.out)
    return EXIT_OK


def _cmd_estimate(args) -> int:
    data = read_csv_data(args.input)
    recipe = build_recipe(args, data.shape[1])
    if recipe is None:
        raise ConfigError("estimate needs --recipe")
    rep = el_estimate(data, BUILTIN_PSI[args.psi](), recipe)
    print(f"theta_plain: {' '.join(f'{v:.6g}' for v in rep.theta_plain)}")
    print(f"theta_el:    {' '.join(f'{v:.6g}' for v in rep.theta_el)}")
    print(f"m_used:      {rep.m_used}")
    return EXIT_OK


def _cmd_median(args) -> int:
    data = read_csv_data(args.input)
    recipe = build_recipe(args, data.shape[1])
    if recipe is None:
        res = weighted_spatial_median(data)
    else:
        res = el_weighted_median_pipeline(data, recipe)
    print("median: " + " ".join(f"{v:.6g}" for v in res.median))
    print(f"iterations: {res.iterations}")
    return EXIT_OK


def _add_recipe_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument(
        "--recipe",
        choices=("medians", "symmetry-known", "symmetry-estimated", "known-marginals", "equal-marginals"),
    )
    p.add_argument("--m", type=int, default=3, help="sieve terms (default 3)")
    p.add_argument("--medians", help="comma-separated known medians (default zeros)")
    p.add_argument("--marginal", default="normal", help="known marginal: uniform, normal, t3, cauchy")
    p.add_argument("--axis", help="comma-separated symmetry direction (default e1)")
    p.add_argument("--center", type=float, default=0.0, help="symmetry center along the axis")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="elweight", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    def run_flags(p, table: bool):
        p.add_argument("--reps", type=int, default=None if table else DESK_REPS)
        p.add_argument("--seed", type=int, default=20240601, help="master seed")
        p.add_argument("--format", choices=FORMATS, default="csv")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--strict", action="store_true", help="fail when more than 5%% of reps fail")

    t = sub.add_parser("table", help="regenerate one of the efficiency tables")
    t.add_argument("table_id", type=int, choices=range(1, 6))
    t.add_argument("--full", action="store_true", help=f"use {FULL_REPS} repetitions")
    run_flags(t, True)
    t.set_defaults(func=_cmd_table)

    c = sub.add_parser("cell", help="run a single Monte Carlo cell")
    c.add_argument("--config", help="key=value file; flags given on the command line win")
    c.add_argument("--dist", choices=KINDS)
    c.add_argument("--dim", type=int, default=2)
    c.add_argument("--n", type=int)
    c.add_argument("--m", type=int)
    c.add_argument("--regime", choices=REGIMES, default="medians")
    run_flags(c, False)
    c.set_defaults(func=_cmd_cell)

    e = sub.add_parser("estimate", help="EL-weighted mean of a built-in functional")
    _add_recipe_flags(e)
    e.add_argument("--psi", choices=sorted(BUILTIN_PSI), required=True)
    e.set_defaults(func=_cmd_estimate)

    md = sub.add_parser("median", help="spatial median, optionally EL-weighted")
    _add_recipe_flags(md)
    md.set_defaults(func=_cmd_median)
    parser.subcommands = {"table": t, "cell": c, "estimate": e, "median": md}
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        # file values become defaults so explicit flags still win
        parser.subcommands[args.command].set_defaults(**read_config(args.config))
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ELWeightError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
