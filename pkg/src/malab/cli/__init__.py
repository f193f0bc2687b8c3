"""``ma-lab`` command line: list, validate and run experiments."""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .. import __version__
from ..foundation import ConvergenceError, InfeasibleError
from .config import ConfigError, ScenarioConfig, load_config, validate
from .experiments import REGISTRY, list_experiments
from .table import ResultTable, emit

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (ConvergenceError, InfeasibleError, np.linalg.LinAlgError, ArithmeticError)


class ExperimentError(RuntimeError):
    """A numerical failure inside an experiment, tagged with its name."""

    def __init__(self, experiment, cause):
        self.experiment = experiment
        self.cause = cause
        super().__init__(f"{experiment}: {type(cause).__name__}: {cause}")


def ordered_map(threads):
    """``map`` over grid points, serial or on a thread pool; results always
    come back in input order."""
    if threads <= 1:
        return lambda func, items: [func(x) for x in items]

    def pmap(func, items):
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, items))

    return pmap


def run_experiment(config: ScenarioConfig, threads=1) -> ResultTable:
    spec = REGISTRY[config.experiment]
    try:
        table = spec.run(config, ordered_map(threads))
    except NUMERIC_ERRORS as exc:
        raise ExperimentError(config.experiment, exc) from exc
    meta = {
        "experiment": config.experiment,
        "seed": str(config.seed),
        "config_hash": config.config_hash,
        "version": __version__,
    }
    meta.update(table.metadata)
    table.metadata = meta
    return table


def with_seed(config: ScenarioConfig, seed) -> ScenarioConfig:
    raw = dict(config.raw, seed=seed)
    return validate(raw, REGISTRY)


def _parser():
    parser = argparse.ArgumentParser(prog="ma-lab", description="Multiple-access experiment runner")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment described by a scenario file")
    run.add_argument("config")
    run.add_argument("--out", help="output file (default: output.path from the scenario, else stdout)")
    run.add_argument("--format", choices=("csv", "json"))
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--threads", type=int, default=1)
    sub.add_parser("list", help="list available experiments")
    check = sub.add_parser("validate", help="check a scenario file without running it")
    check.add_argument("config")
    return parser


def _report_config(exc: ConfigError):
    for err in exc.errors:
        print(f"config error: {err}", file=sys.stderr)
    return EXIT_CONFIG


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list":
        for name, description in list_experiments():
            print(f"{name}\t{description}")
        return EXIT_OK
    try:
        config = load_config(args.config)
        if args.command == "validate":
            print(f"ok {config.experiment} {config.config_hash}")
            return EXIT_OK
        if args.seed is not None:
            config = with_seed(config, args.seed)
        if args.threads < 1:
            raise ConfigError([f"--threads: must be >= 1, got {args.threads}"])
    except ConfigError as exc:
        return _report_config(exc)

    try:
        table = run_experiment(config, args.threads)
    except ExperimentError as exc:
        print(f"numerical failure in {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    fmt = args.format or config.output.get("format", "csv")
    path = args.out or config.output.get("path")
    text = emit(table, fmt, path)
    if path is None:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
