"""Command-line entry point: ``epihumat run | validate | plot``.

Exit codes:
    0  success
    1  runtime failure while simulating or writing output
    2  usage error (bad flags or arguments)
    3  invalid or missing scenario / input file
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import config as cfg
from .population import PopulationError
from .geo import TractMapError
from .states import PHASE_COLUMNS

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_INVALID = 0, 1, 2, 3
OUT_ENV = "EPIHUMAT_OUT"

log = logging.getLogger("epihumat")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _error(kind: str, message: str) -> None:
    print(f"error[{kind}]: {message}", file=sys.stderr)


def _load(ref) -> cfg.ScenarioConfig:
    return cfg.load_scenario(cfg.resolve_scenario(ref))


def cmd_validate(args) -> int:
    try:
        config = _load(args.scenario)
    except cfg.ScenarioValidationError as err:
        for problem in err.problems:
            print(problem)
        _error("validation", f"{len(err.problems)} problem(s) in {args.scenario}")
        return EXIT_INVALID
    except cfg.ScenarioError as err:
        _error("scenario", str(err))
        return EXIT_INVALID
    print(f"ok: {config.name} ({config.scenario_kind.value})")
    return EXIT_OK


def cmd_run(args) -> int:
    from .plotting import PlotSpec, render_plot
    from .reporting import summarize, write_run
    from .runner import ReplicateError, _seed_count, init_world, run_replicates

    try:
        config = _load(args.scenario)
        if args.population:
            config = cfg.with_population_size(config, args.population)
    except cfg.ScenarioValidationError as err:
        for problem in err.problems:
            print(problem, file=sys.stderr)
        _error("validation", f"{args.scenario} is invalid")
        return EXIT_INVALID
    except cfg.ScenarioError as err:
        _error("scenario", str(err))
        return EXIT_INVALID

    out = Path(args.out or os.environ.get(OUT_ENV) or "output")
    seed = config.rng_seed if args.seed is None else args.seed
    n = args.replicates or config.replicates
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.dump_graph:
            world = init_world(config, seed)
            world.graph.dump(out / "graph.csv")
        result = run_replicates(config, n, seed, workers=args.workers)
        write_run(result, config, out, seed)
        if args.plots:
            for name in ["mean.csv"] + [f"replicate_{i:03d}.csv" for i in range(len(result.replicates))]:
                render_plot(out / name, PlotSpec(output=out / name.replace(".csv", ".svg"), title=config.name))
    except (PopulationError, TractMapError, FileNotFoundError) as err:
        _error("input", str(err))
        return EXIT_INVALID
    except ReplicateError as err:
        _error("runtime", str(err))
        return EXIT_RUNTIME
    except OSError as err:
        _error("io", str(err))
        return EXIT_RUNTIME

    initial = _seed_count(config.initial_infected_fraction, result.population_size)
    s = summarize(result, initial)
    print(f"{config.name}: {n} replicate(s), {result.population_size} agents -> {out}")
    print(f"  peak prevalence {s['peak_prevalence']:.1%} on day {s['peak_day']}, "
          f"attack rate {s['attack_rate']:.1%}, mean acceptance {s['mean_acceptance']:.1%}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plotting import PlotError, PlotSpec, render_plot
    from .reporting import CsvSchemaError

    series = tuple(s.strip() for s in args.series.split(",") if s.strip())
    if not series:
        _error("usage", "empty series selection")
        return EXIT_USAGE
    out = Path(args.out) if args.out else Path(args.csv).with_suffix(".svg")
    try:
        render_plot(args.csv, PlotSpec(series=series, output=out, title=args.title))
    except FileNotFoundError as err:
        _error("input", str(err))
        return EXIT_INVALID
    except (PlotError, CsvSchemaError) as err:
        _error("plot", str(err))
        return EXIT_USAGE if isinstance(err, PlotError) else EXIT_INVALID
    print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="epihumat", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write CSV time series")
    run.add_argument("--scenario", required=True, help="scenario YAML path or preset name")
    run.add_argument("--replicates", type=_positive_int, help="number of replicates (default: from the file)")
    run.add_argument("--seed", type=int, help="root seed; replicate i uses seed + i")
    run.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./output)")
    run.add_argument("--plots", action="store_true", help="render an SVG next to every CSV")
    run.add_argument("--dump-graph", action="store_true", help="write the initial social network of the first replicate")
    run.add_argument("--workers", type=_positive_int, default=1, help="replicates run in parallel")
    run.add_argument("--population", type=_positive_int, help="override the target population size")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a scenario file and list every problem")
    val.add_argument("--scenario", required=True)
    val.set_defaults(func=cmd_validate)

    plot = sub.add_parser("plot", help="render a time-series CSV as a vector chart")
    plot.add_argument("--csv", required=True)
    plot.add_argument("--out", help="image path (.svg or .pdf); default next to the CSV")
    plot.add_argument("--series", default=",".join(PHASE_COLUMNS), help="comma-separated state columns")
    plot.add_argument("--title")
    plot.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
