"""Command line entry point: ``poolea run|sweep|node|report``."""
from __future__ import annotations

import argparse
import logging
import sys
import zlib
from pathlib import Path

from .clock import WallClock
from .engine import EAParams
from .errors import ConfigError, InvalidArgument, NodeRunError, PoolEAError
from .genome import make_rng
from .harness import (
    ExperimentSpec,
    format_table,
    load_config,
    read_raw_csv,
    run_experiment,
    run_sweep,
    summarize,
    summary_csv,
    write_outputs,
)
from .node import run_node
from .protocol import PoolClient
from .store import DirectoryStore

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("values must be positive integers")
    return values


def _add_ea_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--population", type=int, help="individuals per node (default 1000)")
    p.add_argument("--max-generations", type=int, help="per-node generation cap")
    p.add_argument("--mutation-rate", type=float, help="per-bit flip probability (default 1/L)")
    p.add_argument("--crossover-rate", type=float, help="share of offspring made by crossover")
    p.add_argument("--delay-ms", type=float, help="pause after each migration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poolea", description="Pool-based distributed GA experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("config")
    run.add_argument("--out", default="results", help="directory for CSV output")

    sweep = sub.add_parser("sweep", help="run a node-count x migration-gap matrix")
    sweep.add_argument("--config", help="base config; flags below override it")
    sweep.add_argument("--nodes", type=_int_list, default=[1, 2, 4])
    sweep.add_argument("--gaps", type=_int_list, default=[100, 200, 400])
    sweep.add_argument("--problem")
    sweep.add_argument("--reps", type=int)
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--experiment-id")
    sweep.add_argument("--backend", choices=("simulated", "directory"))
    sweep.add_argument("--store-root")
    sweep.add_argument("--base-ms", type=float)
    sweep.add_argument("--jitter-ms", type=float)
    sweep.add_argument("--real-clock", action="store_true", help="simulated store in real time")
    sweep.add_argument("--eval-cost-ms", type=float, help="virtual time per evaluation")
    _add_ea_options(sweep)
    sweep.add_argument("--out", default="results")

    node = sub.add_parser("node", help="run one node against a shared directory")
    node.add_argument("--store", required=True, help="shared (synced) root directory")
    node.add_argument("--id", required=True, dest="node_id")
    node.add_argument("--problem", required=True)
    node.add_argument("--experiment", default="default", help="namespace inside the store")
    node.add_argument("--gap", type=int, default=100)
    node.add_argument("--seed", type=int, default=0)
    _add_ea_options(node)

    report = sub.add_parser("report", help="summarize raw result CSV files")
    report.add_argument("raw", nargs="+")
    report.add_argument("--out", help="write the summary CSV here")
    return parser


_SPEC_FLAGS = {
    "problem": "problem", "reps": "repetitions", "seed": "base_seed",
    "experiment_id": "experiment_id", "backend": "backend", "store_root": "store_root",
    "base_ms": "base_ms", "jitter_ms": "jitter_ms", "eval_cost_ms": "eval_cost_ms",
    "population": "population", "max_generations": "max_generations",
    "mutation_rate": "mutation_rate", "crossover_rate": "crossover_rate", "delay_ms": "delay_ms",
}


def _cmd_run(args) -> int:
    spec = load_config(args.config)
    report = run_experiment(spec)
    raw, summ = write_outputs([report], args.out, spec.experiment_id)
    print(format_table(summarize([report])))
    print(f"wrote {raw} and {summ}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    base = load_config(args.config) if args.config else ExperimentSpec(experiment_id="sweep")
    overrides = {
        field: getattr(args, flag) for flag, field in _SPEC_FLAGS.items()
        if getattr(args, flag) is not None
    }
    if args.real_clock:
        overrides["virtual_clock"] = False
    base = base.with_overrides(**overrides)
    reports = run_sweep(base, args.nodes, args.gaps)
    raw, summ = write_outputs(reports, args.out, base.experiment_id)
    print(format_table(summarize(reports)))
    print(f"wrote {raw} and {summ}")
    return EXIT_OK


def _cmd_node(args) -> int:
    from .problems import parse_problem

    problem = parse_problem(args.problem)
    params = EAParams(
        population_size=args.population or 1000,
        per_bit_mutation_rate=args.mutation_rate,
        crossover_rate=0.5 if args.crossover_rate is None else args.crossover_rate,
        migration_gap=args.gap,
        post_migration_delay_ms=1000.0 if args.delay_ms is None else args.delay_ms,
        max_generations=args.max_generations,
    )
    clock = WallClock()
    store = DirectoryStore(args.store, args.experiment)
    client = PoolClient(store, args.node_id, clock)
    # a node joining by name gets a stream independent of its peers
    rng = make_rng(args.seed, zlib.crc32(args.node_id.encode()))
    result = run_node(args.node_id, params, problem, client, rng, clock)
    print(
        f"node_id={result.node_id} stop_reason={result.stop_reason} solved={int(result.solved)} "
        f"generations={result.generations} local_evaluations={result.local_evaluations} "
        f"best_fitness={result.best_fitness!r} wall_time_ms={int(round(result.wall_time))}"
    )
    return EXIT_OK


def _cmd_report(args) -> int:
    records = []
    for path in args.raw:
        records.extend(read_raw_csv(path))
    if not records:
        raise ConfigError("no runs found in the given files")
    rows = summarize(records)
    print(format_table(rows))
    if args.out:
        Path(args.out).write_text(summary_csv(rows))
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "node": _cmd_node, "report": _cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InvalidArgument) as exc:
        print(f"poolea: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NodeRunError as exc:
        print(f"poolea: node failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (PoolEAError, OSError) as exc:
        print(f"poolea: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
