"""Experiment orchestration: repetitions, sweeps, CSV output and summaries.

An experiment runs ``repetitions`` independent repetitions of ``node_count``
nodes sharing one problem instance and a fresh store namespace. Node ``n`` of
repetition ``r`` draws its random stream from ``(base_seed, r, n)``.

Backends:

* ``simulated`` with the virtual clock (default): all nodes in this process,
  interleaved in virtual time; reports are byte-for-byte reproducible.
* ``simulated`` with ``virtual_clock = false``: one thread per node against
  the in-memory store in real time.
* ``directory``: one child process per node against a :class:`DirectoryStore`
  rooted at ``store_root`` (which may be a synced folder).
"""
from __future__ import annotations

import csv
import dataclasses
import io
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .clock import VirtualClock, WallClock
from .engine import STOP_FOUND, EAParams, RunResult
from .errors import ConfigError, InvalidArgument, NodeRunError
from .genome import make_rng
from .node import Node, run_node, run_virtual
from .problems import parse_problem
from .protocol import PoolClient
from .store import DirectoryStore, LatencySimStore

log = logging.getLogger(__name__)

BACKENDS = ("simulated", "directory")

RAW_COLUMNS = (
    "experiment_id", "repetition", "node_count", "gap", "solved", "first_solve_ms",
    "aggregate_evaluations", "per_node_evaluations", "stop_reasons", "last_stop_ms", "failure",
)
SUMMARY_COLUMNS = (
    "node_count", "gap", "runs", "solved_runs", "success_rate",
    "mean_time_ms", "median_time_ms", "mean_evaluations",
)

# config key -> (ExperimentSpec field, converter)
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text: str) -> Optional[int]:
    return None if text.strip().lower() in ("", "none", "default") else int(text)


def _opt_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("", "none", "default") else float(text)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


CONFIG_KEYS = {
    "experiment_id": ("experiment_id", str),
    "problem": ("problem", str),
    "nodes": ("node_count", int),
    "gap": ("migration_gap", int),
    "reps": ("repetitions", int),
    "seed": ("base_seed", int),
    "backend": ("backend", str),
    "store_root": ("store_root", str),
    "base_ms": ("base_ms", float),
    "jitter_ms": ("jitter_ms", float),
    "virtual_clock": ("virtual_clock", _bool),
    "population": ("population", int),
    "mutation_rate": ("mutation_rate", _opt_float),
    "crossover_rate": ("crossover_rate", float),
    "max_generations": ("max_generations", _opt_int),
    "min_evaluations": ("min_evaluations", int),
    "delay_ms": ("delay_ms", float),
    "eval_cost_ms": ("eval_cost_ms", float),
    "slowdowns": ("slowdowns", _floats),
}


@dataclass(frozen=True)
class ExperimentSpec:
    experiment_id: str = "experiment"
    problem: str = "mmdp:k=20"
    node_count: int = 1
    migration_gap: int = 100
    repetitions: int = 1
    base_seed: int = 0
    backend: str = "simulated"
    store_root: Optional[str] = None
    base_ms: float = 1000.0
    jitter_ms: float = 500.0
    virtual_clock: bool = True
    population: int = 1000
    mutation_rate: Optional[float] = None
    crossover_rate: float = 0.5
    max_generations: Optional[int] = None
    min_evaluations: int = 4_000_000
    delay_ms: float = 0.0
    eval_cost_ms: float = 0.05
    slowdowns: tuple[float, ...] = ()

    def __post_init__(self):
        if self.node_count < 1 or self.repetitions < 1:
            raise ConfigError("nodes and reps must be >= 1")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.backend == "directory" and not self.store_root:
            raise ConfigError("the directory backend needs store_root")
        if self.base_seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.eval_cost_ms < 0 or any(s <= 0 for s in self.slowdowns):
            raise ConfigError("eval_cost_ms must be >= 0 and slowdowns > 0")
        try:
            self.ea_params()
        except InvalidArgument as exc:
            raise ConfigError(str(exc)) from None
        self.problem_instance()

    def ea_params(self) -> EAParams:
        return EAParams(
            population_size=self.population,
            per_bit_mutation_rate=self.mutation_rate,
            crossover_rate=self.crossover_rate,
            migration_gap=self.migration_gap,
            post_migration_delay_ms=self.delay_ms,
            min_evaluations=self.min_evaluations,
            max_generations=self.max_generations,
        )

    def problem_instance(self):
        return parse_problem(self.problem)

    def slowdown(self, node: int) -> float:
        return self.slowdowns[node] if node < len(self.slowdowns) else 1.0

    def node_seed(self, repetition: int, node: int) -> tuple[int, int, int]:
        return (self.base_seed, repetition, node)

    def store_seed(self, repetition: int) -> int:
        return int(make_rng(self.base_seed, repetition, 1 << 32).integers(1 << 62))

    def namespace(self, repetition: int) -> str:
        return f"{self.experiment_id}-r{repetition}"

    def with_overrides(self, **changes) -> "ExperimentSpec":
        return dataclasses.replace(self, **changes)

    def to_config(self) -> str:
        lines = []
        for key, (attr, _) in CONFIG_KEYS.items():
            value = getattr(self, attr)
            if value is None:
                continue
            if isinstance(value, tuple):
                if not value:
                    continue
                value = ",".join(repr(v) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def parse_config(text: str) -> ExperimentSpec:
    """Parse line-oriented ``key = value`` text; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, conv = CONFIG_KEYS[key]
        try:
            values[attr] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    backend = values.get("backend")
    if backend and backend.startswith("directory:"):
        values["backend"], values["store_root"] = "directory", backend.split(":", 1)[1]
    return ExperimentSpec(**values)


def load_config(path) -> ExperimentSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


@dataclass
class RunRecord:
    experiment_id: str
    repetition: int
    node_count: int
    gap: int
    solved: bool
    first_solve_ms: Optional[int]
    aggregate_evaluations: int
    per_node_evaluations: list[int]
    stop_reasons: list[str]
    last_stop_ms: Optional[int] = None
    failure: Optional[str] = None
    node_results: list[RunResult] = field(default_factory=list, repr=False)

    @property
    def failed(self) -> bool:
        return self.failure is not None

    @property
    def solver_evaluations(self) -> Optional[int]:
        """Local evaluations of the first node that stopped with ``found``."""
        found = [
            (r.start_timestamp + r.wall_time, r.local_evaluations)
            for r in self.node_results if r.stop_reason == STOP_FOUND
        ]
        if found:
            return min(found)[1]
        for evals, reason in zip(self.per_node_evaluations, self.stop_reasons):
            if reason == STOP_FOUND:
                return evals
        return None


@dataclass
class SummaryRow:
    node_count: int
    gap: int
    runs: int
    solved_runs: int
    success_rate: float
    mean_time_ms: Optional[float]
    median_time_ms: Optional[float]
    mean_evaluations: Optional[float]


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    runs: list[RunRecord]

    @property
    def summary(self) -> SummaryRow:
        return summarize([self])[0]

    @property
    def success_rate(self) -> float:
        return self.summary.success_rate


def _record(spec: ExperimentSpec, rep: int, results: Sequence[RunResult], t0: float) -> RunRecord:
    solve_times = [
        r.start_timestamp + r.wall_time - t0 for r in results if r.stop_reason == STOP_FOUND
    ]
    stop_times = [r.start_timestamp + r.wall_time - t0 for r in results]
    evals = [r.local_evaluations for r in results]
    return RunRecord(
        experiment_id=spec.experiment_id,
        repetition=rep,
        node_count=spec.node_count,
        gap=spec.migration_gap,
        solved=bool(solve_times),
        first_solve_ms=int(round(min(solve_times))) if solve_times else None,
        aggregate_evaluations=sum(evals),
        per_node_evaluations=evals,
        stop_reasons=[r.stop_reason for r in results],
        last_stop_ms=int(round(max(stop_times))),
        node_results=list(results),
    )


def _failed_record(spec: ExperimentSpec, rep: int, reason: str, results=()) -> RunRecord:
    results = [r for r in results if r is not None]
    return RunRecord(
        experiment_id=spec.experiment_id,
        repetition=rep,
        node_count=spec.node_count,
        gap=spec.migration_gap,
        solved=False,
        first_solve_ms=None,
        aggregate_evaluations=sum(r.local_evaluations for r in results),
        per_node_evaluations=[r.local_evaluations for r in results],
        stop_reasons=[r.stop_reason for r in results],
        failure=reason,
        node_results=results,
    )


def _node_id(n: int) -> str:
    return f"node{n}"


def _run_virtual_rep(spec: ExperimentSpec, rep: int, problem) -> RunRecord:
    clock = VirtualClock()
    backend = LatencySimStore(spec.base_ms, spec.jitter_ms, seed=spec.store_seed(rep), clock=clock)
    params = spec.ea_params()
    nodes = []
    for n in range(spec.node_count):
        nid = _node_id(n)
        client = PoolClient(backend.participant(nid), nid, clock)
        nodes.append(Node(
            nid, params, problem, client, make_rng(*spec.node_seed(rep, n)), clock,
            eval_cost_ms=spec.eval_cost_ms, slowdown=spec.slowdown(n),
        ))
    try:
        results = run_virtual(nodes, clock)
    except NodeRunError as exc:
        return _failed_record(spec, rep, str(exc), [node.result for node in nodes])
    return _record(spec, rep, results, 0.0)


def _real_node_worker(spec: ExperimentSpec, rep: int, n: int, store=None) -> RunResult:
    """Entry point of one real-time node (thread or child process)."""
    nid = _node_id(n)
    clock = WallClock()
    if store is None:
        store = DirectoryStore(spec.store_root, spec.namespace(rep))
    client = PoolClient(store, nid, clock)
    return run_node(
        nid, spec.ea_params(), spec.problem_instance(), client, make_rng(*spec.node_seed(rep, n)),
        clock, eval_cost_ms=0.0 if spec.backend == "directory" else spec.eval_cost_ms,
        slowdown=spec.slowdown(n),
    )


def _collect(spec: ExperimentSpec, rep: int, futures, t0: float) -> RunRecord:
    results, errors = [], []
    for fut in futures:
        try:
            results.append(fut.result())
        except NodeRunError as exc:
            results.append(exc.result)
            errors.append(str(exc))
        except Exception as exc:  # worker crash of any kind fails the repetition
            results.append(None)
            errors.append(f"{type(exc).__name__}: {exc}")
    if errors:
        return _failed_record(spec, rep, "; ".join(errors), results)
    return _record(spec, rep, results, t0)


def _run_threaded_rep(spec: ExperimentSpec, rep: int) -> RunRecord:
    clock = WallClock()
    backend = LatencySimStore(spec.base_ms, spec.jitter_ms, seed=spec.store_seed(rep), clock=clock)
    t0 = clock.now_ms()
    with ThreadPoolExecutor(max_workers=spec.node_count) as pool:
        futures = [
            pool.submit(_real_node_worker, spec, rep, n, backend.participant(_node_id(n)))
            for n in range(spec.node_count)
        ]
        return _collect(spec, rep, futures, t0)


def _run_process_rep(spec: ExperimentSpec, rep: int) -> RunRecord:
    store = DirectoryStore(spec.store_root, spec.namespace(rep))
    if store.list():
        return _failed_record(
            spec, rep, f"store namespace {store.path} is not empty; pick a new experiment_id"
        )
    t0 = WallClock().now_ms()
    with ProcessPoolExecutor(max_workers=spec.node_count) as pool:
        futures = [pool.submit(_real_node_worker, spec, rep, n) for n in range(spec.node_count)]
        return _collect(spec, rep, futures, t0)


def run_repetition(spec: ExperimentSpec, rep: int) -> RunRecord:
    if spec.backend == "directory":
        return _run_process_rep(spec, rep)
    if spec.virtual_clock:
        return _run_virtual_rep(spec, rep, spec.problem_instance())
    return _run_threaded_rep(spec, rep)


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    records = []
    for rep in range(spec.repetitions):
        record = run_repetition(spec, rep)
        log.info(
            "%s rep %d: solved=%s first_solve_ms=%s evals=%d%s",
            spec.experiment_id, rep, record.solved, record.first_solve_ms,
            record.aggregate_evaluations, f" FAILED: {record.failure}" if record.failed else "",
        )
        records.append(record)
    return ExperimentReport(spec, records)


def run_sweep(base: ExperimentSpec, nodes: Iterable[int], gaps: Iterable[int]) -> list[ExperimentReport]:
    """Run the node-count x migration-gap matrix, grouped by gap first."""
    reports = []
    for gap in gaps:
        for n in nodes:
            spec = base.with_overrides(
                experiment_id=f"{base.experiment_id}-n{n}-g{gap}", node_count=n, migration_gap=gap
            )
            reports.append(run_experiment(spec))
    return reports


def _records(items) -> list[RunRecord]:
    out = []
    for item in items:
        if isinstance(item, ExperimentReport):
            out.extend(item.runs)
        else:
            out.append(item)
    return out


def summarize(reports) -> list[SummaryRow]:
    """One row per (node_count, gap) over reports or raw run records."""
    records = _records(reports)
    if not records:
        raise InvalidArgument("summarize needs at least one run")
    cells: dict[tuple[int, int], list[RunRecord]] = {}
    for rec in records:
        cells.setdefault((rec.node_count, rec.gap), []).append(rec)
    rows = []
    for (n, gap), recs in cells.items():
        times = [r.first_solve_ms for r in recs if r.solved and not r.failed]
        evals = [r.aggregate_evaluations for r in recs if not r.failed]
        solved = sum(1 for r in recs if r.solved)
        rows.append(SummaryRow(
            node_count=n,
            gap=gap,
            runs=len(recs),
            solved_runs=solved,
            success_rate=solved / len(recs),
            mean_time_ms=statistics.fmean(times) if times else None,
            median_time_ms=float(statistics.median(times)) if times else None,
            mean_evaluations=statistics.fmean(evals) if evals else None,
        ))
    return rows


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ";".join(str(v) for v in value)
    return str(value)


def raw_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RAW_COLUMNS)
    for rec in _records(reports):
        writer.writerow([_cell(getattr(rec, col)) for col in RAW_COLUMNS])
    return buf.getvalue()


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for row in rows:
        writer.writerow([_cell(getattr(row, col)) for col in SUMMARY_COLUMNS])
    return buf.getvalue()


def read_raw_csv(path) -> list[RunRecord]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read results {path}: {exc}") from None
    reader = csv.DictReader(io.StringIO(text))
    missing = set(RAW_COLUMNS[:9]) - set(reader.fieldnames or ())
    if missing:
        raise ConfigError(f"{path}: missing columns {sorted(missing)}")
    records = []
    for row in reader:
        try:
            records.append(RunRecord(
                experiment_id=row["experiment_id"],
                repetition=int(row["repetition"]),
                node_count=int(row["node_count"]),
                gap=int(row["gap"]),
                solved=row["solved"] == "1",
                first_solve_ms=int(row["first_solve_ms"]) if row["first_solve_ms"] else None,
                aggregate_evaluations=int(row["aggregate_evaluations"]),
                per_node_evaluations=[int(x) for x in row["per_node_evaluations"].split(";") if x],
                stop_reasons=[x for x in row["stop_reasons"].split(";") if x],
                last_stop_ms=int(row["last_stop_ms"]) if row.get("last_stop_ms") else None,
                failure=row.get("failure") or None,
            ))
        except ValueError as exc:
            raise ConfigError(f"{path}: bad row {reader.line_num}: {exc}") from None
    return records


def format_table(rows: Sequence[SummaryRow]) -> str:
    header = f"{'nodes':>5} {'gap':>5} {'runs':>5} {'success':>8} {'mean_ms':>12} {'median_ms':>12} {'mean_evals':>14}"
    lines = [header]
    for r in rows:
        def num(v):
            return "-" if v is None else f"{v:.1f}"
        lines.append(
            f"{r.node_count:>5} {r.gap:>5} {r.runs:>5} {r.success_rate:>8.3f} "
            f"{num(r.mean_time_ms):>12} {num(r.median_time_ms):>12} {num(r.mean_evaluations):>14}"
        )
    return "\n".join(lines)


def write_outputs(reports, out_dir, stem: str) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    raw_path = out / f"{stem}.raw.csv"
    summary_path = out / f"{stem}.summary.csv"
    raw_path.write_text(raw_csv(reports))
    summary_path.write_text(summary_csv(summarize(reports)))
    return raw_path, summary_path
