"""Pool-based (topology-less island model) evolutionary algorithms over shared storage."""
from .engine import EAParams, NodeState, RunResult, init_node, step_generation
from .errors import (
    ConfigError,
    ConflictError,
    InvalidArgument,
    InvalidState,
    MigrationError,
    NodeRunError,
    NotFoundError,
    PoolEAError,
    ProtocolError,
    StoreError,
)
from .genome import (
    Individual,
    bit_flip_mutation,
    hamming,
    make_rng,
    random_genome,
    tournament_select,
    uniform_crossover,
)
from .harness import ExperimentReport, ExperimentSpec, run_experiment, run_sweep, summarize
from .node import Node, run_node, run_virtual
from .problems import (
    eval_mmdp,
    eval_ppeaks,
    is_solved,
    make_mmdp,
    make_ppeaks,
    parse_problem,
    unitation_fitness,
)
from .protocol import (
    PoolClient,
    PoolEntry,
    TerminationFlag,
    check_termination,
    emit_migrant,
    incorporate_migrant,
    receive_migrant,
    signal_termination,
)
from .store import DirectoryStore, LatencySimStore, SharedStore

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConflictError",
    "DirectoryStore",
    "EAParams",
    "ExperimentReport",
    "ExperimentSpec",
    "Individual",
    "InvalidArgument",
    "InvalidState",
    "LatencySimStore",
    "MigrationError",
    "Node",
    "NodeRunError",
    "NodeState",
    "NotFoundError",
    "PoolClient",
    "PoolEAError",
    "PoolEntry",
    "ProtocolError",
    "RunResult",
    "SharedStore",
    "StoreError",
    "TerminationFlag",
    "bit_flip_mutation",
    "check_termination",
    "emit_migrant",
    "eval_mmdp",
    "eval_ppeaks",
    "hamming",
    "incorporate_migrant",
    "init_node",
    "is_solved",
    "make_mmdp",
    "make_ppeaks",
    "make_rng",
    "parse_problem",
    "random_genome",
    "receive_migrant",
    "run_experiment",
    "run_node",
    "run_sweep",
    "run_virtual",
    "signal_termination",
    "step_generation",
    "summarize",
    "tournament_select",
    "uniform_crossover",
    "unitation_fitness",
]
