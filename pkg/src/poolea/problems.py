"""Benchmark landscapes: the P-Peaks problem generator and MMDP.

Problems are immutable; evaluation is a pure function, so one instance can be
shared by every node of an experiment. A problem is described in configs and
on the command line by a short descriptor such as ``mmdp:k=20`` or
``ppeaks:P=100,N=64,seed=7``. Peaks are never serialized, only their seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ConfigError, InvalidArgument
from .genome import as_genome, make_rng

SOLVED_EPSILON = 1e-9

# fitness of one 6-bit MMDP block indexed by its unitation
UNITATION_TABLE = (1.0, 0.0, 0.360384, 0.640576, 0.360384, 0.0, 1.0)
_UNITATION = np.array(UNITATION_TABLE)


@dataclass(frozen=True)
class PPeaksInstance:
    P: int
    N: int
    generator_seed: int
    peaks: np.ndarray = field(repr=False, compare=False)

    optimum_fitness = 1.0

    @property
    def genome_length(self) -> int:
        return self.N

    @property
    def descriptor(self) -> str:
        return f"ppeaks:P={self.P},N={self.N},seed={self.generator_seed}"

    def evaluate(self, g) -> float:
        return eval_ppeaks(self, g)

    def evaluate_batch(self, pop: np.ndarray) -> np.ndarray:
        pop = np.asarray(pop, dtype=np.float64)
        _check_length(pop.shape[-1], self.N)
        peaks = self.peaks.astype(np.float64)
        # hamming = |x| + |peak| - 2 x.peak; float64 BLAS is exact on these small integers
        distance = pop.sum(axis=1)[:, None] + peaks.sum(axis=1)[None, :] - 2.0 * (pop @ peaks.T)
        return (self.N - distance.min(axis=1)) / self.N


@dataclass(frozen=True)
class MmdpInstance:
    k: int

    @property
    def genome_length(self) -> int:
        return 6 * self.k

    @property
    def optimum_fitness(self) -> float:
        return float(self.k)

    @property
    def descriptor(self) -> str:
        return f"mmdp:k={self.k}"

    def evaluate(self, g) -> float:
        return eval_mmdp(self, g)

    def evaluate_batch(self, pop: np.ndarray) -> np.ndarray:
        pop = np.asarray(pop)
        _check_length(pop.shape[-1], self.genome_length)
        blocks = pop.reshape(pop.shape[0], self.k, 6)
        # six explicit adds beat a sum over a length-6 axis by ~3x
        unitation = sum(blocks[:, :, i].astype(np.intp) for i in range(6))
        return _UNITATION[unitation].sum(axis=1)


ProblemInstance = Union[PPeaksInstance, MmdpInstance]


def _check_length(got: int, want: int) -> None:
    if got != want:
        raise InvalidArgument(f"genome length {got} does not match problem length {want}")


def make_ppeaks(P: int, N: int, seed: int) -> PPeaksInstance:
    if P < 1 or N < 1:
        raise InvalidArgument(f"P-Peaks needs P >= 1 and N >= 1, got P={P}, N={N}")
    rng = make_rng(seed)
    peaks = (rng.random((P, N)) < 0.5).astype(np.uint8)
    peaks.setflags(write=False)
    return PPeaksInstance(P=P, N=N, generator_seed=seed, peaks=peaks)


def make_mmdp(k: int) -> MmdpInstance:
    if k < 1:
        raise InvalidArgument(f"MMDP needs k >= 1, got {k}")
    return MmdpInstance(k)


def eval_ppeaks(inst: PPeaksInstance, g) -> float:
    g = as_genome(g)
    _check_length(g.size, inst.N)
    distances = np.count_nonzero(inst.peaks != g, axis=1)
    return float((inst.N - distances.min()) / inst.N)


def unitation_fitness(u: int) -> float:
    if not 0 <= u <= 6:
        raise InvalidArgument(f"unitation must lie in [0, 6], got {u}")
    return UNITATION_TABLE[u]


def eval_mmdp(inst: MmdpInstance, g) -> float:
    g = as_genome(g)
    _check_length(g.size, inst.genome_length)
    # sum left to right in plain floats, like the batch path's reduction order
    return float(_UNITATION[g.reshape(inst.k, 6).sum(axis=1)].sum())


def is_solved(inst: ProblemInstance, fitness: float) -> bool:
    return fitness >= inst.optimum_fitness - SOLVED_EPSILON


def parse_problem(text: str) -> ProblemInstance:
    """Build a problem from a descriptor such as ``mmdp:k=20``."""
    kind, _, rest = text.strip().partition(":")
    params: dict[str, int] = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"bad problem parameter {item!r} in {text!r}")
        try:
            params[key.strip()] = int(value)
        except ValueError:
            raise ConfigError(f"problem parameter {key!r} is not an integer") from None
    kind = kind.lower()
    try:
        if kind == "mmdp":
            _only(params, {"k"}, text)
            return make_mmdp(params.get("k", 20))
        if kind in ("ppeaks", "p-peaks"):
            _only(params, {"P", "N", "seed"}, text)
            return make_ppeaks(params.get("P", 100), params.get("N", 64), params.get("seed", 0))
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown problem kind {kind!r}; expected mmdp or ppeaks")


def _only(params: dict, allowed: set, text: str) -> None:
    extra = set(params) - allowed
    if extra:
        raise ConfigError(f"unknown parameter(s) {sorted(extra)} in {text!r}")
