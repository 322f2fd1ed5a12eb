"""Bit-string genomes, seeded random streams and the GA variation operators.

A genome is a one-dimensional ``numpy.uint8`` array holding only 0 and 1.
Random streams are ``numpy.random.Generator`` objects backed by PCG64 and
seeded through ``SeedSequence``, so a given key tuple yields the same draws on
every platform numpy supports.

Each operator comes in a scalar form (one genome, used by tests and by the
pool protocol) and a batch form working on a 2-D population matrix (used by
the generational loop). Both forms implement the same distribution.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import InvalidArgument, InvalidState

RngStream = np.random.Generator

_SEED_MASK = (1 << 64) - 1

GenomeLike = Union[np.ndarray, str, Sequence[int]]


def make_rng(*keys: int) -> RngStream:
    """Return a PCG64 stream derived from one or more integer keys.

    ``make_rng(seed)`` is the plain seeded stream; ``make_rng(seed, rep, node)``
    gives independent per-node streams of one experiment.
    """
    if not keys:
        raise InvalidArgument("make_rng needs at least one key")
    entropy = [int(k) & _SEED_MASK for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def as_genome(bits: GenomeLike) -> np.ndarray:
    """Validate ``bits`` and return it as a uint8 genome array."""
    if isinstance(bits, str):
        if not bits or set(bits) - {"0", "1"}:
            raise InvalidArgument(f"not a bit string: {bits!r}")
        return np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
    arr = np.asarray(bits)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidArgument("a genome is a non-empty 1-D sequence of bits")
    if not np.isin(arr, (0, 1)).all():
        raise InvalidArgument("genome bits must be 0 or 1")
    return arr.astype(np.uint8, copy=False)


def genome_to_str(g: np.ndarray) -> str:
    return (np.asarray(g, dtype=np.uint8) + ord("0")).tobytes().decode("ascii")


@dataclass
class Individual:
    genome: np.ndarray
    fitness: Optional[float] = None

    @property
    def evaluated(self) -> bool:
        return self.fitness is not None


def random_genome(length: int, rng: RngStream) -> np.ndarray:
    if length < 1:
        raise InvalidArgument(f"genome length must be >= 1, got {length}")
    return (rng.random(length) < 0.5).astype(np.uint8)


def random_population(count: int, length: int, rng: RngStream) -> np.ndarray:
    if count < 1 or length < 1:
        raise InvalidArgument("population needs count >= 1 and length >= 1")
    return (rng.random((count, length)) < 0.5).astype(np.uint8)


def _check_same_length(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise InvalidArgument(f"genome length mismatch: {a.shape[-1]} != {b.shape[-1]}")


def hamming(a: GenomeLike, b: GenomeLike) -> int:
    a, b = as_genome(a), as_genome(b)
    _check_same_length(a, b)
    return int(np.count_nonzero(a != b))


def _check_rate(rate: float) -> None:
    if not 0.0 <= rate <= 1.0:
        raise InvalidArgument(f"mutation rate must lie in [0, 1], got {rate}")


def bit_flip_mutation(g: np.ndarray, per_bit_rate: float, rng: RngStream) -> np.ndarray:
    """Flip each bit independently with probability ``per_bit_rate``.

    The input is left untouched; a new array is returned.
    """
    _check_rate(per_bit_rate)
    g = as_genome(g)
    flips = rng.random(g.size) < per_bit_rate
    return g ^ flips.astype(np.uint8)


def bit_flip_mutation_batch(pop: np.ndarray, per_bit_rate: float, rng: RngStream) -> np.ndarray:
    """Batch bit-flip mutation, returning a mutated copy of ``pop``.

    Draws the total number of flips from Binomial(rows*cols, rate) and then
    that many distinct positions uniformly, which is the same law as flipping
    every bit independently but needs far fewer random draws at rate ~ 1/L.
    """
    _check_rate(per_bit_rate)
    out = np.array(pop, dtype=np.uint8, copy=True)
    total = out.size
    count = int(rng.binomial(total, per_bit_rate))
    if count:
        positions = rng.choice(total, size=count, replace=False)
        out.reshape(-1)[positions] ^= 1
    return out


def uniform_crossover(a: np.ndarray, b: np.ndarray, rng: RngStream) -> np.ndarray:
    """One child taking each bit from ``a`` or ``b`` with probability 1/2."""
    a, b = as_genome(a), as_genome(b)
    _check_same_length(a, b)
    from_a = rng.random(a.size) < 0.5
    return np.where(from_a, a, b)


def uniform_crossover_batch(
    a: np.ndarray, b: np.ndarray, rng: RngStream, rate: float = 1.0
) -> np.ndarray:
    """Row-wise uniform crossover of two parent matrices.

    Each row pair is crossed with probability ``rate``; rows that are not
    crossed are copies of the ``a`` row.
    """
    _check_same_length(a, b)
    if a.shape != b.shape:
        raise InvalidArgument(f"parent matrices differ in shape: {a.shape} vs {b.shape}")
    rows, length = a.shape
    # one random byte yields eight fair coin flips
    raw = rng.integers(0, 256, size=(rows, (length + 7) // 8), dtype=np.uint8)
    from_a = np.unpackbits(raw, axis=1, count=length)
    if rate < 1.0:
        from_a |= (rng.random(rows) >= rate).astype(np.uint8)[:, None]
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    return b ^ ((a ^ b) & from_a)


def _best_of_sample(fitness: np.ndarray, sample: np.ndarray) -> np.ndarray:
    sampled = fitness[sample]
    top = sampled.max(axis=-1, keepdims=True)
    # among tied winners keep the lowest population index
    return np.where(sampled == top, sample, np.iinfo(np.int64).max).min(axis=-1)


def tournament_select(population: Sequence[Individual], k: int, rng: RngStream) -> int:
    """Index of the fittest of ``k`` members drawn uniformly with replacement."""
    if k < 1:
        raise InvalidArgument(f"tournament size must be >= 1, got {k}")
    if len(population) == 0:
        raise InvalidState("tournament on an empty population")
    if any(ind.fitness is None for ind in population):
        raise InvalidState("tournament on a population with unevaluated members")
    fitness = np.array([ind.fitness for ind in population], dtype=float)
    sample = np.asarray(rng.integers(0, len(population), size=k), dtype=np.int64)
    return int(_best_of_sample(fitness, sample))


def tournament_select_batch(fitness: np.ndarray, k: int, count: int, rng: RngStream) -> np.ndarray:
    """``count`` independent tournaments over a fitness vector."""
    if k < 1:
        raise InvalidArgument(f"tournament size must be >= 1, got {k}")
    fitness = np.asarray(fitness, dtype=float)
    if fitness.size == 0:
        raise InvalidState("tournament on an empty population")
    if np.isnan(fitness).any():
        raise InvalidState("tournament on a population with unevaluated members")
    sample = rng.integers(0, fitness.size, size=(count, k), dtype=np.int64)
    return _best_of_sample(fitness, sample)


def individuals(genomes: np.ndarray, fitness: Iterable[float]) -> list[Individual]:
    return [Individual(g, float(f)) for g, f in zip(genomes, fitness)]
