"""Migration pool and termination flags on top of a :class:`SharedStore`.

Wire format: one store object per record, holding a single line of
``key=value`` pairs in a fixed order. Migrants live in
``migrant-<node>-<seq>.rec``, termination flags in ``done-<node>.rec``.
Fitness values are written with 17 significant digits so they round-trip
exactly.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .clock import WallClock
from .engine import STOP_REASONS, NodeState, RunResult
from .errors import ConflictError, InvalidArgument, MigrationError, ProtocolError, StoreError
from .genome import RngStream, as_genome, genome_to_str
from .store import NODE_ID_PATTERN, OBJECT_NAME, SharedStore

log = logging.getLogger(__name__)

KIND_BEST = "best"
KIND_RANDOM = "random"

MIGRANT_PREFIX = "migrant-"
DONE_PREFIX = "done-"

MIGRANT_FIELDS = ("node_id", "sequence", "kind", "fitness", "timestamp_ms", "genome")
FLAG_FIELDS = (
    "node_id", "timestamp_ms", "solved", "wall_time_ms", "local_evaluations",
    "generations", "best_fitness", "stop_reason",
)

SIGNAL_ATTEMPTS = 3


def check_node_id(node_id: str) -> str:
    if not re.fullmatch(NODE_ID_PATTERN, node_id):
        raise InvalidArgument(f"node id {node_id!r} must match {NODE_ID_PATTERN}")
    return node_id


def migrant_name(node_id: str, sequence: int) -> str:
    return f"{MIGRANT_PREFIX}{node_id}-{sequence}.rec"


def done_name(node_id: str) -> str:
    return f"{DONE_PREFIX}{node_id}.rec"


def _fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _encode(pairs) -> bytes:
    return (" ".join(f"{k}={v}" for k, v in pairs) + "\n").encode("ascii")


def _decode(payload: bytes, fields: tuple) -> dict[str, str]:
    try:
        text = payload.decode("ascii")
    except UnicodeDecodeError:
        raise ProtocolError("record is not ASCII") from None
    if not text.endswith("\n") or "\n" in text[:-1]:
        raise ProtocolError("record must be exactly one newline-terminated line")
    tokens = text.split()
    if len(tokens) != len(fields):
        raise ProtocolError(f"expected {len(fields)} fields, got {len(tokens)}")
    out = {}
    for token, want in zip(tokens, fields):
        key, sep, value = token.partition("=")
        if key != want or not sep:
            raise ProtocolError(f"expected field {want!r}, got {token!r}")
        out[key] = value
    return out


@dataclass(frozen=True)
class PoolEntry:
    node_id: str
    sequence: int
    genome: str  # ASCII 0/1
    fitness: float
    wall_timestamp: int  # ms
    kind: str = KIND_BEST

    @property
    def bits(self) -> np.ndarray:
        return as_genome(self.genome)

    @property
    def name(self) -> str:
        return migrant_name(self.node_id, self.sequence)

    @property
    def key(self) -> tuple[str, int]:
        return (self.node_id, self.sequence)

    def encode(self) -> bytes:
        return _encode(zip(MIGRANT_FIELDS, (
            self.node_id, self.sequence, self.kind, _fmt_float(self.fitness),
            self.wall_timestamp, self.genome,
        )))

    @classmethod
    def decode(cls, payload: bytes) -> "PoolEntry":
        f = _decode(payload, MIGRANT_FIELDS)
        try:
            entry = cls(
                node_id=check_node_id(f["node_id"]),
                sequence=int(f["sequence"]),
                genome=genome_to_str(as_genome(f["genome"])),
                fitness=float(f["fitness"]),
                wall_timestamp=int(f["timestamp_ms"]),
                kind=f["kind"],
            )
        except (ValueError, InvalidArgument) as exc:
            raise ProtocolError(f"bad migrant record: {exc}") from None
        if entry.kind not in (KIND_BEST, KIND_RANDOM):
            raise ProtocolError(f"bad migrant kind {entry.kind!r}")
        if entry.sequence < 0 or entry.fitness < 0:
            raise ProtocolError("sequence and fitness must be non-negative")
        return entry


@dataclass(frozen=True)
class TerminationFlag:
    node_id: str
    wall_timestamp: int
    result: RunResult

    def encode(self) -> bytes:
        r = self.result
        return _encode(zip(FLAG_FIELDS, (
            self.node_id, self.wall_timestamp, int(r.solved), int(round(r.wall_time)),
            r.local_evaluations, r.generations, _fmt_float(r.best_fitness), r.stop_reason,
        )))

    @classmethod
    def decode(cls, payload: bytes) -> "TerminationFlag":
        f = _decode(payload, FLAG_FIELDS)
        try:
            node_id = check_node_id(f["node_id"])
            if f["stop_reason"] not in STOP_REASONS:
                raise ValueError(f"unknown stop reason {f['stop_reason']!r}")
            result = RunResult(
                node_id=node_id,
                solved=f["solved"] == "1",
                wall_time=float(int(f["wall_time_ms"])),
                local_evaluations=int(f["local_evaluations"]),
                generations=int(f["generations"]),
                best_fitness=float(f["best_fitness"]),
                stop_reason=f["stop_reason"],
            )
            return cls(node_id, int(f["timestamp_ms"]), result)
        except (ValueError, InvalidArgument) as exc:
            raise ProtocolError(f"bad termination record: {exc}") from None


class PoolClient:
    """A node's handle on the migration pool; owned by exactly one node."""

    def __init__(self, store: SharedStore, node_id: str, clock=None):
        self.store = store
        self.node_id = check_node_id(node_id)
        self.clock = clock if clock is not None else WallClock()
        self.next_sequence = 0
        self.last_incorporated: Optional[tuple[str, int]] = None
        self.signaled = False
        # store objects are write-once, so decoded records can be cached forever
        self._migrants: dict[str, PoolEntry] = {}
        self._flags: dict[str, TerminationFlag] = {}
        self._bad: set[str] = set()

    def now_ms(self) -> int:
        return int(round(self.clock.now_ms()))

    def _read(self, name: str, decoder):
        try:
            return decoder(self.store.get(name))
        except ProtocolError as exc:
            log.warning("%s: discarding %s: %s", self.node_id, name, exc)
            self._bad.add(name)
            return None

    def visible_migrants(self) -> list[PoolEntry]:
        for name in sorted(self.store.list(MIGRANT_PREFIX)):
            if name in self._migrants or name in self._bad:
                continue
            entry = self._read(name, PoolEntry.decode)
            if entry is None:
                continue
            if entry.name != name:
                log.warning("%s: record %s claims name %s", self.node_id, name, entry.name)
                self._bad.add(name)
                continue
            self._migrants[name] = entry
        return list(self._migrants.values())

    def visible_flags(self) -> list[TerminationFlag]:
        for name in sorted(self.store.list(DONE_PREFIX)):
            if name in self._flags or name in self._bad:
                continue
            flag = self._read(name, TerminationFlag.decode)
            if flag is not None:
                self._flags[name] = flag
        return list(self._flags.values())


def emit_migrant(client: PoolClient, state: NodeState, rng: RngStream) -> PoolEntry:
    """Publish the best individual, or a random one if the best is unchanged.

    Resets ``state.best_changed_since_last_migration`` on success. On a store
    failure the state and the sequence counter are left as they were, so the
    next migration event simply tries again.
    """
    if state.best_changed_since_last_migration:
        genome, fitness, kind = state.best_genome, state.best_fitness, KIND_BEST
    else:
        i = int(rng.integers(0, state.size))
        genome, fitness, kind = state.genomes[i], float(state.fitness[i]), KIND_RANDOM
    entry = PoolEntry(
        node_id=client.node_id,
        sequence=client.next_sequence,
        genome=genome_to_str(genome),
        fitness=float(fitness),
        wall_timestamp=client.now_ms(),
        kind=kind,
    )
    try:
        client.store.put(entry.name, entry.encode())
    except StoreError as exc:
        raise MigrationError(f"emit of {entry.name} failed: {exc}") from exc
    client.next_sequence += 1
    client._migrants[entry.name] = entry
    state.best_changed_since_last_migration = False
    return entry


def _winner_key(e: PoolEntry):
    # max fitness, then latest timestamp, then smallest node id, then highest sequence
    return (-e.fitness, -e.wall_timestamp, e.node_id, -e.sequence)


def receive_migrant(client: PoolClient) -> Optional[PoolEntry]:
    """Best visible entry emitted by another node, or ``None``.

    Returns ``None`` as well when the winner is the entry incorporated last
    time, so an unchanged pool never injects the same migrant twice.
    """
    try:
        entries = client.visible_migrants()
    except StoreError as exc:
        raise MigrationError(f"pool read failed: {exc}") from exc
    foreign = [e for e in entries if e.node_id != client.node_id]
    if not foreign:
        return None
    winner = min(foreign, key=_winner_key)
    if winner.key == client.last_incorporated:
        return None
    client.last_incorporated = winner.key
    return winner


def incorporate_migrant(state: NodeState, entry: PoolEntry) -> NodeState:
    """Replace the worst member (lowest index on ties) by the migrant."""
    bits = entry.bits
    if bits.size != state.genomes.shape[1]:
        raise ProtocolError(
            f"migrant {entry.name} has length {bits.size}, population uses {state.genomes.shape[1]}"
        )
    new = state.copy()
    worst = int(np.argmin(new.fitness))
    new.genomes[worst] = bits
    new.fitness[worst] = entry.fitness
    new.note_candidate_best(bits, entry.fitness)
    return new


def signal_termination(client: PoolClient, result: RunResult) -> None:
    """Publish this node's termination flag. Repeated calls are no-ops."""
    if client.signaled:
        return
    flag = TerminationFlag(client.node_id, client.now_ms(), result)
    payload = flag.encode()
    last_exc: Optional[Exception] = None
    for _ in range(SIGNAL_ATTEMPTS):
        try:
            client.store.put(done_name(client.node_id), payload)
        except ConflictError:
            break  # an earlier flag from this node is already published
        except StoreError as exc:
            last_exc = exc
            continue
        client._flags[done_name(client.node_id)] = flag
        break
    else:
        raise StoreError(f"could not publish termination flag: {last_exc}")
    client.signaled = True


def check_termination(client: PoolClient) -> Optional[TerminationFlag]:
    """Earliest visible termination flag (ties by node id), or ``None``."""
    try:
        flags = client.visible_flags()
    except StoreError as exc:
        log.warning("%s: termination check failed: %s", client.node_id, exc)
        return None
    if not flags:
        return None
    return min(flags, key=lambda f: (f.wall_timestamp, f.node_id))


def parse_record_name(name: str) -> Optional[dict]:
    m = OBJECT_NAME.match(name)
    return m.groupdict() if m else None
