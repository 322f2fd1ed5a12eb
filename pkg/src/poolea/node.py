"""The node loop: evolve, migrate through the pool, watch for termination.

A :class:`Node` advances one generation per :meth:`Node.advance` call and
returns how long it then stays busy (modelled evaluation cost plus the
post-migration pause). :func:`run_node` drives a single node in real time;
:func:`run_virtual` interleaves several nodes on a virtual clock in strict
time order, which makes multi-node runs reproducible bit for bit.
"""
from __future__ import annotations

import heapq
import logging
from typing import Optional, Sequence

from .clock import VirtualClock, WallClock
from .engine import (
    STOP_BUDGET,
    STOP_FOUND,
    STOP_SIGNALED,
    EAParams,
    NodeState,
    RunResult,
    init_node,
    step_generation,
)
from .errors import MigrationError, NodeRunError, ProtocolError, StoreError
from .genome import RngStream
from .problems import ProblemInstance, is_solved
from .protocol import (
    PoolClient,
    check_termination,
    emit_migrant,
    incorporate_migrant,
    receive_migrant,
    signal_termination,
)

log = logging.getLogger(__name__)


class Node:
    """One island of a pool-based EA.

    ``eval_cost_ms`` is the modelled time of one fitness evaluation; under a
    virtual clock it is the only thing that makes time pass during evolution.
    ``slowdown`` multiplies it, standing in for a slower machine.
    """

    def __init__(
        self,
        node_id: str,
        params: EAParams,
        problem: ProblemInstance,
        client: PoolClient,
        rng: RngStream,
        clock=None,
        eval_cost_ms: float = 0.0,
        slowdown: float = 1.0,
    ):
        self.node_id = node_id
        self.params = params
        self.problem = problem
        self.client = client
        self.rng = rng
        self.clock = clock if clock is not None else client.clock
        self.eval_cost_ms = eval_cost_ms * slowdown
        self.state: Optional[NodeState] = None
        self.result: Optional[RunResult] = None
        self.migrations = 0
        self.incorporated = 0
        self._started_at = 0.0

    @property
    def done(self) -> bool:
        return self.result is not None

    def start(self) -> float:
        self._started_at = self.clock.now_ms()
        self.state = init_node(self.params, self.problem, self.rng)
        return self.eval_cost_ms * self.params.population_size

    def _finish(self, reason: str, error: Optional[str] = None) -> RunResult:
        st = self.state
        self.result = RunResult(
            node_id=self.node_id,
            solved=is_solved(self.problem, st.best_fitness),
            wall_time=self.clock.now_ms() - self._started_at,
            local_evaluations=st.local_evaluations,
            generations=st.generation,
            best_fitness=st.best_fitness,
            stop_reason=reason,
            start_timestamp=self._started_at,
            error=error,
        )
        return self.result

    def _migrate(self) -> None:
        self.migrations += 1
        try:
            emit_migrant(self.client, self.state, self.rng)
        except MigrationError as exc:
            log.warning("%s: %s", self.node_id, exc)
        try:
            entry = receive_migrant(self.client)
        except MigrationError as exc:
            log.warning("%s: %s", self.node_id, exc)
            return
        if entry is None:
            return
        try:
            self.state = incorporate_migrant(self.state, entry)
            self.incorporated += 1
        except ProtocolError as exc:
            log.warning("%s: %s", self.node_id, exc)

    def advance(self) -> Optional[float]:
        """Run one generation; return busy time in ms, or ``None`` once stopped."""
        if self.result is not None:
            return None
        params = self.params
        self.state = step_generation(self.state, params, self.problem, self.rng)
        busy = self.eval_cost_ms * params.offspring_per_generation
        if self.state.generation % params.migration_gap == 0:
            self._migrate()
            busy += params.post_migration_delay_ms

        if is_solved(self.problem, self.state.best_fitness):
            result = self._finish(STOP_FOUND)
            try:
                signal_termination(self.client, result)
            except StoreError as exc:
                result.error = str(exc)
                raise NodeRunError(f"{self.node_id}: {exc}", result) from exc
            return None
        flag = check_termination(self.client)
        if flag is not None and flag.node_id != self.node_id:
            self._finish(STOP_SIGNALED)
            return None
        if self.state.generation >= params.generation_limit:
            self._finish(STOP_BUDGET)
            return None
        return busy


def run_node(
    node_id: str,
    params: EAParams,
    problem: ProblemInstance,
    pool: PoolClient,
    rng: RngStream,
    clock=None,
    eval_cost_ms: float = 0.0,
    slowdown: float = 1.0,
) -> RunResult:
    """Run one node to completion in real time (sleeping through delays)."""
    clock = clock if clock is not None else WallClock()
    node = Node(node_id, params, problem, pool, rng, clock, eval_cost_ms, slowdown)
    clock.sleep_ms(node.start())
    try:
        while True:
            busy = node.advance()
            if busy is None:
                return node.result
            clock.sleep_ms(busy)
    except NodeRunError:
        raise
    except StoreError as exc:
        result = node._finish(STOP_BUDGET, error=str(exc))
        raise NodeRunError(f"{node_id}: {exc}", result) from exc


def run_virtual(nodes: Sequence[Node], clock: VirtualClock) -> list[RunResult]:
    """Drive ``nodes`` on ``clock`` until all stop; simultaneous events go by list order."""
    queue: list[tuple[float, int]] = []
    start = clock.now_ms()
    for i, node in enumerate(nodes):
        heapq.heappush(queue, (start + node.start(), i))
    while queue:
        t, i = heapq.heappop(queue)
        clock.advance_to(t)
        busy = nodes[i].advance()
        if busy is not None:
            heapq.heappush(queue, (t + busy, i))
    return [node.result for node in nodes]
