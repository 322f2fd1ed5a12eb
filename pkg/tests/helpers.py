from dataclasses import dataclass

from poolea.clock import VirtualClock
from poolea.genome import make_rng
from poolea.node import Node
from poolea.protocol import PoolClient
from poolea.store import LatencySimStore


@dataclass(frozen=True)
class ForcedSolve:
    """Wraps a problem so that any fitness counts as solved (first check succeeds)."""

    inner: object

    @property
    def genome_length(self):
        return self.inner.genome_length

    optimum_fitness = float("-inf")

    def evaluate(self, g):
        return self.inner.evaluate(g)

    def evaluate_batch(self, pop):
        return self.inner.evaluate_batch(pop)


def sim_nodes(n, params, problem, base=1000.0, jitter=500.0, seed=0, slowdowns=None,
              problems=None, eval_cost_ms=0.05):
    clock = VirtualClock()
    sim = LatencySimStore(base, jitter, seed=seed, clock=clock)
    nodes = []
    for i in range(n):
        nid = f"node{i}"
        client = PoolClient(sim.participant(nid), nid, clock)
        nodes.append(Node(
            nid, params, problems[i] if problems else problem, client, make_rng(seed, 0, i), clock,
            eval_cost_ms=eval_cost_ms, slowdown=(slowdowns or [1.0] * n)[i],
        ))
    return nodes, clock, sim
