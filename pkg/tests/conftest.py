import pytest

from poolea.clock import VirtualClock
from poolea.protocol import PoolClient
from poolea.store import DirectoryStore, LatencySimStore


@pytest.fixture(params=["directory", "simulated"])
def pool_factory(request, tmp_path):
    """Build PoolClients on one zero-latency store of either backend."""
    clock = VirtualClock(start_ms=1_000_000)
    sim = LatencySimStore(base_ms=0, jitter_ms=0, seed=0, clock=clock)

    def make(node_id: str) -> PoolClient:
        if request.param == "directory":
            store = DirectoryStore(tmp_path, "exp", fsync=False)
        else:
            store = sim.participant(node_id)
        return PoolClient(store, node_id, clock)

    make.backend = request.param
    make.clock = clock
    return make


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
