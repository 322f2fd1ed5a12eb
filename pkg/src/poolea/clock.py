"""Millisecond clocks: real wall time and a manually advanced virtual time."""
from __future__ import annotations

import time


class WallClock:
    def now_ms(self) -> float:
        return time.time() * 1000.0

    def sleep_ms(self, ms: float) -> None:
        if ms > 0:
            time.sleep(ms / 1000.0)


class VirtualClock:
    """Time advances only when the scheduler moves it forward."""

    def __init__(self, start_ms: float = 0.0):
        self._now = float(start_ms)

    def now_ms(self) -> float:
        return self._now

    def advance_to(self, t_ms: float) -> None:
        if t_ms < self._now:
            raise ValueError(f"cannot go back in time: {t_ms} < {self._now}")
        self._now = float(t_ms)

    def sleep_ms(self, ms: float) -> None:
        raise RuntimeError("virtual time only moves through the scheduler")
