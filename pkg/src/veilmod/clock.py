"""Injectable millisecond clocks.

Server code never calls time.time() directly; it asks a clock. That keeps
simulated runs reproducible down to the byte.
"""

import time


class SystemClock:
    """Wall clock in integer milliseconds."""

    def now_ms(self) -> int:
        return int(time.time() * 1000)


class FakeClock:
    """Manually advanced clock for simulations and tests."""

    def __init__(self, start_ms: int = 1_700_000_000_000):
        self._now = int(start_ms)

    def now_ms(self) -> int:
        return self._now

    def advance(self, ms: int) -> int:
        if ms < 0:
            raise ValueError("clock cannot move backwards")
        self._now += int(ms)
        return self._now
