"""Wall-clock abstraction so time-dependent behavior is testable.

SystemClock wraps the real monotonic clock.  VirtualClock only moves when a
test advances it: sleeping threads block until the virtual time passes their
deadline, which makes rate limiting, backoff, and latency simulation fully
deterministic.
"""

from __future__ import annotations

import itertools
import threading
import time


class SystemClock:
    def time(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class VirtualClock:
    """Manually advanced clock for deterministic concurrency tests."""

    def __init__(self, start: float = 0.0):
        self._now = start
        self._cond = threading.Condition()
        self._sleepers: dict[int, float] = {}
        self._ids = itertools.count()

    def time(self) -> float:
        with self._cond:
            return self._now

    def sleep(self, seconds: float) -> None:
        if seconds <= 0:
            return
        with self._cond:
            token = next(self._ids)
            deadline = self._now + seconds
            self._sleepers[token] = deadline
            self._cond.notify_all()
            while self._now < deadline:
                self._cond.wait()
            del self._sleepers[token]
            self._cond.notify_all()

    def advance(self, seconds: float) -> None:
        """Move time forward, waking any sleeper whose deadline has passed."""
        with self._cond:
            self._now += seconds
            self._cond.notify_all()

    def advance_to_next_deadline(self) -> float:
        """Jump to the earliest pending wake-up; returns the new time."""
        with self._cond:
            pending = [d for d in self._sleepers.values() if d > self._now]
            if pending:
                self._now = min(pending)
                self._cond.notify_all()
            return self._now

    def wait_for_sleepers(self, count: int, timeout: float = 30.0) -> None:
        """Block (in real time) until exactly `count` threads sleep on a
        future deadline.  Lets tests advance time only between full waves."""
        deadline = time.monotonic() + timeout
        with self._cond:
            while True:
                fresh = sum(1 for d in self._sleepers.values() if d > self._now)
                if fresh == count:
                    return
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise TimeoutError(
                        f"expected {count} sleepers, have {fresh} after {timeout}s"
                    )
                self._cond.wait(timeout=remaining)
