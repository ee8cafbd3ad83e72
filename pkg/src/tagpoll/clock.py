"""Time sources shared by the hub, simulator, gateway and benchmark.

All components take their notion of "now" from one Clock instance so that
change timestamps and client receipt timestamps are comparable.  A ScaledClock
lets long experiments run compressed: virtual time advances `speed` times
faster than wall time while every recorded duration and timestamp stays in
virtual units.
"""

from __future__ import annotations

import threading
import time
from datetime import datetime, timedelta, timezone


def utc_ms(dt: datetime) -> datetime:
    """Quantize a datetime to UTC with millisecond precision."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    dt = dt.astimezone(timezone.utc)
    return dt.replace(microsecond=(dt.microsecond // 1000) * 1000)


class Clock:
    """Real-time clock. Base class for the scaled and manual variants."""

    def now(self) -> datetime:
        """Current instant, UTC, millisecond precision."""
        return utc_ms(datetime.now(timezone.utc))

    def monotonic(self) -> float:
        """Monotonic seconds, for measuring durations."""
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)

    def real_seconds(self, virtual_seconds: float) -> float:
        """Wall-clock seconds corresponding to a virtual duration.

        Used to convert wait timeouts before handing them to primitives
        (Condition.wait, asyncio.sleep) that run on wall time.
        """
        return virtual_seconds


class ScaledClock(Clock):
    """Virtual clock running `speed` times faster than wall time.

    speed=1.0 is real time.  speed=20 runs a 60 s schedule in 3 s while
    timestamps, durations and sleeps all remain expressed in virtual seconds.
    """

    def __init__(self, speed: float = 1.0):
        if speed <= 0:
            raise ValueError("speed must be positive")
        self.speed = float(speed)
        self._epoch = datetime.now(timezone.utc)
        self._mono0 = time.monotonic()

    def now(self) -> datetime:
        elapsed = (time.monotonic() - self._mono0) * self.speed
        return utc_ms(self._epoch + timedelta(seconds=elapsed))

    def monotonic(self) -> float:
        return (time.monotonic() - self._mono0) * self.speed

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds / self.speed)

    def real_seconds(self, virtual_seconds: float) -> float:
        return virtual_seconds / self.speed

    def monotonic_at(self, dt: datetime) -> float:
        """Map a datetime issued by this clock back to its monotonic scale."""
        return (dt - self._epoch).total_seconds()


class ManualClock(Clock):
    """Step-driven clock for deterministic tests.

    Only provides timestamps; it never waits.  Blocking waits against a
    ManualClock are a test-design error, so sleep() raises.
    """

    def __init__(self, start: datetime | None = None):
        self._lock = threading.Lock()
        self._now = utc_ms(start or datetime(2020, 1, 1, tzinfo=timezone.utc))
        self._mono = 0.0

    def advance(self, seconds: float) -> None:
        with self._lock:
            self._mono += seconds
            self._now = utc_ms(self._now + timedelta(seconds=seconds))

    def now(self) -> datetime:
        with self._lock:
            return self._now

    def monotonic(self) -> float:
        with self._lock:
            return self._mono

    def sleep(self, seconds: float) -> None:
        raise RuntimeError("ManualClock cannot sleep; advance() it instead")
