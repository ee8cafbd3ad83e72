"""Plant-change simulator: writes fresh random values to all tags on a schedule.

Each tick draws one uniform integer per tag and issues a single batch write,
so one tick produces at most one data-change event. The ground-truth log of
change timestamps is what the benchmark measures latency against.

Schedules run in virtual time through the shared clock, so a 60 s experiment
can be compressed without touching any recorded duration.
"""

from __future__ import annotations

import csv
import random
import threading
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterator, Union

from .clock import Clock, ScaledClock
from .hub import TagHub
from .wire import format_timestamp

MIN_DELAY_MS = 10.0


class SimError(Exception):
    pass


class AlreadyRunning(SimError):
    pass


class NotRunning(SimError):
    pass


@dataclass(frozen=True)
class Fixed:
    """Tick every interval_ms on a drift-free grid.

    With phase_dither, each tick still lands once per interval-wide slot but
    at a uniformly random offset inside it; counts per duration are unchanged
    while change phases become ergodic relative to any fixed-rate poller.
    """

    interval_ms: int = 1000
    phase_dither: bool = False

    def __post_init__(self):
        if self.interval_ms < MIN_DELAY_MS:
            raise ValueError("interval_ms must be >= 10")


@dataclass(frozen=True)
class Random:
    """Random delays: max_interval_s * 1000 * U(0,1) ms, clamped to >= 10 ms.

    Only the upper bound is configurable, mirroring the original simulator's
    behaviour of multiplying the "to" field by a fresh uniform draw.
    """

    max_interval_s: float = 6.0

    def __post_init__(self):
        if self.max_interval_s <= 0:
            raise ValueError("max_interval_s must be positive")


Mode = Union[Fixed, Random]


@dataclass
class SimConfig:
    mode: Mode = field(default_factory=Fixed)
    count: int | None = None  # None = unlimited
    value_range: tuple[int, int] = (0, 100)
    rng_seed: int = 0
    tag_handles: list[int] | None = None  # None = all registered tags
    time_scale: float = 1.0  # 1.0 = real time; 20 runs the schedule 20x faster

    def __post_init__(self):
        lo, hi = self.value_range
        if lo > hi:
            raise ValueError("value_range lo must be <= hi")
        if self.count is not None and self.count < 1:
            raise ValueError("count must be >= 1 when limited")
        if self.time_scale <= 0:
            raise ValueError("time_scale must be positive")

    def changes_per_second(self) -> float | None:
        """Steady change rate in Fixed mode; None for Random."""
        if isinstance(self.mode, Fixed):
            return 1000.0 / self.mode.interval_ms
        return None


@dataclass(frozen=True)
class ChangeLogEntry:
    ordinal: int
    sequence: int
    at: datetime
    values_written: list[int]
    no_change: bool = False


def tick_offsets_ms(mode: Mode, rng: random.Random) -> Iterator[float]:
    """Virtual-ms offsets from schedule start at which ticks fire."""
    if isinstance(mode, Fixed):
        slot = 0
        while True:
            if mode.phase_dither:
                yield slot * mode.interval_ms + rng.random() * mode.interval_ms
            else:
                yield (slot + 1) * mode.interval_ms
            slot += 1
    else:
        offset = 0.0
        while True:
            offset += max(MIN_DELAY_MS, mode.max_interval_s * 1000.0 * rng.random())
            yield offset


class PlantSim:
    """Drives one hub with the configured change schedule.

    start()/stop() run the schedule on a background thread; step() performs
    exactly one tick synchronously for deterministic, timer-free tests.
    """

    def __init__(self, config: SimConfig, hub: TagHub, clock: Clock | None = None):
        self.config = config
        self.hub = hub
        # a passed-in clock must already embody the run's time scale
        self.clock = clock or ScaledClock(config.time_scale)
        self._rng = random.Random(config.rng_seed)
        self._offsets = tick_offsets_ms(config.mode, self._rng)
        self._handles = config.tag_handles
        self._log: list[ChangeLogEntry] = []
        self._total_changes = 0
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._finished = threading.Event()

    # -- lifecycle ---------------------------------------------------------

    @property
    def running(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

    def start(self) -> "PlantSim":
        if self.running:
            raise AlreadyRunning("simulator already running")
        self._resolve_handles()
        self._stop.clear()
        self._finished.clear()
        self._thread = threading.Thread(target=self._run, daemon=True, name="plant-sim")
        self._thread.start()
        return self

    def stop(self) -> int:
        """Halt the schedule and freeze the log; returns total real changes."""
        if self._thread is None:
            raise NotRunning("simulator not running")
        self._stop.set()
        self._thread.join()
        self._thread = None
        with self._lock:
            return self._total_changes

    def join(self, timeout: float | None = None) -> bool:
        """Wait for a Limited schedule to complete on its own."""
        return self._finished.wait(timeout)

    # -- ticking -----------------------------------------------------------

    def step(self) -> ChangeLogEntry:
        """Perform one tick synchronously (no timers involved)."""
        self._resolve_handles()
        return self._tick()

    def _resolve_handles(self) -> None:
        if self._handles is None:
            self._handles = list(range(1, self.hub.tag_count + 1))
        if not self._handles:
            raise SimError("hub has no registered tags")

    def _run(self) -> None:
        start = self.clock.monotonic()
        limit = self.config.count
        for offset_ms in self._offsets:
            target = start + offset_ms / 1000.0
            while not self._stop.is_set():
                remaining = target - self.clock.monotonic()
                if remaining <= 0:
                    break
                if self._stop.wait(self.clock.real_seconds(remaining)):
                    break
            if self._stop.is_set():
                break
            self._tick()
            if limit is not None and self._total_changes >= limit:
                break
        self._finished.set()

    def _tick(self) -> ChangeLogEntry:
        lo, hi = self.config.value_range
        handles = self._handles
        current = {it.handle: it.value for it in self.hub.snapshot().items}
        values = [self._rng.randint(lo, hi) for _ in handles]
        if all(float(v) == current[h] for v, h in zip(values, handles)):
            values = [self._rng.randint(lo, hi) for _ in handles]

        at = self.clock.now()
        changed, seq = self.hub.write_batch(
            [(h, float(v)) for h, v in zip(handles, values)]
        )
        with self._lock:
            entry = ChangeLogEntry(
                ordinal=len(self._log) + 1,
                sequence=seq,
                at=at,
                values_written=list(values),
                no_change=not changed,
            )
            self._log.append(entry)
            if changed:
                self._total_changes += 1
        return entry

    # -- results -----------------------------------------------------------

    def change_log(self) -> list[ChangeLogEntry]:
        with self._lock:
            return list(self._log)

    def total_changes(self) -> int:
        with self._lock:
            return self._total_changes


def write_log_csv(entries: list[ChangeLogEntry], path) -> None:
    """Export a change log as CSV: ordinal,sequence,at_iso,v1..vn."""
    width = max((len(e.values_written) for e in entries), default=0)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ordinal", "sequence", "at_iso"] + [f"v{i+1}" for i in range(width)])
        for e in entries:
            writer.writerow([e.ordinal, e.sequence, format_timestamp(e.at)] + e.values_written)
