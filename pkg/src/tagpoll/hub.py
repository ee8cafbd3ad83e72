"""In-process tag store with data-change subscription semantics.

Process variables live in one group. Writes are batched: a batch that
actually changes at least one tag bumps a monotone sequence number, records
the post-write state in a bounded history, and wakes every blocked waiter.
Waiters poll with the last sequence they saw; the hub replays missed changes
oldest-first from history, so a chaining client observes every sequence even
when it falls behind the writer.
"""

from __future__ import annotations

import asyncio
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime

from .clock import Clock

GOOD_QUALITY = 192
BAD_QUALITY = 0

DEFAULT_HISTORY = 16384


class HubError(Exception):
    pass


class DuplicateName(HubError):
    pass


class AlreadyRegistered(HubError):
    pass


class NotRegistered(HubError):
    pass


class UnknownHandle(HubError):
    pass


@dataclass(frozen=True)
class TagRecord:
    """Immutable view of one process variable."""

    name: str
    handle: int
    value: float
    quality: int
    timestamp: datetime
    last_change_seq: int


@dataclass(frozen=True)
class Snapshot:
    """Consistent view of all tags, taken under the hub lock.

    `sequence` is the hub sequence at the moment this state was captured;
    items are ordered by handle.
    """

    sequence: int
    taken_at: datetime
    items: tuple[TagRecord, ...]


@dataclass(frozen=True)
class ChangeNotice:
    """One data-change event: a batch write that altered at least one tag."""

    sequence: int
    at: datetime
    changed_handles: frozenset[int]


@dataclass(frozen=True)
class WaitResult:
    """Outcome of a wait: either a change snapshot or a heartbeat.

    When `changed`, `snapshot` is the oldest state the caller has not seen
    yet and `sequence` equals `snapshot.sequence`. On timeout `snapshot` is
    None and `sequence` is the hub sequence at expiry.
    """

    changed: bool
    snapshot: Snapshot | None
    sequence: int


@dataclass
class GroupConfig:
    """OPC-style group settings.

    `update_rate_ms` is kept as metadata only; change events are delivered
    immediately, never throttled. With `active` False, writes still update
    values but no events fire and the sequence does not advance.
    """

    name: str = "Group1"
    update_rate_ms: int = 300
    active: bool = True
    subscribed: bool = True

    def __post_init__(self):
        if self.update_rate_ms < 1:
            raise ValueError("update_rate_ms must be >= 1")


class _Tag:
    __slots__ = ("name", "handle", "value", "quality", "timestamp", "last_change_seq")

    def __init__(self, name: str, handle: int, timestamp: datetime):
        self.name = name
        self.handle = handle
        self.value = 0.0
        self.quality = GOOD_QUALITY
        self.timestamp = timestamp
        self.last_change_seq = 0

    def view(self) -> TagRecord:
        return TagRecord(
            name=self.name,
            handle=self.handle,
            value=self.value,
            quality=self.quality,
            timestamp=self.timestamp,
            last_change_seq=self.last_change_seq,
        )


class TagHub:
    """Thread-safe tag store with blocking and async change waits.

    Any number of writers and waiters may run concurrently; one change event
    wakes all current waiters exactly once. Blocking waits park on a
    condition variable, async waits on per-task events signalled via their
    event loop, so neither spins.
    """

    def __init__(
        self,
        clock: Clock | None = None,
        group: GroupConfig | None = None,
        history: int = DEFAULT_HISTORY,
        allowed_qualities: tuple[int, ...] = (BAD_QUALITY, GOOD_QUALITY),
    ):
        if history < 1:
            raise ValueError("history must be >= 1")
        self._clock = clock or Clock()
        self.group = group or GroupConfig()
        self._allowed_qualities = frozenset(allowed_qualities)
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._tags: list[_Tag] = []
        self._by_name: dict[str, int] = {}
        self._sequence = 0
        # parallel deques; entry i holds sequence _floor + i
        self._snapshots: deque[Snapshot] = deque()
        self._notices: deque[ChangeNotice] = deque()
        self._floor = 1  # oldest retained sequence
        self._max_history = history
        self._async_waiters: set[tuple[asyncio.AbstractEventLoop, asyncio.Event]] = set()

    # -- registration ------------------------------------------------------

    def register_tags(self, names: list[str]) -> list[int]:
        """Create the tag set; handles are 1..n in input order."""
        if not names:
            raise ValueError("names must be non-empty")
        with self._lock:
            if self._tags:
                raise AlreadyRegistered("tags already registered")
            seen = set()
            for name in names:
                if not name or not name.strip():
                    raise ValueError("tag names must be non-blank")
                if name in seen:
                    raise DuplicateName(name)
                seen.add(name)
            now = self._clock.now()
            for i, name in enumerate(names, start=1):
                self._tags.append(_Tag(name, i, now))
                self._by_name[name] = i
            self._sequence = 0
            return list(range(1, len(names) + 1))

    @property
    def tag_count(self) -> int:
        return len(self._tags)

    @property
    def tag_names(self) -> list[str]:
        with self._lock:
            return [t.name for t in self._tags]

    def handle_of(self, name: str) -> int:
        with self._lock:
            try:
                return self._by_name[name]
            except KeyError:
                raise UnknownHandle(name) from None

    def set_active(self, active: bool) -> None:
        with self._lock:
            self.group.active = active

    # -- writes ------------------------------------------------------------

    def write_batch(self, writes: list[tuple]) -> tuple[bool, int]:
        """Apply one batch of (handle, value[, quality]) writes.

        Tags whose value or quality actually differ get a fresh shared
        timestamp. If anything differed and the group is active, the sequence
        advances by exactly one and a single change notice wakes all waiters.
        Returns (changed, sequence).
        """
        if not writes:
            raise ValueError("empty batch")
        with self._lock:
            self._ensure_registered()
            parsed = []
            for w in writes:
                if len(w) == 2:
                    handle, value = w
                    quality = None
                elif len(w) == 3:
                    handle, value, quality = w
                    if quality not in self._allowed_qualities:
                        raise ValueError(f"quality {quality} not in allowed set")
                else:
                    raise ValueError("write must be (handle, value[, quality])")
                if not isinstance(handle, int) or not 1 <= handle <= len(self._tags):
                    raise UnknownHandle(handle)
                parsed.append((handle, float(value), quality))

            changed_handles = set()
            for handle, value, quality in parsed:
                tag = self._tags[handle - 1]
                if value != tag.value or (quality is not None and quality != tag.quality):
                    changed_handles.add(handle)
            if not changed_handles:
                return False, self._sequence

            # shared timestamp; never let a tag's timestamp go backward
            now = self._clock.now()
            for h in changed_handles:
                if self._tags[h - 1].timestamp > now:
                    now = self._tags[h - 1].timestamp
            for handle, value, quality in parsed:
                if handle not in changed_handles:
                    continue
                tag = self._tags[handle - 1]
                tag.value = value
                if quality is not None:
                    tag.quality = quality
                tag.timestamp = now

            if not self.group.active:
                return False, self._sequence

            self._sequence += 1
            for h in changed_handles:
                self._tags[h - 1].last_change_seq = self._sequence
            self._snapshots.append(self._capture(now))
            self._notices.append(
                ChangeNotice(self._sequence, now, frozenset(changed_handles))
            )
            while len(self._snapshots) > self._max_history:
                self._snapshots.popleft()
                self._notices.popleft()
                self._floor += 1
            self._wake_all()
            return True, self._sequence

    def _capture(self, taken_at: datetime) -> Snapshot:
        return Snapshot(
            sequence=self._sequence,
            taken_at=taken_at,
            items=tuple(t.view() for t in self._tags),
        )

    def _wake_all(self) -> None:
        self._cond.notify_all()
        for loop, event in self._async_waiters:
            try:
                loop.call_soon_threadsafe(event.set)
            except RuntimeError:
                pass  # waiter's loop already closed

    def _ensure_registered(self) -> None:
        if not self._tags:
            raise NotRegistered("no tags registered")

    # -- reads -------------------------------------------------------------

    def snapshot(self) -> Snapshot:
        """Atomically consistent view of the current state."""
        with self._lock:
            self._ensure_registered()
            return self._capture(self._clock.now())

    def current_sequence(self) -> int:
        with self._lock:
            return self._sequence

    @property
    def history_floor(self) -> int:
        """Oldest change sequence still replayable."""
        with self._lock:
            return self._floor if self._snapshots else self._sequence + 1

    def notices_since(self, since: int) -> list[ChangeNotice]:
        with self._lock:
            return [n for n in self._notices if n.sequence > since]

    def _unseen_snapshot(self, since: int) -> Snapshot:
        """Oldest retained snapshot newer than `since` (lock held)."""
        target = max(since + 1, self._floor)
        idx = target - self._floor
        return self._snapshots[idx]

    # -- waits -------------------------------------------------------------

    def wait_for_change(self, since: int, max_wait: float) -> WaitResult:
        """Block until the sequence passes `since` or `max_wait` elapses.

        `max_wait` is in (virtual) seconds. If changes already happened past
        `since`, returns immediately with the oldest unseen one.
        """
        self._check_wait_args(since, max_wait)
        deadline = time.monotonic() + self._clock.real_seconds(max_wait)
        with self._cond:
            self._ensure_registered()
            while self._sequence <= since:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return WaitResult(False, None, self._sequence)
                self._cond.wait(remaining)
            snap = self._unseen_snapshot(since)
            return WaitResult(True, snap, snap.sequence)

    async def wait_for_change_async(self, since: int, max_wait: float) -> WaitResult:
        """Async counterpart of wait_for_change; parks on an event."""
        self._check_wait_args(since, max_wait)
        loop = asyncio.get_running_loop()
        event = asyncio.Event()
        waiter = (loop, event)
        deadline = time.monotonic() + self._clock.real_seconds(max_wait)
        with self._lock:
            self._ensure_registered()
            if self._sequence > since:
                snap = self._unseen_snapshot(since)
                return WaitResult(True, snap, snap.sequence)
            self._async_waiters.add(waiter)
        try:
            while True:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return WaitResult(False, None, self.current_sequence())
                try:
                    await asyncio.wait_for(event.wait(), timeout=remaining)
                except asyncio.TimeoutError:
                    return WaitResult(False, None, self.current_sequence())
                with self._lock:
                    if self._sequence > since:
                        snap = self._unseen_snapshot(since)
                        return WaitResult(True, snap, snap.sequence)
                    event.clear()
        finally:
            with self._lock:
                self._async_waiters.discard(waiter)

    @staticmethod
    def _check_wait_args(since: int, max_wait: float) -> None:
        if since < 0:
            raise ValueError("since must be >= 0")
        if max_wait <= 0:
            raise ValueError("max_wait must be positive")
