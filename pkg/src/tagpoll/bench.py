"""Fixed-timer vs event-driven polling comparison harness.

Both client strategies run against a loopback gateway (in-process ASGI, no
sockets) wired to one hub and one simulator, all sharing a single clock so
change timestamps and receipt timestamps are directly comparable.

The fixed-timer client asks for the current snapshot every period and treats
every response as fresh data, whether anything changed or not. The
event-driven client chains long polls with `since`, so it receives exactly
one data response per change and heartbeats otherwise.
"""

from __future__ import annotations

import asyncio
import csv
import io
import statistics
from dataclasses import dataclass, field
from typing import Union

import httpx

from .clock import ScaledClock
from .hub import TagHub
from .security import SecurityPolicy
from .service import GatewayConfig, build_app
from .sim import Fixed, PlantSim, SimConfig

DEFAULT_TAGS = ["s1", "s2", "s3", "s4", "s5", "s6"]


class ClockSkew(Exception):
    """A delivery latency came out negative; clocks are not shared."""


@dataclass(frozen=True)
class FixedTimer:
    period_ms: int = 1000

    def __post_init__(self):
        if self.period_ms < 10:
            raise ValueError("period_ms must be >= 10")

    def label(self) -> str:
        return f"fixed:{self.period_ms}"


@dataclass(frozen=True)
class EventDriven:
    max_wait_ms: int = 10_000
    client_delay_ms: int = 0

    def label(self) -> str:
        return "event"


Strategy = Union[FixedTimer, EventDriven]


@dataclass
class RunSpec:
    strategy: Strategy
    sim: SimConfig | None  # None = no plant changes at all
    duration_s: float
    payload_bytes_per_var: int = 1
    vars: int = 10
    time_scale: float | None = None  # default: sim.time_scale (1.0 if no sim)

    def __post_init__(self):
        floor = 0.0
        if isinstance(self.strategy, FixedTimer):
            floor = self.strategy.period_ms / 1000.0
        if self.sim is not None:
            mode = self.sim.mode
            interval = (
                mode.interval_ms / 1000.0 if isinstance(mode, Fixed) else mode.max_interval_s
            )
            floor = max(floor, interval)
        if floor and self.duration_s < 10 * floor:
            raise ValueError("duration must cover at least 10 poll periods / change intervals")

    def scale(self) -> float:
        if self.time_scale is not None:
            return self.time_scale
        return self.sim.time_scale if self.sim is not None else 1.0

    def change_rate_per_min(self) -> float | None:
        """Nominal change rate; None for random schedules."""
        if self.sim is None:
            return 0.0
        if isinstance(self.sim.mode, Fixed):
            return 60_000.0 / self.sim.mode.interval_ms
        return None


@dataclass
class Metrics:
    strategy: str
    change_rate_per_min: float | None
    requests: int = 0
    responses_with_data: int = 0
    heartbeats: int = 0
    payload_bytes: int = 0
    inter_arrival: list[float] = field(default_factory=list)
    latencies: list[float] = field(default_factory=list)
    hold_times: list[float] = field(default_factory=list)
    changes_produced: int = 0
    changes_delivered: int = 0
    changes_missed: int = 0
    change_times: list[float] = field(default_factory=list)  # virtual s, ground truth

    @property
    def mean_hold_time(self) -> float | None:
        return statistics.fmean(self.hold_times) if self.hold_times else None

    @property
    def mean_latency(self) -> float | None:
        return statistics.fmean(self.latencies) if self.latencies else None

    @property
    def mean_inter_arrival(self) -> float | None:
        return statistics.fmean(self.inter_arrival) if self.inter_arrival else None


class _Client:
    """One polling client's bookkeeping: send times, responses, hold times."""

    def __init__(self, http: httpx.AsyncClient, clock: ScaledClock):
        self.http = http
        self.clock = clock
        self.send_times: list[float] = []
        self.responses: list[tuple[float, int]] = []
        self.hold_times: list[float] = []
        self.data_responses = 0
        self.heartbeats = 0
        self.last_seen = 0

    async def _poll(self, since: int | None) -> tuple[int, bool]:
        sent = self.clock.monotonic()
        self.send_times.append(sent)
        url = "/api/update" if since is None else f"/api/update?since={since}"
        r = await self.http.get(url)
        recv = self.clock.monotonic()
        seq = int(r.headers["X-Seq"])
        if r.status_code == 200:
            self.data_responses += 1
            self.hold_times.append(recv - sent)
            self.responses.append((recv, seq))
            return seq, True
        self.heartbeats += 1
        return seq, False

    async def run_fixed(self, period_s: float, t0: float, duration: float) -> None:
        k = 1
        while k * period_s <= duration + 1e-9:
            target = t0 + k * period_s
            remaining = target - self.clock.monotonic()
            if remaining > 0:
                await asyncio.sleep(self.clock.real_seconds(remaining))
            await self._poll(None)
            k += 1

    async def run_event(
        self, strategy: EventDriven, t0: float, duration: float, since0: int
    ) -> None:
        self.last_seen = since0
        delay_s = strategy.client_delay_ms / 1000.0
        while self.clock.monotonic() < t0 + duration:
            if delay_s:
                await asyncio.sleep(self.clock.real_seconds(delay_s))
            seq, changed = await self._poll(self.last_seen)
            if changed:
                self.last_seen = seq

    async def drain(self, hub: TagHub) -> None:
        """Fetch any changes still undelivered; these return immediately."""
        while self.last_seen < hub.current_sequence():
            seq, changed = await self._poll(self.last_seen)
            if changed:
                self.last_seen = seq
            else:
                break


async def _login(http: httpx.AsyncClient, username: str, password: str, secret: str) -> None:
    r = await http.post("/api/auth/login", data={"username": username, "password": password})
    r.raise_for_status()
    r = await http.post("/api/auth/secret", data={"code": secret})
    r.raise_for_status()


def _required_history(spec: RunSpec) -> int:
    if spec.sim is None:
        return 1024
    if spec.sim.count is not None:
        expected = spec.sim.count
    elif isinstance(spec.sim.mode, Fixed):
        expected = int(spec.duration_s * 1000 / spec.sim.mode.interval_ms) + 16
    else:
        # uniform delays average max/2; chained clients never lag far anyway
        expected = int(2 * spec.duration_s / spec.sim.mode.max_interval_s) + 16
    return max(1024, 2 * expected)


async def _run_async(spec: RunSpec, n_clients: int = 1) -> list[Metrics]:
    clock = ScaledClock(spec.scale())
    hub = TagHub(clock=clock, history=_required_history(spec))
    hub.register_tags(list(DEFAULT_TAGS))
    security = SecurityPolicy(clock=clock, kdf_iterations=1_000)
    users = [f"bench{i}" for i in range(n_clients)]
    for name in users:
        security.add_user(name, "bench-pass", role="user", secret="0000")

    max_wait_s = 10.0
    if isinstance(spec.strategy, EventDriven):
        max_wait_s = spec.strategy.max_wait_ms / 1000.0
    config = GatewayConfig(max_wait_s=max_wait_s)
    app = build_app(hub, security, config=config, clock=clock)
    transport = httpx.ASGITransport(app=app)

    sim = PlantSim(spec.sim, hub, clock=clock) if spec.sim is not None else None
    clients: list[_Client] = []
    https = []
    try:
        for name in users:
            http = httpx.AsyncClient(
                transport=transport, base_url="http://bench", timeout=None
            )
            https.append(http)
            await _login(http, name, "bench-pass", "0000")
            clients.append(_Client(http, clock))

        t0 = clock.monotonic()
        since0 = hub.current_sequence()  # window baseline, shared by all clients
        if sim is not None:
            sim.start()

        if isinstance(spec.strategy, FixedTimer):
            period_s = spec.strategy.period_ms / 1000.0
            await asyncio.gather(
                *(c.run_fixed(period_s, t0, spec.duration_s) for c in clients)
            )
        else:
            await asyncio.gather(
                *(c.run_event(spec.strategy, t0, spec.duration_s, since0) for c in clients)
            )

        if sim is not None and sim.running:
            sim.stop()
        if isinstance(spec.strategy, EventDriven):
            await asyncio.gather(*(c.drain(hub) for c in clients))
    finally:
        for http in https:
            await http.aclose()

    log = [e for e in sim.change_log() if not e.no_change] if sim is not None else []
    produced = len(log)
    at_by_seq = {e.sequence: e.at for e in log}
    change_times = [clock.monotonic_at(e.at) for e in log]

    results = []
    for client in clients:
        metrics = Metrics(
            strategy=spec.strategy.label(),
            change_rate_per_min=spec.change_rate_per_min(),
            requests=len(client.send_times),
            responses_with_data=client.data_responses,
            heartbeats=client.heartbeats,
            payload_bytes=client.data_responses * spec.vars * spec.payload_bytes_per_var,
            changes_produced=produced,
            change_times=list(change_times),
        )
        metrics.inter_arrival = [
            b - a for a, b in zip(client.send_times, client.send_times[1:])
        ]
        metrics.hold_times = list(client.hold_times)

        first_receipt: dict[int, float] = {}
        for recv, seq in client.responses:
            if seq in at_by_seq and seq not in first_receipt:
                first_receipt[seq] = recv
        metrics.changes_delivered = len(first_receipt)
        metrics.changes_missed = produced - metrics.changes_delivered
        for seq, recv in sorted(first_receipt.items()):
            latency = recv - clock.monotonic_at(at_by_seq[seq])
            if latency < 0:
                raise ClockSkew(f"negative latency {latency:.6f}s for change {seq}")
            metrics.latencies.append(latency)
        results.append(metrics)
    return results


def run(spec: RunSpec) -> Metrics:
    """Execute one benchmark run with a single client."""
    return asyncio.run(_run_async(spec))[0]


def run_many(spec: RunSpec, n_clients: int) -> list[Metrics]:
    """Same wiring with n concurrent clients (each under its own account)."""
    return asyncio.run(_run_async(spec, n_clients=n_clients))


def miss_analysis(spec: RunSpec) -> tuple[int, int, int]:
    """(produced, delivered, missed) for one run."""
    m = run(spec)
    return m.changes_produced, m.changes_delivered, m.changes_missed


# -- reporting ----------------------------------------------------------------

CSV_COLUMNS = [
    "strategy",
    "change_rate_per_min",
    "requests",
    "responses_with_data",
    "heartbeats",
    "payload_bytes",
    "changes_produced",
    "changes_delivered",
    "changes_missed",
    "mean_inter_arrival_s",
    "mean_latency_ms",
    "mean_hold_s",
]


@dataclass(frozen=True)
class ReportRow:
    strategy: str
    change_rate_per_min: float | None
    requests: int
    responses_with_data: int
    heartbeats: int
    payload_bytes: int
    changes_produced: int
    changes_delivered: int
    changes_missed: int
    mean_inter_arrival_s: float | None
    mean_latency_ms: float | None
    mean_hold_s: float | None

    @classmethod
    def from_metrics(cls, m: Metrics) -> "ReportRow":
        return cls(
            strategy=m.strategy,
            change_rate_per_min=m.change_rate_per_min,
            requests=m.requests,
            responses_with_data=m.responses_with_data,
            heartbeats=m.heartbeats,
            payload_bytes=m.payload_bytes,
            changes_produced=m.changes_produced,
            changes_delivered=m.changes_delivered,
            changes_missed=m.changes_missed,
            mean_inter_arrival_s=m.mean_inter_arrival,
            mean_latency_ms=None if m.mean_latency is None else m.mean_latency * 1000.0,
            mean_hold_s=m.mean_hold_time,
        )


@dataclass
class Report:
    rows: list[ReportRow]

    def sorted_rows(self) -> list[ReportRow]:
        return sorted(
            self.rows,
            key=lambda r: (r.strategy, -1.0 if r.change_rate_per_min is None else r.change_rate_per_min),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(CSV_COLUMNS)
        for r in self.sorted_rows():
            writer.writerow([_cell(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    @classmethod
    def parse_csv(cls, text: str) -> "Report":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header != CSV_COLUMNS:
            raise ValueError("unexpected report header")
        rows = []
        for raw in reader:
            vals = dict(zip(CSV_COLUMNS, raw))
            rows.append(
                ReportRow(
                    strategy=vals["strategy"],
                    change_rate_per_min=_opt_float(vals["change_rate_per_min"]),
                    requests=int(vals["requests"]),
                    responses_with_data=int(vals["responses_with_data"]),
                    heartbeats=int(vals["heartbeats"]),
                    payload_bytes=int(vals["payload_bytes"]),
                    changes_produced=int(vals["changes_produced"]),
                    changes_delivered=int(vals["changes_delivered"]),
                    changes_missed=int(vals["changes_missed"]),
                    mean_inter_arrival_s=_opt_float(vals["mean_inter_arrival_s"]),
                    mean_latency_ms=_opt_float(vals["mean_latency_ms"]),
                    mean_hold_s=_opt_float(vals["mean_hold_s"]),
                )
            )
        return cls(rows)

    def render_text(self) -> str:
        rows = self.sorted_rows()
        table = [CSV_COLUMNS] + [[_cell(getattr(r, c)) for c in CSV_COLUMNS] for r in rows]
        widths = [max(len(line[i]) for line in table) for i in range(len(CSV_COLUMNS))]
        lines = []
        for i, line in enumerate(table):
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _opt_float(text: str) -> float | None:
    return None if text == "" else float(text)


def compare(specs: list[RunSpec]) -> Report:
    """Run each spec once and tabulate the results."""
    return Report([ReportRow.from_metrics(run(spec)) for spec in specs])


def emit(report: Report, path, format: str = "text") -> None:
    if format == "csv":
        payload = report.to_csv()
    elif format == "text":
        payload = report.render_text()
    else:
        raise ValueError("format must be 'text' or 'csv'")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(payload)


def table_suite(time_scale: float = 1.0, duration_s: float = 60.0) -> Report:
    """The request-count / byte-count / inter-arrival comparison matrix:
    both strategies at change rates 0, 15, 30 and 60 per minute, plus one
    random-schedule run per strategy."""
    specs: list[RunSpec] = []
    for strategy in (FixedTimer(1000), EventDriven()):
        specs.append(RunSpec(strategy, None, duration_s, time_scale=time_scale))
        for per_min in (15, 30, 60):
            interval = int(60_000 / per_min)
            # dithered slots: same count per run, but change phases are
            # ergodic, so the fixed poller's latency column is meaningful
            sim = SimConfig(
                mode=Fixed(interval, phase_dither=True),
                count=int(duration_s * per_min / 60),
                rng_seed=7,
                time_scale=time_scale,
            )
            specs.append(RunSpec(strategy, sim, duration_s))
        from .sim import Random as RandomMode

        specs.append(
            RunSpec(
                strategy,
                SimConfig(mode=RandomMode(6.0), rng_seed=11, time_scale=time_scale),
                duration_s,
            )
        )
    return compare(specs)
