"""Command line front end: serve the gateway, drive the simulator, run
benchmarks, administer the security store."""

from __future__ import annotations

import logging
import os
import sys

import click

from . import bench as benchmod
from .clock import ScaledClock
from .hub import TagHub
from .security import NotFound, ROLES, SecurityPolicy
from .service import GatewayConfig, serve as serve_gateway
from .sim import Fixed, PlantSim, Random, SimConfig, write_log_csv

DEFAULT_STORE = "tagpoll-store.txt"


def parse_duration(text: str) -> float:
    """'30s', '500ms', '2m' or plain seconds."""
    text = text.strip().lower()
    try:
        if text.endswith("ms"):
            return float(text[:-2]) / 1000.0
        if text.endswith("s"):
            return float(text[:-1])
        if text.endswith("m"):
            return float(text[:-1]) * 60.0
        return float(text)
    except ValueError:
        raise click.BadParameter(f"cannot parse duration {text!r}")


def parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise click.BadParameter(f"expected lo:hi, got {text!r}")


def parse_sim(text: str, count: int | None, seed: int, time_scale: float) -> SimConfig | None:
    text = text.strip().lower()
    if text in ("off", "none", ""):
        return None
    kind, _, arg = text.partition(":")
    if kind == "fixed":
        mode = Fixed(int(arg or 1000))
    elif kind == "random":
        mode = Random(float(arg or 6))
    else:
        raise click.BadParameter(f"unknown sim mode {text!r}")
    return SimConfig(mode=mode, count=count, rng_seed=seed, time_scale=time_scale)


def parse_strategy(text: str) -> benchmod.Strategy:
    text = text.strip().lower()
    if text == "event":
        return benchmod.EventDriven()
    kind, _, arg = text.partition(":")
    if kind == "event":
        return benchmod.EventDriven(max_wait_ms=int(arg))
    if kind == "fixed":
        return benchmod.FixedTimer(int(arg or 1000))
    raise click.BadParameter(f"unknown strategy {text!r}")


@click.group()
def main():
    """Event-driven long-poll tag gateway and its tooling."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("httpx").setLevel(logging.WARNING)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True, type=int)
@click.option("--max-wait", default="30s", show_default=True)
@click.option("--setpoints", default="4,5,6", show_default=True, help="setpoint target handles")
@click.option("--range", "range_", default="0:100", show_default=True, help="exclusive setpoint bounds lo:hi")
@click.option("--tags", default="s1,s2,s3,s4,s5,s6", show_default=True)
@click.option("--store", default=DEFAULT_STORE, show_default=True)
@click.option("--static-dir", default=None, help="serve the HMI from this directory")
@click.option("--wire-format", default="delimited", type=click.Choice(["delimited", "json"]))
@click.option("--sim", "sim_spec", default="off", show_default=True,
              help="embedded change source: fixed:MS, random:S or off")
@click.option("--sim-seed", default=42, show_default=True, type=int)
def serve(host, port, max_wait, setpoints, range_, tags, store, static_dir,
          wire_format, sim_spec, sim_seed):
    """Run the HTTP gateway."""
    port = int(os.environ.get("TAGPOLL_PORT", port))
    hub = TagHub()
    hub.register_tags([t.strip() for t in tags.split(",") if t.strip()])
    security = SecurityPolicy.load(store)
    security.save(store)  # materialize the bootstrap store on first run
    config = GatewayConfig(
        host=host,
        port=port,
        max_wait_s=parse_duration(max_wait),
        setpoint_handles=tuple(int(h) for h in setpoints.split(",")),
        setpoint_range=parse_range(range_),
        wire_format=wire_format,
        static_dir=static_dir,
    )
    sim_config = parse_sim(sim_spec, count=None, seed=sim_seed, time_scale=1.0)
    sim = None
    if sim_config is not None:
        sim = PlantSim(sim_config, hub).start()
        click.echo(f"embedded simulator: {sim_spec}")
    try:
        serve_gateway(hub, security, config=config)
    finally:
        if sim is not None and sim.running:
            sim.stop()


@main.command()
@click.option("--mode", default="fixed", type=click.Choice(["fixed", "random"]), show_default=True)
@click.option("--interval-ms", default=1000, show_default=True, type=int)
@click.option("--max-interval-s", default=6.0, show_default=True, type=float)
@click.option("--range", "range_", default="0:100", show_default=True)
@click.option("--count", default=None, type=int, help="stop after this many changes")
@click.option("--duration", default=None, help="stop after this much (virtual) time")
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--tags", default="s1,s2,s3,s4,s5,s6", show_default=True)
@click.option("--time-scale", default=1.0, show_default=True, type=float)
@click.option("--out", default=None, help="write the change log as CSV")
def sim(mode, interval_ms, max_interval_s, range_, count, duration, seed, tags,
        time_scale, out):
    """Run the plant-change simulator against a local hub and export its log."""
    if count is None and duration is None:
        raise click.UsageError("give --count or --duration (the schedule never stops otherwise)")
    lo, hi = parse_range(range_)
    config = SimConfig(
        mode=Fixed(interval_ms) if mode == "fixed" else Random(max_interval_s),
        count=count,
        value_range=(int(lo), int(hi)),
        rng_seed=seed,
        time_scale=time_scale,
    )
    clk = ScaledClock(time_scale)
    hub = TagHub(clock=clk)
    hub.register_tags([t.strip() for t in tags.split(",") if t.strip()])
    runner = PlantSim(config, hub, clock=clk)
    runner.start()
    if count is not None:
        runner.join()
    else:
        clk.sleep(parse_duration(duration))
    total = runner.stop()
    click.echo(f"changes: {total}, hub sequence: {hub.current_sequence()}")
    if out:
        write_log_csv(runner.change_log(), out)
        click.echo(f"log written to {out}")


@main.group(invoke_without_command=True)
@click.option("--strategy", default="event", show_default=True, help="fixed:MS or event[:MAXWAIT_MS]")
@click.option("--sim", "sim_spec", default="fixed:1000", show_default=True)
@click.option("--duration", default="60s", show_default=True)
@click.option("--count", default=None, type=int)
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--time-scale", default=1.0, show_default=True, type=float)
@click.option("--vars", "vars_", default=10, show_default=True, type=int)
@click.option("--bytes-per-var", default=1, show_default=True, type=int)
@click.option("--out", default=None)
@click.option("--format", "format_", default="text", type=click.Choice(["text", "csv"]))
@click.pass_context
def bench(ctx, strategy, sim_spec, duration, count, seed, time_scale, vars_,
          bytes_per_var, out, format_):
    """Run one polling benchmark (or `bench suite tables` for the full matrix)."""
    if ctx.invoked_subcommand is not None:
        ctx.obj = {"time_scale": time_scale, "duration": parse_duration(duration),
                   "out": out, "format": format_}
        return
    spec = benchmod.RunSpec(
        strategy=parse_strategy(strategy),
        sim=parse_sim(sim_spec, count=count, seed=seed, time_scale=time_scale),
        duration_s=parse_duration(duration),
        payload_bytes_per_var=bytes_per_var,
        vars=vars_,
        time_scale=time_scale,
    )
    report = benchmod.Report([benchmod.ReportRow.from_metrics(benchmod.run(spec))])
    if out:
        benchmod.emit(report, out, format=format_)
        click.echo(f"report written to {out}")
    else:
        click.echo(report.render_text(), nl=False)


@bench.group()
@click.pass_context
def suite(ctx):
    """Preset benchmark suites."""


@suite.command()
@click.pass_context
def tables(ctx):
    """Reproduce the request/byte/inter-arrival/latency comparison tables."""
    opts = ctx.obj or {}
    report = benchmod.table_suite(
        time_scale=opts.get("time_scale", 1.0), duration_s=opts.get("duration", 60.0)
    )
    out, format_ = opts.get("out"), opts.get("format", "text")
    if out:
        benchmod.emit(report, out, format=format_)
        click.echo(f"report written to {out}")
    else:
        click.echo(report.render_text(), nl=False)


@main.group()
@click.option("--store", default=DEFAULT_STORE, show_default=True)
@click.pass_context
def admin(ctx, store):
    """Administer the security store file."""
    ctx.obj = {"store": store}


def _load_store(ctx) -> tuple[SecurityPolicy, str]:
    path = ctx.obj["store"]
    return SecurityPolicy.load(path), path


@admin.command("add-user")
@click.argument("username")
@click.option("--password", prompt=True, hide_input=True)
@click.option("--role", default="user", type=click.Choice(list(ROLES)), show_default=True)
@click.option("--secret", prompt=True, hide_input=True, help="company secret code")
@click.pass_context
def admin_add_user(ctx, username, password, role, secret):
    policy, path = _load_store(ctx)
    policy.add_user(username, password, role, secret)
    policy.save(path)
    click.echo(f"user {username!r} added")


@admin.command("list-users")
@click.pass_context
def admin_list_users(ctx):
    policy, _ = _load_store(ctx)
    for user in policy.list_users():
        ip = user.current_ip or "-"
        click.echo(f"{user.username}\t{user.role}\t{'logged' if user.logged else 'not-logged'}\t{ip}")


@admin.command("force-logout")
@click.argument("username")
@click.pass_context
def admin_force_logout(ctx, username):
    # sessions are in-memory in the serving process; on the store file this
    # only validates the username. Use the HTTP admin route for a live server.
    policy, _ = _load_store(ctx)
    try:
        policy.force_logout_user(username)
    except NotFound:
        raise click.ClickException(f"unknown user {username!r}")
    click.echo(f"{username} logged out (live sessions are only held by a running server)")


@admin.group()
@click.pass_context
def untrusted(ctx):
    """Inspect or edit the untrusted-IP list."""


@untrusted.command("list")
@click.pass_context
def untrusted_list(ctx):
    policy, _ = _load_store(ctx)
    for entry in policy.list_untrusted():
        click.echo(f"{entry.ip}\t{entry.reason.value}\t{entry.added_at.isoformat()}")


@untrusted.command("remove")
@click.argument("ip")
@click.pass_context
def untrusted_remove(ctx, ip):
    policy, path = _load_store(ctx)
    try:
        policy.remove_untrusted(ip)
    except NotFound:
        raise click.ClickException(f"{ip} is not on the untrusted list")
    policy.save(path)
    click.echo(f"{ip} removed")


if __name__ == "__main__":
    main()
