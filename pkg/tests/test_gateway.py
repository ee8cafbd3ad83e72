import asyncio
import time

import httpx
import pytest

from tagpoll.clock import Clock
from tagpoll.hub import TagHub
from tagpoll.security import SecurityPolicy
from tagpoll.service import GatewayConfig, INVALID_SETPOINT_MSG, build_app

SIX = ["s1", "s2", "s3", "s4", "s5", "s6"]
KDF = 600


def make_stack(max_wait=2.0, **cfg):
    clock = Clock()
    hub = TagHub(clock=clock)
    hub.register_tags(list(SIX))
    policy = SecurityPolicy(clock=clock, kdf_iterations=KDF)
    policy.add_user("hosny", "123456", role="admin", secret="2345")
    policy.add_user("ali", "98765", role="operator", secret="6657")
    policy.add_user("mona", "abcd", role="user", secret="2498")
    config = GatewayConfig(max_wait_s=max_wait, **cfg)
    app = build_app(hub, policy, config=config, clock=clock)
    return hub, policy, app


def client_for(app, ip=None):
    headers = {"X-Forwarded-For": ip} if ip else None
    return httpx.AsyncClient(
        transport=httpx.ASGITransport(app=app),
        base_url="http://gw",
        headers=headers,
        timeout=30.0,
    )


async def login(client, username, password, secret):
    r = await client.post("/api/auth/login", data={"username": username, "password": password})
    assert r.status_code == 200, r.text
    r = await client.post("/api/auth/secret", data={"code": secret})
    assert r.status_code == 200, r.text
    return r.json()


# -- authentication over HTTP -------------------------------------------------


def test_update_requires_session():
    _, _, app = make_stack()

    async def scenario():
        async with client_for(app) as client:
            r = await client.get("/api/update")
            assert r.status_code == 401
            r = await client.get("/nowhere")
            assert r.status_code == 404

    asyncio.run(scenario())


def test_login_flow_and_role_reported():
    _, _, app = make_stack()

    async def scenario():
        async with client_for(app) as client:
            r = await client.post(
                "/api/auth/login", data={"username": "ali", "password": "98765"}
            )
            assert r.status_code == 200
            assert r.json()["status"] == "secret_required"
            assert r.json()["secret_deadline_s"] == 30.0
            r = await client.post("/api/auth/secret", data={"code": "6657"})
            assert r.json() == {"status": "authenticated", "role": "operator"}
            r = await client.get("/api/auth/session")
            assert r.json()["username"] == "ali"
            assert r.json()["phase"] == "full"

    asyncio.run(scenario())


def test_phase1_session_cannot_monitor():
    _, _, app = make_stack()

    async def scenario():
        async with client_for(app) as client:
            await client.post("/api/auth/login", data={"username": "ali", "password": "98765"})
            r = await client.get("/api/update")
            assert r.status_code == 401

    asyncio.run(scenario())


def test_wrong_secret_clears_session_and_blocks_ip():
    _, policy, app = make_stack()

    async def scenario():
        async with client_for(app, ip="10.9.9.1") as client:
            await client.post("/api/auth/login", data={"username": "ali", "password": "98765"})
            r = await client.post("/api/auth/secret", data={"code": "wrong"})
            assert r.status_code == 401
            r = await client.get("/api/update")
            assert r.status_code == 401

    asyncio.run(scenario())
    assert [e.ip for e in policy.list_untrusted()] == ["10.9.9.1"]


def test_blocked_ip_message_surfaces():
    _, _, app = make_stack()

    async def scenario():
        async with client_for(app, ip="10.9.9.2") as client:
            for _ in range(3):
                await client.post(
                    "/api/auth/login", data={"username": "ali", "password": "bad"}
                )
            r = await client.post(
                "/api/auth/login", data={"username": "ali", "password": "98765"}
            )
            assert r.status_code == 403
            assert r.json()["message"] == "you are not Allowed to login"

    asyncio.run(scenario())


def test_forwarded_for_distinguishes_machines():
    _, policy, app = make_stack()

    async def scenario():
        async with client_for(app, ip="10.1.1.1") as c1:
            for _ in range(3):
                await c1.post("/api/auth/login", data={"username": "ali", "password": "bad"})
        async with client_for(app, ip="10.1.1.2") as c2:
            r = await c2.post("/api/auth/login", data={"username": "ali", "password": "98765"})
            assert r.status_code == 200

    asyncio.run(scenario())
    assert [e.ip for e in policy.list_untrusted()] == ["10.1.1.1"]


def test_logout_then_update_is_401():
    _, _, app = make_stack()

    async def scenario():
        async with client_for(app) as client:
            await login(client, "ali", "98765", "6657")
            r = await client.post("/api/auth/logout")
            assert r.status_code == 200
            r = await client.post("/api/auth/logout")  # idempotent
            assert r.status_code == 200
            r = await client.get("/api/update")
            assert r.status_code == 401

    asyncio.run(scenario())


# -- monitor channel ------------------------------------------------------------


def test_first_call_without_since_returns_current_snapshot():
    hub, _, app = make_stack()

    async def scenario():
        async with client_for(app) as client:
            await login(client, "mona", "abcd", "2498")
            r = await client.get("/api/update")
            assert r.status_code == 200
            assert r.headers["X-Seq"] == "0"
            assert r.text.count("~") == 12 and r.text.count(";") == 5

    asyncio.run(scenario())


def test_long_poll_wakes_on_write():
    hub, _, app = make_stack()

    async def scenario():
        async with client_for(app) as client:
            await login(client, "mona", "abcd", "2498")

            async def writer():
                await asyncio.sleep(0.03)
                hub.write_batch([(h, float(h)) for h in range(1, 7)])

            task = asyncio.create_task(writer())
            t0 = time.monotonic()
            r = await client.get("/api/update?since=0")
            elapsed = time.monotonic() - t0
            await task
            assert r.status_code == 200
            assert r.headers["X-Seq"] == "1"
            assert r.text.count("~") == 12
            assert 0.02 <= elapsed < 1.0

    asyncio.run(scenario())


def test_stale_since_returns_immediately():
    hub, _, app = make_stack()
    hub.write_batch([(1, 1.0)])
    hub.write_batch([(1, 2.0)])

    async def scenario():
        async with client_for(app) as client:
            await login(client, "mona", "abcd", "2498")
            t0 = time.monotonic()
            r = await client.get("/api/update?since=0")
            assert time.monotonic() - t0 < 0.2
            assert r.status_code == 200
            assert r.headers["X-Seq"] == "1"  # oldest unseen, not newest

    asyncio.run(scenario())


def test_quiescent_hub_heartbeats_at_max_wait():
    _, _, app = make_stack(max_wait=1.0)

    async def scenario():
        async with client_for(app) as client:
            await login(client, "mona", "abcd", "2498")
            t0 = time.monotonic()
            r = await client.get("/api/update?since=0")
            elapsed = time.monotonic() - t0
            assert r.status_code == 204
            assert r.headers["X-Seq"] == "0"
            assert r.content == b""  # headers only
            assert 0.9 <= elapsed < 3.0

    asyncio.run(scenario())


def test_malformed_since_is_400():
    _, _, app = make_stack()

    async def scenario():
        async with client_for(app) as client:
            await login(client, "mona", "abcd", "2498")
            for bad in ("abc", "-1", "1.5"):
                r = await client.get(f"/api/update?since={bad}")
                assert r.status_code == 400

    asyncio.run(scenario())


def test_chained_polling_sees_every_sequence_in_bursts():
    hub, _, app = make_stack()

    async def scenario():
        async with client_for(app) as client:
            await login(client, "mona", "abcd", "2498")

            async def writer():
                for k in range(300):
                    hub.write_batch([(1 + k % 6, float(k + 1))])
                    if k % 10 == 0:
                        await asyncio.sleep(0)  # ~bursts of 10

            task = asyncio.create_task(writer())
            seen, last = [], 0
            while last < 300:
                r = await client.get(f"/api/update?since={last}")
                if r.status_code == 200:
                    last = int(r.headers["X-Seq"])
                    seen.append(last)
            await task
            assert seen == list(range(1, 301))

    asyncio.run(scenario())


def test_json_wire_format_flag():
    hub, _, app = make_stack(wire_format="json")
    hub.write_batch([(1, 7.5)])

    async def scenario():
        async with client_for(app) as client:
            await login(client, "mona", "abcd", "2498")
            r = await client.get("/api/update")
            doc = r.json()
            assert doc["sequence"] == 1
            assert doc["items"][0]["value"] == 7.5
            assert r.headers["X-Seq"] == "1"

    asyncio.run(scenario())


# -- setpoint channel ---------------------------------------------------------------


def test_setpoints_write_through_and_read_back():
    hub, _, app = make_stack()

    async def scenario():
        async with client_for(app) as client:
            await login(client, "ali", "98765", "6657")
            r = await client.post("/api/setpoints", content="50;60;70")
            assert r.status_code == 200 and r.text == "Done"
            r = await client.get("/api/update")
            values = [chunk.split("~")[0] for chunk in r.text.split(";")]
            assert values == ["0", "0", "0", "50", "60", "70"]

    asyncio.run(scenario())


def test_setpoint_bounds_are_exclusive():
    _, _, app = make_stack()

    async def scenario():
        async with client_for(app) as client:
            await login(client, "ali", "98765", "6657")
            for body in ("0;50;50", "50;100;50", "-3;50;50"):
                r = await client.post("/api/setpoints", content=body)
                assert r.status_code == 422
                assert r.text == INVALID_SETPOINT_MSG

    asyncio.run(scenario())


def test_setpoint_arity_and_parse_errors():
    _, _, app = make_stack()

    async def scenario():
        async with client_for(app) as client:
            await login(client, "ali", "98765", "6657")
            assert (await client.post("/api/setpoints", content="50;60")).status_code == 400
            assert (await client.post("/api/setpoints", content="a;b;c")).status_code == 400
            assert (await client.post("/api/setpoints", content="1;;3")).status_code == 400
            assert (await client.post("/api/setpoints", content="nan;1;2")).status_code == 400

    asyncio.run(scenario())


def test_monitor_only_role_cannot_write_setpoints():
    _, _, app = make_stack()

    async def scenario():
        async with client_for(app) as client:
            await login(client, "mona", "abcd", "2498")
            r = await client.post("/api/setpoints", content="50;60;70")
            assert r.status_code == 403

    asyncio.run(scenario())


def test_setpoint_post_completes_while_long_poll_blocked_and_releases_it():
    hub, _, app = make_stack()

    async def scenario():
        async with client_for(app) as client:
            await login(client, "ali", "98765", "6657")
            poll = asyncio.create_task(client.get("/api/update?since=0"))
            await asyncio.sleep(0.05)
            assert not poll.done()  # monitor channel is parked
            t0 = time.monotonic()
            r = await client.post("/api/setpoints", content="50;60;70")
            assert r.status_code == 200
            assert time.monotonic() - t0 < 0.5  # did not wait behind the poll
            update = await asyncio.wait_for(poll, timeout=1.0)
            assert update.status_code == 200  # its own write woke the monitor
            values = [chunk.split("~")[0] for chunk in update.text.split(";")]
            assert values[3:] == ["50", "60", "70"]

    asyncio.run(scenario())


# -- admin over HTTP -----------------------------------------------------------------


def test_admin_routes_require_admin_role():
    _, _, app = make_stack()

    async def scenario():
        async with client_for(app) as client:
            await login(client, "ali", "98765", "6657")
            assert (await client.get("/api/admin/users")).status_code == 403
            assert (await client.get("/api/admin/untrusted")).status_code == 403

    asyncio.run(scenario())


def test_admin_full_workflow():
    _, policy, app = make_stack()

    async def scenario():
        async with client_for(app, ip="10.3.0.1") as admin:
            await login(admin, "hosny", "123456", "2345")

            r = await admin.post(
                "/api/admin/users",
                json={"username": "rami", "password": "pw", "role": "user", "secret": "2498"},
            )
            assert r.status_code == 201
            r = await admin.post(
                "/api/admin/users",
                json={"username": "rami", "password": "x", "role": "user", "secret": "1"},
            )
            assert r.status_code == 409
            assert r.json()["message"] == "This username is already used,try another one"

            r = await admin.get("/api/admin/users")
            names = [u["username"] for u in r.json()]
            assert names == ["ali", "hosny", "mona", "rami"]

            assert (await admin.get("/api/admin/users/ghost")).status_code == 404
            await admin.post("/api/auth/logout")

        # block a machine, then unblock it via the admin API
        async with client_for(app, ip="10.3.0.9") as victim:
            for _ in range(3):
                await victim.post("/api/auth/login", data={"username": "rami", "password": "no"})
            r = await victim.post("/api/auth/login", data={"username": "rami", "password": "pw"})
            assert r.status_code == 403

        async with client_for(app, ip="10.3.0.1") as admin:
            await login(admin, "hosny", "123456", "2345")
            r = await admin.get("/api/admin/untrusted")
            assert [e["ip"] for e in r.json()] == ["10.3.0.9"]
            assert r.json()[0]["reason"] == "TrialsExhausted"
            assert (await admin.delete("/api/admin/untrusted/10.3.0.9")).status_code == 200
            assert (await admin.delete("/api/admin/untrusted/10.3.0.9")).status_code == 404

        async with client_for(app, ip="10.3.0.9") as victim:
            await login(victim, "rami", "pw", "2498")  # access restored

    asyncio.run(scenario())


def test_admin_force_logout_cuts_live_session():
    _, _, app = make_stack()

    async def scenario():
        async with client_for(app, ip="10.4.0.1") as admin, client_for(app, ip="10.4.0.2") as op:
            await login(admin, "hosny", "123456", "2345")
            await login(op, "ali", "98765", "6657")
            assert (await op.get("/api/update")).status_code == 200
            r = await admin.get("/api/admin/users/ali")
            assert r.json()["logged"] is True and r.json()["ip"] == "10.4.0.2"
            assert (await admin.post("/api/admin/users/ali/force-logout")).status_code == 200
            assert (await op.get("/api/update")).status_code == 401

    asyncio.run(scenario())


def test_256_simultaneous_blocked_polls_all_wake_on_one_write():
    hub, _, app = make_stack(max_wait=30.0)

    async def scenario():
        async with client_for(app) as client:
            await login(client, "mona", "abcd", "2498")
            polls = [
                asyncio.create_task(client.get("/api/update?since=0")) for _ in range(256)
            ]
            await asyncio.sleep(0.2)
            assert not any(p.done() for p in polls)
            hub.write_batch([(1, 3.5)])
            responses = await asyncio.wait_for(asyncio.gather(*polls), timeout=10.0)
            assert all(r.status_code == 200 for r in responses)
            assert {r.headers["X-Seq"] for r in responses} == {"1"}

    asyncio.run(scenario())


# -- shutdown -----------------------------------------------------------------------


def test_drain_releases_all_blocked_polls_with_heartbeats():
    _, _, app = make_stack(max_wait=30.0)

    async def scenario():
        async with client_for(app) as client:
            await login(client, "mona", "abcd", "2498")
            polls = [asyncio.create_task(client.get("/api/update?since=0")) for _ in range(10)]
            await asyncio.sleep(0.1)
            assert not any(p.done() for p in polls)
            await app.state.drain()
            responses = await asyncio.wait_for(asyncio.gather(*polls), timeout=2.0)
            assert all(r.status_code == 204 for r in responses)
            # requests arriving during shutdown get heartbeats too
            r = await client.get("/api/update?since=0")
            assert r.status_code == 204

    asyncio.run(scenario())
