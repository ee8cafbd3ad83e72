"""HTTP gateway: the long-poll monitor channel, the direct setpoint channel,
authentication endpoints and the admin surface.

`GET /api/update?since=N` blocks until the hub sequence passes N, then
answers with the delimited snapshot body and an `X-Seq` header; if nothing
changes within `max_wait` it answers 204 with `X-Seq` only, so idle clients
cost headers, not payload. `POST /api/setpoints` writes immediately and
returns without waiting for the resulting change to propagate.
"""

from __future__ import annotations

import asyncio
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from typing import Literal

from fastapi import FastAPI, Form, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .clock import Clock
from .hub import TagHub
from .security import (
    Action,
    DuplicateUsername,
    NotFound,
    Phase1Status,
    Phase2Status,
    SecurityPolicy,
    PHASE2_WINDOW_S,
)
from .wire import WireError, format_snapshot, parse_setpoints, snapshot_to_json


@dataclass
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    max_wait_s: float = 30.0
    setpoint_handles: tuple[int, ...] = (4, 5, 6)
    setpoint_range: tuple[float, float] = (0.0, 100.0)  # exclusive bounds
    setpoint_range_overrides: dict[int, tuple[float, float]] = field(default_factory=dict)
    wire_format: str = "delimited"  # "delimited" | "json"
    session_cookie: str = "tagpoll_session"
    trust_forwarded_for: bool = True
    static_dir: str | None = None

    def __post_init__(self):
        if self.max_wait_s < 1.0:
            raise ValueError("max_wait_s must be >= 1 s")
        if self.wire_format not in ("delimited", "json"):
            raise ValueError("wire_format must be 'delimited' or 'json'")

    def range_for(self, handle: int) -> tuple[float, float]:
        return self.setpoint_range_overrides.get(handle, self.setpoint_range)


INVALID_SETPOINT_MSG = "Invalid value!Check setpoints values"
NOT_ALLOWED_MSG = "you are not Allowed to login"
ALREADY_LOGGED_MSG = "This username is already logged"
DUPLICATE_USER_MSG = "This username is already used,try another one"


class LoginResponse(BaseModel):
    status: str
    message: str = ""
    secret_deadline_s: float | None = None


class AuthErrorResponse(BaseModel):
    error: str
    message: str
    trials_left: int | None = None


class SessionInfo(BaseModel):
    username: str
    role: str
    phase: str


class UserStatusModel(BaseModel):
    username: str
    role: str
    logged: bool
    ip: str | None = None


class AddUserRequest(BaseModel):
    username: str
    password: str
    role: Literal["admin", "operator", "user"]
    secret: str


class UntrustedModel(BaseModel):
    ip: str
    added_at: str
    reason: str


class NoStoreStaticFiles(StaticFiles):
    """Static assets sent with no-store headers so logged-out pages cannot be
    resurrected from the browser cache."""

    async def get_response(self, path, scope):
        response = await super().get_response(path, scope)
        response.headers["Cache-Control"] = "no-store"
        response.headers["Pragma"] = "no-cache"
        return response


def _auth_error(status_code: int, error: str, message: str, trials_left: int | None = None):
    payload = AuthErrorResponse(error=error, message=message, trials_left=trials_left)
    return JSONResponse(payload.model_dump(), status_code=status_code)


def build_app(
    hub: TagHub,
    security: SecurityPolicy,
    config: GatewayConfig | None = None,
    clock: Clock | None = None,
) -> FastAPI:
    config = config or GatewayConfig()
    clock = clock or Clock()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        await drain()

    app = FastAPI(title="tagpoll gateway", lifespan=lifespan)
    app.state.hub = hub
    app.state.security = security
    app.state.config = config
    drain_event = asyncio.Event()

    async def drain() -> None:
        """Release every blocked monitor request with a heartbeat."""
        drain_event.set()
        await asyncio.sleep(0)

    app.state.drain = drain

    def client_ip(request: Request) -> str:
        if config.trust_forwarded_for:
            forwarded = request.headers.get("x-forwarded-for")
            if forwarded:
                return forwarded.split(",")[0].strip()
        return request.client.host if request.client else "unknown"

    def session_of(request: Request):
        token = request.cookies.get(config.session_cookie)
        if token is None:
            return None, None
        return token, security.get_session(token)

    def check(request: Request, action: Action):
        """Returns (token, session) or an error response."""
        token, sess = session_of(request)
        if sess is None or sess.phase != "full":
            return None, _auth_error(401, "unauthenticated", "login required")
        if not security.authorize(token, action):
            return None, _auth_error(403, "forbidden", "role lacks this right")
        return (token, sess), None

    def snapshot_response(snapshot) -> Response:
        headers = {"X-Seq": str(snapshot.sequence)}
        if config.wire_format == "json":
            return JSONResponse(snapshot_to_json(snapshot), headers=headers)
        return PlainTextResponse(format_snapshot(snapshot), headers=headers)

    def heartbeat(sequence: int) -> Response:
        return Response(status_code=204, headers={"X-Seq": str(sequence)})

    # -- monitor channel -----------------------------------------------------

    @app.get("/api/update")
    async def handle_update(request: Request, since: str | None = None):
        ok, err = check(request, Action.MONITOR)
        if err:
            return err
        if since is None:
            # first call: prime the client with the current state at once
            return snapshot_response(hub.snapshot())
        try:
            since_seq = int(since)
            if since_seq < 0:
                raise ValueError
        except ValueError:
            return PlainTextResponse("malformed since", status_code=400)
        if drain_event.is_set():
            return heartbeat(hub.current_sequence())

        wait_task = asyncio.create_task(
            hub.wait_for_change_async(since_seq, config.max_wait_s)
        )
        drain_task = asyncio.create_task(drain_event.wait())
        done, _ = await asyncio.wait(
            {wait_task, drain_task}, return_when=asyncio.FIRST_COMPLETED
        )
        if wait_task in done:
            drain_task.cancel()
            result = wait_task.result()
            if result.changed:
                return snapshot_response(result.snapshot)
            return heartbeat(result.sequence)
        wait_task.cancel()
        return heartbeat(hub.current_sequence())

    # -- setpoint channel ------------------------------------------------------

    @app.post("/api/setpoints")
    async def handle_setpoints(request: Request):
        ok, err = check(request, Action.WRITE_SETPOINTS)
        if err:
            return err
        body = (await request.body()).decode("utf-8", errors="replace")
        try:
            values = parse_setpoints(body)
        except WireError as exc:
            return PlainTextResponse(str(exc), status_code=400)
        handles = config.setpoint_handles
        if len(values) != len(handles):
            return PlainTextResponse(
                f"expected {len(handles)} setpoints, got {len(values)}", status_code=400
            )
        for handle, value in zip(handles, values):
            lo, hi = config.range_for(handle)
            if not (lo < value < hi):
                return PlainTextResponse(INVALID_SETPOINT_MSG, status_code=422)
        hub.write_batch(list(zip(handles, values)))
        return PlainTextResponse("Done")

    # -- authentication ----------------------------------------------------------

    @app.post("/api/auth/login")
    async def auth_login(request: Request, username: str = Form(), password: str = Form()):
        result = security.login_phase1(username, password, client_ip(request))
        if result.status is Phase1Status.OK:
            response = JSONResponse(
                LoginResponse(
                    status="secret_required",
                    message=f"Welcome back {username}",
                    secret_deadline_s=PHASE2_WINDOW_S,
                ).model_dump()
            )
            response.set_cookie(
                config.session_cookie, result.token, httponly=True, samesite="lax"
            )
            return response
        if result.status is Phase1Status.INVALID_USER:
            return _auth_error(401, "invalid_user", "Invalid user name", result.trials_left)
        if result.status is Phase1Status.INVALID_PASSWORD:
            return _auth_error(401, "invalid_password", "Invalid password!!", result.trials_left)
        if result.status is Phase1Status.DUPLICATE_BLOCKED:
            return _auth_error(403, "duplicate_login", ALREADY_LOGGED_MSG)
        return _auth_error(403, "ip_blocked", NOT_ALLOWED_MSG)

    @app.post("/api/auth/secret")
    async def auth_secret(request: Request, code: str = Form()):
        token = request.cookies.get(config.session_cookie)
        if token is None:
            return _auth_error(401, "invalid_token", "no session")
        result = security.login_phase2(token, code, client_ip(request))
        if result.status is Phase2Status.AUTHENTICATED:
            return JSONResponse({"status": "authenticated", "role": result.role})
        if result.status is Phase2Status.DUPLICATE_BLOCKED:
            response = _auth_error(403, "duplicate_login", ALREADY_LOGGED_MSG)
        else:
            response = _auth_error(401, result.status.value, "authentication failed")
        response.delete_cookie(config.session_cookie)
        return response

    @app.post("/api/auth/logout")
    async def auth_logout(request: Request):
        token = request.cookies.get(config.session_cookie)
        if token is not None:
            security.logout(token)
        response = JSONResponse({"status": "logged_out"})
        response.delete_cookie(config.session_cookie)
        return response

    @app.get("/api/auth/session")
    async def auth_session(request: Request):
        _, sess = session_of(request)
        if sess is None:
            return _auth_error(401, "unauthenticated", "login required")
        return SessionInfo(username=sess.username, role=sess.role, phase=sess.phase)

    # -- admin --------------------------------------------------------------------

    def _user_model(u) -> UserStatusModel:
        return UserStatusModel(username=u.username, role=u.role, logged=u.logged, ip=u.current_ip)

    @app.get("/api/admin/users")
    async def admin_users(request: Request):
        ok, err = check(request, Action.ADMIN)
        if err:
            return err
        return [_user_model(u) for u in security.list_users()]

    @app.get("/api/admin/users/{username}")
    async def admin_user_status(request: Request, username: str):
        ok, err = check(request, Action.ADMIN)
        if err:
            return err
        try:
            return _user_model(security.user_status(username))
        except NotFound:
            return PlainTextResponse("unknown user", status_code=404)

    @app.post("/api/admin/users", status_code=201)
    async def admin_add_user(request: Request, body: AddUserRequest):
        ok, err = check(request, Action.ADMIN)
        if err:
            return err
        try:
            security.add_user(body.username, body.password, body.role, body.secret)
        except DuplicateUsername:
            return JSONResponse({"message": DUPLICATE_USER_MSG}, status_code=409)
        except ValueError as exc:
            return JSONResponse({"message": str(exc)}, status_code=422)
        return {"status": "created"}

    @app.post("/api/admin/users/{username}/force-logout")
    async def admin_force_logout(request: Request, username: str):
        ok, err = check(request, Action.ADMIN)
        if err:
            return err
        try:
            security.force_logout_user(username)
        except NotFound:
            return PlainTextResponse("unknown user", status_code=404)
        return {"status": "ok"}

    @app.get("/api/admin/untrusted")
    async def admin_untrusted(request: Request):
        ok, err = check(request, Action.ADMIN)
        if err:
            return err
        from .wire import format_timestamp

        return [
            UntrustedModel(ip=e.ip, added_at=format_timestamp(e.added_at), reason=e.reason.value)
            for e in security.list_untrusted()
        ]

    @app.delete("/api/admin/untrusted/{ip}")
    async def admin_remove_untrusted(request: Request, ip: str):
        ok, err = check(request, Action.ADMIN)
        if err:
            return err
        try:
            security.remove_untrusted(ip)
        except NotFound:
            return PlainTextResponse("unknown ip", status_code=404)
        return {"status": "ok"}

    if config.static_dir:
        app.mount("/", NoStoreStaticFiles(directory=config.static_dir, html=True), name="hmi")

    return app


def serve(
    hub: TagHub,
    security: SecurityPolicy,
    config: GatewayConfig | None = None,
    clock: Clock | None = None,
) -> None:
    """Run the gateway under uvicorn until interrupted."""
    import uvicorn

    config = config or GatewayConfig()
    app = build_app(hub, security, config=config, clock=clock)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
