"""Two-phase authentication policy with lockout, blacklist and role checks.

Policy in force:
  * an IP on the untrusted list cannot even attempt phase 1;
  * three failed username/password attempts from one IP blacklist it;
  * a correct login while the same username is already logged in disconnects
    both parties and blacklists both machines (nobody can tell which one is
    the legitimate user);
  * phase 2 (company secret code) must complete within 30 s from the same
    IP; a wrong or late code blacklists the machine;
  * at most one fully-authenticated session per username, ever;
  * roles: admin (everything), operator (monitor + setpoints), user (monitor).

Sessions are in-memory only. Users, secret codes and the untrusted list
round-trip through a plain text store file. Passwords are stored salted and
hashed; the rest of the policy is unchanged by that.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import logging
import os
import secrets as pysecrets
import tempfile
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta

from .clock import Clock, utc_ms
from .wire import format_timestamp, parse_timestamp

logger = logging.getLogger(__name__)

ROLES = ("admin", "operator", "user")
LOGIN_TRIALS = 3
PHASE2_WINDOW_S = 30.0
DEFAULT_KDF_ITERATIONS = 60_000

BOOTSTRAP_ADMIN = ("admin", "changeme", "0000")


class Action(enum.Enum):
    MONITOR = "monitor"
    WRITE_SETPOINTS = "setpoints"
    ADMIN = "admin"


ROLE_ACTIONS = {
    "admin": {Action.MONITOR, Action.WRITE_SETPOINTS, Action.ADMIN},
    "operator": {Action.MONITOR, Action.WRITE_SETPOINTS},
    "user": {Action.MONITOR},
}


class UntrustReason(str, enum.Enum):
    TRIALS_EXHAUSTED = "TrialsExhausted"
    DUPLICATE_LOGIN = "DuplicateLogin"
    SECRET_FAILED = "SecretFailed"
    SECRET_TIMEOUT = "SecretTimeout"


class Phase1Status(enum.Enum):
    OK = "ok"
    INVALID_USER = "invalid_user"
    INVALID_PASSWORD = "invalid_password"
    IP_BLOCKED = "ip_blocked"
    DUPLICATE_BLOCKED = "duplicate_blocked"


class Phase2Status(enum.Enum):
    AUTHENTICATED = "authenticated"
    SECRET_WRONG = "secret_wrong"
    SECRET_EXPIRED = "secret_expired"
    INVALID_TOKEN = "invalid_token"
    DUPLICATE_BLOCKED = "duplicate_blocked"


@dataclass(frozen=True)
class Phase1Result:
    status: Phase1Status
    token: str | None = None
    trials_left: int | None = None


@dataclass(frozen=True)
class Phase2Result:
    status: Phase2Status
    role: str | None = None


class SecurityError(Exception):
    pass


class PermissionDenied(SecurityError):
    pass


class DuplicateUsername(SecurityError):
    pass


class NotFound(SecurityError):
    pass


@dataclass
class UserRecord:
    username: str
    password_digest: str
    role: str
    logged: bool = False
    current_ip: str | None = None


@dataclass
class UntrustedIp:
    ip: str
    added_at: datetime
    reason: UntrustReason


@dataclass
class Session:
    token: str
    username: str
    ip: str
    phase: str  # "phase1" | "full"
    role: str
    phase1_at: datetime
    phase2_deadline: datetime


def hash_password(password: str, iterations: int = DEFAULT_KDF_ITERATIONS) -> str:
    salt = pysecrets.token_bytes(16)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode(), salt, iterations)
    return f"pbkdf2-sha256${iterations}${salt.hex()}${digest.hex()}"


def verify_password(password: str, stored: str) -> bool:
    try:
        scheme, iters, salt_hex, digest_hex = stored.split("$")
        if scheme != "pbkdf2-sha256":
            return False
        digest = hashlib.pbkdf2_hmac(
            "sha256", password.encode(), bytes.fromhex(salt_hex), int(iters)
        )
        return hmac.compare_digest(digest.hex(), digest_hex)
    except (ValueError, TypeError):
        return False


class SecurityPolicy:
    """All authentication/authorization state behind one lock.

    Every transition is atomic, so there is no window between (say) the
    duplicate-login check and session creation.
    """

    def __init__(self, clock: Clock | None = None, kdf_iterations: int = DEFAULT_KDF_ITERATIONS):
        self.clock = clock or Clock()
        self.kdf_iterations = kdf_iterations
        self._lock = threading.RLock()
        self._users: dict[str, UserRecord] = {}
        self._secrets: dict[str, str] = {}
        self._untrusted: dict[str, UntrustedIp] = {}
        self._sessions: dict[str, Session] = {}
        self._trials: dict[str, int] = {}  # remaining phase-1 trials per IP

    # -- user management (unchecked; CLI and bootstrap layer) ---------------

    def add_user(self, username: str, password: str, role: str, secret: str) -> None:
        if not username or not password or not secret:
            raise ValueError("username, password and secret must be non-empty")
        if role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}")
        with self._lock:
            if username in self._users:
                raise DuplicateUsername("This username is already used,try another one")
            self._users[username] = UserRecord(
                username=username,
                password_digest=hash_password(password, self.kdf_iterations),
                role=role,
            )
            self._secrets[username] = secret

    def list_users(self) -> list[UserRecord]:
        with self._lock:
            return [self._copy_user(u) for u in sorted(self._users)]

    def user_status(self, username: str) -> UserRecord:
        with self._lock:
            if username not in self._users:
                raise NotFound(username)
            return self._copy_user(username)

    def _copy_user(self, username: str) -> UserRecord:
        u = self._users[username]
        return UserRecord(u.username, u.password_digest, u.role, u.logged, u.current_ip)

    def list_untrusted(self) -> list[UntrustedIp]:
        with self._lock:
            return [self._untrusted[ip] for ip in sorted(self._untrusted)]

    def remove_untrusted(self, ip: str) -> None:
        with self._lock:
            if ip not in self._untrusted:
                raise NotFound(ip)
            del self._untrusted[ip]
            self._trials.pop(ip, None)

    def force_logout_user(self, username: str) -> None:
        with self._lock:
            if username not in self._users:
                raise NotFound(username)
            self._disconnect_user(username)

    # -- authentication ------------------------------------------------------

    def login_phase1(self, username: str, password: str, ip: str) -> Phase1Result:
        with self._lock:
            if ip in self._untrusted:
                return Phase1Result(Phase1Status.IP_BLOCKED)
            user = self._users.get(username)
            if user is None:
                left = self._record_failure(ip)
                return Phase1Result(Phase1Status.INVALID_USER, trials_left=left)
            if not verify_password(password, user.password_digest):
                left = self._record_failure(ip)
                return Phase1Result(Phase1Status.INVALID_PASSWORD, trials_left=left)
            if user.logged:
                # correct pair while already logged: disconnect both parties
                # and blacklist both machines
                prev_ip = user.current_ip
                self._disconnect_user(username)
                self._untrust(ip, UntrustReason.DUPLICATE_LOGIN)
                if prev_ip and prev_ip != ip:
                    self._untrust(prev_ip, UntrustReason.DUPLICATE_LOGIN)
                return Phase1Result(Phase1Status.DUPLICATE_BLOCKED)
            self._trials.pop(ip, None)  # counter back to 3
            now = self.clock.now()
            token = pysecrets.token_hex(16)
            self._sessions[token] = Session(
                token=token,
                username=username,
                ip=ip,
                phase="phase1",
                role=user.role,
                phase1_at=now,
                phase2_deadline=utc_ms(now + timedelta(seconds=PHASE2_WINDOW_S)),
            )
            return Phase1Result(Phase1Status.OK, token=token)

    def login_phase2(self, token: str, code: str, ip: str) -> Phase2Result:
        with self._lock:
            sess = self._sessions.get(token)
            if sess is None or sess.phase != "phase1":
                return Phase2Result(Phase2Status.INVALID_TOKEN)
            if ip in self._untrusted:
                del self._sessions[token]
                return Phase2Result(Phase2Status.INVALID_TOKEN)
            if self.clock.now() > sess.phase2_deadline:
                del self._sessions[token]
                self._untrust(ip, UntrustReason.SECRET_TIMEOUT)
                return Phase2Result(Phase2Status.SECRET_EXPIRED)
            expected = self._secrets.get(sess.username)
            if expected is None or not hmac.compare_digest(expected, code):
                del self._sessions[token]
                self._untrust(ip, UntrustReason.SECRET_FAILED)
                if sess.ip != ip:
                    self._untrust(sess.ip, UntrustReason.SECRET_FAILED)
                return Phase2Result(Phase2Status.SECRET_WRONG)
            if ip != sess.ip:
                # correct code but from a different machine than phase 1
                del self._sessions[token]
                return Phase2Result(Phase2Status.INVALID_TOKEN)
            user = self._users[sess.username]
            if user.logged:
                # another session for this username completed phase 2 first
                prev_ip = user.current_ip
                del self._sessions[token]
                self._disconnect_user(sess.username)
                self._untrust(ip, UntrustReason.DUPLICATE_LOGIN)
                if prev_ip and prev_ip != ip:
                    self._untrust(prev_ip, UntrustReason.DUPLICATE_LOGIN)
                return Phase2Result(Phase2Status.DUPLICATE_BLOCKED)
            sess.phase = "full"
            user.logged = True
            user.current_ip = ip
            return Phase2Result(Phase2Status.AUTHENTICATED, role=user.role)

    def logout(self, token: str) -> None:
        """Destroy the session if it exists; idempotent."""
        with self._lock:
            sess = self._sessions.pop(token, None)
            if sess is not None and sess.phase == "full":
                user = self._users.get(sess.username)
                if user is not None:
                    user.logged = False
                    user.current_ip = None

    def authorize(self, token: str, action: Action) -> bool:
        with self._lock:
            sess = self._sessions.get(token)
            if sess is None or sess.phase != "full":
                return False
            return action in ROLE_ACTIONS[sess.role]

    def get_session(self, token: str) -> Session | None:
        with self._lock:
            return self._sessions.get(token)

    # -- admin surface (actor-checked; HTTP layer) ---------------------------

    def admin_add_user(self, actor: str, username: str, password: str, role: str, secret: str) -> None:
        self._require_admin(actor)
        self.add_user(username, password, role, secret)

    def admin_list_users(self, actor: str) -> list[UserRecord]:
        self._require_admin(actor)
        return self.list_users()

    def admin_user_status(self, actor: str, username: str) -> UserRecord:
        self._require_admin(actor)
        return self.user_status(username)

    def admin_list_untrusted(self, actor: str) -> list[UntrustedIp]:
        self._require_admin(actor)
        return self.list_untrusted()

    def admin_remove_untrusted(self, actor: str, ip: str) -> None:
        self._require_admin(actor)
        self.remove_untrusted(ip)

    def admin_force_logout(self, actor: str, username: str) -> None:
        self._require_admin(actor)
        self.force_logout_user(username)

    def _require_admin(self, actor: str) -> None:
        if not self.authorize(actor, Action.ADMIN):
            raise PermissionDenied("admin right required")

    # -- internals ------------------------------------------------------------

    def _disconnect_user(self, username: str) -> None:
        for tok in [t for t, s in self._sessions.items() if s.username == username]:
            del self._sessions[tok]
        user = self._users.get(username)
        if user is not None:
            user.logged = False
            user.current_ip = None

    def _record_failure(self, ip: str) -> int:
        left = self._trials.get(ip, LOGIN_TRIALS) - 1
        if left <= 0:
            self._untrust(ip, UntrustReason.TRIALS_EXHAUSTED)
            return 0
        self._trials[ip] = left
        return left

    def _untrust(self, ip: str, reason: UntrustReason) -> None:
        if ip not in self._untrusted:
            self._untrusted[ip] = UntrustedIp(ip, self.clock.now(), reason)
        self._trials.pop(ip, None)

    # -- persistence ------------------------------------------------------------

    def save(self, path) -> None:
        """Write users, secret codes and untrusted IPs atomically.

        Sessions (and therefore the logged flag and live IP) are volatile and
        never persisted.
        """
        with self._lock:
            lines = ["[users]"]
            for name in sorted(self._users):
                u = self._users[name]
                lines.append(f"{u.username}\t{u.password_digest}\t{u.role}")
            lines.append("[secrets]")
            for name in sorted(self._secrets):
                lines.append(f"{name}\t{self._secrets[name]}")
            lines.append("[untrusted]")
            for ip in sorted(self._untrusted):
                e = self._untrusted[ip]
                lines.append(f"{e.ip}\t{format_timestamp(e.added_at)}\t{e.reason.value}")
            data = "\n".join(lines) + "\n"

            directory = os.path.dirname(os.path.abspath(path)) or "."
            fd, tmp = tempfile.mkstemp(prefix=".tagpoll-store-", dir=directory)
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    fh.write(data)
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise

    @classmethod
    def load(
        cls,
        path,
        clock: Clock | None = None,
        kdf_iterations: int = DEFAULT_KDF_ITERATIONS,
    ) -> "SecurityPolicy":
        """Load a store file; a missing file yields a bootstrap admin account."""
        policy = cls(clock=clock, kdf_iterations=kdf_iterations)
        if not os.path.exists(path):
            name, password, secret = BOOTSTRAP_ADMIN
            policy.add_user(name, password, role="admin", secret=secret)
            logger.warning(
                "security store %s not found; bootstrapped %r with the default "
                "password and secret code — change them immediately",
                path,
                name,
            )
            return policy
        section = None
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.rstrip("\n")
                if not line.strip():
                    continue
                if line.startswith("[") and line.endswith("]"):
                    section = line[1:-1]
                    continue
                fields = line.split("\t")
                if section == "users":
                    username, digest, role = fields
                    policy._users[username] = UserRecord(username, digest, role)
                elif section == "secrets":
                    username, code = fields
                    policy._secrets[username] = code
                elif section == "untrusted":
                    ip, added_at, reason = fields
                    policy._untrusted[ip] = UntrustedIp(
                        ip, parse_timestamp(added_at), UntrustReason(reason)
                    )
                else:
                    raise ValueError(f"unknown store section {section!r}")
        return policy
