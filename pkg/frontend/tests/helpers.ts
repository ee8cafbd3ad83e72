/** Test doubles: a scripted gateway speaking the wire protocol, a manual
 * scheduler, and a view that records everything it is told. */

import { GatewayResponse, Http } from "../src/http.js";
import { MonitorView } from "../src/monitor.js";
import { WireItem } from "../src/wire.js";

export const flush = (): Promise<void> => new Promise((r) => setTimeout(r, 0));

export class TestScheduler {
  queue: Array<{ fn: () => void; ms: number }> = [];

  schedule = (fn: () => void, ms: number): void => {
    this.queue.push({ fn, ms });
  };

  async runNext(): Promise<void> {
    const task = this.queue.shift();
    if (!task) {
      throw new Error("nothing scheduled");
    }
    task.fn();
    await flush();
  }

  get delays(): number[] {
    return this.queue.map((t) => t.ms);
  }
}

interface Account {
  username: string;
  password: string;
  secret: string;
  role: string;
}

/** In-memory stand-in for the gateway: same status codes, same bodies. */
export class FakeGateway implements Http {
  seq = 0;
  values = [0, 0, 0, 0, 0, 0];
  accounts: Account[] = [
    { username: "ali", password: "98765", secret: "6657", role: "operator" },
    { username: "hosny", password: "123456", secret: "2345", role: "admin" },
  ];
  blockedIps = new Set<string>();
  clientIp = "10.0.0.1";
  session: { username: string; role: string; phase: string } | null = null;

  monitorsInFlight = 0;
  maxMonitorsInFlight = 0;
  setpointDuringMonitor = 0;
  monitorUrls: string[] = [];
  untrusted: Array<{ ip: string; added_at: string; reason: string }> = [];

  write(values: number[]): void {
    this.values = values.slice();
    this.seq += 1;
  }

  private body(): string {
    const stamp = `2026-01-01T00:00:${String(this.seq % 60).padStart(2, "0")}.000Z`;
    return this.values.map((v) => `${v}~192~${stamp}`).join(";");
  }

  private resp(status: number, body = "", seq: number | null = null): GatewayResponse {
    return { status, body, seq };
  }

  async get(url: string): Promise<GatewayResponse> {
    if (url.startsWith("/api/auth/session")) {
      if (!this.session) {
        return this.resp(401, JSON.stringify({ message: "login required" }));
      }
      return this.resp(200, JSON.stringify(this.session));
    }
    if (url.startsWith("/api/update")) {
      if (!this.session || this.session.phase !== "full") {
        return this.resp(401, "login required");
      }
      this.monitorUrls.push(url);
      this.monitorsInFlight += 1;
      this.maxMonitorsInFlight = Math.max(this.maxMonitorsInFlight, this.monitorsInFlight);
      try {
        const match = url.match(/since=(\d+)/);
        if (!match) {
          return this.resp(200, this.body(), this.seq);
        }
        const since = Number(match[1]);
        if (this.seq > since) {
          return this.resp(200, this.body(), this.seq);
        }
        return this.resp(204, "", this.seq); // immediate heartbeat in tests
      } finally {
        this.monitorsInFlight -= 1;
      }
    }
    if (url.startsWith("/api/admin/users")) {
      return this.resp(
        200,
        JSON.stringify(
          this.accounts.map((a) => ({
            username: a.username,
            role: a.role,
            logged: this.session?.username === a.username,
            ip: null,
          })),
        ),
      );
    }
    if (url.startsWith("/api/admin/untrusted")) {
      return this.resp(200, JSON.stringify(this.untrusted));
    }
    return this.resp(404, "not found");
  }

  async postForm(url: string, fields: Record<string, string>): Promise<GatewayResponse> {
    if (url === "/api/auth/login") {
      if (this.blockedIps.has(this.clientIp)) {
        return this.resp(403, JSON.stringify({ message: "you are not Allowed to login" }));
      }
      const account = this.accounts.find((a) => a.username === fields.username);
      if (!account || account.password !== fields.password) {
        return this.resp(401, JSON.stringify({ message: "Invalid password!!" }));
      }
      this.session = { username: account.username, role: account.role, phase: "phase1" };
      return this.resp(
        200,
        JSON.stringify({
          status: "secret_required",
          message: `Welcome back ${account.username}`,
          secret_deadline_s: 30,
        }),
      );
    }
    if (url === "/api/auth/secret") {
      if (!this.session || this.session.phase !== "phase1") {
        return this.resp(401, JSON.stringify({ message: "authentication failed" }));
      }
      const account = this.accounts.find((a) => a.username === this.session!.username)!;
      if (fields.code !== account.secret) {
        this.session = null;
        this.blockedIps.add(this.clientIp);
        return this.resp(401, JSON.stringify({ message: "authentication failed" }));
      }
      this.session.phase = "full";
      return this.resp(200, JSON.stringify({ status: "authenticated", role: account.role }));
    }
    if (url === "/api/auth/logout") {
      this.session = null;
      return this.resp(200, JSON.stringify({ status: "logged_out" }));
    }
    return this.resp(404, "not found");
  }

  async postText(url: string, body: string): Promise<GatewayResponse> {
    if (url !== "/api/setpoints") {
      return this.resp(404, "not found");
    }
    if (!this.session || this.session.phase !== "full") {
      return this.resp(401, "login required");
    }
    if (this.monitorsInFlight > 0) {
      this.setpointDuringMonitor += 1;
    }
    const parts = body.split(";").map((p) => Number(p.trim()));
    if (parts.length !== 3 || parts.some((v) => Number.isNaN(v))) {
      return this.resp(400, "bad setpoints");
    }
    if (parts.some((v) => !(v > 0 && v < 100))) {
      return this.resp(422, "Invalid value!Check setpoints values");
    }
    const next = this.values.slice();
    [next[3], next[4], next[5]] = parts;
    this.write(next);
    return this.resp(200, "Done");
  }

  async postJson(url: string, payload: unknown): Promise<GatewayResponse> {
    if (url === "/api/admin/users") {
      const user = payload as Account;
      if (this.accounts.some((a) => a.username === user.username)) {
        return this.resp(
          409,
          JSON.stringify({ message: "This username is already used,try another one" }),
        );
      }
      this.accounts.push(user);
      return this.resp(201, JSON.stringify({ status: "created" }));
    }
    if (/\/api\/admin\/users\/.+\/force-logout$/.test(url)) {
      this.session = null;
      return this.resp(200, JSON.stringify({ status: "ok" }));
    }
    return this.resp(404, "not found");
  }

  async del(url: string): Promise<GatewayResponse> {
    const ip = decodeURIComponent(url.split("/").pop() ?? "");
    const before = this.untrusted.length;
    this.untrusted = this.untrusted.filter((e) => e.ip !== ip);
    this.blockedIps.delete(ip);
    return before === this.untrusted.length
      ? this.resp(404, "unknown ip")
      : this.resp(200, JSON.stringify({ status: "ok" }));
  }
}

export class RecordingView implements MonitorView {
  frames: Array<{ items: WireItem[]; seq: number }> = [];
  counts: number[] = [];
  banners: string[] = [];
  cleared = 0;
  authLost = 0;

  renderItems(items: WireItem[], seq: number): void {
    this.frames.push({ items, seq });
  }

  setRequestCount(count: number): void {
    this.counts.push(count);
  }

  showBanner(message: string): void {
    this.banners.push(message);
  }

  clearBanner(): void {
    this.cleared += 1;
  }

  onAuthLost(): void {
    this.authLost += 1;
  }
}

export async function fullLogin(gw: FakeGateway, username = "ali", password = "98765", secret = "6657") {
  await gw.postForm("/api/auth/login", { username, password });
  await gw.postForm("/api/auth/secret", { code: secret });
}
