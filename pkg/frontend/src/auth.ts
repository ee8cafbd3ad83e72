/**
 * Two-phase login flow plus the session probe every protected page runs on
 * load, so a deep link or the back button can never show live data without
 * a fully authenticated session.
 */

import { Http } from "./http.js";

export interface LoginStep {
  ok: boolean;
  message: string;
  secretDeadlineS: number;
}

export interface SecretStep {
  ok: boolean;
  role: string | null;
  message: string;
}

export interface SessionInfo {
  username: string;
  role: string;
  phase: string;
}

export async function loginPhase1(
  http: Http,
  username: string,
  password: string,
): Promise<LoginStep> {
  const r = await http.postForm("/api/auth/login", { username, password });
  const doc = safeJson(r.body);
  if (r.status === 200) {
    return {
      ok: true,
      message: str(doc?.message),
      secretDeadlineS: Number(doc?.secret_deadline_s ?? 30),
    };
  }
  return { ok: false, message: str(doc?.message) || "login failed", secretDeadlineS: 0 };
}

export async function loginPhase2(http: Http, code: string): Promise<SecretStep> {
  const r = await http.postForm("/api/auth/secret", { code });
  const doc = safeJson(r.body);
  if (r.status === 200) {
    return { ok: true, role: str(doc?.role) || "user", message: "" };
  }
  return { ok: false, role: null, message: str(doc?.message) || "authentication failed" };
}

export async function fetchSession(http: Http): Promise<SessionInfo | null> {
  const r = await http.get("/api/auth/session");
  if (r.status !== 200) {
    return null;
  }
  const doc = safeJson(r.body);
  if (!doc) {
    return null;
  }
  return { username: str(doc.username), role: str(doc.role), phase: str(doc.phase) };
}

export async function logout(http: Http): Promise<void> {
  await http.postForm("/api/auth/logout", {});
}

export function pageForRole(role: string): string {
  return role === "admin" ? "/admin.html" : "/operator.html";
}

/**
 * Protected-page gate: returns a redirect target, or null to stay. Without a
 * fully authenticated session (deep link, back button after logout) the only
 * answer is the login page.
 */
export function guardPage(
  session: SessionInfo | null,
  opts: { requireRole?: string } = {},
): string | null {
  if (!session || session.phase !== "full") {
    return "/";
  }
  if (opts.requireRole && session.role !== opts.requireRole) {
    return "/";
  }
  return null;
}

/**
 * Drives the visible secret-code countdown. Returns a cancel function;
 * onExpire fires once when the window is gone.
 */
export function startCountdown(
  seconds: number,
  onTick: (remaining: number) => void,
  onExpire: () => void,
  schedule: (fn: () => void, ms: number) => unknown = (fn, ms) => setTimeout(fn, ms),
): () => void {
  let remaining = Math.ceil(seconds);
  let cancelled = false;
  const step = () => {
    if (cancelled) {
      return;
    }
    onTick(remaining);
    if (remaining <= 0) {
      onExpire();
      return;
    }
    remaining -= 1;
    schedule(step, 1000);
  };
  step();
  return () => {
    cancelled = true;
  };
}

function safeJson(body: string): Record<string, unknown> | null {
  try {
    const doc = JSON.parse(body);
    return typeof doc === "object" && doc !== null ? (doc as Record<string, unknown>) : null;
  } catch {
    return null;
  }
}

function str(value: unknown): string {
  return typeof value === "string" ? value : "";
}
