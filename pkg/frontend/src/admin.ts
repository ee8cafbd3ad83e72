/**
 * Admin console operations: user inventory with live login status, account
 * creation (server-side duplicate message surfaced verbatim), force logout,
 * and untrusted-IP housekeeping.
 */

import { Http } from "./http.js";

export interface UserRow {
  username: string;
  role: string;
  logged: boolean;
  ip: string | null;
}

export interface UntrustedRow {
  ip: string;
  added_at: string;
  reason: string;
}

export interface AdminResult {
  ok: boolean;
  message: string;
}

export async function listUsers(http: Http): Promise<UserRow[]> {
  const r = await http.get("/api/admin/users");
  if (r.status !== 200) {
    throw new Error(`admin users: ${r.status}`);
  }
  return JSON.parse(r.body) as UserRow[];
}

export async function addUser(
  http: Http,
  user: { username: string; password: string; role: string; secret: string },
): Promise<AdminResult> {
  const r = await http.postJson("/api/admin/users", user);
  if (r.status === 201) {
    return { ok: true, message: `user ${user.username} added` };
  }
  let message = `error ${r.status}`;
  try {
    const doc = JSON.parse(r.body);
    if (typeof doc?.message === "string") {
      message = doc.message;
    }
  } catch {
    /* keep the fallback */
  }
  return { ok: false, message };
}

export async function forceLogout(http: Http, username: string): Promise<AdminResult> {
  const r = await http.postJson(`/api/admin/users/${encodeURIComponent(username)}/force-logout`, {});
  return { ok: r.status === 200, message: r.status === 200 ? `${username} logged out` : r.body };
}

export async function listUntrusted(http: Http): Promise<UntrustedRow[]> {
  const r = await http.get("/api/admin/untrusted");
  if (r.status !== 200) {
    throw new Error(`admin untrusted: ${r.status}`);
  }
  return JSON.parse(r.body) as UntrustedRow[];
}

export async function removeUntrusted(http: Http, ip: string): Promise<AdminResult> {
  const r = await http.del(`/api/admin/untrusted/${encodeURIComponent(ip)}`);
  return { ok: r.status === 200, message: r.status === 200 ? `${ip} removed` : r.body };
}
