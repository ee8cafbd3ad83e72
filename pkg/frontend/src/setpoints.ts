/**
 * Setpoint entry: values are range-checked in the browser before anything is
 * sent (strictly inside (0, 100) by default), and the monitor loop stays
 * suspended for the duration of the POST.
 */

import { Http } from "./http.js";
import { MonitorLoop } from "./monitor.js";
import { joinSetpoints } from "./wire.js";

export const INVALID_SETPOINT_MSG = "Invalid value!Check setpoints values";

export interface SetpointBounds {
  lo: number;
  hi: number;
}

export const DEFAULT_BOUNDS: SetpointBounds = { lo: 0, hi: 100 };

export function setpointsValid(raw: string[], bounds: SetpointBounds = DEFAULT_BOUNDS): boolean {
  if (raw.length === 0) {
    return false;
  }
  return raw.every((text) => {
    const value = Number(text.trim());
    return text.trim() !== "" && Number.isFinite(value) && value > bounds.lo && value < bounds.hi;
  });
}

export interface SetpointOutcome {
  sent: boolean;
  ok: boolean;
  message: string | null;
}

export interface SendOptions {
  bounds?: SetpointBounds;
  /** Hold the monitor channel while the POST runs (the protocol itself
   * allows concurrency; this mirrors the classic one-at-a-time client). */
  suspendMonitor?: boolean;
}

export async function sendSetpoints(
  http: Http,
  monitor: MonitorLoop,
  raw: string[],
  options: SendOptions = {},
): Promise<SetpointOutcome> {
  const bounds = options.bounds ?? DEFAULT_BOUNDS;
  const suspend = options.suspendMonitor ?? true;
  if (!setpointsValid(raw, bounds)) {
    return { sent: false, ok: false, message: INVALID_SETPOINT_MSG };
  }
  if (suspend) {
    monitor.suspend();
  }
  try {
    const response = await http.postText("/api/setpoints", joinSetpoints(raw));
    if (response.status === 200) {
      return { sent: true, ok: true, message: null };
    }
    const message = response.body || `setpoint error ${response.status}`;
    return { sent: true, ok: false, message };
  } finally {
    if (suspend) {
      monitor.resume();
    }
  }
}
