/**
 * The persistent monitor loop: one long poll in flight at any instant.
 *
 * First call carries no `since`, so the page renders the current state at
 * once; every later call chains `since=<last X-Seq>`. A 200 updates the
 * view; a 204 heartbeat re-polls with the same sequence; a 401 hands
 * control to the login flow. While a setpoint POST is in flight the loop is
 * suspended (`permission` off), mirroring the one-channel-at-a-time guard
 * of the original operator page.
 */

import { Http } from "./http.js";
import { parseSnapshot, WireItem } from "./wire.js";

export interface MonitorView {
  renderItems(items: WireItem[], seq: number): void;
  setRequestCount(count: number): void;
  showBanner(message: string): void;
  clearBanner(): void;
  onAuthLost(): void;
}

export type Scheduler = (fn: () => void, ms: number) => void;

export interface MonitorOptions {
  /** Delay between chained requests; 0 keeps the channel hot. */
  delayMs?: number;
  /** Back-off after a transport error. */
  backoffMs?: number;
  schedule?: Scheduler;
}

export class MonitorLoop {
  lastSeq: number | null = null;
  requestCount = 0;
  /** Inter-request delay; adjustable live from the settings field. */
  delayMs: number;

  private permission = true;
  private inFlight = false;
  private stopped = false;
  private pending = false;
  private readonly backoffMs: number;
  private readonly schedule: Scheduler;

  constructor(
    private http: Http,
    private view: MonitorView,
    options: MonitorOptions = {},
  ) {
    this.delayMs = options.delayMs ?? 0;
    this.backoffMs = options.backoffMs ?? 1000;
    this.schedule = options.schedule ?? ((fn, ms) => setTimeout(fn, ms));
  }

  start(): void {
    this.stopped = false;
    void this.tick();
  }

  stop(): void {
    this.stopped = true;
  }

  /** Pause issuing requests (the in-flight one, if any, still completes). */
  suspend(): void {
    this.permission = false;
  }

  resume(): void {
    if (!this.permission) {
      this.permission = true;
      void this.tick();
    }
  }

  get suspended(): boolean {
    return !this.permission;
  }

  private arm(ms: number): void {
    if (this.pending) {
      return;
    }
    this.pending = true;
    this.schedule(() => {
      this.pending = false;
      void this.tick();
    }, ms);
  }

  private async tick(): Promise<void> {
    if (this.stopped || !this.permission || this.inFlight) {
      return;
    }
    this.inFlight = true;
    let response;
    try {
      const url =
        this.lastSeq === null ? "/api/update" : `/api/update?since=${this.lastSeq}`;
      response = await this.http.get(url);
    } catch (err) {
      this.inFlight = false;
      this.view.showBanner("connection lost, retrying");
      this.arm(this.backoffMs);
      return;
    }
    this.inFlight = false;
    if (this.stopped) {
      return;
    }

    if (response.status === 200) {
      let items: WireItem[];
      try {
        items = parseSnapshot(response.body);
      } catch (err) {
        this.view.showBanner("malformed monitor data");
        this.arm(this.backoffMs);
        return;
      }
      if (response.seq !== null) {
        this.lastSeq = response.seq;
      }
      this.requestCount += 1;
      this.view.renderItems(items, response.seq ?? -1);
      this.view.setRequestCount(this.requestCount);
      this.view.clearBanner();
      this.arm(this.delayMs);
    } else if (response.status === 204) {
      if (this.lastSeq === null && response.seq !== null) {
        this.lastSeq = response.seq;
      }
      this.view.clearBanner();
      this.arm(this.delayMs);
    } else if (response.status === 401) {
      this.stopped = true;
      this.view.onAuthLost();
    } else {
      this.view.showBanner(`monitor error ${response.status}`);
      this.arm(this.backoffMs);
    }
  }
}
