import { fetchSession, guardPage, logout } from "../auth.js";
import { fetchHttp } from "../http.js";
import { MonitorLoop, MonitorView } from "../monitor.js";
import { sendSetpoints } from "../setpoints.js";
import { toPolyline, TrendBuffer } from "../trend.js";
import { GOOD_QUALITY, WireItem } from "../wire.js";

const http = fetchHttp();
const TRENDED_TAGS = 3; // tags 1..3 chart, tags 4..6 take setpoints
const DEFAULT_MAX_POINTS = 50;

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function backToLogin(): void {
  location.replace("/");
}

function drawTrends(buffers: TrendBuffer[]): void {
  const canvas = el<HTMLCanvasElement>("trend");
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    return;
  }
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(0.5, 0.5, canvas.width - 1, canvas.height - 1);
  for (let i = 0; i < buffers.length; i++) {
    if (!el<HTMLInputElement>(`trend-on-${i + 1}`).checked) {
      continue;
    }
    const line = toPolyline(buffers[i].snapshot(), canvas.width, canvas.height);
    if (line.length < 2) {
      continue;
    }
    ctx.strokeStyle = el<HTMLInputElement>(`trend-color-${i + 1}`).value;
    ctx.beginPath();
    ctx.moveTo(line[0][0], line[0][1]);
    for (const [x, y] of line.slice(1)) {
      ctx.lineTo(x, y);
    }
    ctx.stroke();
  }
}

async function init(): Promise<void> {
  const session = await fetchSession(http);
  const redirect = guardPage(session);
  if (redirect !== null || session === null) {
    location.replace(redirect ?? "/");
    return;
  }
  el<HTMLSpanElement>("who").textContent = `${session.username} (${session.role})`;
  const canWrite = session.role === "admin" || session.role === "operator";
  if (!canWrite) {
    el<HTMLFieldSetElement>("setpoint-fields").disabled = true;
  }

  const buffers = Array.from(
    { length: TRENDED_TAGS },
    () => new TrendBuffer(DEFAULT_MAX_POINTS),
  );

  const view: MonitorView = {
    renderItems(items: WireItem[], _seq: number) {
      const table = el<HTMLTableElement>("tags");
      items.forEach((item, idx) => {
        const row = table.rows[idx + 1];
        if (!row) {
          return;
        }
        row.cells[1].textContent = String(item.value);
        row.cells[2].textContent = item.quality === GOOD_QUALITY ? "good" : "bad";
        row.cells[3].textContent = item.timestamp;
        row.classList.toggle("bad-quality", item.quality !== GOOD_QUALITY);
      });
      items.slice(0, TRENDED_TAGS).forEach((item, idx) => {
        buffers[idx].push(loop.requestCount, item.value);
      });
      drawTrends(buffers);
    },
    setRequestCount(count: number) {
      el<HTMLSpanElement>("req-count").textContent = String(count);
    },
    showBanner(message: string) {
      const banner = el<HTMLDivElement>("banner");
      banner.textContent = message;
      banner.hidden = false;
    },
    clearBanner() {
      el<HTMLDivElement>("banner").hidden = true;
    },
    onAuthLost: backToLogin,
  };

  const loop = new MonitorLoop(http, view);
  loop.start();

  el<HTMLFormElement>("setpoint-form").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const raw = ["sp1", "sp2", "sp3"].map((id) => el<HTMLInputElement>(id).value);
    const outcome = await sendSetpoints(http, loop, raw);
    if (outcome.message) {
      alert(outcome.message);
    }
  });

  el<HTMLInputElement>("max-points").addEventListener("change", () => {
    const cap = parseInt(el<HTMLInputElement>("max-points").value, 10);
    if (Number.isFinite(cap)) {
      buffers.forEach((b) => b.setCap(cap));
    }
  });

  el<HTMLInputElement>("req-delay").addEventListener("change", () => {
    const ms = parseInt(el<HTMLInputElement>("req-delay").value, 10);
    loop.delayMs = Number.isFinite(ms) && ms >= 0 ? ms : 0;
  });

  el<HTMLButtonElement>("logout").addEventListener("click", async () => {
    loop.stop();
    await logout(http);
    backToLogin();
  });
}

void init();
