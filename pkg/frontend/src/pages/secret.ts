import { fetchSession, loginPhase2, pageForRole, startCountdown } from "../auth.js";
import { fetchHttp } from "../http.js";

const http = fetchHttp();

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function backToLogin(notice: string): void {
  if (notice) {
    sessionStorage.setItem("tagpoll-login-notice", notice);
  }
  location.replace("/");
}

async function init(): Promise<void> {
  const session = await fetchSession(http);
  if (!session) {
    backToLogin("");
    return;
  }
  if (session.phase === "full") {
    location.replace(pageForRole(session.role));
    return;
  }
  el<HTMLSpanElement>("who").textContent = session.username;

  const cancel = startCountdown(
    30,
    (remaining) => {
      el<HTMLSpanElement>("countdown").textContent = String(remaining);
    },
    () => backToLogin("secret code window expired"),
  );

  el<HTMLFormElement>("secret-form").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const code = el<HTMLInputElement>("code").value.trim();
    const result = await loginPhase2(http, code);
    if (result.ok && result.role) {
      cancel();
      location.assign(pageForRole(result.role));
    } else {
      cancel();
      backToLogin(result.message);
    }
  });
}

void init();
