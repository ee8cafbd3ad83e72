import { fetchSession, loginPhase1, pageForRole } from "../auth.js";
import { fetchHttp } from "../http.js";

const http = fetchHttp();

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

async function init(): Promise<void> {
  const session = await fetchSession(http);
  if (session && session.phase === "full") {
    location.replace(pageForRole(session.role));
    return;
  }
  const notice = sessionStorage.getItem("tagpoll-login-notice");
  if (notice) {
    sessionStorage.removeItem("tagpoll-login-notice");
    el<HTMLParagraphElement>("msg").textContent = notice;
  }
  el<HTMLFormElement>("login-form").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const username = el<HTMLInputElement>("username").value.trim();
    const password = el<HTMLInputElement>("password").value;
    const result = await loginPhase1(http, username, password);
    if (result.ok) {
      location.assign("/secret.html");
    } else {
      el<HTMLParagraphElement>("msg").textContent = result.message;
    }
  });
}

void init();
