import {
  addUser,
  forceLogout,
  listUntrusted,
  listUsers,
  removeUntrusted,
} from "../admin.js";
import { fetchSession, guardPage, logout } from "../auth.js";
import { fetchHttp } from "../http.js";

const http = fetchHttp();

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function say(message: string): void {
  el<HTMLParagraphElement>("admin-msg").textContent = message;
}

async function refreshUsers(): Promise<void> {
  const users = await listUsers(http);
  const body = el<HTMLTableSectionElement>("user-rows");
  body.innerHTML = "";
  for (const user of users) {
    const row = body.insertRow();
    row.insertCell().textContent = user.username;
    row.insertCell().textContent = user.role;
    row.insertCell().textContent = user.logged ? "logged" : "not logged";
    row.insertCell().textContent = user.ip ?? "-";
    const actions = row.insertCell();
    const btn = document.createElement("button");
    btn.textContent = "force logout";
    btn.addEventListener("click", async () => {
      const result = await forceLogout(http, user.username);
      say(result.message);
      await refreshUsers();
    });
    actions.appendChild(btn);
  }
}

async function refreshUntrusted(): Promise<void> {
  const rows = await listUntrusted(http);
  const body = el<HTMLTableSectionElement>("untrusted-rows");
  body.innerHTML = "";
  for (const entry of rows) {
    const row = body.insertRow();
    row.insertCell().textContent = entry.ip;
    row.insertCell().textContent = entry.reason;
    row.insertCell().textContent = entry.added_at;
    const actions = row.insertCell();
    const btn = document.createElement("button");
    btn.textContent = "remove";
    btn.addEventListener("click", async () => {
      const result = await removeUntrusted(http, entry.ip);
      say(result.message);
      await refreshUntrusted();
    });
    actions.appendChild(btn);
  }
}

async function init(): Promise<void> {
  const session = await fetchSession(http);
  const redirect = guardPage(session, { requireRole: "admin" });
  if (redirect !== null || session === null) {
    location.replace(redirect ?? "/");
    return;
  }
  el<HTMLSpanElement>("who").textContent = session.username;

  el<HTMLFormElement>("add-user-form").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const result = await addUser(http, {
      username: el<HTMLInputElement>("new-username").value.trim(),
      password: el<HTMLInputElement>("new-password").value,
      role: el<HTMLSelectElement>("new-role").value,
      secret: el<HTMLInputElement>("new-secret").value,
    });
    say(result.message);
    if (result.ok) {
      el<HTMLFormElement>("add-user-form").reset();
      await refreshUsers();
    }
  });

  el<HTMLButtonElement>("refresh-users").addEventListener("click", () => void refreshUsers());
  el<HTMLButtonElement>("refresh-untrusted").addEventListener(
    "click",
    () => void refreshUntrusted(),
  );
  el<HTMLButtonElement>("logout").addEventListener("click", async () => {
    await logout(http);
    location.replace("/");
  });

  await refreshUsers();
  await refreshUntrusted();
}

void init();
