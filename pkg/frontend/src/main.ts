// Browser entry point: hash routing, session picker, stream wiring.

import { ApiClient, ApiError, type Session } from "./api.js";
import { escapeHtml, shortId } from "./format.js";
import { SessionManager } from "./session.js";
import { Store } from "./store.js";
import { subscribeEvents, type ConnectionState } from "./stream.js";
import { renderLobby } from "./views/lobby.js";
import { renderProvenance } from "./views/provenance.js";
import { renderRoom } from "./views/room.js";

const api = new ApiClient("");
const store = new Store();
const sessions = new SessionManager(window.localStorage);
const names = new Map<string, string>();

const content = document.getElementById("content") as HTMLElement;
const sessionBar = document.getElementById("session-bar") as HTMLElement;
const statusDot = document.getElementById("connection") as HTMLElement;

async function refreshNames(): Promise<void> {
  try {
    const { identities } = await api.identities();
    for (const identity of identities) {
      names.set(identity.identityId, identity.displayName);
    }
  } catch {
    // offline: ids render truncated until the stream reconnects
  }
}

function route(): { view: string; arg: string } {
  const hash = window.location.hash || "#/lobby";
  const [, view = "lobby", arg = ""] = hash.split("/");
  return { view, arg };
}

let provenanceCache: { commodityId: string; html: string } | null = null;

async function render(): Promise<void> {
  const { view, arg } = route();
  if (view === "room") {
    content.innerHTML = renderRoom(store.state.listings.get(arg),
                                   sessions.current, names);
    bindRoom(arg);
  } else if (view === "provenance") {
    if (provenanceCache?.commodityId !== arg) {
      let html;
      try {
        html = renderProvenance(await api.provenance(arg), names);
      } catch {
        html = renderProvenance(null, names);
      }
      provenanceCache = { commodityId: arg, html };
    }
    content.innerHTML = provenanceCache.html;
  } else {
    content.innerHTML = renderLobby(store.state, sessions.current);
    bindLobby();
  }
}

function renderSessionBar(): void {
  const options = sessions.knownSessions().map((s) =>
    `<option value="${s.identityId}" ${sessions.current?.identityId === s.identityId ? "selected" : ""}>
       ${escapeHtml(s.displayName)} (${s.role.toLowerCase()})</option>`).join("");
  sessionBar.innerHTML = `
    <select id="session-select">
      <option value="">anonymous</option>${options}
    </select>
    <form id="register-form">
      <input id="register-name" placeholder="new identity name" required>
      <select id="register-role"><option>MEMBER</option><option>AUCTIONEER</option></select>
      <button type="submit">Register</button>
    </form>
    <a href="#/lobby">lobby</a>`;
  (document.getElementById("session-select") as HTMLSelectElement).onchange = (ev) => {
    sessions.select((ev.target as HTMLSelectElement).value);
    renderSessionBar();
    void render();
  };
  (document.getElementById("register-form") as HTMLFormElement).onsubmit = async (ev) => {
    ev.preventDefault();
    const nameInput = document.getElementById("register-name") as HTMLInputElement;
    const roleInput = document.getElementById("register-role") as HTMLSelectElement;
    try {
      await sessions.register(api, nameInput.value,
                              roleInput.value as Session["role"]);
      await refreshNames();
      renderSessionBar();
      await render();
    } catch (error) {
      alert(error instanceof ApiError ? `${error.code}: ${error.message}` : String(error));
    }
  };
}

function showError(elementId: string, error: unknown): void {
  const element = document.getElementById(elementId);
  if (element) {
    element.textContent = error instanceof ApiError
      ? `${error.code}${error.message ? `: ${error.message}` : ""}`
      : String(error);
  }
}

function bindRoom(listingId: string): void {
  const bidForm = document.getElementById("bid-form") as HTMLFormElement | null;
  if (bidForm) {
    bidForm.onsubmit = async (ev) => {
      ev.preventDefault();
      const price = Number((document.getElementById("bid-price") as HTMLInputElement).value);
      try {
        await api.placeBid(listingId, price, sessions.current!);
      } catch (error) {
        showError("room-error", error); // e.g. BID_TOO_LOW inline
      }
    };
  }
  const closeButton = document.getElementById("close-bidding");
  if (closeButton) {
    closeButton.onclick = async () => {
      try {
        await api.closeBidding(listingId, sessions.current!);
      } catch (error) {
        showError("room-error", error);
      }
    };
  }
  const transferButton = document.getElementById("transfer-asset");
  if (transferButton) {
    transferButton.onclick = async () => {
      try {
        await api.transferAsset(listingId, sessions.current!.identityId,
                                sessions.current!);
      } catch (error) {
        showError("room-error", error);
      }
    };
  }
}

function bindLobby(): void {
  const form = document.getElementById("listing-form") as HTMLFormElement | null;
  if (!form) return;
  form.onsubmit = async (ev) => {
    ev.preventDefault();
    const data = new FormData(form);
    const session = sessions.current!;
    try {
      const created = await api.createCommodity(
        String(data.get("description")), Number(data.get("idealPrice")),
        data.get("trackRenovations") === "on", session);
      await api.waitCommitted(created.txId);
      const commodityId = created.result.commodityId as string;
      await api.createListing(
        String(data.get("exchangeName")), commodityId,
        Number(data.get("reservePrice")), String(data.get("auctionId")), session);
    } catch (error) {
      showError("listing-error", error);
    }
  };
}

function connectionLabel(state: ConnectionState): void {
  statusDot.dataset.state = state;
  statusDot.title = state === "live" ? "event stream connected"
    : state === "lost" ? "event stream lost, resubscribing" : "connecting";
  statusDot.textContent = state === "live" ? `live · block ${store.state.lastBlock}`
    : state;
}

async function start(): Promise<void> {
  await refreshNames();
  renderSessionBar();
  store.subscribe(() => {
    void render();
    connectionLabel((statusDot.dataset.state as ConnectionState) ?? "connecting");
  });
  subscribeEvents("", 0, (event) => {
    store.apply(event);
    if (event.kind === "BLOCK_COMMITTED") void refreshNames();
  }, connectionLabel);
  window.addEventListener("hashchange", () => {
    provenanceCache = null;
    void render();
  });
  await render();
}

void start();

export { shortId }; // re-exported for manual debugging in the console
