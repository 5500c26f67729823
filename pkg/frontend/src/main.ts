// Single-page wiring: a landing list of sessions and a per-session view
// that switches between comparison, progress, and menu by phase.

import { ServiceClient } from "./api.js";
import { renderComparison } from "./comparison.js";
import { initialMenuModel, loadSelection, renderMenu } from "./menu.js";
import { Poller } from "./poller.js";
import { renderProgress } from "./progress.js";
import { SubmissionQueue } from "./queue.js";
import type { AxisChoice } from "./progress.js";
import type { MenuModel } from "./menu.js";
import type { SessionState } from "./types.js";

const API_BASE = (window as { BOPREF_API?: string }).BOPREF_API ?? "";
const client = new ServiceClient(API_BASE);

const root = document.getElementById("app") as HTMLElement;

function route(): void {
  const match = location.hash.match(/^#\/session\/([0-9a-f-]+)/i);
  if (match) {
    mountSession(match[1]);
  } else {
    mountLanding();
  }
}

async function mountLanding(): Promise<void> {
  root.replaceChildren();
  const card = document.createElement("section");
  card.className = "card";
  const h = document.createElement("h1");
  h.textContent = "Optimization sessions";
  card.appendChild(h);
  try {
    const sessions = await client.listSessions();
    if (!sessions.length) {
      const p = document.createElement("p");
      p.textContent = "no sessions yet";
      card.appendChild(p);
    } else {
      const ul = document.createElement("ul");
      for (const s of sessions) {
        const li = document.createElement("li");
        const a = document.createElement("a");
        a.href = `#/session/${s.id}`;
        a.textContent = `${s.id.slice(0, 8)}… — ${s.phase} (${s.iterations_done}/${s.iterations_total} answered)`;
        li.appendChild(a);
        ul.appendChild(li);
      }
      card.appendChild(ul);
    }
  } catch {
    const p = document.createElement("p");
    p.className = "error";
    p.textContent = "service unreachable";
    card.appendChild(p);
  }
  const demo = document.createElement("button");
  demo.textContent = "Start a demo session (built-in test problem)";
  demo.addEventListener("click", async () => {
    demo.disabled = true;
    const created = await client.createSession({
      policy: "ei-uu",
      num_evaluations: 5,
      problem: "dtlz1a",
      seeds: { evaluation: Date.now() % 100000, dm: 1, policy: 2 },
      gp: { hyper_samples: 1, map_restarts: 4, nm_maxiter: 60 },
      acq: { restarts: 3, steps: 25, grad_samples: 8, ranking_samples: 256 },
      theta_samples: 32,
      attribute_labels: ["objective 1", "objective 2"],
    });
    location.hash = `#/session/${created.id}`;
  });
  card.appendChild(demo);
  root.appendChild(card);
}

interface ViewState {
  axes: AxisChoice;
  menuModel: MenuModel | null;
}

let activePoller: Poller | null = null;

function mountSession(sessionId: string): void {
  activePoller?.stop();
  root.replaceChildren();
  const queue = new SubmissionQueue((m, a) => client.submitPreference(sessionId, m, a));
  const poller = new Poller(client, sessionId, 1000);
  activePoller = poller;
  const view: ViewState = { axes: { ax: 0, ay: 1 }, menuModel: null };

  const render = (state: SessionState) => {
    root.replaceChildren();

    const nav = document.createElement("p");
    const back = document.createElement("a");
    back.href = "#/";
    back.textContent = "← all sessions";
    nav.appendChild(back);
    root.appendChild(nav);

    if (poller.offline) {
      const off = document.createElement("p");
      off.className = "error";
      off.textContent = "service unreachable, retrying…";
      root.appendChild(off);
    }

    if (state.phase === "awaiting_preference" && state.pending_query) {
      root.appendChild(
        renderComparison(state.pending_query, state, queue, {
          onOutcome: () => void poller.tick(() => Number.MAX_SAFE_INTEGER),
        }),
      );
    } else if (state.phase !== "menu_ready") {
      const busy = document.createElement("section");
      busy.className = "card";
      const p = document.createElement("p");
      p.className = "busy";
      p.textContent =
        state.phase === "initializing"
          ? "evaluating the initial designs…"
          : "choosing and evaluating the next design…";
      busy.appendChild(p);
      root.appendChild(busy);
    }

    if (state.phase === "menu_ready" || state.menu.length) {
      const stored = view.menuModel?.selected ?? loadSelection(sessionId);
      const base = initialMenuModel(state.menu, stored);
      view.menuModel = {
        ...base,
        sortBy: view.menuModel?.sortBy ?? null,
        descending: view.menuModel?.descending ?? true,
      };
      root.appendChild(
        renderMenu(state, view.menuModel, (m) => {
          view.menuModel = m;
          render(state);
        }),
      );
    }

    root.appendChild(
      renderProgress(state, view.axes, (axes) => {
        view.axes = axes;
        render(state);
      }),
    );
  };

  poller.subscribe(render);
  poller.start();
}

window.addEventListener("hashchange", route);
route();
