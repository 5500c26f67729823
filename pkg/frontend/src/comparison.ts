// Pairwise comparison card: two attribute vectors side by side with
// per-attribute bars and prefer-left / indifferent / prefer-right actions.

import { hbar, valueRange } from "./charts.js";
import type { SubmissionQueue, SubmitOutcome } from "./queue.js";
import type { QueryView, SessionState } from "./types.js";

export function attributeLabels(k: number, labels: string[] | null): string[] {
  if (labels && labels.length === k) return labels;
  return Array.from({ length: k }, (_, j) => `attribute ${j + 1}`);
}

export interface ComparisonCallbacks {
  onOutcome?: (outcome: SubmitOutcome) => void;
}

export function renderComparison(
  query: QueryView,
  state: SessionState,
  queue: SubmissionQueue,
  callbacks: ComparisonCallbacks = {},
): HTMLElement {
  const k = query.left.y.length;
  const labels = attributeLabels(k, query.attribute_labels ?? state.attribute_labels);
  const allValues = state.evaluations.map((e) => e.y);

  const card = document.createElement("section");
  card.className = "card comparison";
  card.dataset.iteration = String(query.m);

  const heading = document.createElement("h2");
  heading.textContent = `Which do you prefer? (question ${query.m} of ${state.iterations_total})`;
  card.appendChild(heading);

  const table = document.createElement("table");
  table.className = "compare-table";
  const head = table.insertRow();
  head.insertCell().textContent = "";
  head.insertCell().textContent = `Option A (design ${query.left.index})`;
  head.insertCell().textContent = `Option B (design ${query.right.index})`;

  for (let j = 0; j < k; j++) {
    const range = valueRange(allValues.map((y) => y[j]).concat([query.left.y[j], query.right.y[j]]));
    const row = table.insertRow();
    row.insertCell().textContent = labels[j];
    const a = row.insertCell();
    a.appendChild(hbar(query.left.y[j], range, "hbar-a"));
    a.appendChild(numberSpan(query.left.y[j]));
    const b = row.insertCell();
    b.appendChild(hbar(query.right.y[j], range, "hbar-b"));
    b.appendChild(numberSpan(query.right.y[j]));
  }
  card.appendChild(table);

  const actions = document.createElement("div");
  actions.className = "actions";
  const status = document.createElement("p");
  status.className = "status";

  const buttons: HTMLButtonElement[] = [];
  const mk = (label: string, a: -1 | 0 | 1, cls: string) => {
    const btn = document.createElement("button");
    btn.textContent = label;
    btn.className = cls;
    btn.dataset.answer = String(a);
    btn.addEventListener("click", async () => {
      if (queue.isBlocked(query.m)) return;
      buttons.forEach((b) => (b.disabled = true));
      status.textContent = "submitting…";
      const outcome = await queue.submit(query.m, a);
      if (outcome.kind === "error") {
        // network trouble: allow a retry, nothing reached the service
        buttons.forEach((b) => (b.disabled = false));
        status.textContent = `submission failed (${outcome.message}), try again`;
        status.classList.add("error");
      } else if (outcome.kind === "phase_conflict") {
        status.textContent = "already answered elsewhere, refreshing…";
      } else {
        status.textContent = "answer recorded";
      }
      callbacks.onOutcome?.(outcome);
    });
    buttons.push(btn);
    actions.appendChild(btn);
  };
  mk("Prefer A", 1, "prefer-a");
  mk("No preference", 0, "prefer-none");
  mk("Prefer B", -1, "prefer-b");

  if (queue.isBlocked(query.m)) {
    buttons.forEach((b) => (b.disabled = true));
    status.textContent = "answer already submitted";
  }

  card.appendChild(actions);
  card.appendChild(status);
  return card;
}

function numberSpan(v: number): HTMLSpanElement {
  const span = document.createElement("span");
  span.className = "value";
  span.textContent = formatValue(v);
  return span;
}

export function formatValue(v: number): string {
  if (v === 0) return "0";
  const magnitude = Math.abs(v);
  if (magnitude >= 1000 || magnitude < 0.01) return v.toExponential(3);
  return v.toPrecision(4);
}
