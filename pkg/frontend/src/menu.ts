// Final menu: the non-dominated evaluated designs as a sortable table
// plus a scatter, with a locally persisted selection and a handoff panel
// showing the chosen design's inputs.

import { scatter } from "./charts.js";
import { attributeLabels, formatValue } from "./comparison.js";
import type { MenuEntry, SessionState } from "./types.js";

export interface MenuModel {
  entries: MenuEntry[];
  sortBy: number | null; // attribute column, null = service order
  descending: boolean;
  selected: number | null; // entry index (design id), persisted locally
}

export function initialMenuModel(entries: MenuEntry[], stored: number | null): MenuModel {
  const selected =
    stored !== null && entries.some((e) => e.index === stored)
      ? stored
      : entries.length === 1
        ? entries[0].index
        : null;
  return { entries, sortBy: null, descending: true, selected };
}

/** Stable sort on one attribute; ties keep service order. */
export function sortedEntries(model: MenuModel): MenuEntry[] {
  const rows = model.entries.map((e, pos) => ({ e, pos }));
  if (model.sortBy !== null) {
    const j = model.sortBy;
    const sign = model.descending ? -1 : 1;
    rows.sort((a, b) => {
      const d = a.e.y[j] - b.e.y[j];
      if (d !== 0) return sign * d;
      return a.pos - b.pos;
    });
  }
  return rows.map((r) => r.e);
}

export function toggleSort(model: MenuModel, column: number): MenuModel {
  if (model.sortBy === column) {
    return { ...model, descending: !model.descending };
  }
  return { ...model, sortBy: column, descending: true };
}

const storageKey = (sessionId: string) => `bopref-selection-${sessionId}`;

export function loadSelection(sessionId: string): number | null {
  try {
    const raw = localStorage.getItem(storageKey(sessionId));
    return raw === null ? null : Number(raw);
  } catch {
    return null;
  }
}

export function storeSelection(sessionId: string, index: number): void {
  try {
    localStorage.setItem(storageKey(sessionId), String(index));
  } catch {
    // storage unavailable: selection stays in memory only
  }
}

export function renderMenu(
  state: SessionState,
  model: MenuModel,
  onModelChange: (m: MenuModel) => void,
): HTMLElement {
  const root = document.createElement("section");
  root.className = "card menu";
  const k = model.entries.length ? model.entries[0].y.length : 0;
  const labels = attributeLabels(k, state.attribute_labels);

  const heading = document.createElement("h2");
  heading.textContent =
    state.phase === "menu_ready" ? "Final menu: pick a design" : "Current best designs";
  root.appendChild(heading);

  if (!model.entries.length) {
    const empty = document.createElement("p");
    empty.textContent = "no designs evaluated yet";
    root.appendChild(empty);
    return root;
  }

  const table = document.createElement("table");
  table.className = "menu-table";
  const head = table.insertRow();
  head.insertCell().textContent = "design";
  labels.forEach((label, j) => {
    const cell = head.insertCell();
    const btn = document.createElement("button");
    btn.className = "sort";
    btn.dataset.column = String(j);
    const marker = model.sortBy === j ? (model.descending ? " ↓" : " ↑") : "";
    btn.textContent = label + marker;
    btn.addEventListener("click", () => onModelChange(toggleSort(model, j)));
    cell.appendChild(btn);
  });

  for (const entry of sortedEntries(model)) {
    const row = table.insertRow();
    row.dataset.index = String(entry.index);
    if (entry.index === model.selected) row.classList.add("selected");
    row.insertCell().textContent = `#${entry.index}`;
    entry.y.forEach((v) => {
      row.insertCell().textContent = formatValue(v);
    });
    row.addEventListener("click", () => {
      storeSelection(state.id, entry.index);
      onModelChange({ ...model, selected: entry.index });
    });
  }
  root.appendChild(table);

  const front = new Set(model.entries.map((e) => e.index));
  if (k >= 2) {
    root.appendChild(
      scatter(
        state.evaluations.map((e) => ({
          index: e.n,
          ax: e.y[0],
          ay: e.y[1],
          front: front.has(e.n),
          selected: e.n === model.selected,
        })),
      ),
    );
  }

  if (model.selected !== null) {
    const chosen = model.entries.find((e) => e.index === model.selected);
    if (chosen) {
      const panel = document.createElement("div");
      panel.className = "handoff";
      const title = document.createElement("h3");
      title.textContent = `design #${chosen.index} inputs`;
      panel.appendChild(title);
      const code = document.createElement("code");
      code.textContent = JSON.stringify(chosen.x);
      panel.appendChild(code);
      root.appendChild(panel);
    }
  }
  return root;
}
