// Session dashboard: counts, parameter-posterior interval bars, and an
// axis-selectable attribute scatter with the current front highlighted.

import { intervalBar, scatter, valueRange } from "./charts.js";
import { attributeLabels, formatValue } from "./comparison.js";
import type { ScatterPoint } from "./charts.js";
import type { SessionState } from "./types.js";

export interface AxisChoice {
  ax: number;
  ay: number;
}

export function scatterPoints(state: SessionState, axes: AxisChoice): ScatterPoint[] {
  const front = new Set(state.menu.map((m) => m.index));
  return state.evaluations.map((e) => ({
    index: e.n,
    ax: e.y[axes.ax],
    ay: e.y[axes.ay],
    front: front.has(e.n),
  }));
}

export function renderProgress(
  state: SessionState,
  axes: AxisChoice,
  onAxesChange: (axes: AxisChoice) => void,
): HTMLElement {
  const root = document.createElement("section");
  root.className = "card progress";

  const heading = document.createElement("h2");
  heading.textContent = "Progress";
  root.appendChild(heading);

  const facts = document.createElement("dl");
  facts.className = "facts";
  const fact = (name: string, value: string, cls?: string) => {
    const dt = document.createElement("dt");
    dt.textContent = name;
    const dd = document.createElement("dd");
    dd.textContent = value;
    if (cls) dd.className = cls;
    facts.appendChild(dt);
    facts.appendChild(dd);
  };
  fact("phase", state.phase, `phase phase-${state.phase}`);
  fact("designs evaluated", String(state.evaluations.length));
  fact(
    "questions answered",
    `${state.iterations_done} of ${state.iterations_total}`,
  );
  if (state.last_error) fact("last error", state.last_error, "error");
  root.appendChild(facts);

  if (state.posterior) {
    const post = state.posterior;
    const sub = document.createElement("h3");
    sub.textContent = "learned preference weights (90% interval)";
    root.appendChild(sub);
    const list = document.createElement("table");
    list.className = "posterior";
    const range = valueRange(post.q05.concat(post.q95));
    for (let c = 0; c < post.mean.length; c++) {
      const row = list.insertRow();
      row.insertCell().textContent = `θ${c + 1}`;
      row
        .insertCell()
        .appendChild(
          intervalBar(post.q05[c], post.q25[c], post.q75[c], post.q95[c], post.mean[c], range),
        );
      row.insertCell().textContent = formatValue(post.mean[c]);
    }
    root.appendChild(list);
    if (post.fallback) {
      const warn = document.createElement("p");
      warn.className = "error";
      warn.textContent =
        "answers look mutually inconsistent; using a noise-tolerant update";
      root.appendChild(warn);
    }
  }

  const k = state.evaluations.length ? state.evaluations[0].y.length : 0;
  if (k >= 2) {
    const sub = document.createElement("h3");
    sub.textContent = "evaluated attribute vectors (front highlighted)";
    root.appendChild(sub);
    if (k > 2) {
      const labels = attributeLabels(k, state.attribute_labels);
      const pick = document.createElement("div");
      pick.className = "axis-pick";
      (["ax", "ay"] as const).forEach((which) => {
        const sel = document.createElement("select");
        sel.dataset.axis = which;
        labels.forEach((label, j) => {
          const opt = document.createElement("option");
          opt.value = String(j);
          opt.textContent = label;
          opt.selected = axes[which] === j;
          sel.appendChild(opt);
        });
        sel.addEventListener("change", () => {
          onAxesChange({ ...axes, [which]: Number(sel.value) });
        });
        pick.appendChild(sel);
      });
      root.appendChild(pick);
    }
    root.appendChild(scatter(scatterPoints(state, axes)));
  }
  return root;
}
