// Dependency-free SVG helpers: horizontal bars and a 2-D scatter.

const SVG_NS = "http://www.w3.org/2000/svg";

export function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number> = {},
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, String(v));
  return el;
}

export interface Range {
  lo: number;
  hi: number;
}

export function valueRange(values: number[]): Range {
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (!isFinite(lo) || !isFinite(hi)) {
    lo = 0;
    hi = 1;
  }
  if (hi - lo < 1e-12) {
    hi = lo + 1;
  }
  return { lo, hi };
}

export function barFraction(value: number, range: Range): number {
  const f = (value - range.lo) / (range.hi - range.lo);
  return Math.max(0, Math.min(1, f));
}

/** Horizontal bar with a numeric label, scaled into [lo, hi]. */
export function hbar(value: number, range: Range, cssClass: string): SVGSVGElement {
  const width = 220;
  const svg = svgEl("svg", { width, height: 18, class: "hbar" });
  svg.appendChild(
    svgEl("rect", { x: 0, y: 3, width, height: 12, class: "hbar-track" }),
  );
  svg.appendChild(
    svgEl("rect", {
      x: 0,
      y: 3,
      width: Math.round(width * barFraction(value, range)),
      height: 12,
      class: cssClass,
    }),
  );
  return svg;
}

/** Interval bar [q05, q95] with quartile box and mean tick, on [lo, hi]. */
export function intervalBar(
  q05: number,
  q25: number,
  q75: number,
  q95: number,
  mean: number,
  range: Range,
): SVGSVGElement {
  const width = 220;
  const px = (v: number) => Math.round(width * barFraction(v, range));
  const svg = svgEl("svg", { width, height: 16, class: "interval" });
  svg.appendChild(svgEl("rect", { x: 0, y: 6, width, height: 4, class: "hbar-track" }));
  svg.appendChild(
    svgEl("rect", {
      x: px(q05), y: 6, width: Math.max(1, px(q95) - px(q05)), height: 4,
      class: "interval-outer",
    }),
  );
  svg.appendChild(
    svgEl("rect", {
      x: px(q25), y: 4, width: Math.max(1, px(q75) - px(q25)), height: 8,
      class: "interval-inner",
    }),
  );
  svg.appendChild(
    svgEl("rect", { x: px(mean), y: 2, width: 2, height: 12, class: "interval-mean" }),
  );
  return svg;
}

export interface ScatterPoint {
  index: number;
  ax: number;
  ay: number;
  front: boolean;
  selected?: boolean;
}

export function scatter(points: ScatterPoint[], size = 360): SVGSVGElement {
  const pad = 14;
  const svg = svgEl("svg", {
    width: size,
    height: size,
    class: "scatter",
    viewBox: `0 0 ${size} ${size}`,
  });
  svg.appendChild(
    svgEl("rect", { x: 0, y: 0, width: size, height: size, class: "scatter-bg" }),
  );
  if (!points.length) return svg;
  const rx = valueRange(points.map((p) => p.ax));
  const ry = valueRange(points.map((p) => p.ay));
  for (const p of points) {
    const cx = pad + (size - 2 * pad) * barFraction(p.ax, rx);
    const cy = size - pad - (size - 2 * pad) * barFraction(p.ay, ry);
    const dot = svgEl("circle", {
      cx,
      cy,
      r: p.front ? 5 : 3,
      class: p.front ? "dot dot-front" : "dot",
      "data-index": p.index,
    });
    if (p.selected) dot.classList.add("dot-selected");
    svg.appendChild(dot);
  }
  return svg;
}
