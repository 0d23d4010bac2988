/** Hand-rolled SVG charts: lines, bands, scatter with brushing, heatmaps.
 *
 * Axis mapping is linear; no other transformation touches the data.
 */

import { extent, linearScale } from "./state.js";
import type { Rect } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
export const WIDTH = 640;
export const HEIGHT = 360;
const MARGIN = { top: 12, right: 16, bottom: 28, left: 46 };

export interface Series {
  x: number[];
  y: (number | null)[];
  color?: string;
  width?: number;
  opacity?: number;
  dash?: string;
}

export interface BandSpec {
  x: number[];
  lower: number[];
  upper: number[];
  color?: string;
}

function el<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number> = {},
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, String(value));
  }
  return node;
}

function axisTicks(lo: number, hi: number, count = 5): number[] {
  const ticks: number[] = [];
  for (let i = 0; i <= count; i++) {
    ticks.push(lo + ((hi - lo) * i) / count);
  }
  return ticks;
}

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1000 || a < 0.01) return v.toExponential(1);
  return String(Math.round(v * 100) / 100);
}

export interface Frame {
  svg: SVGSVGElement;
  xScale: (v: number) => number;
  yScale: (v: number) => number;
  plot: SVGGElement;
  inner: { x0: number; x1: number; y0: number; y1: number };
}

export function chartFrame(xDomain: [number, number], yDomain: [number, number]): Frame {
  const svg = el("svg", {
    viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    class: "chart",
    preserveAspectRatio: "xMidYMid meet",
  });
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  const xScale = linearScale(xDomain, [x0, x1]);
  const yScale = linearScale(yDomain, [y0, y1]);

  const axes = el("g", { class: "axes" });
  axes.appendChild(el("line", { x1: x0, y1: y0, x2: x1, y2: y0, class: "axis-line" }));
  axes.appendChild(el("line", { x1: x0, y1: y0, x2: x0, y2: y1, class: "axis-line" }));
  for (const t of axisTicks(xDomain[0], xDomain[1])) {
    const px = xScale(t);
    axes.appendChild(el("line", { x1: px, y1: y0, x2: px, y2: y0 + 4, class: "axis-line" }));
    const label = el("text", { x: px, y: y0 + 16, class: "tick", "text-anchor": "middle" });
    label.textContent = fmtTick(t);
    axes.appendChild(label);
  }
  for (const t of axisTicks(yDomain[0], yDomain[1], 4)) {
    const py = yScale(t);
    axes.appendChild(el("line", { x1: x0 - 4, y1: py, x2: x0, y2: py, class: "axis-line" }));
    const label = el("text", {
      x: x0 - 7,
      y: py + 3,
      class: "tick",
      "text-anchor": "end",
    });
    label.textContent = fmtTick(t);
    axes.appendChild(label);
  }
  svg.appendChild(axes);
  const plot = el("g", { class: "plot" });
  svg.appendChild(plot);
  return { svg, xScale, yScale, plot, inner: { x0, x1, y0, y1 } };
}

function pathFor(series: Series, xs: (v: number) => number, ys: (v: number) => number): string {
  let d = "";
  let pen = false;
  series.x.forEach((xv, i) => {
    const yv = series.y[i];
    if (yv == null || Number.isNaN(yv)) {
      pen = false;
      return;
    }
    d += `${pen ? "L" : "M"}${xs(xv).toFixed(2)},${ys(yv).toFixed(2)}`;
    pen = true;
  });
  return d;
}

export function lineChart(
  container: HTMLElement,
  series: Series[],
  bands: BandSpec[] = [],
  yDomainOverride?: [number, number],
): Frame {
  const xs: number[] = [];
  const ys: number[] = [];
  for (const s of series) {
    xs.push(...s.x);
    for (const v of s.y) if (v != null) ys.push(v);
  }
  for (const b of bands) {
    xs.push(...b.x);
    ys.push(...b.lower, ...b.upper);
  }
  const frame = chartFrame(extent(xs), yDomainOverride ?? pad(extent(ys)));
  for (const band of bands) {
    const up = band.x.map((xv, i) => `${frame.xScale(xv).toFixed(2)},${frame.yScale(band.upper[i]).toFixed(2)}`);
    const down = [...band.x].reverse().map((xv, i) => {
      const j = band.x.length - 1 - i;
      return `${frame.xScale(xv).toFixed(2)},${frame.yScale(band.lower[j]).toFixed(2)}`;
    });
    frame.plot.appendChild(
      el("polygon", {
        points: [...up, ...down].join(" "),
        fill: band.color ?? "var(--band)",
        stroke: "none",
      }),
    );
  }
  for (const s of series) {
    frame.plot.appendChild(
      el("path", {
        d: pathFor(s, frame.xScale, frame.yScale),
        fill: "none",
        stroke: s.color ?? "var(--line)",
        "stroke-width": s.width ?? 1.5,
        opacity: s.opacity ?? 1,
        ...(s.dash ? { "stroke-dasharray": s.dash } : {}),
      }),
    );
  }
  container.appendChild(frame.svg);
  return frame;
}

function pad([lo, hi]: [number, number]): [number, number] {
  const slack = (hi - lo) * 0.05 || 1;
  return [lo - slack, hi + slack];
}

export interface ScatterHandle {
  frame: Frame;
  setHighlight(subjects: Set<string>): void;
}

export function scatterWithBrush(
  container: HTMLElement,
  points: { subject: string; x: number; y: number }[],
  onBrush: (rect: Rect | null) => void,
): ScatterHandle {
  const frame = chartFrame(pad(extent(points.map((p) => p.x))), pad(extent(points.map((p) => p.y))));
  const dots = new Map<string, SVGCircleElement[]>();
  for (const p of points) {
    const dot = el("circle", {
      cx: frame.xScale(p.x),
      cy: frame.yScale(p.y),
      r: 3,
      class: "dot",
    });
    frame.plot.appendChild(dot);
    const list = dots.get(p.subject) ?? [];
    list.push(dot);
    dots.set(p.subject, list);
  }

  const brushRect = el("rect", { class: "brush", visibility: "hidden" });
  frame.plot.appendChild(brushRect);

  // pixel -> data inversion for the brush rectangle (linear maps only)
  const xInv = (px: number) => invert(frame.xScale, px, frame.inner.x0, frame.inner.x1);
  const yInv = (py: number) => invert(frame.yScale, py, frame.inner.y0, frame.inner.y1);

  let start: { px: number; py: number } | null = null;
  const toLocal = (event: MouseEvent) => {
    const box = frame.svg.getBoundingClientRect();
    return {
      px: ((event.clientX - box.left) / box.width) * WIDTH,
      py: ((event.clientY - box.top) / box.height) * HEIGHT,
    };
  };
  frame.svg.addEventListener("mousedown", (event) => {
    start = toLocal(event);
  });
  frame.svg.addEventListener("mousemove", (event) => {
    if (!start) return;
    const cur = toLocal(event);
    const x = Math.min(start.px, cur.px);
    const y = Math.min(start.py, cur.py);
    brushRect.setAttribute("x", String(x));
    brushRect.setAttribute("y", String(y));
    brushRect.setAttribute("width", String(Math.abs(cur.px - start.px)));
    brushRect.setAttribute("height", String(Math.abs(cur.py - start.py)));
    brushRect.setAttribute("visibility", "visible");
  });
  frame.svg.addEventListener("mouseup", (event) => {
    if (!start) return;
    const cur = toLocal(event);
    const rect: Rect = {
      x0: xInv(start.px),
      x1: xInv(cur.px),
      y0: yInv(start.py),
      y1: yInv(cur.py),
    };
    start = null;
    onBrush(rect);
  });
  frame.svg.addEventListener("dblclick", () => {
    brushRect.setAttribute("visibility", "hidden");
    onBrush(null);
  });

  container.appendChild(frame.svg);
  return {
    frame,
    setHighlight(subjects: Set<string>) {
      for (const [subject, list] of dots) {
        for (const dot of list) {
          dot.classList.toggle("selected", subjects.has(subject));
        }
      }
    },
  };
}

function invert(scale: (v: number) => number, px: number, r0: number, r1: number): number {
  // scale is affine: recover the data value from two probes
  const a = scale(0);
  const b = scale(1);
  const slope = b - a;
  return slope === 0 ? 0 : (px - a) / slope;
}

/** Sequential heatmap; rows indexed by `y`, columns by `x`. */
export function heatmap(
  container: HTMLElement,
  x: number[],
  y: number[],
  values: number[][],
  xLabel = "",
  yLabel = "",
): void {
  const frame = chartFrame(extent(x), extent(y));
  const [lo, hi] = extent(values.flat());
  const span = hi - lo || 1;
  const cellW = (frame.inner.x1 - frame.inner.x0) / x.length;
  const cellH = (frame.inner.y0 - frame.inner.y1) / y.length;
  values.forEach((row, i) => {
    row.forEach((v, j) => {
      const u = (v - lo) / span;
      frame.plot.appendChild(
        el("rect", {
          x: frame.inner.x0 + cellW * i,
          y: frame.inner.y0 - cellH * (j + 1),
          width: cellW + 0.5,
          height: cellH + 0.5,
          fill: viridisish(u),
        }),
      );
    });
  });
  annotate(frame, xLabel, yLabel);
  container.appendChild(frame.svg);
}

function viridisish(u: number): string {
  // three-stop interpolation, enough for an exploratory heatmap
  const stops = [
    [68, 1, 84],
    [33, 145, 140],
    [253, 231, 37],
  ];
  const t = Math.max(0, Math.min(1, u)) * 2;
  const i = t < 1 ? 0 : 1;
  const f = t - i;
  const mix = stops[i].map((c, ch) => Math.round(c + (stops[i + 1][ch] - c) * f));
  return `rgb(${mix[0]},${mix[1]},${mix[2]})`;
}

export function histogram(
  container: HTMLElement,
  edges: number[],
  counts: number[],
  rug: number[] = [],
): void {
  const frame = chartFrame(extent(edges), [0, Math.max(...counts, 1) * 1.1]);
  counts.forEach((c, i) => {
    const x = frame.xScale(edges[i]);
    const w = Math.max(frame.xScale(edges[i + 1] ?? edges[i]) - x, 1);
    frame.plot.appendChild(
      el("rect", {
        x,
        y: frame.yScale(c),
        width: w - 1,
        height: frame.inner.y0 - frame.yScale(c),
        class: "bar",
      }),
    );
  });
  for (const t of rug) {
    const px = frame.xScale(t);
    frame.plot.appendChild(
      el("line", { x1: px, y1: frame.inner.y1, x2: px, y2: frame.inner.y1 + 8, class: "rug" }),
    );
  }
  container.appendChild(frame.svg);
}

function annotate(frame: Frame, xLabel: string, yLabel: string): void {
  if (xLabel) {
    const label = el("text", {
      x: (frame.inner.x0 + frame.inner.x1) / 2,
      y: HEIGHT - 4,
      class: "axis-label",
      "text-anchor": "middle",
    });
    label.textContent = xLabel;
    frame.svg.appendChild(label);
  }
  if (yLabel) {
    const label = el("text", {
      x: 12,
      y: (frame.inner.y0 + frame.inner.y1) / 2,
      class: "axis-label",
      "text-anchor": "middle",
      transform: `rotate(-90 12 ${(frame.inner.y0 + frame.inner.y1) / 2})`,
    });
    label.textContent = yLabel;
    frame.svg.appendChild(label);
  }
}

/** Rainbow palette from the median (dark blue) outward (red). */
export function rainbowColor(rank: number, total: number): string {
  const u = total <= 1 ? 0 : rank / (total - 1);
  const hue = 240 - 240 * u;
  return `hsl(${hue}, 85%, 45%)`;
}
