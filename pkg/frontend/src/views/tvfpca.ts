/** Panels for the tvfpca exploratory and model-component sub-tabs. */

import { ApiClient } from "../api.js";
import { FramePlayer } from "../animate.js";
import { heatmap, histogram, lineChart } from "../charts.js";
import { nearestFrame } from "../state.js";
import type { Summary } from "../types.js";
import { checkbox, clear, h, select } from "../widgets.js";

async function allObservedSeries(api: ApiClient, summary: Summary) {
  const bySubject = new Map<string, { s: number[]; curves: (number | null)[][]; times: number[] }>();
  for (const subject of [...new Set(summary.subjects ?? [])]) {
    const payload = await api.subjectFitted(summary.id, subject);
    bySubject.set(subject, {
      s: payload.s,
      curves: payload.observed,
      times: payload.visit_times ?? [],
    });
  }
  return bySubject;
}

export async function observedPanel(api: ApiClient, summary: Summary, root: HTMLElement) {
  const data = await allObservedSeries(api, summary);
  const subjects = [...data.keys()];
  const chart = h("div", "chart-holder");
  let current = subjects[0];
  let background = true;
  let showMean = true;
  let meanCurve: { s: number[]; m: number[] } | null = null;

  const comp = await api.components(summary.id, 1);
  meanCurve = { s: comp.s, m: comp.center };  // center is the pointwise mean m(t)

  const draw = () => {
    clear(chart);
    const series = [];
    if (background) {
      for (const [subject, d] of data) {
        if (subject === current) continue;
        for (const row of d.curves) {
          series.push({ x: d.s, y: row, color: "var(--muted)", width: 1, opacity: 0.25 });
        }
      }
    }
    const own = data.get(current)!;
    for (const row of own.curves) {
      series.push({ x: own.s, y: row, color: "var(--accent)", width: 2 });
    }
    if (showMean && meanCurve) {
      series.push({ x: meanCurve.s, y: meanCurve.m, color: "var(--line)", width: 2.5, dash: "6 3" });
    }
    lineChart(chart, series);
  };

  root.appendChild(select("Subject", subjects.map((s) => ({ value: s, label: s })),
                          (v) => { current = v; draw(); }));
  root.appendChild(checkbox("all subjects in background", (c) => { background = c; draw(); }));
  root.appendChild(checkbox("show pointwise mean m(t)", (c) => { showMean = c; draw(); }));
  (root.querySelectorAll("input[type=checkbox]") as NodeListOf<HTMLInputElement>).forEach(
    (box) => { box.checked = true; },
  );
  root.appendChild(chart);
  draw();
}

export async function visitAnimationPanel(api: ApiClient, summary: Summary, root: HTMLElement) {
  const data = await allObservedSeries(api, summary);
  const subjects = [...data.keys()];
  const chart = h("div", "chart-holder");
  const playerHolder = h("div");
  let current = subjects[0];

  const build = () => {
    clear(chart);
    clear(playerHolder);
    const own = data.get(current)!;
    const player = new FramePlayer(own.curves.length, {
      intervalMs: 400,
      label: (i) => `T = ${own.times[i]?.toPrecision(4) ?? "?"}`,
    });
    const draw = (frame: number) => {
      clear(chart);
      const series = own.curves.map((row, i) => ({
        x: own.s,
        y: row,
        color: i === frame ? "var(--accent)" : "var(--muted)",
        width: i === frame ? 2.5 : 1,
        opacity: i === frame ? 1 : 0.4,
      }));
      lineChart(chart, series);
    };
    player.onFrame = draw;
    playerHolder.appendChild(player.root);
    draw(0);
  };

  root.appendChild(select("Subject", subjects.map((s) => ({ value: s, label: s })),
                          (v) => { current = v; build(); }));
  root.append(playerHolder, chart);
  build();
}

export async function visitTimesPanel(api: ApiClient, summary: Summary, root: HTMLElement) {
  const payload = await api.visitTimes(summary.id);
  root.appendChild(h("div", "note",
    "observed visit times: rug above the pooled histogram"));
  const holder = h("div", "chart-holder");
  histogram(holder, payload.hist_edges, payload.hist_counts, payload.rug);
  root.appendChild(holder);
}

export async function meanSurfacePanel(api: ApiClient, summary: Summary, root: HTMLElement) {
  const payload = await api.meanSurface(summary.id);
  root.appendChild(h("div", "note", "estimated mean surface μ(s, T)"));
  const holder = h("div", "chart-holder");
  heatmap(holder, payload.s, payload.T, payload.values.map((row) => [...row]), "s", "T");
  root.appendChild(holder);
}

export async function marginalCovPanel(api: ApiClient, summary: Summary, root: HTMLElement) {
  const payload = await api.marginalCov(summary.id);
  root.appendChild(h("div", "note", "estimated marginal covariance Σ(s, t)"));
  const holder = h("div", "chart-holder");
  heatmap(holder, payload.s, payload.s, payload.values, "s", "t");
  root.appendChild(holder);
}

export async function eigenfunctionPanel(api: ApiClient, summary: Summary, root: HTMLElement) {
  const K = (summary.n_components as number) ?? 1;
  const chart = h("div", "chart-holder");
  const draw = async (k: number) => {
    clear(chart);
    const payload = await api.components(summary.id, k);
    lineChart(chart, [{ x: payload.s, y: payload.psi, width: 2 }]);
  };
  root.appendChild(select("Component",
    Array.from({ length: K }, (_, i) => ({ value: String(i + 1), label: `ψ_${i + 1}` })),
    (v) => void draw(Number(v))));
  root.appendChild(chart);
  await draw(1);
}

export async function scoreCovPanel(api: ApiClient, summary: Summary, root: HTMLElement) {
  const K = (summary.n_components as number) ?? 1;
  const chart = h("div", "chart-holder");
  const draw = async (k: number) => {
    clear(chart);
    const payload = await api.scoreDynamics(summary.id, k);
    chart.appendChild(h("div", "note", `G_${k}(T, T′), method ${payload.method}`));
    heatmap(chart, payload.T, payload.T, payload.G, "T", "T′");
  };
  root.appendChild(select("Component",
    Array.from({ length: K }, (_, i) => ({ value: String(i + 1), label: `G_${i + 1}` })),
    (v) => void draw(Number(v))));
  root.appendChild(chart);
  await draw(1);
}

export async function scorePredictionPanel(api: ApiClient, summary: Summary, root: HTMLElement) {
  const K = (summary.n_components as number) ?? 1;
  const subjects = summary.subjects ?? [];
  const chart = h("div", "chart-holder");
  let k = 1;
  let subject = subjects[0];
  let background = true;

  const draw = async () => {
    clear(chart);
    const payload = await api.scoreDynamics(summary.id, k);
    const series = [];
    if (background) {
      for (const [sid, pred] of Object.entries(payload.predictions)) {
        if (sid === subject) continue;
        series.push({ x: payload.T, y: pred, color: "var(--muted)", width: 1, opacity: 0.3 });
      }
    }
    series.push({ x: payload.T, y: payload.predictions[subject], color: "var(--accent)", width: 2.5 });
    const frame = lineChart(chart, series);
    for (const raw of payload.raw_scores[subject] ?? []) {
      const dot = document.createElementNS("http://www.w3.org/2000/svg", "circle");
      dot.setAttribute("cx", String(frame.xScale(raw.T)));
      dot.setAttribute("cy", String(frame.yScale(raw.score)));
      dot.setAttribute("r", "4");
      dot.setAttribute("class", "dot selected");
      frame.plot.appendChild(dot);
    }
  };

  root.appendChild(select("Subject", subjects.map((s) => ({ value: s, label: s })),
                          (v) => { subject = v; void draw(); }));
  root.appendChild(select("Component",
    Array.from({ length: K }, (_, i) => ({ value: String(i + 1), label: `c_${i + 1}(T)` })),
    (v) => { k = Number(v); void draw(); }));
  root.appendChild(checkbox("all subjects in background", (c) => { background = c; void draw(); }));
  (root.querySelector("input[type=checkbox]") as HTMLInputElement).checked = true;
  root.appendChild(chart);
  await draw();
}

export async function trajectoryPanel(api: ApiClient, summary: Summary, root: HTMLElement) {
  const subjects = summary.subjects ?? [];
  const chart = h("div", "chart-holder");
  const playerHolder = h("div");
  let subject = subjects[0];

  const build = async () => {
    clear(playerHolder);
    clear(chart);
    const payload = await api.trajectory(summary.id, subject, 21);
    const player = new FramePlayer(payload.T.length, {
      intervalMs: 250,
      label: (i) => `T = ${payload.T[i].toPrecision(4)}`,
    });
    const draw = (frame: number) => {
      clear(chart);
      const series = [];
      // observed curves stay in the background; the visit nearest the
      // current T is highlighted
      const nearestVisit = nearestFrame(payload.observed.visit_times, payload.T[frame]);
      payload.observed.curves.forEach((row, i) => {
        series.push({
          x: payload.s,
          y: row,
          color: i === nearestVisit ? "var(--accent2)" : "var(--muted)",
          width: i === nearestVisit ? 2 : 1,
          opacity: i === nearestVisit ? 0.9 : 0.35,
        });
      });
      series.push({ x: payload.s, y: payload.frames[frame], color: "var(--accent)", width: 2.5 });
      lineChart(chart, series);
    };
    player.onFrame = draw;
    playerHolder.appendChild(player.root);
    draw(0);
  };

  root.appendChild(select("Subject", subjects.map((s) => ({ value: s, label: s })),
                          (v) => { subject = v; void build(); }));
  root.append(playerHolder, chart);
  await build();
}
