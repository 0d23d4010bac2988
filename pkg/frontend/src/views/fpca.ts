/** Panels for the fpca and mfpca tab sets (mfpca adds level sub-tabs). */

import { ApiClient } from "../api.js";
import { lineChart, scatterWithBrush } from "../charts.js";
import { brushSelect, debounce, sliderRange } from "../state.js";
import type { ScorePoint, Summary } from "../types.js";
import { clear, h, select, sliderRow } from "../widgets.js";

function componentCount(summary: Summary, level: number): number {
  if (Array.isArray(summary.n_components)) {
    return summary.n_components[level - 1];
  }
  return summary.n_components ?? 0;
}

export async function componentBandPanel(
  api: ApiClient,
  summary: Summary,
  root: HTMLElement,
  level = 1,
): Promise<void> {
  const K = componentCount(summary, level);
  if (K === 0) {
    root.appendChild(h("div", "note", `no components at level ${level}`));
    return;
  }
  const chart = h("div", "chart-holder");
  const draw = async (k: number) => {
    clear(chart);
    const payload = await api.components(summary.id, k, level);
    const factor = payload.band_factor === 1 ? "√λ" : `${payload.band_factor}√λ`;
    chart.appendChild(h("div", "note", `center ± ${factor}·ψ_${k}(t), λ_${k} = ${payload.lambda_k.toPrecision(4)}`));
    lineChart(
      chart,
      [
        { x: payload.s, y: payload.center, color: "var(--line)", width: 2 },
        { x: payload.s, y: payload.upper, color: "var(--accent2)", dash: "4 3" },
        { x: payload.s, y: payload.lower, color: "var(--accent2)", dash: "4 3" },
      ],
      [{ x: payload.s, lower: payload.lower, upper: payload.upper }],
    );
  };
  const ks = Array.from({ length: K }, (_, i) => ({ value: String(i + 1), label: `component ${i + 1}` }));
  root.appendChild(select("Component", ks, (v) => void draw(Number(v))));
  root.appendChild(chart);
  await draw(1);
}

export async function screePanel(
  api: ApiClient,
  summary: Summary,
  root: HTMLElement,
  level = 1,
): Promise<void> {
  const payload = await api.scree(summary.id, level);
  if (!payload.entries.length) {
    root.appendChild(h("div", "note", `no components at level ${level}`));
    return;
  }
  const ks = payload.entries.map((e) => e.k);
  const left = h("div", "chart-holder half");
  const right = h("div", "chart-holder half");
  left.appendChild(h("div", "note", "eigenvalues λ_k"));
  lineChart(left, [{ x: ks, y: payload.entries.map((e) => e.lambda), width: 2 }]);
  right.appendChild(h("div", "note", "cumulative percent variance explained"));
  lineChart(right, [{ x: ks, y: payload.entries.map((e) => e.cum_pve), width: 2 }], [], [0, 1.05]);
  const row = h("div", "row");
  row.append(left, right);
  root.appendChild(row);
}

export async function lincomPanel(
  api: ApiClient,
  summary: Summary,
  root: HTMLElement,
  level = 1,
): Promise<void> {
  const scree = await api.scree(summary.id, level);
  const lambdas = scree.entries.map((e) => e.lambda);
  if (!lambdas.length) {
    root.appendChild(h("div", "note", `no components at level ${level}`));
    return;
  }
  const chart = h("div", "chart-holder");
  const sliders = lambdas.map((lam, i) => {
    const { min, max, step } = sliderRange(lam);
    return sliderRow(`c_${i + 1}`, min, max, step, 0, () => refresh());
  });
  // fetch on slider release with a debounce, not continuous drag
  const refresh = debounce(async () => {
    const scores = sliders.map((s) => s.value());
    const payload = summary.kind === "mfpca"
      ? await api.lincom(summary.id, scores, level)
      : await api.lincom(summary.id, scores);
    clear(chart);
    lineChart(chart, [{ x: payload.s, y: payload.curve, width: 2 }]);
  });
  const controls = h("div", "slider-stack");
  for (const s of sliders) controls.appendChild(s.root);
  root.append(controls, chart);
  const initial = summary.kind === "mfpca"
    ? await api.lincom(summary.id, lambdas.map(() => 0), level)
    : await api.lincom(summary.id, lambdas.map(() => 0));
  lineChart(chart, [{ x: initial.s, y: initial.curve, width: 2 }]);
}

export async function subjectFitPanel(
  api: ApiClient,
  summary: Summary,
  root: HTMLElement,
  withVisitSubset = false,
): Promise<void> {
  const subjects = [...new Set(summary.subjects ?? [])];
  if (!subjects.length) {
    root.appendChild(h("div", "note", "no subjects"));
    return;
  }
  const chart = h("div", "chart-holder");
  let current = subjects[0];
  let visitFilter: number[] = [];

  const draw = async () => {
    clear(chart);
    const payload = await api.subjectFitted(summary.id, current,
                                            visitFilter.length ? visitFilter : undefined);
    const series = [];
    for (let i = 0; i < payload.fitted.length; i++) {
      series.push({ x: payload.s, y: payload.observed[i], color: "var(--muted)", width: 1 });
      series.push({ x: payload.s, y: payload.fitted[i], color: "var(--accent)", width: 2 });
    }
    chart.appendChild(h("div", "note",
      `observed (grey) and fitted (blue) — visits ${payload.visits.join(", ")}`));
    lineChart(chart, series);
  };

  root.appendChild(select("Subject", subjects.map((s) => ({ value: s, label: s })),
                          (v) => { current = v; void draw(); }));
  if (withVisitSubset) {
    const visits = [...new Set(summary.visit_indices ?? [])].sort((a, b) => a - b);
    const options = [{ value: "", label: "all visits" },
                     ...visits.map((v) => ({ value: String(v), label: `visit ${v}` }))];
    root.appendChild(select("Visits", options, (v) => {
      visitFilter = v === "" ? [] : [Number(v)];
      void draw();
    }));
  }
  root.appendChild(chart);
  await draw();
}

export async function scoreScatterPanel(
  api: ApiClient,
  summary: Summary,
  root: HTMLElement,
  level = 1,
): Promise<void> {
  const K = componentCount(summary, level);
  if (K < 2) {
    root.appendChild(h("div", "note", "score scatter needs at least 2 components"));
    return;
  }
  let kx = 1;
  let ky = 2;
  const scatterHolder = h("div", "chart-holder half");
  const curvesHolder = h("div", "chart-holder half");
  const componentOptions = Array.from({ length: K }, (_, i) => ({
    value: String(i + 1),
    label: `component ${i + 1}`,
  }));

  let points: ScorePoint[] = [];
  let fittedBySubject = new Map<string, { s: number[]; rows: number[][] }>();

  const drawCurves = (selected: Set<string>) => {
    clear(curvesHolder);
    curvesHolder.appendChild(h("div", "note",
      selected.size ? `${selected.size} selected subject(s) in blue` : "drag a box to select"));
    const series = [];
    for (const [subject, data] of fittedBySubject) {
      for (const row of data.rows) {
        series.push({
          x: data.s,
          y: row,
          color: selected.has(subject) ? "var(--accent)" : "var(--muted)",
          width: selected.has(subject) ? 2 : 1,
          opacity: selected.has(subject) ? 1 : 0.35,
        });
      }
    }
    lineChart(curvesHolder, series);
  };

  const draw = async () => {
    clear(scatterHolder);
    const payload = await api.scores(summary.id, kx, ky, level);
    points = payload.points;
    const handle = scatterWithBrush(scatterHolder, points, (rect) => {
      const chosen = rect ? new Set(brushSelect(rect, points)) : new Set<string>();
      handle.setHighlight(chosen);
      drawCurves(chosen);
    });
    drawCurves(new Set());
  };

  // all-subject fitted curves for the linked lower panel
  const subjects = [...new Set(summary.subjects ?? [])];
  for (const subject of subjects) {
    const payload = await api.subjectFitted(summary.id, subject);
    fittedBySubject.set(subject, { s: payload.s, rows: payload.fitted });
  }

  const controls = h("div", "row");
  controls.appendChild(select("x axis", componentOptions, (v) => { kx = Number(v); void draw(); }));
  controls.appendChild(select("y axis", componentOptions, (v) => { ky = Number(v); void draw(); }));
  const row = h("div", "row");
  row.append(scatterHolder, curvesHolder);
  root.append(controls, row);
  await draw();
}
