/** Panels for the fosr tabs: observed data, prediction, coefficients,
 * depth-ranked residuals with the rainbowize toggle. */

import { ApiClient } from "../api.js";
import { lineChart, rainbowColor } from "../charts.js";
import { debounce, extent } from "../state.js";
import type { Summary } from "../types.js";
import { checkbox, clear, h, select, sliderRow } from "../widgets.js";

export async function observedPanel(api: ApiClient, summary: Summary, root: HTMLElement) {
  const covariates = summary.covariates ?? {};
  const names = Object.keys(covariates);
  const chart = h("div", "chart-holder");
  let colorBy = names[0] ?? "";

  const subjects = summary.subjects ?? [];
  const curves: { subject: string; s: number[]; rows: (number | null)[][] }[] = [];
  for (const subject of [...new Set(subjects)]) {
    const payload = await api.subjectFitted(summary.id, subject);
    curves.push({ subject, s: payload.s, rows: payload.observed });
  }

  const colorFor = (subject: string): string => {
    if (!colorBy) return "var(--line)";
    const info = covariates[colorBy];
    const idx = subjects.indexOf(subject);
    const value = info.values[idx];
    if (value == null) return "var(--muted)";
    if (info.kind === "categorical") {
      const li = info.levels.indexOf(String(value));
      return `hsl(${(li * 137) % 360}, 70%, 45%)`;
    }
    const [lo, hi] = extent(info.values.filter((v): v is number => typeof v === "number"));
    const u = hi > lo ? (Number(value) - lo) / (hi - lo) : 0.5;
    return `hsl(${240 - 200 * u}, 75%, 45%)`;
  };

  const draw = () => {
    clear(chart);
    const series = [];
    for (const c of curves) {
      for (const row of c.rows) {
        series.push({ x: c.s, y: row, color: colorFor(c.subject), width: 1.2, opacity: 0.7 });
      }
    }
    lineChart(chart, series);
  };

  if (names.length) {
    root.appendChild(select("Color by", names.map((n) => ({ value: n, label: n })),
                            (v) => { colorBy = v; draw(); }));
  }
  root.appendChild(chart);
  draw();
}

export async function predictionPanel(api: ApiClient, summary: Summary, root: HTMLElement) {
  const terms = (summary.terms ?? []).filter((t) => t.kind !== "intercept");
  const covariates = summary.covariates ?? {};
  const chart = h("div", "chart-holder");
  const setting: Record<string, number | string> = {};

  const refresh = debounce(async () => {
    const payload = await api.predict(summary.id, setting);
    clear(chart);
    lineChart(chart, [{ x: payload.s, y: payload.curve, width: 2.5 }]);
  });

  const controls = h("div", "slider-stack");
  for (const term of terms) {
    if (term.kind === "categorical") {
      setting[term.name] = term.levels[0];
      controls.appendChild(select(term.name,
        term.levels.map((l) => ({ value: l, label: l })),
        (v) => { setting[term.name] = v; refresh(); }));
    } else {
      const info = covariates[term.name];
      const values = (info?.values ?? []).filter((v): v is number => typeof v === "number");
      const [lo, hi] = extent(values.length ? values : [-1, 1]);
      setting[term.name] = 0;
      const row = sliderRow(term.name, lo, hi, (hi - lo) / 100 || 0.01, 0, () => {
        setting[term.name] = row.value();
        refresh();
      });
      controls.appendChild(row.root);
    }
  }
  root.append(controls, chart);
  const initial = await api.predict(summary.id, setting);
  lineChart(chart, [{ x: initial.s, y: initial.curve, width: 2.5 }]);
}

export async function coefficientPanel(api: ApiClient, summary: Summary, root: HTMLElement) {
  const columns = (summary.terms ?? []).flatMap((t) => t.columns);
  const chart = h("div", "chart-holder");
  const draw = async (term: string) => {
    clear(chart);
    const payload = await api.coef(summary.id, term, summary.level ?? 0.95);
    chart.appendChild(h("div", "note",
      `β̂(t) for ${payload.column} with pointwise ${Math.round(payload.level * 100)}% band`));
    lineChart(
      chart,
      [
        { x: payload.s, y: payload.estimate, width: 2.5 },
        { x: payload.s, y: payload.lower, color: "var(--accent2)", dash: "4 3" },
        { x: payload.s, y: payload.upper, color: "var(--accent2)", dash: "4 3" },
      ],
      [{ x: payload.s, lower: payload.lower, upper: payload.upper }],
    );
  };
  root.appendChild(select("Term", columns.map((c) => ({ value: c, label: c })),
                          (v) => void draw(v)));
  root.appendChild(chart);
  await draw(columns[0]);
}

export async function residualPanel(api: ApiClient, summary: Summary, root: HTMLElement) {
  const payload = await api.residuals(summary.id);
  const chart = h("div", "chart-holder");
  let rainbow = false;

  const rankOf = new Map<number, number>();
  payload.order.forEach((row, rank) => rankOf.set(row, rank));
  const outliers = new Set(payload.outlier_indices);

  const draw = () => {
    clear(chart);
    chart.appendChild(h("div", "note",
      `median curve: ${payload.subjects[payload.median_index]} (deepest); ` +
      `${outliers.size} outlier(s) dashed`));
    const n = payload.residuals.length;
    const series = payload.residuals.map((row, i) => {
      const rank = rankOf.get(i) ?? 0;
      let color = "var(--muted)";
      let width = 1;
      if (rainbow) {
        color = rainbowColor(rank, n);
      }
      if (i === payload.median_index) {
        color = "var(--line)";
        width = 3;
      }
      return {
        x: payload.s,
        y: row,
        color,
        width,
        opacity: rainbow || i === payload.median_index ? 0.9 : 0.5,
        dash: outliers.has(i) ? "5 3" : undefined,
      };
    });
    lineChart(chart, series);
  };

  root.appendChild(checkbox("rainbowize by depth", (c) => { rainbow = c; draw(); }));
  root.appendChild(chart);
  draw();
}
