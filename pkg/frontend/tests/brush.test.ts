import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { brushSelect } from "../src/state.js";
import type { Rect, ScorePoint, ScoresPayload } from "../src/types.js";

function fixture<T>(name: string): T {
  const url = new URL(`./fixtures/${name}.json`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf-8")) as T;
}

/** Independent reference filter, written without reusing brushSelect. */
function referenceFilter(rect: Rect, points: ScorePoint[]): string[] {
  const inside = (p: ScorePoint) =>
    p.x >= Math.min(rect.x0, rect.x1) &&
    p.x <= Math.max(rect.x0, rect.x1) &&
    p.y >= Math.min(rect.y0, rect.y1) &&
    p.y <= Math.max(rect.y0, rect.y1);
  return points.filter(inside).map((p) => p.subject);
}

describe("brushSelect", () => {
  const payload = fixture<ScoresPayload>("fpca_scores");
  const points = payload.points;

  it("matches the independent filter on the recorded payload", () => {
    const rects: Rect[] = [
      { x0: -1, x1: 1, y0: -1, y1: 1 },
      { x0: 0, x1: 5, y0: -5, y1: 0 },
      { x0: 2, x1: -2, y0: 1.5, y1: -0.5 }, // inverted corners
    ];
    for (const rect of rects) {
      expect(brushSelect(rect, points)).toEqual(referenceFilter(rect, points));
    }
  });

  it("matches the independent filter on pseudo-random rectangles", () => {
    // deterministic LCG so the test is reproducible
    let state = 12345;
    const next = () => {
      state = (state * 1103515245 + 12345) % 2147483648;
      return state / 2147483648;
    };
    for (let trial = 0; trial < 200; trial++) {
      const rect: Rect = {
        x0: (next() - 0.5) * 10,
        x1: (next() - 0.5) * 10,
        y0: (next() - 0.5) * 6,
        y1: (next() - 0.5) * 6,
      };
      expect(brushSelect(rect, points)).toEqual(referenceFilter(rect, points));
    }
  });

  it("rect covering all points selects every subject", () => {
    const xs = points.map((p) => p.x);
    const ys = points.map((p) => p.y);
    const rect: Rect = {
      x0: Math.min(...xs),
      x1: Math.max(...xs),
      y0: Math.min(...ys),
      y1: Math.max(...ys),
    };
    expect(brushSelect(rect, points)).toHaveLength(points.length);
  });

  it("degenerate rect on a point selects exactly that subject (inclusive edges)", () => {
    const p = points[7];
    const rect: Rect = { x0: p.x, x1: p.x, y0: p.y, y1: p.y };
    const selected = brushSelect(rect, points);
    expect(selected).toContain(p.subject);
    for (const sid of selected) {
      const match = points.find((q) => q.subject === sid)!;
      expect(match.x).toBe(p.x);
      expect(match.y).toBe(p.y);
    }
  });

  it("rect in an empty region selects nothing", () => {
    const xs = points.map((p) => p.x);
    const far = Math.max(...xs) + 10;
    expect(brushSelect({ x0: far, x1: far + 1, y0: 0, y1: 1 }, points)).toEqual([]);
  });
});
