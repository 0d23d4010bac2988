/** Pure view-state logic: brushing, slider geometry, debounce.
 *
 * The only client-side numerics allowed here are point-in-rectangle tests
 * and linear axis mapping; every plotted value comes from the API verbatim.
 */

import type { Rect, ScorePoint } from "./types.js";

export const SLIDER_STEPS = 100;
export const LINCOM_DEBOUNCE_MS = 150;

/** Subjects whose (x, y) scores fall inside the rectangle, edges inclusive. */
export function brushSelect(rect: Rect, points: ScorePoint[]): string[] {
  const xLo = Math.min(rect.x0, rect.x1);
  const xHi = Math.max(rect.x0, rect.x1);
  const yLo = Math.min(rect.y0, rect.y1);
  const yHi = Math.max(rect.y0, rect.y1);
  const selected: string[] = [];
  for (const p of points) {
    if (p.x >= xLo && p.x <= xHi && p.y >= yLo && p.y <= yHi) {
      selected.push(p.subject);
    }
  }
  return selected;
}

/** Score slider bounds: +/- 3 sqrt(lambda_k) covers ~99.7% of score mass. */
export function sliderRange(lambda: number): { min: number; max: number; step: number } {
  const half = 3 * Math.sqrt(lambda);
  return { min: -half, max: half, step: (2 * half) / SLIDER_STEPS };
}

/** Map a 0..SLIDER_STEPS integer position to the score value. */
export function sliderValue(lambda: number, position: number): number {
  const { min, step } = sliderRange(lambda);
  return min + step * position;
}

/** Equi-spaced animation frame times over [lo, hi]; frame 0 sits at lo. */
export function frameTimes(lo: number, hi: number, n: number): number[] {
  if (n < 2) {
    return [lo];
  }
  const out: number[] = [];
  for (let i = 0; i < n; i++) {
    out.push(lo + ((hi - lo) * i) / (n - 1));
  }
  return out;
}

/** Index of the frame whose time is closest to t. */
export function nearestFrame(times: number[], t: number): number {
  let best = 0;
  let bestDist = Infinity;
  times.forEach((v, i) => {
    const d = Math.abs(v - t);
    if (d < bestDist) {
      bestDist = d;
      best = i;
    }
  });
  return best;
}

/** Trailing-edge debounce used for slider-release lincom requests. */
export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number = LINCOM_DEBOUNCE_MS,
): (...args: A) => void {
  let handle: ReturnType<typeof setTimeout> | undefined;
  return (...args: A) => {
    if (handle !== undefined) {
      clearTimeout(handle);
    }
    handle = setTimeout(() => fn(...args), waitMs);
  };
}

/** Linear map from data coordinates to pixel coordinates. */
export function linearScale(
  domain: [number, number],
  range: [number, number],
): (v: number) => number {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  return (v: number) => r0 + ((v - d0) / span) * (r1 - r0);
}

export function extent(values: Iterable<number>): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v == null || Number.isNaN(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return [0, 1];
  if (lo === hi) return [lo - 1, hi + 1];
  return [lo, hi];
}
