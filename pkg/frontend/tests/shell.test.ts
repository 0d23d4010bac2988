// @vitest-environment jsdom
import { readFileSync } from "node:fs";
import { join } from "node:path";
import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { Explorer } from "../src/main.js";

// import.meta.url is not filesystem-backed under jsdom; resolve from cwd
function fixtureText(name: string): string {
  return readFileSync(join(process.cwd(), "tests", "fixtures", `${name}.json`), "utf-8");
}

/** Minimal response stand-in: jsdom has no Response constructor. */
function jsonResponse(text: string, status = 200) {
  return Promise.resolve({
    ok: status >= 200 && status < 300,
    status,
    statusText: String(status),
    json: async () => JSON.parse(text),
  });
}

/** Serve recorded fixtures for the fpca demo model; 404 anything else. */
function fixtureFetch(input: RequestInfo | URL) {
  const url = String(input);
  const routes: [RegExp, string][] = [
    [/\/api\/models$/, "models"],
    [/\/api\/model\/fpca-demo\/summary$/, "fpca_summary"],
    [/\/api\/model\/fpca-demo\/scores\?kx=1&ky=2/, "fpca_scores"],
  ];
  for (const [pattern, name] of routes) {
    if (pattern.test(url)) {
      return jsonResponse(fixtureText(name));
    }
  }
  // component payload for any k: synthesize from the summary grid
  if (/\/api\/model\/fpca-demo\/components/.test(url)) {
    const summary = JSON.parse(fixtureText("fpca_summary"));
    const s: number[] = summary.grid;
    const flat = s.map(() => 0);
    const body = JSON.stringify({
      k: 1, level: null, s, center: flat, upper: s.map(() => 1),
      lower: s.map(() => -1), psi: flat, lambda_k: 1.0, band_factor: 1.0,
    });
    return jsonResponse(body);
  }
  return jsonResponse(JSON.stringify({ error: "not_found", detail: url }), 404);
}

describe("Explorer shell", () => {
  beforeEach(() => {
    document.body.innerHTML = '<div id="app"></div>';
    vi.stubGlobal("fetch", vi.fn(fixtureFetch));
  });
  afterEach(() => vi.unstubAllGlobals());

  it("renders the five fpca tabs and the first panel", async () => {
    const root = document.getElementById("app")!;
    await new Explorer(root).start();
    const tabs = [...root.querySelectorAll("nav.tabs button.tab")].map((b) => b.textContent);
    expect(tabs).toEqual([
      "Components",
      "Scree",
      "Score sliders",
      "Subject fit",
      "Score scatterplot",
    ]);
    // the component-band panel drew a chart with a component selector
    expect(root.querySelector("main.panel svg.chart")).not.toBeNull();
    expect(root.querySelector("main.panel select")).not.toBeNull();
  });

  it("shows an error panel when the server is unreachable", async () => {
    vi.stubGlobal("fetch", vi.fn(() => Promise.reject(new Error("refused"))));
    const root = document.getElementById("app")!;
    await new Explorer(root).start();
    expect(root.querySelector(".error-panel")?.textContent).toMatch(/cannot reach/);
  });
});
