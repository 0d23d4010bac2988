/** Explorer shell: model picker, tab bar, kind-dispatched panels. */

import { ApiClient } from "./api.js";
import { renderTabs, TabSpec } from "./tabs.js";
import type { ModelInfo, Summary } from "./types.js";
import * as fpca from "./views/fpca.js";
import * as fosr from "./views/fosr.js";
import * as tv from "./views/tvfpca.js";
import { clear, errorPanel, h } from "./widgets.js";

type PanelBuilder = (api: ApiClient, summary: Summary, root: HTMLElement) => Promise<void> | void;

function panelFor(kind: string, tabId: string, subtabId: string | null): PanelBuilder | null {
  const level = subtabId === "level-2" ? 2 : 1;
  if (kind === "fpca" || kind === "mfpca") {
    switch (tabId) {
      case "component-band":
        return (api, s, root) => fpca.componentBandPanel(api, s, root, level);
      case "scree":
        return (api, s, root) => fpca.screePanel(api, s, root, level);
      case "lincom":
        return (api, s, root) => fpca.lincomPanel(api, s, root, level);
      case "subject-fit":
        return (api, s, root) => fpca.subjectFitPanel(api, s, root, kind === "mfpca");
      case "score-scatter":
        return (api, s, root) => fpca.scoreScatterPanel(api, s, root, level);
    }
  }
  if (kind === "tvfpca") {
    switch (subtabId) {
      case "observed":
        return tv.observedPanel;
      case "visit-animation":
        return tv.visitAnimationPanel;
      case "visit-times":
        return tv.visitTimesPanel;
      case "mean-surface":
        return tv.meanSurfacePanel;
      case "marginal-cov":
        return tv.marginalCovPanel;
      case "eigenfunctions":
        return tv.eigenfunctionPanel;
      case "component-band":
        return (api, s, root) => fpca.componentBandPanel(api, s, root, 1);
      case "scree":
        return (api, s, root) => fpca.screePanel(api, s, root, 1);
      case "score-cov":
        return tv.scoreCovPanel;
      case "score-prediction":
        return tv.scorePredictionPanel;
      case "trajectory":
        return tv.trajectoryPanel;
    }
  }
  if (kind === "fosr") {
    switch (tabId) {
      case "observed":
        return fosr.observedPanel;
      case "prediction":
        return fosr.predictionPanel;
      case "coefficients":
        return fosr.coefficientPanel;
      case "residuals":
        return fosr.residualPanel;
    }
  }
  return null;
}

export class Explorer {
  private api = new ApiClient();
  private models: ModelInfo[] = [];
  private summary: Summary | null = null;
  private tabs: TabSpec[] = [];
  private activeTab = "";
  private activeSubtab: string | null = null;

  constructor(private root: HTMLElement) {}

  async start(): Promise<void> {
    const header = h("header");
    header.appendChild(h("h1", "", "fdaw explorer"));
    this.root.appendChild(header);
    try {
      this.models = await this.api.models();
    } catch (err) {
      this.root.appendChild(errorPanel(`cannot reach the fdaw server: ${err}`));
      return;
    }
    if (!this.models.length) {
      this.root.appendChild(errorPanel("no models loaded"));
      return;
    }
    const picker = h("div", "model-picker");
    const sel = h("select");
    for (const m of this.models) {
      const o = h("option");
      o.value = m.id;
      o.textContent = `${m.id} (${m.kind})`;
      sel.appendChild(o);
    }
    sel.addEventListener("change", () => void this.loadModel(sel.value));
    picker.append("Model: ", sel);
    header.appendChild(picker);

    this.tabBar = h("nav", "tabs");
    this.subtabBar = h("nav", "subtabs");
    this.panel = h("main", "panel");
    this.root.append(this.tabBar, this.subtabBar, this.panel);
    await this.loadModel(this.models[0].id);
  }

  private tabBar!: HTMLElement;
  private subtabBar!: HTMLElement;
  private panel!: HTMLElement;

  private async loadModel(id: string): Promise<void> {
    this.summary = await this.api.summary(id);
    try {
      this.tabs = renderTabs(this.summary.kind);
    } catch (err) {
      clear(this.panel);
      this.panel.appendChild(errorPanel(String(err)));
      return;
    }
    this.activeTab = this.tabs[0].id;
    this.activeSubtab = this.tabs[0].subtabs?.[0].id ?? null;
    this.renderTabBar();
    await this.renderPanel();
  }

  private renderTabBar(): void {
    clear(this.tabBar);
    for (const tab of this.tabs) {
      const btn = h("button", tab.id === this.activeTab ? "tab active" : "tab", tab.label);
      btn.addEventListener("click", () => {
        this.activeTab = tab.id;
        this.activeSubtab = tab.subtabs?.[0].id ?? null;
        this.renderTabBar();
        void this.renderPanel();
      });
      this.tabBar.appendChild(btn);
    }
    clear(this.subtabBar);
    const active = this.tabs.find((t) => t.id === this.activeTab);
    for (const sub of active?.subtabs ?? []) {
      const btn = h("button", sub.id === this.activeSubtab ? "tab active" : "tab", sub.label);
      btn.addEventListener("click", () => {
        this.activeSubtab = sub.id;
        this.renderTabBar();
        void this.renderPanel();
      });
      this.subtabBar.appendChild(btn);
    }
  }

  private async renderPanel(): Promise<void> {
    clear(this.panel);
    if (!this.summary) return;
    const builder = panelFor(this.summary.kind, this.activeTab, this.activeSubtab);
    if (!builder) {
      this.panel.appendChild(errorPanel(`no panel for ${this.activeTab}/${this.activeSubtab}`));
      return;
    }
    const holder = h("section", "panel-body");
    this.panel.appendChild(holder);
    try {
      await builder(this.api, this.summary, holder);
    } catch (err) {
      clear(holder);
      holder.appendChild(errorPanel(String(err)));
    }
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void new Explorer(document.getElementById("app")!).start();
}
