/** Tab registry: which tabs and sub-tabs each model kind renders.
 *
 * fpca and mfpca share the five-tab layout (mfpca adds Level 1/Level 2
 * inset sub-tabs and a visit subset in the subject view); tvfpca has two
 * tabs of exploratory and model-component sub-tabs; fosr has four tabs.
 */

import type { ModelKind } from "./types.js";

export interface TabSpec {
  id: string;
  label: string;
  subtabs?: TabSpec[];
}

const LEVEL_SUBTABS: TabSpec[] = [
  { id: "level-1", label: "Level 1" },
  { id: "level-2", label: "Level 2" },
];

const FPCA_TABS: TabSpec[] = [
  { id: "component-band", label: "Components" },
  { id: "scree", label: "Scree" },
  { id: "lincom", label: "Score sliders" },
  { id: "subject-fit", label: "Subject fit" },
  { id: "score-scatter", label: "Score scatterplot" },
];

const MFPCA_TABS: TabSpec[] = [
  { id: "component-band", label: "Components", subtabs: LEVEL_SUBTABS },
  { id: "scree", label: "Scree", subtabs: LEVEL_SUBTABS },
  { id: "lincom", label: "Score sliders", subtabs: LEVEL_SUBTABS },
  { id: "subject-fit", label: "Subject fit" },
  { id: "score-scatter", label: "Score scatterplot", subtabs: LEVEL_SUBTABS },
];

const TVFPCA_TABS: TabSpec[] = [
  {
    id: "exploratory",
    label: "Exploratory",
    subtabs: [
      { id: "observed", label: "Observed curves" },
      { id: "visit-animation", label: "Visit animation" },
      { id: "visit-times", label: "Visit times" },
    ],
  },
  {
    id: "model",
    label: "Model components",
    subtabs: [
      { id: "mean-surface", label: "Mean surface" },
      { id: "marginal-cov", label: "Marginal covariance" },
      { id: "eigenfunctions", label: "Eigenfunctions" },
      { id: "component-band", label: "Component bands" },
      { id: "scree", label: "Scree" },
      { id: "score-cov", label: "Score covariance" },
      { id: "score-prediction", label: "Score prediction" },
      { id: "trajectory", label: "Trajectory animation" },
    ],
  },
];

const FOSR_TABS: TabSpec[] = [
  { id: "observed", label: "Observed data" },
  { id: "prediction", label: "Prediction" },
  { id: "coefficients", label: "Coefficient functions" },
  { id: "residuals", label: "Residuals" },
];

const TAB_SETS: Record<ModelKind, TabSpec[]> = {
  fpca: FPCA_TABS,
  mfpca: MFPCA_TABS,
  tvfpca: TVFPCA_TABS,
  fosr: FOSR_TABS,
};

export function renderTabs(kind: ModelKind): TabSpec[] {
  const tabs = TAB_SETS[kind];
  if (!tabs) {
    throw new Error(`unknown model kind ${kind}`);
  }
  return tabs;
}
