/** Payload shapes served by the fdaw API. Values are plotted verbatim. */

export type ModelKind = "fpca" | "mfpca" | "tvfpca" | "fosr";

export interface ModelInfo {
  id: string;
  kind: ModelKind;
}

export interface Summary {
  id: string;
  kind: ModelKind;
  n_points: number;
  grid: number[];
  n_curves?: number;
  n_components?: number | [number, number];
  lambda_?: number[];
  sigma2?: number;
  pve_achieved?: number;
  subjects?: string[];
  visit_indices?: number[];
  twoway?: boolean;
  t_range?: [number, number];
  dynamics_method?: string;
  terms?: TermInfo[];
  covariates?: Record<string, CovariateInfo>;
  level?: number;
}

export interface TermInfo {
  name: string;
  kind: "intercept" | "continuous" | "categorical";
  levels: string[];
  columns: string[];
}

export interface CovariateInfo {
  kind: "continuous" | "categorical";
  levels: string[];
  values: (number | string | null)[];
}

export interface ComponentsPayload {
  k: number;
  level: number | null;
  s: number[];
  center: number[];
  upper: number[];
  lower: number[];
  psi: number[];
  lambda_k: number;
  band_factor: number;
}

export interface ScreeEntry {
  k: number;
  lambda: number;
  cum_pve: number;
}

export interface ScreePayload {
  level: number | null;
  entries: ScreeEntry[];
}

export interface CurvePayload {
  s: number[];
  curve: number[];
}

export interface SubjectFittedPayload {
  subject: string;
  s: number[];
  visits: number[];
  fitted: number[][];
  observed: (number | null)[][];
  visit_times?: number[];
}

export interface ScorePoint {
  subject: string;
  visit: number | null;
  x: number;
  y: number;
}

export interface ScoresPayload {
  kx: number;
  ky: number;
  level: number | null;
  points: ScorePoint[];
}

export interface CoefPayload {
  term: string;
  column: string;
  level: number;
  s: number[];
  estimate: number[];
  lower: number[];
  upper: number[];
  se: number[];
}

export interface ResidualsPayload {
  s: number[];
  subjects: string[];
  residuals: number[][];
  depths: number[];
  order: number[];
  median_index: number;
  outlier_indices: number[];
}

export interface VisitTimesPayload {
  per_subject: Record<string, number[]>;
  hist_edges: number[];
  hist_counts: number[];
  rug: number[];
}

export interface MeanSurfacePayload {
  s: number[];
  T: number[];
  values: number[][];
}

export interface MarginalCovPayload {
  s: number[];
  values: number[][];
}

export interface ScoreDynamicsPayload {
  k: number;
  method: string;
  T: number[];
  G: number[][];
  predictions: Record<string, number[]>;
  raw_scores: Record<string, { T: number; score: number }[]>;
}

export interface TrajectoryPayload {
  subject: string;
  s: number[];
  T: number[];
  frames: number[][];
  observed: { visit_times: number[]; curves: (number | null)[][] };
}

export interface Rect {
  x0: number;
  x1: number;
  y0: number;
  y1: number;
}
