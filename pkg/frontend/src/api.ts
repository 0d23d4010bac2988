/** Thin typed client over the fdaw server routes. */

import type {
  CoefPayload,
  ComponentsPayload,
  CurvePayload,
  MarginalCovPayload,
  MeanSurfacePayload,
  ModelInfo,
  ResidualsPayload,
  ScoreDynamicsPayload,
  ScoresPayload,
  ScreePayload,
  SubjectFittedPayload,
  Summary,
  TrajectoryPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(detail);
  }
}

export class ApiClient {
  constructor(private base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.base + path, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  models(): Promise<ModelInfo[]> {
    return this.request("/api/models");
  }

  summary(id: string): Promise<Summary> {
    return this.request(`/api/model/${id}/summary`);
  }

  components(id: string, k: number, level = 1): Promise<ComponentsPayload> {
    return this.request(`/api/model/${id}/components?k=${k}&level=${level}`);
  }

  scree(id: string, level = 1): Promise<ScreePayload> {
    return this.request(`/api/model/${id}/scree?level=${level}`);
  }

  lincom(id: string, scores: number[], level?: number): Promise<CurvePayload> {
    return this.request(`/api/model/${id}/lincom`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(level === undefined ? { scores } : { scores, level }),
    });
  }

  subjectFitted(id: string, subject: string, visits?: number[]): Promise<SubjectFittedPayload> {
    const query = visits && visits.length ? `?visits=${visits.join(",")}` : "";
    return this.request(`/api/model/${id}/subject/${encodeURIComponent(subject)}/fitted${query}`);
  }

  scores(id: string, kx: number, ky: number, level = 1): Promise<ScoresPayload> {
    return this.request(`/api/model/${id}/scores?kx=${kx}&ky=${ky}&level=${level}`);
  }

  coef(id: string, term: string, level = 0.95): Promise<CoefPayload> {
    return this.request(`/api/model/${id}/coef/${encodeURIComponent(term)}?level_conf=${level}`);
  }

  predict(id: string, x: Record<string, number | string>): Promise<CurvePayload> {
    return this.request(`/api/model/${id}/predict`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ x }),
    });
  }

  residuals(id: string): Promise<ResidualsPayload> {
    return this.request(`/api/model/${id}/residuals?order=depth`);
  }

  visitTimes(id: string): Promise<import("./types.js").VisitTimesPayload> {
    return this.request(`/api/model/${id}/visit-times`);
  }

  meanSurface(id: string): Promise<MeanSurfacePayload> {
    return this.request(`/api/model/${id}/mean-surface`);
  }

  marginalCov(id: string): Promise<MarginalCovPayload> {
    return this.request(`/api/model/${id}/marginal-cov`);
  }

  scoreDynamics(id: string, k: number): Promise<ScoreDynamicsPayload> {
    return this.request(`/api/model/${id}/score-dynamics/${k}`);
  }

  trajectory(id: string, subject: string, nT = 21): Promise<TrajectoryPayload> {
    return this.request(`/api/model/${id}/trajectory/${encodeURIComponent(subject)}?nT=${nT}`);
  }
}
