import {
  CohortResponse,
  CompletionResponse,
  PatientInput,
  Phase2Response,
  PosteriorSummary,
  TrialSnapshot,
} from "./types";

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`${status}: ${detail}`);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(base + path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    const detail = typeof body.detail === "string"
      ? body.detail
      : JSON.stringify(body.detail ?? body);
    throw new ApiError(resp.status, detail);
  }
  return body as T;
}

export class TrialApi {
  constructor(private base: string) {}

  listTrials(): Promise<{ trials: string[] }> {
    return request(this.base, "/trials");
  }

  createTrial(config: Record<string, unknown>): Promise<{ trial_id: string }> {
    return request(this.base, "/trials", {
      method: "POST",
      body: JSON.stringify(config),
    });
  }

  getTrial(id: string): Promise<TrialSnapshot> {
    return request(this.base, `/trials/${id}`);
  }

  getPosterior(id: string): Promise<PosteriorSummary> {
    return request(this.base, `/trials/${id}/posterior`);
  }

  submitCohort(id: string, patients: PatientInput[]): Promise<CohortResponse> {
    return request(this.base, `/trials/${id}/phase1/cohorts`, {
      method: "POST",
      body: JSON.stringify({ patients }),
    });
  }

  completePhase1(id: string): Promise<CompletionResponse> {
    return request(this.base, `/trials/${id}/phase1/complete`, {
      method: "POST",
    });
  }

  submitPhase2(id: string, outcomes: Record<string, number>[]): Promise<Phase2Response> {
    return request(this.base, `/trials/${id}/phase2/outcomes`, {
      method: "POST",
      body: JSON.stringify({ outcomes }),
    });
  }
}
