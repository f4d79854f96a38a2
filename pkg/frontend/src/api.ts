/** Typed client for the planning session API. All numbers shown in the UI
 *  come from these payloads verbatim; the client never recomputes them. */

export interface Analog {
  record_index: number;
  record_id: string;
  weight: number;
  target: number | null;
}

export interface BeliefView {
  schema_version: number;
  session_id: string;
  h: number;
  l: number;
  g_mean: number;
  measured_assays: string[];
  top_analogs: Analog[];
}

export interface MlaspStepView {
  action: string;
  assays: string[];
  stop: boolean;
  vote_fraction: number;
  cumulative_cost: number[];
  post_step_h: number;
}

export interface MlaspView {
  constraint_met: boolean;
  truncated: boolean;
  final_h: number;
  final_l: number;
  cost_components: string[];
  total_cost: number[];
  steps: MlaspStepView[];
}

export interface VoteRow {
  action: string;
  votes: number;
}

export interface ParetoPointView {
  tolerance: number;
  sweep: string;
  spend: number;
  first_action: string;
  constraint_met: boolean;
  dominated: boolean;
}

export interface Recommendation {
  schema_version: number;
  session_id: string;
  h: number;
  l: number;
  mlasp: MlaspView;
  votes: VoteRow[];
  pareto: ParetoPointView[];
}

export interface SessionCreated {
  schema_version: number;
  session_id: string;
  h: number;
  l: number;
  g_mean: number;
}

export interface RecommendationOverrides {
  tau?: number;
  epsilon?: number;
  ne?: number;
  iters?: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function parse<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const message =
      typeof body === "object" && body !== null && "error" in body
        ? String((body as { error: unknown }).error)
        : `HTTP ${response.status}`;
    throw new ApiError(response.status, message);
  }
  return body as T;
}

export class PlannerApi {
  constructor(private base: string = "") {}

  health(): Promise<{ status: string; version: string }> {
    return fetch(`${this.base}/health`).then((r) => parse(r));
  }

  createSession(features: Record<string, number>): Promise<SessionCreated> {
    return fetch(`${this.base}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ features }),
    }).then((r) => parse(r));
  }

  belief(sessionId: string, topK = 8): Promise<BeliefView> {
    return fetch(
      `${this.base}/sessions/${sessionId}/belief?top_k=${topK}`,
    ).then((r) => parse(r));
  }

  recommendation(
    sessionId: string,
    overrides: RecommendationOverrides = {},
  ): Promise<Recommendation> {
    const params = new URLSearchParams();
    for (const [key, value] of Object.entries(overrides)) {
      if (value !== undefined) params.set(key, String(value));
    }
    const query = params.toString();
    return fetch(
      `${this.base}/sessions/${sessionId}/recommendation${query ? "?" + query : ""}`,
    ).then((r) => parse(r));
  }

  recordOutcomes(
    sessionId: string,
    outcomes: Record<string, number>,
  ): Promise<BeliefView> {
    return fetch(`${this.base}/sessions/${sessionId}/outcomes`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ outcomes }),
    }).then((r) => parse(r));
  }
}
