import type {
  ApiErrorBody,
  Decision,
  DecisionResponse,
  FinalizeResponse,
  NextResponse,
  ProgressResponse,
  RulebaseResponse,
} from "./types";

/** Error carrying the server's {code, message, detail} verbatim. */
export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public detail?: unknown,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let body: ApiErrorBody | null = null;
  try {
    body = (await resp.json()) as ApiErrorBody;
  } catch {
    // non-JSON error body; fall through to a generic error
  }
  return new ApiError(
    resp.status,
    body?.code ?? "http_error",
    body?.message ?? `HTTP ${resp.status}`,
    body?.detail,
  );
}

export type NextResult =
  | { kind: "sample"; value: NextResponse }
  | { kind: "empty" };

/** Thin typed client over the annotation service endpoints. */
export class AnnotationApi {
  constructor(private baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(this.url(path));
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  private async sendJson<T>(
    method: string,
    path: string,
    body: unknown,
  ): Promise<T> {
    const resp = await fetch(this.url(path), {
      method,
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  /** Next undecided sample; the queue-empty signal becomes a value. */
  async next(sessionId: string, category?: string): Promise<NextResult> {
    const query = category ? `?category=${encodeURIComponent(category)}` : "";
    try {
      const value = await this.getJson<NextResponse>(
        `/sessions/${sessionId}/next${query}`,
      );
      return { kind: "sample", value };
    } catch (err) {
      if (err instanceof ApiError && err.code === "queue_empty") {
        return { kind: "empty" };
      }
      throw err;
    }
  }

  submitDecision(
    sessionId: string,
    sampleId: string,
    decision: Decision,
    annotator: string,
  ): Promise<DecisionResponse> {
    return this.sendJson<DecisionResponse>(
      "POST",
      `/sessions/${sessionId}/decisions`,
      { sample_id: sampleId, decision, annotator },
    );
  }

  progress(sessionId: string): Promise<ProgressResponse> {
    return this.getJson<ProgressResponse>(`/sessions/${sessionId}/progress`);
  }

  finalize(
    sessionId: string,
    m: number,
    seed: number,
  ): Promise<FinalizeResponse> {
    return this.sendJson<FinalizeResponse>(
      "POST",
      `/sessions/${sessionId}/finalize`,
      { m, seed },
    );
  }

  rulebase(): Promise<RulebaseResponse> {
    return this.getJson<RulebaseResponse>("/rulebase");
  }

  addRule(rule: {
    id: string;
    category: string;
    title?: string;
    body: string;
    hint_terms?: string[];
  }): Promise<{ ok: boolean; version: number }> {
    return this.sendJson("POST", "/rulebase/rules", rule);
  }

  updateRule(
    ruleId: string,
    patch: { body: string; hint_terms?: string[] },
  ): Promise<{ ok: boolean; version: number }> {
    return this.sendJson(
      "PATCH",
      `/rulebase/rules/${encodeURIComponent(ruleId)}`,
      patch,
    );
  }
}
