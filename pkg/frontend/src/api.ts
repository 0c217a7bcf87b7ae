// Thin client for the three service endpoints. Evaluation requests are
// cancel-and-replace: a new submit aborts the one in flight.

import type {
  ErrorBody,
  EvaluateRequest,
  EvaluateResponse,
  ModelsResponse,
  PanelResponse,
} from "./types.js";

export type ApiFailureKind = "field" | "banner";

export class ApiError extends Error {
  readonly kind: ApiFailureKind;
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
    // Client errors surface next to the form; server errors as a banner.
    this.kind = status >= 400 && status < 500 ? "field" : "banner";
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let code = "unknown_error";
  let message = `request failed with status ${response.status}`;
  try {
    const body = (await response.json()) as ErrorBody;
    if (body?.error) {
      code = body.error.code;
      message = body.error.message;
    }
  } catch {
    // non-JSON error body; keep the generic message
  }
  return new ApiError(response.status, code, message);
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: typeof fetch;
  private inflight: AbortController | null = null;

  constructor(base = "", fetchFn: typeof fetch = fetch) {
    this.base = base.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  async panel(): Promise<PanelResponse> {
    const response = await this.fetchFn(`${this.base}/api/v1/panel`);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as PanelResponse;
  }

  async models(): Promise<ModelsResponse> {
    const response = await this.fetchFn(`${this.base}/api/v1/models`);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as ModelsResponse;
  }

  async evaluate(request: EvaluateRequest): Promise<EvaluateResponse> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    try {
      const response = await this.fetchFn(`${this.base}/api/v1/evaluate`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(request),
        signal: controller.signal,
      });
      if (!response.ok) throw await parseError(response);
      return (await response.json()) as EvaluateResponse;
    } finally {
      if (this.inflight === controller) {
        this.inflight = null;
      }
    }
  }
}
