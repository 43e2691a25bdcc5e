/**
 * Typed client for the validation service HTTP API.
 *
 * The client is the UI's only connection to the outside world: tasks,
 * judgments, the live overly-broad advisory, and image assets all go
 * through these endpoints.
 */

export interface PanelDocument {
  items: string[];
  contributors: Record<string, number>;
}

export interface TaskDocument {
  query: string;
  reference: string;
  text: string;
  targets: string[];
  panel: PanelDocument;
  k: number;
  steps: string[];
}

export interface NextTaskResponse {
  done: boolean;
  task: TaskDocument | null;
}

export interface TraceStepDocument {
  step: string;
  outcome: "ok" | "issue";
}

export interface JudgmentDocument {
  query: string;
  annotator: string;
  timestamp: number;
  valid: boolean;
  issues: string[];
  trace: TraceStepDocument[];
  note?: string;
}

export interface SubmitResult {
  accepted: boolean;
  superseded: boolean;
}

export interface AdvisoryResult {
  query: string;
  non_ground_truth_marks: number;
  k: number;
  reached: boolean;
}

export interface ProgressResult {
  annotator: string;
  total: number;
  done: number;
}

/** Error from the service itself (HTTP status + detail), not the network. */
export class ServiceError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ServiceError";
  }
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class AnnotationClient {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    const text = await response.text();
    if (!response.ok) {
      let detail = text;
      try {
        const parsed = JSON.parse(text) as { detail?: unknown };
        if (typeof parsed.detail === "string") detail = parsed.detail;
      } catch {
        // non-JSON error body; keep the raw text
      }
      throw new ServiceError(response.status, detail);
    }
    return JSON.parse(text) as T;
  }

  register(annotator: string, batch: string[] = []): Promise<{ registered: string }> {
    return this.request("POST", "/annotators/register", { annotator, batch });
  }

  nextTask(annotator: string): Promise<NextTaskResponse> {
    return this.request(
      "GET",
      `/tasks/next?annotator=${encodeURIComponent(annotator)}`,
    );
  }

  submit(judgment: JudgmentDocument): Promise<SubmitResult> {
    return this.request("POST", "/judgments", judgment);
  }

  advisory(query: string, marks: string[]): Promise<AdvisoryResult> {
    return this.request("POST", "/advisory", { query, marks });
  }

  progress(annotator: string): Promise<ProgressResult> {
    return this.request(
      "GET",
      `/progress?annotator=${encodeURIComponent(annotator)}`,
    );
  }

  /** URL for an image asset streamed by the service. */
  assetUrl(ref: string): string {
    return `${this.baseUrl}/assets/${ref}`;
  }
}
