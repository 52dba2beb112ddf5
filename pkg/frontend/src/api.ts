/** Typed client for the evaluation service's HTTP JSON API. */

export interface Progress {
  done: number;
  total: number;
}

export interface NextImage {
  complete: false;
  image_id: number;
  image_url: string;
  descriptor: string;
  progress: Progress;
}

export interface SessionComplete {
  complete: true;
  progress: Progress;
}

export type NextResponse = NextImage | SessionComplete;

export interface Rating {
  image_id: number;
  quality: number;
  representativeness: number;
  comment?: string;
}

export interface StageRow {
  stage: string;
  n: number;
  mean_quality: number | null;
  mean_representativeness: number | null;
  delta_quality: number | null;
  delta_representativeness: number | null;
}

export type FetchLike = (
  input: string,
  init?: RequestInit
) => Promise<Response>;

/** Raised when the server answers with a non-2xx status. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export class EvalApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args)
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        detail =
          typeof body.detail === "string"
            ? body.detail
            : JSON.stringify(body.detail ?? body);
      } catch {
        /* keep the status text */
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  next(sessionId: string): Promise<NextResponse> {
    return this.request(`/api/session/${sessionId}/next`);
  }

  submitRating(sessionId: string, rating: Rating): Promise<{ ok: boolean }> {
    return this.request(`/api/session/${sessionId}/rating`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(rating),
    });
  }

  stageReport(): Promise<{ stages: StageRow[] }> {
    return this.request("/api/report/stages");
  }

  curve(): Promise<{
    points: Array<{
      quantile: number;
      cutoff: number;
      mean_representativeness: number;
      n: number;
    }>;
  }> {
    return this.request("/api/report/curve");
  }

  /** Resolve a server-relative image URL against the service base. */
  imageUrl(relative: string): string {
    return this.baseUrl + relative;
  }
}
