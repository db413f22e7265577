/**
 * REST client for the job API.
 *
 * Endpoints:
 *   POST /jobs                      create (vod | live_sim)
 *   GET  /jobs/{id}                 status, stats (server specs, timings)
 *   GET  /jobs/{id}/metadata        detected ad intervals (409 until ready)
 *   POST /jobs/{id}/start-stream    returns the delivery WebSocket URL
 *   GET  /server/info               host specs
 *
 * Errors surface as ApiError carrying the HTTP status and the server's
 * detail string; describeError() renders them for the console, mapping a
 * 409 to "not ready".
 */

export interface JobRequest {
  mode: "vod" | "live_sim";
  source_uri: string;
  engine: "xcorr" | "features";
  target_policy: Record<string, string>;
  speed?: number;
  idempotency_key?: string;
}

export interface ServerSpecs {
  cpu_model: string;
  cores: number;
  mem_mb: number;
  version: string;
}

export interface JobStats {
  server_specs?: ServerSpecs;
  processing_ms?: number;
  segments_processed?: number;
  intervals_found?: number;
  [extra: string]: unknown;
}

export interface JobView {
  job_id: string;
  mode: string;
  source_uri: string;
  engine: string;
  target_policy: Record<string, string>;
  status: "queued" | "processing" | "ready" | "streaming" | "failed";
  stats: JobStats;
  speed: number;
  error?: string;
}

export interface AdInterval {
  start_frame: number;
  end_frame: number;
  start_timestamp_ms: number;
  end_timestamp_ms: number;
  category: string;
  is_ad: number;
}

export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

/** Console-facing rendering of a request failure. */
export function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    if (err.status === 409) {
      return "not ready";
    }
    return `${err.status}: ${err.detail}`;
  }
  if (err instanceof Error) {
    return `server unreachable: ${err.message}`;
  }
  return String(err);
}

type FetchFn = typeof fetch;

export class JobApi {
  readonly baseUrl: string;
  private fetchFn: FetchFn;

  constructor(baseUrl: string, fetchFn: FetchFn = fetch) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    let parsed: unknown = null;
    try {
      parsed = text === "" ? null : JSON.parse(text);
    } catch {
      parsed = text;
    }
    if (!response.ok) {
      const detail =
        typeof parsed === "object" && parsed !== null && "detail" in parsed
          ? String((parsed as { detail: unknown }).detail)
          : String(parsed);
      throw new ApiError(response.status, detail);
    }
    return parsed as T;
  }

  createJob(req: JobRequest): Promise<{ job_id: string }> {
    return this.request("POST", "/jobs", req);
  }

  getJob(jobId: string): Promise<JobView> {
    return this.request("GET", `/jobs/${jobId}`);
  }

  getMetadata(jobId: string): Promise<AdInterval[]> {
    return this.request("GET", `/jobs/${jobId}/metadata`);
  }

  startStream(jobId: string): Promise<{ ws_url: string }> {
    return this.request("POST", `/jobs/${jobId}/start-stream`);
  }

  serverInfo(): Promise<ServerSpecs> {
    return this.request("GET", "/server/info");
  }

  /** Poll until the job is ready or streaming; a failed job throws. */
  async waitReady(jobId: string, timeoutMs = 60_000, pollMs = 150): Promise<JobView> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const view = await this.getJob(jobId);
      if (view.status === "ready" || view.status === "streaming") {
        return view;
      }
      if (view.status === "failed") {
        throw new ApiError(500, view.error ?? "job failed");
      }
      if (Date.now() >= deadline) {
        throw new ApiError(408, `job ${jobId} still ${view.status} after ${timeoutMs} ms`);
      }
      await new Promise((resolve) => setTimeout(resolve, pollMs));
    }
  }
}
