import { readLines } from "./ndjson.js";
import type {
  ConfigView,
  PipelineEvent,
  Report,
  ReportSummary,
  RunOverrides,
  SearchHit,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorFrom(response: Response): Promise<ApiError> {
  let detail = `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as { error?: unknown };
    if (typeof body.error === "string" && body.error !== "") {
      detail = body.error;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(response.status, detail);
}

/** Thin client over the service's HTTP interface. */
export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async getConfig(): Promise<ConfigView> {
    const response = await fetch(this.url("/config"));
    if (!response.ok) {
      throw await errorFrom(response);
    }
    return (await response.json()) as ConfigView;
  }

  async getReport(reportId: string): Promise<Report> {
    const response = await fetch(this.url(`/reports/${encodeURIComponent(reportId)}`));
    if (!response.ok) {
      throw await errorFrom(response);
    }
    return (await response.json()) as Report;
  }

  async listReports(limit = 20): Promise<ReportSummary[]> {
    const response = await fetch(this.url(`/reports?limit=${limit}`));
    if (!response.ok) {
      throw await errorFrom(response);
    }
    const body = (await response.json()) as { reports: ReportSummary[] };
    return body.reports;
  }

  async searchReports(query: string, k = 5): Promise<SearchHit[]> {
    const params = new URLSearchParams({ q: query, k: String(k) });
    const response = await fetch(this.url(`/reports/search?${params}`));
    if (!response.ok) {
      throw await errorFrom(response);
    }
    const body = (await response.json()) as { hits: SearchHit[] };
    return body.hits;
  }

  /**
   * Start a research run and yield pipeline events as they stream in.
   * Throws ApiError for a non-2xx response and Error for a malformed line;
   * the caller owns translating those into run state.
   */
  async *research(question: string, overrides?: RunOverrides): AsyncGenerator<PipelineEvent> {
    const payload: { question: string; overrides?: RunOverrides } = { question };
    if (overrides && Object.keys(overrides).length > 0) {
      payload.overrides = overrides;
    }
    const response = await fetch(this.url("/research"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (!response.ok) {
      throw await errorFrom(response);
    }
    for await (const line of readLines(response)) {
      let event: PipelineEvent;
      try {
        event = JSON.parse(line) as PipelineEvent;
      } catch {
        throw new Error(`unparseable event line: ${line.slice(0, 120)}`);
      }
      yield event;
    }
  }
}
