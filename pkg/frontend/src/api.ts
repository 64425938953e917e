/** Thin typed client over the review service HTTP API. */

import type {
  CasePage, CaseView, Heatmap, Progress, QueueFilters, Summary,
  VerdictCategory,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  const body = await resp.text();
  if (!resp.ok) {
    let message = body;
    try {
      message = (JSON.parse(body) as { error?: { message?: string } }).error?.message ?? body;
    } catch {
      // non-JSON error body: keep raw text
    }
    throw new ApiError(resp.status, message);
  }
  return JSON.parse(body) as T;
}

/** The surface the review session needs; ApiClient is the HTTP implementation. */
export interface ReviewApi {
  allCases(filters: QueueFilters): Promise<CaseView[]>;
  heatmap(): Promise<Heatmap>;
  progress(): Promise<Progress>;
  submitVerdict(caseId: string, category: VerdictCategory, reviewer: string,
                correctedLabel?: string): Promise<void>;
}

export class ApiClient implements ReviewApi {
  constructor(
    private readonly base: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string, params?: Record<string, string | number | undefined>): string {
    const query = Object.entries(params ?? {})
      .filter(([, v]) => v !== undefined)
      .map(([k, v]) => `${encodeURIComponent(k)}=${encodeURIComponent(String(v))}`)
      .join("&");
    return `${this.base}${path}${query ? `?${query}` : ""}`;
  }

  async casesPage(filters: QueueFilters, page: number, pageSize = 50): Promise<CasePage> {
    return asJson(await this.fetchFn(this.url("/api/cases", {
      sort: "margin",
      page,
      page_size: pageSize,
      status: filters.status,
      origin: filters.origin,
    })));
  }

  /** All matching cases in margin-ascending order; pagination is internal. */
  async allCases(filters: QueueFilters): Promise<CaseView[]> {
    const out: CaseView[] = [];
    for (let page = 1; ; page += 1) {
      const chunk = await this.casesPage(filters, page);
      out.push(...chunk.cases);
      if (out.length >= chunk.total || chunk.cases.length === 0) {
        return out;
      }
    }
  }

  async getCase(id: string): Promise<CaseView> {
    return asJson(await this.fetchFn(this.url(`/api/cases/${encodeURIComponent(id)}`)));
  }

  async submitVerdict(caseId: string, category: VerdictCategory, reviewer: string,
                      correctedLabel?: string): Promise<void> {
    const body: Record<string, unknown> = { category, reviewer };
    if (correctedLabel !== undefined) {
      body.corrected_label = correctedLabel;
    }
    await asJson(await this.fetchFn(
      this.url(`/api/cases/${encodeURIComponent(caseId)}/verdict`),
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      },
    ));
  }

  async summary(): Promise<Summary> {
    return asJson(await this.fetchFn(this.url("/api/summary")));
  }

  async heatmap(): Promise<Heatmap> {
    return asJson(await this.fetchFn(this.url("/api/heatmap")));
  }

  async progress(): Promise<Progress> {
    return asJson(await this.fetchFn(this.url("/api/progress")));
  }
}
