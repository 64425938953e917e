/** Thin typed client over the review service HTTP API. */
export class ApiError extends Error {
    status;
    constructor(status, message) {
        super(message);
        this.status = status;
    }
}
async function asJson(resp) {
    const body = await resp.text();
    if (!resp.ok) {
        let message = body;
        try {
            message = JSON.parse(body).error?.message ?? body;
        }
        catch {
            // non-JSON error body: keep raw text
        }
        throw new ApiError(resp.status, message);
    }
    return JSON.parse(body);
}
export class ApiClient {
    base;
    fetchFn;
    constructor(base, fetchFn = (input, init) => fetch(input, init)) {
        this.base = base;
        this.fetchFn = fetchFn;
    }
    url(path, params) {
        const query = Object.entries(params ?? {})
            .filter(([, v]) => v !== undefined)
            .map(([k, v]) => `${encodeURIComponent(k)}=${encodeURIComponent(String(v))}`)
            .join("&");
        return `${this.base}${path}${query ? `?${query}` : ""}`;
    }
    async casesPage(filters, page, pageSize = 50) {
        return asJson(await this.fetchFn(this.url("/api/cases", {
            sort: "margin",
            page,
            page_size: pageSize,
            status: filters.status,
            origin: filters.origin,
        })));
    }
    /** All matching cases in margin-ascending order; pagination is internal. */
    async allCases(filters) {
        const out = [];
        for (let page = 1;; page += 1) {
            const chunk = await this.casesPage(filters, page);
            out.push(...chunk.cases);
            if (out.length >= chunk.total || chunk.cases.length === 0) {
                return out;
            }
        }
    }
    async getCase(id) {
        return asJson(await this.fetchFn(this.url(`/api/cases/${encodeURIComponent(id)}`)));
    }
    async submitVerdict(caseId, category, reviewer, correctedLabel) {
        const body = { category, reviewer };
        if (correctedLabel !== undefined) {
            body.corrected_label = correctedLabel;
        }
        await asJson(await this.fetchFn(this.url(`/api/cases/${encodeURIComponent(caseId)}/verdict`), {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(body),
        }));
    }
    async summary() {
        return asJson(await this.fetchFn(this.url("/api/summary")));
    }
    async heatmap() {
        return asJson(await this.fetchFn(this.url("/api/heatmap")));
    }
    async progress() {
        return asJson(await this.fetchFn(this.url("/api/progress")));
    }
}
