/** Review-session state machine: queue, cursor, draft buffer, keyboard flow.
 *
 * Keyboard contract (documented in the README):
 *   1  label_error  -> opens the correction buffer (default: the model's
 *                      strongest class that differs from the assigned label);
 *                      ArrowUp/ArrowDown cycle the class, Enter submits,
 *                      Escape discards the buffer.
 *   2  model_error      (discordant cases only) submit immediately
 *   3  ambiguous        submit immediately
 *   4  confirmed_correct (agreement cases only) submit immediately
 *   n / p               move to the next / previous case (blocked while the
 *                       correction buffer is open)
 *
 * Submissions are optimistic: the case leaves the pending queue and the
 * cursor advances right away; a rejected POST rolls the queue back and
 * surfaces the error inline.
 */
import { ApiError } from "./api.js";
import { CATEGORIES_BY_ORIGIN } from "./types.js";
export const KEY_TO_CATEGORY = {
    "1": "label_error",
    "2": "model_error",
    "3": "ambiguous",
    "4": "confirmed_correct",
};
export class ReviewSession {
    api;
    reviewer;
    queue = [];
    cursor = 0;
    filters = { status: "pending" };
    draft = null;
    lastError = null;
    classes = [];
    reviewedCount = 0;
    totalCount = 0;
    showProbabilities = true;
    constructor(api, reviewer) {
        this.api = api;
        this.reviewer = reviewer;
    }
    async load(filters) {
        if (filters) {
            this.filters = filters;
        }
        if (this.classes.length === 0) {
            this.classes = (await this.api.heatmap()).classes;
        }
        this.queue = await this.api.allCases(this.filters);
        const progress = await this.api.progress();
        this.reviewedCount = progress.reviewed;
        this.totalCount = progress.total;
        this.cursor = 0;
        this.draft = null;
        this.lastError = null;
    }
    current() {
        return this.queue[this.cursor] ?? null;
    }
    get complete() {
        return this.filters.status === "pending" && this.queue.length === 0;
    }
    allowedCategories(origin) {
        return CATEGORIES_BY_ORIGIN[origin];
    }
    /** Model's strongest class that differs from the assigned label. */
    defaultCorrectionIndex(item) {
        for (const entry of item.top3) {
            if (entry.class !== item.assigned_label) {
                const idx = this.classes.indexOf(entry.class);
                if (idx >= 0) {
                    return idx;
                }
            }
        }
        const fallback = this.classes.findIndex((c) => c !== item.assigned_label);
        return Math.max(fallback, 0);
    }
    cycleCorrection(step) {
        const item = this.current();
        if (!this.draft || !item) {
            return;
        }
        const n = this.classes.length;
        let idx = this.draft.correctedIndex;
        do {
            idx = (idx + step + n) % n;
        } while (this.classes[idx] === item.assigned_label);
        this.draft = { ...this.draft, correctedIndex: idx };
    }
    move(step) {
        if (this.draft) {
            this.lastError = "finish or discard the correction first (Enter / Escape)";
            return;
        }
        if (this.queue.length === 0) {
            return;
        }
        this.cursor = Math.min(Math.max(this.cursor + step, 0), this.queue.length - 1);
        this.lastError = null;
    }
    /** Keyboard entry point; returns true when the key was consumed. */
    async handleKey(key) {
        if (this.draft) {
            if (key === "ArrowUp") {
                this.cycleCorrection(-1);
                return true;
            }
            if (key === "ArrowDown") {
                this.cycleCorrection(1);
                return true;
            }
            if (key === "Enter") {
                const corrected = this.classes[this.draft.correctedIndex];
                await this.submit("label_error", corrected);
                return true;
            }
            if (key === "Escape") {
                this.draft = null;
                this.lastError = null;
                return true;
            }
            return false;
        }
        const category = KEY_TO_CATEGORY[key];
        if (category) {
            const item = this.current();
            if (!item) {
                return false;
            }
            if (!this.allowedCategories(item.origin).includes(category)) {
                this.lastError =
                    `${category} is not a valid verdict for ${item.origin} cases`;
                return true;
            }
            if (category === "label_error") {
                this.draft = {
                    category: "label_error",
                    correctedIndex: this.defaultCorrectionIndex(item),
                };
                return true;
            }
            await this.submit(category);
            return true;
        }
        if (key === "n" || key === "ArrowRight") {
            this.move(1);
            return true;
        }
        if (key === "p" || key === "ArrowLeft") {
            this.move(-1);
            return true;
        }
        return false;
    }
    /** Optimistic submit: advance immediately, roll back when the POST fails. */
    async submit(category, correctedLabel) {
        const item = this.current();
        if (!item) {
            return false;
        }
        const stash = {
            queue: [...this.queue],
            cursor: this.cursor,
            reviewed: this.reviewedCount,
            draft: this.draft,
        };
        if (this.filters.status === "pending") {
            this.queue.splice(this.cursor, 1);
            this.cursor = Math.min(this.cursor, Math.max(this.queue.length - 1, 0));
        }
        else {
            this.cursor = Math.min(this.cursor + 1, this.queue.length - 1);
        }
        this.reviewedCount += 1;
        this.draft = null;
        this.lastError = null;
        try {
            await this.api.submitVerdict(item.id, category, this.reviewer, correctedLabel);
            return true;
        }
        catch (err) {
            this.queue = stash.queue;
            this.cursor = stash.cursor;
            this.reviewedCount = stash.reviewed;
            this.draft = stash.draft;
            this.lastError = err instanceof ApiError
                ? `${err.status}: ${err.message}`
                : String(err);
            return false;
        }
    }
}
