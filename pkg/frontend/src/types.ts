/** Wire types mirroring the review service JSON responses. */

export type Origin = "discordant" | "agreement_sample";

export type VerdictCategory =
  | "label_error"
  | "model_error"
  | "ambiguous"
  | "confirmed_correct";

export const CATEGORIES_BY_ORIGIN: Record<Origin, VerdictCategory[]> = {
  discordant: ["label_error", "model_error", "ambiguous"],
  agreement_sample: ["label_error", "ambiguous", "confirmed_correct"],
};

export interface TopEntry {
  class: string;
  prob: number;
}

export interface VerdictView {
  case_id: string;
  category: VerdictCategory;
  reviewer: string;
  ts: number;
  corrected_label?: string;
}

export interface CaseView {
  id: string;
  image_ref: string;
  assigned_label: string;
  top3: TopEntry[];
  margin: number;
  origin: Origin;
  split: string;
  status: "pending" | "reviewed";
  verdict: VerdictView | null;
  image_url: string | null;
}

export interface CasePage {
  total: number;
  page: number;
  page_size: number;
  cases: CaseView[];
}

export interface SummaryRow {
  origin: Origin;
  split: string;
  n_cases: number;
  n_reviewed: number;
  n_pending: number;
  counts: Record<string, number>;
  pct: Record<string, number>;
}

export interface Summary {
  classes: string[];
  rows: SummaryRow[];
}

export interface Heatmap {
  classes: string[];
  errors: number[][];
  reviewed: number[][];
  rate: number[][];
}

export interface Progress {
  total: number;
  reviewed: number;
  pending: number;
}

export interface QueueFilters {
  status?: "pending" | "reviewed";
  origin?: Origin;
}
