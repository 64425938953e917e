/** Pure HTML renderers: every displayed number comes verbatim from the API. */

import {
  escapeHtml, formatCountPct, formatMargin, formatProb, heatmapCellLabel,
  rateColor,
} from "./format.js";
import type { CaseView, Heatmap, Progress, Summary, SummaryRow } from "./types.js";
import { CATEGORIES_BY_ORIGIN } from "./types.js";
import type { Draft } from "./session.js";

const CATEGORY_LABELS: Record<string, string> = {
  label_error: "1 Label error",
  model_error: "2 Model error",
  ambiguous: "3 Ambiguous",
  confirmed_correct: "4 Confirmed correct",
};

export function renderCaseCard(item: CaseView, classes: string[],
                               draft: Draft | null,
                               showProbabilities = true): string {
  const image = item.image_url
    ? `<img class="cell-image" src="${escapeHtml(item.image_url)}" alt="cell image">`
    : `<div class="cell-image placeholder">no image</div>`;
  const rows = showProbabilities
    ? item.top3.map((t) =>
        `<tr><td>${escapeHtml(t.class)}</td><td>${formatProb(t.prob)}</td></tr>`).join("")
    : "";
  const buttons = CATEGORIES_BY_ORIGIN[item.origin]
    .map((c) => `<button data-category="${c}">${CATEGORY_LABELS[c]}</button>`)
    .join("");
  const correction = draft
    ? `<div class="correction">corrected label:
         <strong data-corrected>${escapeHtml(classes[draft.correctedIndex] ?? "?")}</strong>
         <span class="hint">ArrowUp/ArrowDown to change, Enter to submit, Esc to cancel</span>
       </div>`
    : "";
  return `
  <article class="case-card" data-case-id="${escapeHtml(item.id)}">
    ${image}
    <div class="case-meta">
      <div>case <code>${escapeHtml(item.id)}</code>
           <span class="badge">${item.origin}</span>
           <span class="badge">${escapeHtml(item.split)}</span></div>
      <div>assigned label: <strong>${escapeHtml(item.assigned_label)}</strong></div>
      ${showProbabilities
        ? `<table class="top3"><thead><tr><th>top-3</th><th>prob</th></tr></thead>
           <tbody>${rows}</tbody></table>
           <div>margin: <strong>${formatMargin(item.margin)}</strong></div>`
        : ""}
      <div class="verdict-buttons">${buttons}</div>
      ${correction}
    </div>
  </article>`;
}

export function renderQueueStatus(pendingLeft: number, complete: boolean,
                                  error: string | null): string {
  const notice = complete
    ? `<div class="complete">All cases reviewed — queue complete.</div>`
    : `<div class="remaining">${pendingLeft} pending case(s) in queue</div>`;
  const err = error
    ? `<div class="error" role="alert">${escapeHtml(error)}</div>`
    : "";
  return notice + err;
}

export function renderProgress(progress: Progress): string {
  const pct = progress.total ? progress.reviewed / progress.total : 0;
  return `
  <div class="progress">
    <div class="progress-bar" style="width: ${(pct * 100).toFixed(1)}%"></div>
    <span>${progress.reviewed} / ${progress.total} reviewed</span>
  </div>`;
}

function summarySection(rows: SummaryRow[], categories: string[]): string {
  const header = ["split", "n reviewed", ...categories, "pending"]
    .map((h) => `<th>${escapeHtml(h.replace("_", " "))}</th>`).join("");
  const body = rows.map((row) => {
    const cells = categories.map((c) =>
      `<td>${formatCountPct(row.counts[c] ?? 0, row.pct[c] ?? 0)}</td>`).join("");
    return `<tr><td>${escapeHtml(row.split)}</td><td>${row.n_reviewed.toLocaleString("en-US")}</td>${cells}<td>${row.n_pending}</td></tr>`;
  }).join("");
  return `<table class="summary"><thead><tr>${header}</tr></thead><tbody>${body}</tbody></table>`;
}

export function renderSummaryTables(summary: Summary): string {
  const discordant = summary.rows.filter((r) => r.origin === "discordant");
  const agreement = summary.rows.filter((r) => r.origin === "agreement_sample");
  let html = "";
  if (discordant.length) {
    html += `<h3>Disagreement review</h3>` +
      summarySection(discordant, ["label_error", "model_error", "ambiguous"]);
  }
  if (agreement.length) {
    html += `<h3>Agreement review</h3>` +
      summarySection(agreement, ["label_error", "ambiguous", "confirmed_correct"]);
  }
  const pending = summary.rows.some((r) => r.n_pending > 0);
  if (pending) {
    html += `<div class="banner">pending reviews remain — figures are partial</div>`;
  }
  return html || "<p>No cases loaded.</p>";
}

export function renderHeatmap(heatmap: Heatmap): string {
  const names = heatmap.classes;
  const header = [`<th></th>`, ...names.map((n) => `<th>${escapeHtml(n)}</th>`)].join("");
  const rows = names.map((rowName, i) => {
    const cells = names.map((_, j) => {
      const reviewed = heatmap.reviewed[i][j];
      const errors = heatmap.errors[i][j];
      const rate = heatmap.rate[i][j];
      const label = heatmapCellLabel(errors, reviewed);
      const style = reviewed > 0 ? ` style="background-color: ${rateColor(rate)}"` : "";
      const title = reviewed > 0
        ? ` title="assigned ${escapeHtml(rowName)}, predicted ${escapeHtml(names[j])}: rate ${rate.toFixed(3)}"`
        : "";
      return `<td${style}${title}>${label}</td>`;
    }).join("");
    return `<tr><th>${escapeHtml(rowName)}</th>${cells}</tr>`;
  }).join("");
  return `
  <table class="heatmap">
    <caption>label errors / reviewed disagreements (rows: assigned, columns: top-1)</caption>
    <thead><tr>${header}</tr></thead>
    <tbody>${rows}</tbody>
  </table>`;
}
