/** Display formatting shared by the dashboard and the case card. */

export function formatCountPct(count: number, fraction: number): string {
  return `${count.toLocaleString("en-US")} (${(fraction * 100).toFixed(1)}%)`;
}

export function formatMargin(margin: number): string {
  return margin.toFixed(3);
}

export function formatProb(p: number): string {
  return p.toFixed(3);
}

export function heatmapCellLabel(errors: number, reviewed: number): string {
  return reviewed > 0 ? `${errors} / ${reviewed}` : "";
}

/** White-to-red scale over the label-error rate, like the directional figure. */
export function rateColor(rate: number): string {
  const clamped = Math.max(0, Math.min(1, rate));
  const r = Math.round(255 - (255 - 185) * clamped);
  const g = Math.round(255 - (255 - 28) * clamped);
  const b = Math.round(255 - (255 - 28) * clamped);
  return `rgb(${r}, ${g}, ${b})`;
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
