/** Display formatting shared by the dashboard and the case card. */
export function formatCountPct(count, fraction) {
    return `${count.toLocaleString("en-US")} (${(fraction * 100).toFixed(1)}%)`;
}
export function formatMargin(margin) {
    return margin.toFixed(3);
}
export function formatProb(p) {
    return p.toFixed(3);
}
export function heatmapCellLabel(errors, reviewed) {
    return reviewed > 0 ? `${errors} / ${reviewed}` : "";
}
/** White-to-red scale over the label-error rate, like the directional figure. */
export function rateColor(rate) {
    const clamped = Math.max(0, Math.min(1, rate));
    const r = Math.round(255 - (255 - 185) * clamped);
    const g = Math.round(255 - (255 - 28) * clamped);
    const b = Math.round(255 - (255 - 28) * clamped);
    return `rgb(${r}, ${g}, ${b})`;
}
export function escapeHtml(text) {
    return text
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;");
}
