/** Shared 10-case fixture (7 discordant + 3 agreement) and builders. */

import type { CaseView, Heatmap, Origin, Summary } from "../src/types.js";

export const WBC_CLASSES = [
  "SNE", "LY", "MO", "EO", "BA", "VLY", "BNE",
  "MMY", "MY", "PMY", "BL", "PC", "PLY",
];

interface RawCase {
  id: string;
  image_ref: string;
  assigned_label: string;
  top3: { class: string; prob: number }[];
  margin: number;
  origin: Origin;
  split: string;
}

export function tenCaseFixture(): RawCase[] {
  const cases: RawCase[] = [];
  for (let k = 0; k < 7; k += 1) {
    const margin = 0.01 * (k + 1);
    cases.push({
      id: `d${k}`,
      image_ref: "",
      assigned_label: "BNE",
      top3: [
        { class: "SNE", prob: 0.5 + margin / 2 },
        { class: "BNE", prob: 0.5 - margin / 2 },
        { class: "LY", prob: 0.0 },
      ],
      margin,
      origin: "discordant",
      split: k % 2 ? "val" : "train",
    });
  }
  const agreementMargins = [0.5, 0.6, 0.7];
  agreementMargins.forEach((margin, k) => {
    const p1 = (1 + margin) / 2;
    cases.push({
      id: `a${k}`,
      image_ref: "",
      assigned_label: "LY",
      top3: [
        { class: "LY", prob: p1 },
        { class: "VLY", prob: p1 - margin },
        { class: "BL", prob: 1 - p1 - (p1 - margin) },
      ],
      margin,
      origin: "agreement_sample",
      split: "train",
    });
  });
  return cases;
}

export function fixtureFileJson(): string {
  return JSON.stringify({ classes: WBC_CLASSES, cases: tenCaseFixture() }, null, 2);
}

export function asCaseViews(raw: RawCase[]): CaseView[] {
  return raw.map((c) => ({
    ...c,
    status: "pending" as const,
    verdict: null,
    image_url: c.image_ref ? `/images/${c.image_ref}` : null,
  }));
}

/** Summary fixture carrying the published review-outcome counts. */
export function tableSummaryFixture(): Summary {
  const row = (origin: Origin, split: string, counts: Record<string, number>,
               pending = 0) => {
    const n = Object.values(counts).reduce((a, b) => a + b, 0);
    const pct: Record<string, number> = {};
    for (const [k, v] of Object.entries(counts)) {
      pct[k] = v / n;
    }
    return {
      origin, split, n_cases: n + pending, n_reviewed: n, n_pending: pending,
      counts, pct,
    };
  };
  return {
    classes: WBC_CLASSES,
    rows: [
      row("discordant", "train",
          { label_error: 803, model_error: 484, ambiguous: 170 }),
      row("discordant", "val",
          { label_error: 172, model_error: 140, ambiguous: 20 }),
      row("discordant", "combined",
          { label_error: 975, model_error: 624, ambiguous: 190 }),
      row("agreement_sample", "train",
          { label_error: 156, ambiguous: 125, confirmed_correct: 1673 }),
    ],
  };
}

export function heatmapFixture(): Heatmap {
  const C = WBC_CLASSES.length;
  const zeros = () => Array.from({ length: C }, () => Array(C).fill(0));
  const errors = zeros();
  const reviewed = zeros();
  const rate = zeros();
  const ly = WBC_CLASSES.indexOf("LY");
  const vly = WBC_CLASSES.indexOf("VLY");
  errors[ly][vly] = 2;
  reviewed[ly][vly] = 3;
  rate[ly][vly] = 2 / 3;
  return { classes: WBC_CLASSES, errors, reviewed, rate };
}
