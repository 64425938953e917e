/** Browser bootstrap: wires the session machine and renderers to the DOM. */

import { ApiClient } from "./api.js";
import { ReviewSession } from "./session.js";
import {
  renderCaseCard, renderHeatmap, renderProgress, renderQueueStatus,
  renderSummaryTables,
} from "./render.js";
import type { VerdictCategory } from "./types.js";

const IGNORED_TAGS = new Set(["INPUT", "TEXTAREA", "SELECT"]);

const HANDLED_KEYS = new Set([
  "1", "2", "3", "4", "n", "p",
  "ArrowRight", "ArrowLeft", "ArrowUp", "ArrowDown", "Enter", "Escape",
]);

async function refreshDashboard(api: ApiClient): Promise<void> {
  const summaryBox = document.getElementById("summary");
  const heatmapBox = document.getElementById("heatmap");
  const progressBox = document.getElementById("progress");
  if (summaryBox) {
    summaryBox.innerHTML = renderSummaryTables(await api.summary());
  }
  if (heatmapBox) {
    heatmapBox.innerHTML = renderHeatmap(await api.heatmap());
  }
  if (progressBox) {
    progressBox.innerHTML = renderProgress(await api.progress());
  }
}

function repaint(session: ReviewSession): void {
  const queueBox = document.getElementById("queue");
  const caseBox = document.getElementById("case");
  if (queueBox) {
    queueBox.innerHTML = renderQueueStatus(
      session.queue.length, session.complete, session.lastError);
  }
  const item = session.current();
  if (caseBox) {
    caseBox.innerHTML = item
      ? renderCaseCard(item, session.classes, session.draft,
                       session.showProbabilities)
      : "";
  }
}

async function start(): Promise<void> {
  const api = new ApiClient("");
  const params = new URLSearchParams(window.location.search);
  const reviewer = params.get("reviewer") ?? "anonymous";
  const session = new ReviewSession(api, reviewer);
  session.showProbabilities = params.get("probs") !== "hide";

  await session.load();
  repaint(session);
  await refreshDashboard(api);

  window.addEventListener("keydown", (event) => {
    const target = event.target as HTMLElement | null;
    if (target && (IGNORED_TAGS.has(target.tagName) || target.isContentEditable)) {
      return;
    }
    if (!HANDLED_KEYS.has(event.key)) {
      return;
    }
    // preventDefault must run synchronously, before the async handler settles
    event.preventDefault();
    void session.handleKey(event.key).then(async (consumed) => {
      if (consumed) {
        repaint(session);
        await refreshDashboard(api);
      }
    });
  });

  document.getElementById("case")?.addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest("button[data-category]");
    if (!button) {
      return;
    }
    const category = button.getAttribute("data-category") as VerdictCategory;
    void (category === "label_error"
      ? session.handleKey("1")
      : session.submit(category)
    ).then(async () => {
      repaint(session);
      await refreshDashboard(api);
    });
  });

  const reloadButton = document.getElementById("reload");
  reloadButton?.addEventListener("click", () => {
    void session.load().then(() => repaint(session));
  });
}

void start();
