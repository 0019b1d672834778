/**
 * Pure HTML renderers for the session view.
 *
 * Every function maps service payloads to markup strings with no model
 * computation: numbers are rendered with String(...) exactly as they
 * arrived, so on-screen values are bytewise traceable to payload
 * fields. Bar widths and epoch labels are presentation only.
 */

import type { ConsoleState } from "./state.js";
import type {
  HistoryEntry,
  MarginalsPayload,
  ObservationPayload,
  RecommendResponse,
} from "./types.js";

const MARGINAL_ROWS: Array<[keyof MarginalsPayload, string]> = [
  ["p_ane", "aneurysm"],
  ["p_avm", "AVM"],
  ["p_occ", "occlusion"],
  ["p_stroke_free", "stroke-free"],
];

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function describeObservation(observation: ObservationPayload): string {
  if (observation.kind === "clinical") {
    return `${observation.ct} siriraj=${String(observation.siriraj)}`;
  }
  return (
    `dsa ane=${String(observation.pred_ane)}` +
    ` avm=${String(observation.pred_avm)}` +
    ` occ=${String(observation.pred_occ)}`
  );
}

export function renderMarginals(marginals: MarginalsPayload): string {
  const rows = MARGINAL_ROWS.map(([field, label]) => {
    const value = marginals[field];
    const width = (value * 100).toFixed(2);
    return (
      `<div class="marginal-row" data-field="${field}">` +
      `<span class="label">${label}</span>` +
      `<div class="bar"><div class="fill" style="width:${width}%"></div></div>` +
      `<span class="value">${String(value)}</span>` +
      `</div>`
    );
  });
  return `<section class="marginals">${rows.join("")}</section>`;
}

export function renderTimeline(entries: HistoryEntry[]): string {
  if (entries.length === 0) {
    return `<section class="timeline empty">no actions committed yet</section>`;
  }
  const items = entries.map(
    (entry, epoch) =>
      `<li class="timeline-entry">` +
      `<span class="epoch">${epoch}</span>` +
      `<span class="action">${entry.action}</span>` +
      `<span class="obs">${escapeHtml(describeObservation(entry.observation))}</span>` +
      `</li>`,
  );
  return `<section class="timeline"><ol>${items.join("")}</ol></section>`;
}

export function renderRecommendation(
  recommendation: RecommendResponse | null,
): string {
  if (recommendation === null) {
    return `<section class="recommendation empty">no recommendation requested</section>`;
  }
  const parts: string[] = [
    `<div class="headline">` +
      `<span class="policy">${recommendation.policy}</span>` +
      ` recommends <span class="action">${recommendation.action}</span>` +
      `</div>`,
  ];
  if (recommendation.branch !== null) {
    let branch = `branch=${escapeHtml(recommendation.branch)}`;
    if (recommendation.dominant !== null) {
      branch += ` dominant=${escapeHtml(recommendation.dominant)}`;
    }
    parts.push(`<div class="branch">${branch}</div>`);
  }
  if (recommendation.value_bounds !== null) {
    const rows = Object.entries(recommendation.value_bounds).map(
      ([action, bounds]) => {
        const marker = action === recommendation.action ? " recommended" : "";
        return (
          `<tr class="bounds-row${marker}" data-action="${action}">` +
          `<td>${action}</td>` +
          `<td class="lower">${String(bounds.lower)}</td>` +
          `<td class="upper">${String(bounds.upper)}</td>` +
          `</tr>`
        );
      },
    );
    parts.push(
      `<table class="bounds">` +
        `<thead><tr><th>action</th><th>lower</th><th>upper</th></tr></thead>` +
        `<tbody>${rows.join("")}</tbody></table>`,
    );
  }
  if (recommendation.diagnostics !== null) {
    const line = Object.entries(recommendation.diagnostics)
      .map(([key, value]) => `${key}=${String(value)}`)
      .join(" ");
    parts.push(`<div class="diagnostics">${escapeHtml(line)}</div>`);
  }
  return `<section class="recommendation">${parts.join("")}</section>`;
}

export function renderBanner(message: string | null): string {
  if (message === null) return "";
  return (
    `<div class="banner" role="alert">` +
    `<span class="banner-text">${escapeHtml(message)}</span>` +
    `<button type="button" class="banner-dismiss">dismiss</button>` +
    `</div>`
  );
}

export function renderSession(state: ConsoleState): string {
  if (state.session === null) {
    return (
      renderBanner(state.banner) +
      `<section class="placeholder">open a session to begin</section>`
    );
  }
  const meta =
    `<section class="meta">` +
    `<span class="session-id">session ${state.session.session_id}</span>` +
    `<span class="epoch-counter">epoch ${String(state.session.belief.t)}</span>` +
    `</section>`;
  return (
    renderBanner(state.banner) +
    meta +
    renderMarginals(state.session.marginals) +
    renderTimeline(state.timeline) +
    renderRecommendation(state.recommendation)
  );
}
