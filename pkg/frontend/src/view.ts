import { renderHighlights } from "./highlights.js";
import type { Revision } from "./session.js";
import type { Mechanism } from "./types.js";
import { MECHANISMS } from "./types.js";

/** One color per mechanism, used for both highlights and the legend. */
export const MECHANISM_COLORS: Record<Mechanism, string> = {
  emotional_reactions: "#1f6fd0", // blue
  interpretations: "#d64545", // red
  explorations: "#2e9e44", // green
};

export const MECHANISM_LABELS: Record<Mechanism, string> = {
  emotional_reactions: "Emotional reactions",
  interpretations: "Interpretations",
  explorations: "Explorations",
};

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Annotated response text: each highlighted run becomes a <mark> carrying
 * one CSS class per covering mechanism, layered rather than merged. */
export function highlightedResponseHtml(
  revision: Revision,
  warn?: (message: string) => void,
): string {
  const pieces = renderHighlights(revision.response, revision.report.highlights, warn);
  return pieces
    .map((piece) => {
      const text = escapeHtml(piece.text);
      if (piece.tags.length === 0) {
        return text;
      }
      const classes = piece.tags.map((t) => `hl-${t.mechanism}`).join(" ");
      const colors = piece.tags
        .map((t) => MECHANISM_COLORS[t.mechanism])
        .join(", ");
      return `<mark class="${classes}" data-colors="${colors}">${text}</mark>`;
    })
    .join("");
}

export function levelBadgesHtml(revision: Revision): string {
  return MECHANISMS.map((mech) => {
    const level = revision.report.levels[mech];
    const color = MECHANISM_COLORS[mech];
    return `<span class="badge" style="border-color: ${color}">${MECHANISM_LABELS[mech]}: ${level}</span>`;
  }).join("");
}

/** Score line; the delta badge appears only when the server reported one
 * and shows the server value verbatim. */
export function scoreHtml(revision: Revision): string {
  const { total_score, score_delta } = revision.report;
  let html = `<span class="total">Total empathy score: ${total_score} / 6</span>`;
  if (score_delta !== undefined) {
    const sign = score_delta >= 0 ? "+" : "";
    const tone = score_delta > 0 ? "up" : score_delta < 0 ? "down" : "flat";
    html += `<span class="delta delta-${tone}">${sign}${score_delta}</span>`;
  }
  return html;
}

export function feedbackItemsHtml(revision: Revision): string {
  const items = revision.report.items
    .map((item) => `<li>${escapeHtml(item)}</li>`)
    .join("");
  return `<ol class="feedback">${items}</ol>`;
}

export function legendHtml(): string {
  return MECHANISMS.map(
    (mech) =>
      `<span class="legend-item" style="color: ${MECHANISM_COLORS[mech]}">${MECHANISM_LABELS[mech]}</span>`,
  ).join("");
}

/** Full feedback panel for one scored revision. */
export function feedbackViewHtml(
  revision: Revision,
  warn?: (message: string) => void,
): string {
  return [
    `<div class="levels">${levelBadgesHtml(revision)}</div>`,
    `<div class="score">${scoreHtml(revision)}</div>`,
    `<div class="response">${highlightedResponseHtml(revision, warn)}</div>`,
    feedbackItemsHtml(revision),
    `<div class="legend">${legendHtml()}</div>`,
  ].join("\n");
}
