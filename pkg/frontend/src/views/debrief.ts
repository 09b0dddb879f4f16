/** Video Debrief: one video's detected events as chapter-like chunks.
 *
 * Chapters are grouped into a prioritized section and an "unclassified" bin
 * for events the taxonomy did not recognize. Clicking a chapter's keyframe
 * seeks every time-linked component to the event's start.
 */

import { h, VNode } from "../vdom.js";
import type { ViewStore } from "../state.js";
import type { EventCardDto } from "../types.js";

function chapter(card: EventCardDto, store: ViewStore): VNode {
  const title = card.eoi_name ?? card.label_text;
  return h(
    "article",
    {
      class: card.eoi_name ? "chapter" : "chapter unclassified",
      "data-testid": `chapter-${card.card_id}`,
      "data-card-id": card.card_id,
    },
    h(
      "img",
      {
        class: "keyframe",
        "data-testid": `keyframe-${card.card_id}`,
        alt: `keyframe of ${title}`,
        "data-frame-index": card.keyframe.frame_index,
        onClick: () =>
          store.seek(card.span.start_ms, {
            sessionId: card.session_id,
            cardId: card.card_id,
          }),
      },
    ),
    h("h3", { class: "chapter-title" }, title),
    card.priority ? h("span", { class: `priority priority-${card.priority}` }, card.priority) : null,
    // Model confidence is shown verbatim, never rescaled or reworded.
    h("span", { class: "confidence-badge", "data-testid": `confidence-${card.card_id}` }, card.confidence),
    h("p", { class: "description" }, card.description),
    h("p", { class: "rationale" }, card.rationale),
  );
}

export function renderDebrief(sessionId: string, cards: EventCardDto[], store: ViewStore): VNode {
  const inSession = cards.filter((c) => c.session_id === sessionId);
  const classified = inSession.filter((c) => c.eoi_name !== null);
  const unclassified = inSession.filter((c) => c.eoi_name === null);
  return h(
    "section",
    { class: "debrief", "data-testid": "debrief" },
    h("h2", null, `Debrief: ${sessionId}`),
    h("div", { class: "chapters" }, ...classified.map((c) => chapter(c, store))),
    unclassified.length
      ? h(
          "div",
          { class: "unclassified-bin", "data-testid": "unclassified-bin" },
          h("h3", null, "Unclassified"),
          ...unclassified.map((c) => chapter(c, store)),
        )
      : null,
  );
}
