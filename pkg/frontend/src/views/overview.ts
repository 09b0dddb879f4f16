/** Situational Overview: events across all robots as a filterable card grid.
 *
 * The grid renders the API payload's exact set and order; filtering happens
 * server-side through query parameters, never by re-sorting locally.
 */

import { h, VNode } from "../vdom.js";
import type { EventCardDto } from "../types.js";

export interface OverviewHandlers {
  onMarkReviewed: (cardId: string) => void;
  onSave: (cardId: string) => void;
  onShare: (cardId: string) => void;
  onCheckDetails: (cardId: string) => void;
}

function cardTile(card: EventCardDto, handlers: OverviewHandlers): VNode {
  return h(
    "article",
    {
      class: "overview-card",
      "data-testid": `overview-card-${card.card_id}`,
      "data-card-id": card.card_id,
    },
    h("h3", null, card.eoi_name ?? card.label_text),
    h("span", { class: "robot" }, card.robot_id),
    h("span", { class: "time" }, `${Math.floor(card.span.start_ms / 1000)}s`),
    card.priority ? h("span", { class: `priority priority-${card.priority}` }, card.priority) : null,
    h("span", { class: "status-badge", "data-testid": `status-${card.card_id}` }, card.status),
    h(
      "div",
      { class: "actions" },
      h(
        "button",
        {
          class: "mark-reviewed",
          "data-testid": `review-${card.card_id}`,
          onClick: () => handlers.onMarkReviewed(card.card_id),
        },
        "Mark reviewed",
      ),
      h(
        "button",
        { class: "save", "data-testid": `save-${card.card_id}`, onClick: () => handlers.onSave(card.card_id) },
        "Save",
      ),
      h(
        "button",
        { class: "share", "data-testid": `share-${card.card_id}`, onClick: () => handlers.onShare(card.card_id) },
        "Share",
      ),
      h(
        "a",
        {
          class: "check-details",
          "data-testid": `details-${card.card_id}`,
          onClick: () => handlers.onCheckDetails(card.card_id),
        },
        "Check Details",
      ),
    ),
  );
}

export function renderOverview(cards: EventCardDto[], handlers: OverviewHandlers): VNode {
  if (cards.length === 0) {
    return h(
      "section",
      { class: "overview", "data-testid": "overview" },
      h("p", { class: "empty-state", "data-testid": "empty-state" }, "No events match the current filters."),
    );
  }
  return h(
    "section",
    { class: "overview", "data-testid": "overview" },
    h("div", { class: "card-grid" }, ...cards.map((c) => cardTile(c, handlers))),
  );
}

/** Card ids in rendered order, for fidelity checks against the API payload. */
export function renderedCardOrder(view: VNode): string[] {
  const ids: string[] = [];
  const walk = (node: VNode) => {
    const id = node.props["data-card-id"];
    if (typeof id === "string") ids.push(id);
    for (const child of node.children) {
      if (typeof child !== "string") walk(child);
    }
  };
  walk(view);
  return ids;
}
