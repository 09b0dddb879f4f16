/** Workspace: personal and team tabs over saved event cards.
 *
 * Every item shows its status chip and note; edits go straight to the API,
 * which appends to the server-side history (the console never edits history
 * itself).
 */

import { h, VNode } from "../vdom.js";
import type { WorkspaceItemDto } from "../types.js";

export interface WorkspaceHandlers {
  onSetStatus: (itemId: string, status: string) => void;
  onEditNote: (itemId: string, note: string) => void;
  onOpenCard: (cardId: string) => void;
}

function itemCard(item: WorkspaceItemDto, handlers: WorkspaceHandlers): VNode {
  return h(
    "article",
    { class: "workspace-item", "data-testid": `item-${item.item_id}`, "data-item-id": item.item_id },
    h("span", { class: `status-chip status-${item.status}` }, item.status),
    h("span", { class: "owner" }, item.owner),
    h("p", { class: "note" }, item.note),
    h(
      "a",
      { class: "open-card", onClick: () => handlers.onOpenCard(item.card_id) },
      "Open evidence",
    ),
    h(
      "button",
      {
        class: "mark-reviewed",
        "data-testid": `ws-review-${item.item_id}`,
        onClick: () => handlers.onSetStatus(item.item_id, "Reviewed"),
      },
      "Mark reviewed",
    ),
  );
}

export function renderWorkspace(
  items: WorkspaceItemDto[],
  activeTab: "Personal" | "Team",
  currentUser: string,
  handlers: WorkspaceHandlers,
): VNode {
  const visible = items.filter((item) =>
    activeTab === "Personal" ? item.scope === "Personal" && item.owner === currentUser : item.scope === "Team",
  );
  return h(
    "section",
    { class: "workspace", "data-testid": "workspace" },
    h(
      "nav",
      { class: "tabs" },
      h("button", { class: activeTab === "Personal" ? "tab active" : "tab", "data-testid": "tab-personal" }, "Personal"),
      h("button", { class: activeTab === "Team" ? "tab active" : "tab", "data-testid": "tab-team" }, "Team"),
    ),
    h("div", { class: "items" }, ...visible.map((item) => itemCard(item, handlers))),
  );
}
