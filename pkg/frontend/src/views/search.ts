/** Descriptor search: include/exclude attribute builder plus ranked results.
 *
 * Results render in the API's order with crop, matched attributes, and score.
 * A query with no include attributes is blocked client-side before it can
 * reach the service (it would be unconstrained or vacuously empty).
 */

import { h, VNode } from "../vdom.js";
import type { ViewStore } from "../state.js";
import type { EntityMatchDto, SearchRequest } from "../types.js";

export interface SearchFormState {
  entityClass: "Person" | "Vehicle";
  include: Record<string, string[]>;
  exclude: Record<string, string[]>;
}

export function canSubmit(form: SearchFormState): boolean {
  return Object.values(form.include).some((values) => values.length > 0);
}

export function toRequest(form: SearchFormState): SearchRequest {
  if (!canSubmit(form)) {
    throw new Error("search needs at least one include attribute");
  }
  return {
    entity_class: form.entityClass,
    include: form.include,
    exclude: form.exclude,
  };
}

function resultCard(match: EntityMatchDto, store: ViewStore): VNode {
  return h(
    "article",
    {
      class: "search-result",
      "data-testid": `result-${match.entity_id}`,
      "data-entity-id": match.entity_id,
      onClick: () =>
        store.seek(match.first_seen.t_ms, { sessionId: match.first_seen.session_id }),
    },
    h("img", { class: "crop", src: match.representative_crop, alt: match.entity_id }),
    h("span", { class: "score", "data-testid": `score-${match.entity_id}` }, match.score.toFixed(2)),
    h(
      "ul",
      { class: "matched-attributes" },
      ...match.matched_attributes.map((attr) =>
        h("li", { class: "matched-attribute" }, `${attr}: ${match.attributes[attr]}`),
      ),
    ),
    h("span", { class: "evidence-count" }, `${match.card_links.length} linked events`),
  );
}

export function renderSearchResults(matches: EntityMatchDto[], store: ViewStore): VNode {
  if (matches.length === 0) {
    return h(
      "section",
      { class: "search-results", "data-testid": "search-results" },
      h("p", { class: "empty-state", "data-testid": "empty-state" }, "No entities match."),
    );
  }
  return h(
    "section",
    { class: "search-results", "data-testid": "search-results" },
    ...matches.map((m) => resultCard(m, store)),
  );
}

export function renderSearchForm(form: SearchFormState, onSubmit: () => void): VNode {
  return h(
    "form",
    { class: "search-form", "data-testid": "search-form" },
    h(
      "button",
      {
        class: "submit",
        "data-testid": "search-submit",
        disabled: !canSubmit(form),
        onClick: () => {
          if (canSubmit(form)) onSubmit();
        },
      },
      "Search",
    ),
  );
}

/** Entity ids in rendered order, for fidelity checks against the payload. */
export function renderedResultOrder(view: VNode): string[] {
  const ids: string[] = [];
  const walk = (node: VNode) => {
    const id = node.props["data-entity-id"];
    if (typeof id === "string") ids.push(id);
    for (const child of node.children) {
      if (typeof child !== "string") walk(child);
    }
  };
  walk(view);
  return ids;
}
