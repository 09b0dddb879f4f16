/** Console composition root: wires the API client, the shared view store,
 * and the five views into the page. */

import { ApiClient } from "./api.js";
import { TimeLinkedComponent, ViewStore } from "./state.js";
import { mount, VNode } from "./vdom.js";
import { renderDebrief } from "./views/debrief.js";
import { renderOverview } from "./views/overview.js";
import { renderMapTimeline } from "./views/mapTimeline.js";
import { renderSearchForm, renderSearchResults, SearchFormState, toRequest } from "./views/search.js";
import { renderWorkspace } from "./views/workspace.js";
import type { EventCardDto, SessionDto, TimelineLaneDto } from "./types.js";

export interface ConsoleConfig {
  apiUrl: string;
  token: string | null;
  currentUser: string;
}

const DEFAULT_PALETTE: Record<string, string> = {
  Emergency: "#d32f2f",
  Urgent: "#f57c00",
  Moderate: "#fbc02d",
  Advisory: "#1976d2",
  Unclassified: "#9e9e9e",
};

export class ConsoleApp {
  readonly store = new ViewStore();
  readonly api: ApiClient;
  readonly player: TimeLinkedComponent;
  readonly timeline: TimeLinkedComponent;
  readonly map: TimeLinkedComponent;

  private sessions: SessionDto[] = [];
  private cards: EventCardDto[] = [];
  private lanes: TimelineLaneDto[] = [];

  constructor(private readonly config: ConsoleConfig) {
    this.api = new ApiClient(config.apiUrl, config.token);
    this.player = new TimeLinkedComponent(this.store, "player");
    this.timeline = new TimeLinkedComponent(this.store, "timeline");
    this.map = new TimeLinkedComponent(this.store, "map");
  }

  async refresh(): Promise<void> {
    const [sessions, events, timeline] = await Promise.all([
      this.api.sessions(),
      this.api.events(),
      this.api.timeline(),
    ]);
    this.sessions = sessions.items;
    this.cards = events.items;
    this.lanes = timeline.lanes;
  }

  debriefView(sessionId: string): VNode {
    return renderDebrief(sessionId, this.cards, this.store);
  }

  overviewView(): VNode {
    return renderOverview(this.cards, {
      onMarkReviewed: (cardId) => {
        void this.saveAndStatus(cardId, "Reviewed");
      },
      onSave: (cardId) => {
        void this.api.saveToWorkspace(cardId, "Personal");
      },
      onShare: (cardId) => {
        void this.api.saveToWorkspace(cardId, "Team");
      },
      onCheckDetails: (cardId) => {
        const card = this.cards.find((c) => c.card_id === cardId);
        if (card) {
          this.store.seek(card.span.start_ms, { sessionId: card.session_id, cardId });
        }
      },
    });
  }

  mapTimelineView(): VNode {
    return renderMapTimeline(
      {
        sessions: this.sessions,
        lanes: this.lanes,
        mapCards: this.cards,
        palette: DEFAULT_PALETTE,
      },
      this.store,
    );
  }

  searchView(form: SearchFormState, onResults: (view: VNode) => void): VNode {
    return renderSearchForm(form, () => {
      void this.api
        .search(toRequest(form))
        .then((body) => onResults(renderSearchResults(body.matches, this.store)));
    });
  }

  async workspaceView(activeTab: "Personal" | "Team"): Promise<VNode> {
    const page = await this.api.workspace();
    return renderWorkspace(page.items, activeTab, this.config.currentUser, {
      onSetStatus: (itemId, status) => {
        void this.api.updateWorkspaceItem(itemId, { status });
      },
      onEditNote: (itemId, note) => {
        void this.api.updateWorkspaceItem(itemId, { note });
      },
      onOpenCard: (cardId) => {
        const card = this.cards.find((c) => c.card_id === cardId);
        if (card) this.store.seek(card.span.start_ms, { sessionId: card.session_id, cardId });
      },
    });
  }

  private async saveAndStatus(cardId: string, status: string): Promise<void> {
    const item = await this.api.saveToWorkspace(cardId, "Personal");
    await this.api.updateWorkspaceItem(item.item_id, { status });
  }

  async mountInto(root: HTMLElement): Promise<void> {
    await this.refresh();
    root.replaceChildren(
      mount(this.overviewView()),
      mount(this.mapTimelineView()),
      this.sessions[0] ? mount(this.debriefView(this.sessions[0].session_id)) : document.createElement("div"),
    );
  }
}
