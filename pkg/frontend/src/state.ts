/** Central view state: the one playhead every time-linked component follows.
 *
 * Seeking from anywhere (debrief card, timeline, map icon) goes through
 * `seek`, and every registered component mirrors the new position via its
 * subscription, so the player, timeline, and map can never disagree about
 * the current time.
 */

export type Layout = "map-dominant" | "video-dominant" | "debrief-dominant";

export interface ActiveFilters {
  priorities: string[];
  eoiTypes: string[];
  period: "Day" | "Night" | null;
  entity: string | null;
}

export interface ViewState {
  selectedSession: string | null;
  playheadMs: number;
  activeLayout: Layout;
  activeFilters: ActiveFilters;
  selectedCard: string | null;
  hiddenSessions: string[];
}

export type Listener = (state: ViewState) => void;

export class ViewStore {
  private state: ViewState = {
    selectedSession: null,
    playheadMs: 0,
    activeLayout: "map-dominant",
    activeFilters: { priorities: [], eoiTypes: [], period: null, entity: null },
    selectedCard: null,
    hiddenSessions: [],
  };
  private listeners = new Set<Listener>();

  getState(): ViewState {
    return {
      ...this.state,
      activeFilters: { ...this.state.activeFilters },
      hiddenSessions: [...this.state.hiddenSessions],
    };
  }

  subscribe(listener: Listener): () => void {
    this.listeners.add(listener);
    listener(this.getState());
    return () => this.listeners.delete(listener);
  }

  /** Move the shared playhead; optionally retarget the selected session/card. */
  seek(tMs: number, opts: { sessionId?: string; cardId?: string } = {}): void {
    this.state.playheadMs = Math.max(0, Math.round(tMs));
    if (opts.sessionId !== undefined) this.state.selectedSession = opts.sessionId;
    if (opts.cardId !== undefined) this.state.selectedCard = opts.cardId;
    this.notify();
  }

  setLayout(layout: Layout): void {
    this.state.activeLayout = layout;
    this.notify();
  }

  setFilters(filters: Partial<ActiveFilters>): void {
    this.state.activeFilters = { ...this.state.activeFilters, ...filters };
    this.notify();
  }

  toggleSessionVisible(sessionId: string): void {
    const hidden = new Set(this.state.hiddenSessions);
    if (hidden.has(sessionId)) {
      hidden.delete(sessionId);
    } else {
      hidden.add(sessionId);
    }
    this.state.hiddenSessions = [...hidden].sort();
    this.notify();
  }

  isSessionVisible(sessionId: string): boolean {
    return !this.state.hiddenSessions.includes(sessionId);
  }

  private notify(): void {
    const snapshot = this.getState();
    for (const listener of this.listeners) listener(snapshot);
  }
}

/** A component that mirrors the shared playhead (player, timeline, map...).
 * Each instance keeps its own copy, updated only through the store
 * subscription, so tests can detect any component that fell out of sync. */
export class TimeLinkedComponent {
  private currentMs = 0;
  private readonly unsubscribe: () => void;

  constructor(
    store: ViewStore,
    readonly name: string,
  ) {
    this.unsubscribe = store.subscribe((state) => {
      this.currentMs = state.playheadMs;
    });
  }

  playheadMs(): number {
    return this.currentMs;
  }

  dispose(): void {
    this.unsubscribe();
  }
}
