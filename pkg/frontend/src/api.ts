/** Typed client for the backend service; the console's only data source. */

import type {
  EntityMatchDto,
  EventCardDto,
  Page,
  SearchRequest,
  SessionDto,
  TimelineLaneDto,
  WorkspaceItemDto,
} from "./types.js";

export interface EventQuery {
  priority?: string[];
  session?: string[];
  eoi?: string[];
  status?: string[];
  period?: string;
  unclassified?: boolean;
  cursor?: string;
  limit?: number;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string | null = null,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private headers(json = false): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const body = await response.json();
    if (!response.ok) {
      const message = body?.error?.message ?? `HTTP ${response.status}`;
      throw new Error(`${path}: ${message}`);
    }
    return body as T;
  }

  sessions(): Promise<Page<SessionDto>> {
    return this.request("/sessions", { headers: this.headers() });
  }

  events(query: EventQuery = {}): Promise<Page<EventCardDto>> {
    const params = new URLSearchParams();
    for (const key of ["priority", "session", "eoi", "status"] as const) {
      for (const value of query[key] ?? []) params.append(key, value);
    }
    if (query.period) params.set("period", query.period);
    if (query.unclassified) params.set("unclassified", "true");
    if (query.cursor) params.set("cursor", query.cursor);
    if (query.limit) params.set("limit", String(query.limit));
    const suffix = params.toString() ? `?${params}` : "";
    return this.request(`/events${suffix}`, { headers: this.headers() });
  }

  eventDetail(cardId: string): Promise<EventCardDto> {
    return this.request(`/events/${encodeURIComponent(cardId)}`, { headers: this.headers() });
  }

  timeline(sessionIds: string[] = []): Promise<{ lanes: TimelineLaneDto[] }> {
    const params = new URLSearchParams();
    for (const id of sessionIds) params.append("session", id);
    const suffix = params.toString() ? `?${params}` : "";
    return this.request(`/timeline${suffix}`, { headers: this.headers() });
  }

  map(bbox: [number, number, number, number]): Promise<Page<EventCardDto>> {
    return this.request(`/map?bbox=${bbox.join(",")}`, { headers: this.headers() });
  }

  search(body: SearchRequest): Promise<{ matches: EntityMatchDto[] }> {
    return this.request("/search", {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(body),
    });
  }

  similar(entityId: string): Promise<{ matches: EntityMatchDto[] }> {
    return this.request(`/entities/${encodeURIComponent(entityId)}/similar`, {
      headers: this.headers(),
    });
  }

  workspace(): Promise<Page<WorkspaceItemDto>> {
    return this.request("/workspace", { headers: this.headers() });
  }

  saveToWorkspace(cardId: string, scope: "Personal" | "Team", note = ""): Promise<WorkspaceItemDto> {
    return this.request("/workspace/items", {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify({ card_id: cardId, scope, note }),
    });
  }

  updateWorkspaceItem(
    itemId: string,
    patch: { status?: string; note?: string; assignee?: string },
  ): Promise<WorkspaceItemDto> {
    return this.request(`/workspace/items/${encodeURIComponent(itemId)}`, {
      method: "PATCH",
      headers: this.headers(true),
      body: JSON.stringify(patch),
    });
  }
}
