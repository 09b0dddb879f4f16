/** Map + timeline: robot trajectories with event icons, a global timeline,
 * and one lane per robot, all driven by the shared playhead.
 *
 * Hiding a session hides its lane, trajectory, and wall tile together, so the
 * three surfaces always agree on what is visible.
 */

import { h, VNode } from "../vdom.js";
import type { ViewStore } from "../state.js";
import type { EventCardDto, SessionDto, TimelineLaneDto } from "../types.js";

function nearestFixTime(session: SessionDto, tMs: number): number {
  let best = 0;
  let bestDistance = Number.POSITIVE_INFINITY;
  for (const fix of session.gps_trace) {
    const distance = Math.abs(fix.t_ms - tMs);
    if (distance < bestDistance) {
      bestDistance = distance;
      best = fix.t_ms;
    }
  }
  return best;
}

function mapIcon(card: EventCardDto, store: ViewStore, palette: Record<string, string>): VNode {
  const priorityKey = card.priority ?? "Unclassified";
  return h("span", {
    class: `map-icon icon-${(card.icon_category ?? "Other").toLowerCase()}`,
    "data-testid": `map-icon-${card.card_id}`,
    "data-icon": card.icon_category ?? "Other",
    "data-color": palette[priorityKey],
    title: card.eoi_name ?? card.label_text,
    onClick: () =>
      store.seek(card.span.start_ms, { sessionId: card.session_id, cardId: card.card_id }),
  });
}

function trajectory(session: SessionDto, store: ViewStore): VNode {
  return h(
    "div",
    { class: "trajectory", "data-testid": `trajectory-${session.session_id}` },
    ...session.gps_trace.map((fix) =>
      h("span", {
        class: "trajectory-point",
        "data-t-ms": fix.t_ms,
        onClick: () =>
          store.seek(nearestFixTime(session, fix.t_ms), { sessionId: session.session_id }),
      }),
    ),
  );
}

function lane(laneDto: TimelineLaneDto, store: ViewStore): VNode {
  return h(
    "div",
    { class: "timeline-lane", "data-testid": `lane-${laneDto.session_id}` },
    ...laneDto.entries.map((entry) =>
      h("span", {
        class: "lane-entry",
        "data-testid": `lane-entry-${entry.card_id}`,
        "data-color": entry.color,
        title: entry.eoi,
        onClick: () => store.seek(entry.span.start_ms, { sessionId: laneDto.session_id, cardId: entry.card_id }),
      }),
    ),
  );
}

export interface MapTimelineData {
  sessions: SessionDto[];
  lanes: TimelineLaneDto[];
  mapCards: EventCardDto[];
  palette: Record<string, string>;
}

export function renderMapTimeline(data: MapTimelineData, store: ViewStore): VNode {
  const visible = (sessionId: string) => store.isSessionVisible(sessionId);
  const sessions = data.sessions.filter((s) => visible(s.session_id));
  const lanes = data.lanes.filter((l) => visible(l.session_id));
  const cards = data.mapCards.filter((c) => visible(c.session_id));
  return h(
    "section",
    { class: "map-timeline", "data-testid": "map-timeline" },
    h(
      "div",
      { class: "session-toggles" },
      ...data.sessions.map((s) =>
        h(
          "label",
          { class: "session-toggle", "data-testid": `toggle-${s.session_id}` },
          h("input", {
            type: "checkbox",
            checked: visible(s.session_id),
            onClick: () => store.toggleSessionVisible(s.session_id),
          }),
          s.robot_label,
        ),
      ),
    ),
    h(
      "div",
      { class: "video-wall" },
      ...sessions.map((s) =>
        h("video", {
          class: "wall-tile",
          "data-testid": `wall-${s.session_id}`,
          src: s.video_uri,
        }),
      ),
    ),
    h(
      "div",
      { class: "map" },
      ...sessions.map((s) => trajectory(s, store)),
      ...cards.map((c) => mapIcon(c, store, data.palette)),
    ),
    h(
      "div",
      { class: "global-timeline", "data-testid": "global-timeline" },
      h("div", { class: "playhead", "data-t-ms": store.getState().playheadMs }),
      ...lanes.map((l) => lane(l, store)),
    ),
  );
}
