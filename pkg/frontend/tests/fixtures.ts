/** Canned API payloads, shaped exactly like the backend service responses. */

import type {
  EntityMatchDto,
  EventCardDto,
  SessionDto,
  TimelineLaneDto,
  WorkspaceItemDto,
} from "../src/types.js";

export function card(overrides: Partial<EventCardDto> = {}): EventCardDto {
  return {
    card_id: "c-fight",
    session_id: "s1",
    robot_id: "r1",
    label_text: "Brawling",
    eoi_id: 14,
    eoi_name: "Brawling",
    priority: "Urgent",
    description: "Two people exchanging blows.",
    rationale: "Tracks 4 and 7 collide repeatedly.",
    confidence: "High",
    span: { start_ms: 50_000, end_ms: 60_000 },
    keyframe: { frame_index: 52, t_ms: 52_000 },
    pose: { lat: 38.83, lon: -77.31 },
    status: "New",
    created_at: "2025-06-01T09:00:50Z",
    icon_category: "Person",
    ...overrides,
  };
}

export const CARDS: EventCardDto[] = [
  card(),
  card({
    card_id: "c-arson",
    eoi_id: 1,
    eoi_name: "Arson",
    label_text: "Arson",
    priority: "Emergency",
    confidence: "Medium",
    span: { start_ms: 80_000, end_ms: 95_000 },
    keyframe: { frame_index: 81, t_ms: 81_000 },
    icon_category: "Other",
  }),
  card({
    card_id: "c-parking",
    session_id: "s2",
    robot_id: "r2",
    eoi_id: 27,
    eoi_name: "Illegal Parking",
    label_text: "Illegal Parking",
    priority: "Moderate",
    confidence: "Low",
    span: { start_ms: 12_000, end_ms: 20_000 },
    keyframe: { frame_index: 13, t_ms: 13_000 },
    icon_category: "Vehicle",
  }),
  card({
    card_id: "c-odd",
    eoi_id: null,
    eoi_name: null,
    label_text: "synchronized umbrella dance",
    priority: null,
    confidence: "Low",
    span: { start_ms: 99_000, end_ms: 101_000 },
    keyframe: { frame_index: 99, t_ms: 99_000 },
    icon_category: "Other",
  }),
];

export const SESSIONS: SessionDto[] = [
  {
    session_id: "s1",
    robot_id: "r1",
    robot_label: "north quad",
    period: "Day",
    video_uri: "videos/s1.mp4",
    duration_ms: 120_000,
    start_wall_clock: "2025-06-01T09:00:00Z",
    gps_trace: [
      { t_ms: 0, lat: 38.83, lon: -77.31 },
      { t_ms: 60_000, lat: 38.835, lon: -77.305 },
      { t_ms: 120_000, lat: 38.84, lon: -77.3 },
    ],
  },
  {
    session_id: "s2",
    robot_id: "r2",
    robot_label: "library loop",
    period: "Night",
    video_uri: "videos/s2.mp4",
    duration_ms: 120_000,
    start_wall_clock: "2025-06-01T21:00:00Z",
    gps_trace: [
      { t_ms: 0, lat: 38.82, lon: -77.32 },
      { t_ms: 120_000, lat: 38.825, lon: -77.315 },
    ],
  },
];

export const LANES: TimelineLaneDto[] = [
  {
    session_id: "s1",
    entries: [
      {
        card_id: "c-fight",
        span: { start_ms: 50_000, end_ms: 60_000 },
        eoi: "Brawling",
        unmatched: false,
        priority: "Urgent",
        color: "#f57c00",
      },
      {
        card_id: "c-arson",
        span: { start_ms: 80_000, end_ms: 95_000 },
        eoi: "Arson",
        unmatched: false,
        priority: "Emergency",
        color: "#d32f2f",
      },
    ],
  },
  {
    session_id: "s2",
    entries: [
      {
        card_id: "c-parking",
        span: { start_ms: 12_000, end_ms: 20_000 },
        eoi: "Illegal Parking",
        unmatched: false,
        priority: "Moderate",
        color: "#fbc02d",
      },
    ],
  },
];

export const MATCHES: EntityMatchDto[] = [
  {
    entity_id: "s1:p3",
    entity_class: "Person",
    score: 1.0,
    matched_attributes: ["pants_color", "shirt_color"],
    attributes: { shirt_color: "red", pants_color: "black", headwear: "none" },
    representative_crop: "crops/p3.jpg",
    first_seen: { session_id: "s1", t_ms: 41_000 },
    card_links: ["c-fight"],
  },
  {
    entity_id: "s1:p9",
    entity_class: "Person",
    score: 0.5,
    matched_attributes: ["shirt_color"],
    attributes: { shirt_color: "red", pants_color: "denim", headwear: "cap" },
    representative_crop: "crops/p9.jpg",
    first_seen: { session_id: "s1", t_ms: 73_000 },
    card_links: [],
  },
];

export const WORKSPACE_ITEMS: WorkspaceItemDto[] = [
  {
    item_id: "w1",
    card_id: "c-fight",
    owner: "ana",
    scope: "Personal",
    note: "verify both participants",
    status: "Saved",
    assignee: null,
    case_number: null,
    history: [{ actor: "ana", action: "save", at: "2025-06-01T10:00:00Z" }],
  },
  {
    item_id: "w2",
    card_id: "c-arson",
    owner: "ana",
    scope: "Team",
    note: "share with night shift",
    status: "Shared",
    assignee: "ben",
    case_number: "2025-0611",
    history: [
      { actor: "ana", action: "save", at: "2025-06-01T10:05:00Z" },
      { actor: "ana", action: "status:Shared", at: "2025-06-01T10:06:00Z" },
    ],
  },
];
