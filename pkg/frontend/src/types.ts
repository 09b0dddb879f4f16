/** Payload shapes of the backend service API. The console renders these
 * verbatim; it never derives truths of its own that could drift from the
 * store. */

export type Priority = "Emergency" | "Urgent" | "Moderate" | "Advisory";
export type Confidence = "High" | "Medium" | "Low";
export type CardStatus = "New" | "Reviewed" | "Saved" | "Shared";
export type IconCategory = "Person" | "Vehicle" | "Other";

export interface SpanDto {
  start_ms: number;
  end_ms: number;
}

export interface EventCardDto {
  card_id: string;
  session_id: string;
  robot_id: string;
  label_text: string;
  eoi_id: number | null;
  eoi_name: string | null;
  priority: Priority | null;
  description: string;
  rationale: string;
  confidence: Confidence;
  span: SpanDto;
  keyframe: { frame_index: number; t_ms: number };
  pose: { lat: number; lon: number };
  status: CardStatus;
  created_at: string | null;
  icon_category?: IconCategory;
}

export interface GpsFixDto {
  t_ms: number;
  lat: number;
  lon: number;
}

export interface SessionDto {
  session_id: string;
  robot_id: string;
  robot_label: string;
  period: "Day" | "Night";
  video_uri: string;
  duration_ms: number;
  start_wall_clock: string;
  gps_trace: GpsFixDto[];
}

export interface TimelineEntryDto {
  card_id: string;
  span: SpanDto;
  eoi: string;
  unmatched: boolean;
  priority: Priority | null;
  color: string;
}

export interface TimelineLaneDto {
  session_id: string;
  entries: TimelineEntryDto[];
}

export interface EntityMatchDto {
  entity_id: string;
  entity_class: "Person" | "Vehicle";
  score: number;
  matched_attributes: string[];
  attributes: Record<string, string>;
  representative_crop: string;
  first_seen: { session_id: string; t_ms: number };
  card_links: string[];
}

export interface WorkspaceItemDto {
  item_id: string;
  card_id: string;
  owner: string;
  scope: "Personal" | "Team";
  note: string;
  status: CardStatus;
  assignee: string | null;
  case_number: string | null;
  history: { actor: string; action: string; at: string }[];
}

export interface Page<T> {
  items: T[];
  next_cursor: string | null;
  total: number;
}

export interface SearchRequest {
  entity_class: "Person" | "Vehicle";
  include: Record<string, string[]>;
  exclude: Record<string, string[]>;
  sessions?: string[];
}
