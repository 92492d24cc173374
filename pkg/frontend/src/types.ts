/** v1 service API payload types consumed by the console. The console
 * derives everything from the event stream; it holds no planning logic. */

export type Vec3 = [number, number, number];

export interface SessionHandle {
  schema: "v1";
  id: string;
  status: "idle" | "running" | "paused" | "done" | "failed";
  speed: number;
}

export interface TraceEvent {
  t: number;
  event: string;
  [key: string]: unknown;
}

export interface StreamMessage {
  id: number;
  event: string;
  data: TraceEvent;
}

export interface WorldSnapshot {
  objects: Record<string, Vec3>;
  regions: Record<string, Vec3>;
  trays: Record<string, { dock: string; docks: Record<string, Vec3> }>;
  held: string | null;
}

export interface BTNodeJson {
  id: number;
  kind: string;
  name: string;
  status: "success" | "failure" | "running" | "invalid";
  children: BTNodeJson[];
  [key: string]: unknown;
}

export interface SessionMetrics {
  success: boolean;
  reason: string;
  replan_count: number;
  recovery_count: number;
  bt_change_count: number;
  completion_time_s: number;
  init_plan_time_s: number;
  total_replan_time_s: number;
  [key: string]: unknown;
}

export type InterventionKind =
  | "relocate_object"
  | "add_object"
  | "remove_object"
  | "add_tray"
  | "remove_region";

export interface InterventionPayload {
  schema: "v1";
  kind: InterventionKind;
  [key: string]: unknown;
}

export interface InterventionAck {
  schema: "v1";
  accepted: boolean;
  applies_at: number;
}
