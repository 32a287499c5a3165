/** Wire types mirroring the control API's JSON payloads. */

export interface TraceEvent {
  event_id: string;
  run_id: string;
  sequence: number;
  kind: string;
  timestamp: number;
  turn: number;
  interaction: number;
  parent_id: string | null;
  payload: Record<string, unknown>;
}

export interface RunStateDto {
  run_id: string;
  status: "running" | "finished" | "error";
  agent: string;
  model: string;
  turn_count: number;
  interaction_count: number;
  interrupted: boolean;
  end_reason: string | null;
  spend: number;
  error: string | null;
  pending_approval?: ApprovalDto | null;
}

export interface ApprovalDto {
  request_id: string;
  run_id: string;
  tool_name: string;
  arguments: Record<string, unknown>;
  status: "pending" | "approved" | "denied" | "expired";
  requested_at: number;
}

export type Decision = "approve" | "deny";
