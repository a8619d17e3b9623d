// Wire shapes from the session service, plus the narrow element surface the
// view renders against (kept small so tests can supply plain objects).

export const AGENT_MESSAGE = "agent_message";
export const AGENT_QUESTION = "agent_question";
export const SESSION_TERMINATED = "session_terminated";

export interface StreamEvent {
  seq: number;
  kind: string;
  text: string;
  meta: Record<string, unknown>;
}

export interface SopListing {
  name: string;
  actions: number;
  text: string;
}

export interface SessionInfo {
  session_id: string;
  sop: string;
  status: string;
  reason: string | null;
  awaiting_input: boolean;
  event_count: number;
  state_trace?: Array<Record<string, unknown>>;
}

export type Direction = "agent" | "user";

export interface UiMessage {
  direction: Direction;
  kind: string;
  text: string;
  // stream events keep their integer seq; optimistic user sends take the
  // last seen seq plus 0.5 so they sort between the question and its answer
  seq: number;
  pending: boolean;
}

export interface ElementLike {
  className: string;
  textContent: string | null;
  // deliberately loose child type: real DOM nodes and test fakes both pass
  appendChild(child: any): unknown;
  remove?(): void;
}

export interface InputLike {
  value: string;
  disabled: boolean;
}

export interface DocLike {
  createElement(tag: string): ElementLike;
}
