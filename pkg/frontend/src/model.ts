/**
 * The view-model and its pure update functions.  The rendered page is a
 * function of exactly this record plus the text sitting in the input
 * box; every transition goes through the functions below, which makes
 * the replay/reconnect behaviour trivial to test.
 */

import {
  CommandOutcome,
  Snapshot,
  Span,
  SUPPORTED_SCHEMA,
} from "./api.js";

export type ConnectionStatus = "connecting" | "live" | "lost";

export interface HistoryEntry {
  text: string;
  ok: boolean;
  message: string;
  goals: string | null;
  span: Span | null;
  /** true when the request never reached the engine (network failure) */
  transportError: boolean;
}

export interface ViewModel {
  snapshot: Snapshot | null;
  history: HistoryEntry[];
  status: ConnectionStatus;
  input: string;
  schemaMismatch: boolean;
  replaying: string | null;
}

export function initialModel(): ViewModel {
  return {
    snapshot: null,
    history: [],
    status: "connecting",
    input: "",
    schemaMismatch: false,
    replaying: null,
  };
}

export function withSnapshot(model: ViewModel, snapshot: Snapshot): ViewModel {
  return {
    ...model,
    snapshot,
    schemaMismatch: snapshot.schema !== SUPPORTED_SCHEMA,
  };
}

/** Record a round-trip that reached the engine; successful commands
 * clear the input, failures keep it for editing. */
export function recordOutcome(
  model: ViewModel,
  text: string,
  outcome: CommandOutcome,
): ViewModel {
  const entry: HistoryEntry = {
    text,
    ok: outcome.ok,
    message: outcome.ok
      ? (outcome.result?.message ?? "")
      : (outcome.error?.message ?? "command failed"),
    goals: outcome.result?.goals ?? null,
    span: outcome.error?.span ?? null,
    transportError: false,
  };
  return {
    ...withSnapshot(model, outcome.snapshot),
    history: [...model.history, entry],
    input: outcome.ok ? "" : text,
  };
}

/** Record a submission that never reached the engine.  The input stays
 * untouched so the user can retry verbatim. */
export function recordTransportFailure(
  model: ViewModel,
  text: string,
  reason: string,
): ViewModel {
  const entry: HistoryEntry = {
    text,
    ok: false,
    message: reason,
    goals: null,
    span: null,
    transportError: true,
  };
  return { ...model, history: [...model.history, entry], input: text };
}

export function setStatus(model: ViewModel, status: ConnectionStatus): ViewModel {
  return { ...model, status };
}

export function setInput(model: ViewModel, input: string): ViewModel {
  return { ...model, input };
}

export function setReplaying(model: ViewModel, name: string | null): ViewModel {
  return { ...model, replaying: name };
}

export function goalCount(model: ViewModel): number {
  return model.snapshot?.session?.goals.length ?? 0;
}

/** Index (1-based) of the goal the engine currently points at, or null.
 * Snapshots always mark exactly one goal current while any are open. */
export function currentGoalIndex(model: ViewModel): number | null {
  const goals = model.snapshot?.session?.goals ?? [];
  for (let i = 0; i < goals.length; i++) {
    if (goals[i].current) return i + 1;
  }
  return null;
}

/** Split a command text around an error span, for inline highlighting.
 * Spans index into the submitted text; out-of-range spans clamp. */
export function splitAtSpan(
  text: string,
  span: Span | null,
): [string, string, string] {
  if (span === null) return [text, "", ""];
  const start = Math.max(0, Math.min(span.start, text.length));
  const end = Math.max(start, Math.min(span.end, text.length));
  return [text.slice(0, start), text.slice(start, end), text.slice(end)];
}
