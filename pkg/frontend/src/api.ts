/**
 * Typed client for the engine service.  Three endpoints only:
 *
 *   GET  /state    -> Snapshot
 *   POST /command  -> CommandOutcome (one command per request)
 *   WS   /events   -> {version} on connect + one per successful mutation
 *
 * Snapshots are the single source of truth; nothing in the UI mutates
 * state locally.
 */

export const SUPPORTED_SCHEMA = 1;

export interface Span {
  start: number;
  end: number;
}

export interface GoalView {
  id: number;
  pre: string;
  post: string;
  text: string;
  current: boolean;
}

export interface TreeNode {
  id: number;
  rule: string | null;
  pre: string;
  post: string;
  children: TreeNode[];
  goal_id?: number;
}

export interface SessionView {
  name: string;
  completed: boolean;
  ambient: string[];
  goals: GoalView[];
  goals_text: string;
  tree: TreeNode;
}

export interface Diagnostics {
  ok: boolean;
  kind: string;
  message: string;
  span: Span | null;
}

export interface Snapshot {
  schema: number;
  version: number;
  env: string[];
  session: SessionView | null;
  diagnostics: Diagnostics | null;
}

export interface CommandError {
  message: string;
  span: Span | null;
}

export interface CommandResult {
  kind: string;
  message: string;
  goals: string | null;
  value: boolean | string | null;
  mutated: boolean;
}

export interface CommandOutcome {
  ok: boolean;
  error: CommandError | null;
  result: CommandResult | null;
  snapshot: Snapshot;
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  async getState(): Promise<Snapshot> {
    const resp = await fetch(this.base + "/state");
    if (!resp.ok) throw new Error(`GET /state failed: ${resp.status}`);
    return (await resp.json()) as Snapshot;
  }

  async submit(text: string): Promise<CommandOutcome> {
    const resp = await fetch(this.base + "/command", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
    if (!resp.ok) throw new Error(`POST /command failed: ${resp.status}`);
    return (await resp.json()) as CommandOutcome;
  }

  /** Open the event stream; hands every version number to the callback. */
  openEvents(
    onVersion: (version: number) => void,
    onStatus: (connected: boolean) => void,
  ): WebSocket {
    const http = this.base || window.location.origin;
    const url = http.replace(/^http/, "ws") + "/events";
    const ws = new WebSocket(url);
    ws.onopen = () => onStatus(true);
    ws.onclose = () => onStatus(false);
    ws.onerror = () => onStatus(false);
    ws.onmessage = (ev) => {
      try {
        const data = JSON.parse(ev.data);
        if (typeof data.version === "number") onVersion(data.version);
      } catch {
        // malformed frames are dropped; the next event resyncs us
      }
    };
    return ws;
  }
}
