/**
 * Page wiring.  One mutable reference holds the current ViewModel; every
 * change rebuilds the page from it.  Mutations always wait for the
 * server's snapshot (delivered in the command response or fetched after
 * an event) — the page never guesses.
 */

import { ApiClient } from "./api.js";
import {
  ViewModel,
  currentGoalIndex,
  goalCount,
  initialModel,
  recordOutcome,
  recordTransportFailure,
  setInput,
  setReplaying,
  setStatus,
  withSnapshot,
} from "./model.js";
import { renderConsole } from "./console.js";
import { renderTree } from "./tree.js";
import { REPLAY_SCRIPTS, splitCommands } from "./scripts.js";

export function renderApp(
  model: ViewModel,
  handlers: {
    onSubmit: (text: string) => void;
    onInput: (text: string) => void;
    onReplay: (name: string) => void;
    onChoose: (goalIndex: number) => void;
  },
): HTMLElement {
  const page = document.createElement("div");
  page.className = "page";

  const header = document.createElement("header");
  const title = document.createElement("h1");
  title.textContent = "qrefine";
  const status = document.createElement("span");
  status.className = `status status-${model.status}`;
  status.textContent = model.status;
  const version = document.createElement("span");
  version.className = "version";
  version.textContent =
    model.snapshot === null ? "" : `v${model.snapshot.version}`;
  header.append(title, status, version);
  page.appendChild(header);

  if (model.schemaMismatch) {
    const banner = document.createElement("div");
    banner.className = "banner banner-schema";
    banner.textContent =
      "This page speaks a different snapshot schema than the engine. " +
      "Rebuild the UI or restart the matching engine version.";
    page.appendChild(banner);
    return page;
  }

  const main = document.createElement("main");

  const goals = document.createElement("section");
  goals.className = "goals";
  const goalsHead = document.createElement("h2");
  goalsHead.textContent = `Goals (${goalCount(model)})`;
  goals.appendChild(goalsHead);
  const goalsText = document.createElement("pre");
  goalsText.className = "goals-text";
  // verbatim engine text; this block matches the output file bytes
  goalsText.textContent = model.snapshot?.session?.goals_text ?? "No active session.";
  goals.appendChild(goalsText);
  const current = currentGoalIndex(model);
  if (current !== null) {
    const note = document.createElement("div");
    note.className = "goals-current";
    note.textContent = `current: goal ${current}`;
    goals.appendChild(note);
  }
  main.appendChild(goals);

  const treeSection = document.createElement("section");
  treeSection.className = "tree-pane";
  treeSection.appendChild(
    renderTree(model.snapshot?.session ?? null, { onChoose: handlers.onChoose }),
  );
  main.appendChild(treeSection);

  const envSection = document.createElement("section");
  envSection.className = "env";
  const envHead = document.createElement("h2");
  envHead.textContent = "Definitions";
  envSection.appendChild(envHead);
  const envList = document.createElement("div");
  envList.className = "env-names";
  envList.textContent = model.snapshot?.env.join("  ") ?? "";
  envSection.appendChild(envList);
  main.appendChild(envSection);

  page.appendChild(main);
  page.appendChild(renderConsole(model, handlers));
  return page;
}

export class App {
  model: ViewModel = initialModel();

  constructor(
    readonly client: ApiClient,
    readonly mount: HTMLElement,
  ) {}

  private update(next: ViewModel): void {
    this.model = next;
    this.mount.replaceChildren(
      renderApp(this.model, {
        onSubmit: (text) => void this.submit(text),
        onInput: (text) => {
          // keep typing out of the re-render loop: store, don't redraw
          this.model = setInput(this.model, text);
        },
        onReplay: (name) => void this.replay(name),
        onChoose: (n) => void this.submit(`Choose ${n}.`),
      }),
    );
  }

  async start(): Promise<void> {
    this.update(this.model);
    try {
      this.update(withSnapshot(this.model, await this.client.getState()));
    } catch (err) {
      this.update(setStatus(this.model, "lost"));
    }
    this.client.openEvents(
      () => void this.refresh(),
      (connected) =>
        this.update(setStatus(this.model, connected ? "live" : "lost")),
    );
  }

  async refresh(): Promise<void> {
    try {
      this.update(withSnapshot(this.model, await this.client.getState()));
    } catch {
      this.update(setStatus(this.model, "lost"));
    }
  }

  async submit(text: string): Promise<void> {
    try {
      const outcome = await this.client.submit(text);
      this.update(recordOutcome(this.model, text, outcome));
    } catch (err) {
      const reason = err instanceof Error ? err.message : String(err);
      this.update(recordTransportFailure(this.model, text, reason));
    }
  }

  /** Replay a bundled script one command at a time, waiting for each
   * response before the next submission. */
  async replay(name: string): Promise<void> {
    const script = REPLAY_SCRIPTS.find((s) => s.name === name);
    if (!script || this.model.replaying !== null) return;
    this.update(setReplaying(this.model, name));
    try {
      for (const command of splitCommands(script.text)) {
        const outcome = await this.client.submit(command);
        this.update(recordOutcome(this.model, command, outcome));
        if (!outcome.ok) break;
      }
    } finally {
      this.update(setReplaying(this.model, null));
    }
  }
}

export function boot(): void {
  const mount = document.getElementById("app");
  if (mount === null) throw new Error("missing #app element");
  const app = new App(new ApiClient(), mount);
  void app.start();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}
