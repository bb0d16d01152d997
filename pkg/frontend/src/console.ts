/**
 * Command console: input line, history with the engine's responses, and
 * replay buttons for the bundled walkthrough scripts.  Responses render
 * the goal text exactly as the engine sent it — no reflowing, so the
 * console matches the watch-mode output file character for character.
 */

import { HistoryEntry, ViewModel, splitAtSpan } from "./model.js";
import { REPLAY_SCRIPTS } from "./scripts.js";

export interface ConsoleHandlers {
  onSubmit: (text: string) => void;
  onInput: (text: string) => void;
  onReplay: (scriptName: string) => void;
}

function renderEntry(entry: HistoryEntry): HTMLElement {
  const div = document.createElement("div");
  div.className = entry.ok ? "entry entry-ok" : "entry entry-err";

  const cmd = document.createElement("pre");
  cmd.className = "entry-cmd";
  if (entry.span !== null) {
    const [before, bad, after] = splitAtSpan(entry.text, entry.span);
    cmd.append(before);
    const mark = document.createElement("mark");
    mark.textContent = bad;
    cmd.appendChild(mark);
    cmd.append(after);
  } else {
    cmd.textContent = entry.text;
  }
  div.appendChild(cmd);

  if (entry.message) {
    const msg = document.createElement("div");
    msg.className = entry.transportError ? "entry-msg entry-net" : "entry-msg";
    msg.textContent = entry.transportError
      ? `network failure: ${entry.message} — input kept, retry when connected`
      : entry.message;
    div.appendChild(msg);
  }
  if (entry.goals !== null) {
    const goals = document.createElement("pre");
    goals.className = "entry-goals";
    goals.textContent = entry.goals;
    div.appendChild(goals);
  }
  return div;
}

export function renderConsole(
  model: ViewModel,
  handlers: ConsoleHandlers,
): HTMLElement {
  const root = document.createElement("div");
  root.className = "console";

  const history = document.createElement("div");
  history.className = "history";
  for (const entry of model.history) history.appendChild(renderEntry(entry));
  root.appendChild(history);

  const form = document.createElement("form");
  form.className = "prompt";
  const input = document.createElement("input");
  input.type = "text";
  input.className = "prompt-input";
  input.placeholder = 'command, e.g. "Step skip."';
  input.value = model.input;
  input.addEventListener("input", () => handlers.onInput(input.value));
  const send = document.createElement("button");
  send.type = "submit";
  send.textContent = "Submit";
  send.disabled = model.replaying !== null;
  form.append(input, send);
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    if (input.value.trim() !== "") handlers.onSubmit(input.value);
  });
  root.appendChild(form);

  const replays = document.createElement("div");
  replays.className = "replays";
  for (const script of REPLAY_SCRIPTS) {
    const btn = document.createElement("button");
    btn.type = "button";
    btn.className = "replay-btn";
    btn.dataset.script = script.name;
    btn.textContent =
      model.replaying === script.name ? "replaying…" : script.label;
    btn.disabled = model.replaying !== null;
    btn.addEventListener("click", () => handlers.onReplay(script.name));
    replays.appendChild(btn);
  }
  root.appendChild(replays);
  return root;
}
