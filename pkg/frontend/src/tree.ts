/**
 * Proof-tree rendering.  Each node shows the rule that closed it; open
 * leaves (the goals) render as yellow boxes carrying the engine's own
 * goal text, and clicking one submits the corresponding `Choose`
 * command — selection, like everything else, round-trips through the
 * engine rather than being applied locally.
 */

import { GoalView, SessionView, TreeNode } from "./api.js";

export interface TreeHandlers {
  onChoose: (goalIndex: number) => void;
}

function goalPosition(goals: GoalView[], goalId: number): number | null {
  for (let i = 0; i < goals.length; i++) {
    if (goals[i].id === goalId) return i + 1;
  }
  return null;
}

function renderNode(
  node: TreeNode,
  session: SessionView,
  handlers: TreeHandlers,
): HTMLElement {
  const li = document.createElement("li");
  const label = document.createElement("div");
  label.className = "tree-label";

  if (node.goal_id !== undefined) {
    const pos = goalPosition(session.goals, node.goal_id);
    const goal = session.goals.find((g) => g.id === node.goal_id);
    label.classList.add("tree-goal");
    if (goal?.current) label.classList.add("tree-goal-current");
    // engine-provided text, verbatim
    label.textContent = goal ? goal.text : `< ${node.pre}, ${node.post} >`;
    if (pos !== null) {
      label.title = `Choose ${pos}.`;
      label.addEventListener("click", () => handlers.onChoose(pos));
    }
  } else {
    label.classList.add("tree-rule");
    const rule = document.createElement("span");
    rule.className = "rule-name";
    rule.textContent = node.rule ?? "?";
    label.appendChild(rule);
    label.title = `< ${node.pre}, ${node.post} >`;
  }
  li.appendChild(label);

  if (node.children.length > 0) {
    const ul = document.createElement("ul");
    for (const child of node.children) {
      ul.appendChild(renderNode(child, session, handlers));
    }
    li.appendChild(ul);
  }
  return li;
}

export function renderTree(
  session: SessionView | null,
  handlers: TreeHandlers,
): HTMLElement {
  const root = document.createElement("div");
  root.className = "tree";
  if (session === null) {
    const empty = document.createElement("p");
    empty.className = "tree-empty";
    empty.textContent = "No active session.";
    root.appendChild(empty);
    return root;
  }
  const head = document.createElement("div");
  head.className = "tree-head";
  head.textContent = session.completed
    ? `${session.name} — sealed`
    : `${session.name} — ${session.goals.length} open goal(s)`;
  if (session.completed) root.classList.add("tree-sealed");
  root.appendChild(head);

  const ul = document.createElement("ul");
  ul.className = "tree-root";
  ul.appendChild(renderNode(session.tree, session, handlers));
  root.appendChild(ul);
  return root;
}
