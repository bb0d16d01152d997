"""Interactive refinement sessions.

A session starts from a target prescription `< pre, post >` and applies
tactics until no open goal remains.  Every tactic acts on the *current*
goal; on success its subgoals take the goal's position in the open-goal
list (so goal numbering is positional), and the current goal resets to
the first one.  Tactic applications are atomic: a failing tactic never
changes the open goals.  (The ambient register may still have grown,
which is invisible — goals are only ever read through their cylindrical
embedding into the ambient space.)

The session keeps a proof tree whose leaves are the open goals; `End`
seals a goal-free session, after which `extract` rebuilds the refined
program with every discharged prescription replaced by its proof.

The ambient register grows lazily: when a tactic mentions new qubits,
all open goals are lifted cylindrically (P becomes P ⊗ I on the added
qubits) before the tactic is checked.
"""

from dataclasses import dataclass, field

import numpy as np

from . import lang
from .lattice import (DEFAULT_TOL, Subspace, complement, equals, join, leq,
                      meet, sasaki_conjunct, sasaki_implies)
from .opeval import EvalError, eval_subspace_on
from .qop import Register
from .semantics import SemanticsError, _op_names, free_qubits, wlp


class TacticError(Exception):
    """A tactic does not apply to the current goal."""


@dataclass(eq=False)
class ProofNode:
    node_id: int
    pre_ast: object
    post_ast: object
    pre: Subspace
    post: Subspace
    rule: str | None = None     # None while the node is an open goal
    payload: object = None      # rule argument: a program or guard ASTs
    children: list = field(default_factory=list)

    def is_open(self):
        return self.rule is None

    def to_dict(self):
        d = {
            "id": self.node_id,
            "rule": self.rule,
            "pre": lang.pretty_op(self.pre_ast),
            "post": lang.pretty_op(self.post_ast),
            "children": [c.to_dict() for c in self.children],
        }
        if self.is_open():
            d["goal_id"] = self.node_id
        return d


def _collect_names(*asts):
    out = []
    for ast in asts:
        _op_names(ast, out)
    return out


def _holes(stm, out):
    """Prescriptions of a program in preorder; refined subtrees and
    procedure references are opaque."""
    if isinstance(stm, lang.SPrescription):
        out.append(stm)
    elif isinstance(stm, lang.SSeq):
        _holes(stm.first, out)
        _holes(stm.second, out)
    elif isinstance(stm, lang.SPChoice):
        _holes(stm.s1, out)
        _holes(stm.s2, out)
    elif isinstance(stm, lang.SIf):
        _holes(stm.then_s, out)
        _holes(stm.else_s, out)
    elif isinstance(stm, (lang.SWhile,)):
        _holes(stm.body, out)
    elif isinstance(stm, lang.SRepeat):
        _holes(stm.body, out)
    elif isinstance(stm, lang.SBlockLocal):
        _holes(stm.body, out)
    return out


def _fill(stm, filled):
    """Rebuild a stepped program, replacing each prescription (in the
    same preorder) by its proved refinement."""
    if isinstance(stm, lang.SPrescription):
        return next(filled)
    if isinstance(stm, lang.SSeq):
        return lang.SSeq(_fill(stm.first, filled), _fill(stm.second, filled))
    if isinstance(stm, lang.SPChoice):
        return lang.SPChoice(stm.p, _fill(stm.s1, filled), _fill(stm.s2, filled))
    if isinstance(stm, lang.SIf):
        return lang.SIf(stm.guard, _fill(stm.then_s, filled), _fill(stm.else_s, filled))
    if isinstance(stm, lang.SWhile):
        return lang.SWhile(stm.guard, _fill(stm.body, filled))
    if isinstance(stm, lang.SRepeat):
        return lang.SRepeat(_fill(stm.body, filled), stm.guard)
    if isinstance(stm, lang.SBlockLocal):
        return lang.SBlockLocal(stm.names, _fill(stm.body, filled))
    return stm


def strip_refined(stm):
    """Drop proved-refinement wrappers, leaving the bare program."""
    if isinstance(stm, lang.SRefined):
        return strip_refined(stm.body)
    if isinstance(stm, lang.SSeq):
        return lang.SSeq(strip_refined(stm.first), strip_refined(stm.second))
    if isinstance(stm, lang.SPChoice):
        return lang.SPChoice(stm.p, strip_refined(stm.s1), strip_refined(stm.s2))
    if isinstance(stm, lang.SIf):
        return lang.SIf(stm.guard, strip_refined(stm.then_s),
                        strip_refined(stm.else_s))
    if isinstance(stm, lang.SWhile):
        return lang.SWhile(stm.guard, strip_refined(stm.body))
    if isinstance(stm, lang.SRepeat):
        return lang.SRepeat(strip_refined(stm.body), stm.guard)
    if isinstance(stm, lang.SBlockLocal):
        return lang.SBlockLocal(stm.names, strip_refined(stm.body))
    return stm


def contains_prescription(stm):
    """True if any prescription remains anywhere in the program."""
    if isinstance(stm, lang.SPrescription):
        return True
    if isinstance(stm, lang.SSeq):
        return contains_prescription(stm.first) or contains_prescription(stm.second)
    if isinstance(stm, lang.SPChoice):
        return contains_prescription(stm.s1) or contains_prescription(stm.s2)
    if isinstance(stm, lang.SIf):
        return contains_prescription(stm.then_s) or contains_prescription(stm.else_s)
    if isinstance(stm, (lang.SWhile, lang.SBlockLocal)):
        return contains_prescription(stm.body)
    if isinstance(stm, lang.SRepeat):
        return contains_prescription(stm.body)
    if isinstance(stm, lang.SRefined):
        return contains_prescription(stm.body)
    return False


class Session:
    """One refinement of a target prescription."""

    def __init__(self, name, pre_ast, post_ast, env, tol=DEFAULT_TOL, trace=None):
        self.name = name
        self.env = env
        self.tol = tol
        self.trace = trace
        self.ambient = Register(tuple(dict.fromkeys(_collect_names(pre_ast, post_ast))))
        self._next_id = 0
        pre = self._eval(pre_ast)
        post = self._eval(post_ast)
        self.root = self._node(pre_ast, post_ast, pre, post)
        self.goals = [self.root]
        self.current = 1
        self.completed = False

    # -- plumbing ----------------------------------------------------------

    def _node(self, pre_ast, post_ast, pre, post):
        self._next_id += 1
        return ProofNode(self._next_id, pre_ast, post_ast, pre, post)

    def _eval(self, ast):
        try:
            return eval_subspace_on(ast, self.env, self.ambient, self.tol)
        except EvalError as exc:
            raise TacticError(str(exc)) from None

    def _goal(self):
        if self.completed:
            raise TacticError("the refinement is already complete")
        if not self.goals:
            raise TacticError("no open goals")
        if not 1 <= self.current <= len(self.goals):
            raise TacticError(f"current goal {self.current} out of range")
        return self.goals[self.current - 1]

    def _extend_ambient(self, names):
        grown = self.ambient.union(Register(tuple(dict.fromkeys(names))))
        if grown == self.ambient:
            return
        extra = grown.dim // self.ambient.dim
        eye = np.eye(extra, dtype=np.complex128)
        for g in self.goals:
            g.pre = Subspace(grown.dim, np.kron(g.pre.basis, eye))
            g.post = Subspace(grown.dim, np.kron(g.post.basis, eye))
        self.ambient = grown

    def _close(self, goal, rule, payload, children):
        goal.rule = rule
        goal.payload = payload
        goal.children = children
        i = self.goals.index(goal)
        self.goals[i:i + 1] = [c for c in children if c.is_open()]
        self.current = 1

    def _leq(self, a, b, label):
        if not leq(a, b, self.tol):
            raise TacticError(label)

    # -- tactics -----------------------------------------------------------

    def _unwrap_blocks(self, stm, fresh):
        """Rewrite blocks that wrap a single prescription to the bare
        prescription, collecting the local names: such a block refines a
        goal exactly as the prescription does over the grown register."""
        if isinstance(stm, lang.SBlockLocal):
            inner = self._unwrap_blocks(stm.body, fresh)
            if isinstance(inner, lang.SPrescription):
                fresh.extend(stm.names)
                return inner
            return lang.SBlockLocal(stm.names, inner)
        if isinstance(stm, lang.SSeq):
            return lang.SSeq(self._unwrap_blocks(stm.first, fresh),
                             self._unwrap_blocks(stm.second, fresh))
        if isinstance(stm, lang.SPChoice):
            return lang.SPChoice(stm.p, self._unwrap_blocks(stm.s1, fresh),
                                 self._unwrap_blocks(stm.s2, fresh))
        if isinstance(stm, lang.SIf):
            return lang.SIf(stm.guard, self._unwrap_blocks(stm.then_s, fresh),
                            self._unwrap_blocks(stm.else_s, fresh))
        if isinstance(stm, lang.SWhile):
            return lang.SWhile(stm.guard, self._unwrap_blocks(stm.body, fresh))
        if isinstance(stm, lang.SRepeat):
            return lang.SRepeat(self._unwrap_blocks(stm.body, fresh), stm.guard)
        return stm

    def step_program(self, stm):
        """Close the current goal with a concrete program; its own
        prescriptions become the subgoals."""
        goal = self._goal()
        fresh = []
        checked = self._unwrap_blocks(stm, fresh)
        if len(set(fresh)) != len(fresh):
            raise TacticError("local qubit names repeat")
        for name in fresh:
            if name in self.ambient.names:
                raise TacticError(f"local qubit {name!r} is not fresh")
        try:
            needed = free_qubits(checked, self.env)
        except SemanticsError as exc:
            raise TacticError(str(exc)) from None
        self._extend_ambient(tuple(needed.names) + tuple(fresh))
        try:
            w = wlp(checked, goal.post, self.ambient, self.env, self.tol,
                    self.trace)
        except (SemanticsError, EvalError) as exc:
            raise TacticError(str(exc)) from None
        self._leq(goal.pre, w,
                  "the stated program does not meet the goal's precondition")
        children = []
        for hole in _holes(stm, []):
            children.append(self._node(hole.pre, hole.post,
                                       self._eval(hole.pre), self._eval(hole.post)))
        self._close(goal, "step", stm, children)

    def step_seq(self, mid_ast):
        goal = self._goal()
        self._extend_ambient(_collect_names(mid_ast))
        mid = self._eval(mid_ast)
        first = self._node(goal.pre_ast, mid_ast, goal.pre, mid)
        second = self._node(mid_ast, goal.post_ast, mid, goal.post)
        self._close(goal, "seq", mid_ast, [first, second])

    def step_if(self, guard_ast):
        goal = self._goal()
        self._extend_ambient(_collect_names(guard_ast))
        g = self._eval(guard_ast)
        then_pre_ast = lang.OpSasakiConj(guard_ast, goal.pre_ast)
        else_pre_ast = lang.OpSasakiConj(lang.OpComplement(guard_ast), goal.pre_ast)
        then_pre = sasaki_conjunct(g, goal.pre, self.tol)
        else_pre = sasaki_conjunct(complement(g), goal.pre, self.tol)
        then_goal = self._node(then_pre_ast, goal.post_ast, then_pre, goal.post)
        else_goal = self._node(else_pre_ast, goal.post_ast, else_pre, goal.post)
        self._close(goal, "if", guard_ast, [then_goal, else_goal])

    def step_while(self, guard_ast, inv_ast):
        goal = self._goal()
        self._extend_ambient(_collect_names(guard_ast, inv_ast))
        g = self._eval(guard_ast)
        inv = self._eval(inv_ast)
        self._leq(goal.pre, inv, "the precondition does not entail the invariant")
        exit_sub = sasaki_conjunct(complement(g), inv, self.tol)
        self._leq(exit_sub, goal.post,
                  "leaving the loop does not establish the postcondition")
        body_pre_ast = lang.OpSasakiConj(guard_ast, inv_ast)
        body_goal = self._node(body_pre_ast, inv_ast,
                               sasaki_conjunct(g, inv, self.tol), inv)
        self._close(goal, "while", (guard_ast, inv_ast), [body_goal])

    def step_pchoice(self, p, mode, split):
        """Split the goal across a probabilistic choice.  In "wpc" mode
        the two operands of `split` must meet exactly in the goal's
        precondition and become the branch preconditions; in "spc" mode
        they must join exactly to the postcondition."""
        if not 0.0 < p < 1.0:
            raise TacticError(
                f"choice weight {p} must lie strictly between 0 and 1")
        if mode not in ("wpc", "spc"):
            raise TacticError(f"unknown choice mode {mode!r}")
        goal = self._goal()
        a_ast, b_ast = split
        self._extend_ambient(_collect_names(a_ast, b_ast))
        a = self._eval(a_ast)
        b = self._eval(b_ast)
        if mode == "wpc":
            if not equals(meet(a, b, self.tol), goal.pre, self.tol):
                raise TacticError(
                    "the split must meet exactly in the goal's precondition")
            kids = [self._node(a_ast, goal.post_ast, a, goal.post),
                    self._node(b_ast, goal.post_ast, b, goal.post)]
        else:
            if not equals(join(a, b, self.tol), goal.post, self.tol):
                raise TacticError(
                    "the split must join exactly to the goal's postcondition")
            kids = [self._node(goal.pre_ast, a_ast, goal.pre, a),
                    self._node(goal.pre_ast, b_ast, goal.pre, b)]
        self._close(goal, "pchoice", p, kids)

    def step_repeat(self, guard_ast):
        goal = self._goal()
        self._extend_ambient(_collect_names(guard_ast))
        g = self._eval(guard_ast)
        # after one pass of the body: if the guard fails we must be able to
        # run again, if it holds we must have arrived
        body_post_ast = lang.OpMeet(
            lang.OpSasakiImp(lang.OpComplement(guard_ast), goal.pre_ast),
            lang.OpSasakiImp(guard_ast, goal.post_ast))
        body_post = meet(sasaki_implies(complement(g), goal.pre, self.tol),
                         sasaki_implies(g, goal.post, self.tol), self.tol)
        body_goal = self._node(goal.pre_ast, body_post_ast, goal.pre, body_post)
        self._close(goal, "repeat", guard_ast, [body_goal])

    def weaken_pre(self, r_ast):
        goal = self._goal()
        self._extend_ambient(_collect_names(r_ast))
        r = self._eval(r_ast)
        self._leq(goal.pre, r, "the new precondition must contain the old one")
        child = self._node(r_ast, goal.post_ast, r, goal.post)
        self._close(goal, "weaken-pre", r_ast, [child])

    def strengthen_post(self, t_ast):
        goal = self._goal()
        self._extend_ambient(_collect_names(t_ast))
        t = self._eval(t_ast)
        self._leq(t, goal.post, "the new postcondition must lie inside the old one")
        child = self._node(goal.pre_ast, t_ast, goal.pre, t)
        self._close(goal, "strengthen-post", t_ast, [child])

    def choose(self, n):
        if self.completed:
            raise TacticError("the refinement is already complete")
        if not 1 <= n <= len(self.goals):
            raise TacticError(
                f"goal {n} does not exist ({len(self.goals)} open)")
        self.current = n

    def end(self):
        if self.completed:
            raise TacticError("the refinement is already complete")
        if self.goals:
            raise TacticError(f"{len(self.goals)} goal(s) still open")
        self.completed = True

    # -- results -----------------------------------------------------------

    def display(self):
        """The goal block shown after every command, byte-stable."""
        if not self.goals:
            return "Goal Clear."
        n = len(self.goals)
        parts = []
        for i, g in enumerate(self.goals, 1):
            parts.append(f"Goal ({i}/{n})\n{lang.goal_text(g.pre_ast, g.post_ast)}")
        return "\n".join(parts)

    def extract(self):
        """The bare refined program, once the session has been sealed:
        no prescription and no refinement wrapper remains."""
        if not self.completed:
            raise TacticError("the refinement is not complete; End it first")
        return self._extract(self.root)

    def _extract(self, node):
        if node.is_open():
            raise TacticError("internal: open goal during extraction")
        if node.rule == "step":
            bodies = iter(self._extract(c) for c in node.children)
            return strip_refined(_fill(node.payload, bodies))
        if node.rule == "seq":
            return lang.SSeq(self._extract(node.children[0]),
                             self._extract(node.children[1]))
        if node.rule == "if":
            return lang.SIf(node.payload, self._extract(node.children[0]),
                            self._extract(node.children[1]))
        if node.rule == "while":
            guard_ast, _inv = node.payload
            return lang.SWhile(guard_ast, self._extract(node.children[0]))
        if node.rule == "pchoice":
            return lang.SPChoice(node.payload, self._extract(node.children[0]),
                                 self._extract(node.children[1]))
        if node.rule == "repeat":
            return lang.SRepeat(self._extract(node.children[0]), node.payload)
        if node.rule in ("weaken-pre", "strengthen-post"):
            return self._extract(node.children[0])
        raise TacticError(f"internal: unknown rule {node.rule!r}")

    def to_dict(self):
        return {
            "name": self.name,
            "ambient": list(self.ambient.names),
            "completed": self.completed,
            "current": self.current if self.goals else None,
            "goals": [g.node_id for g in self.goals],
            "tree": self.root.to_dict(),
        }
