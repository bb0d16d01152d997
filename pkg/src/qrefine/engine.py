"""Command interpreter: definitions, refinement sessions, script running,
and the file-watch server mode.

An `EngineState` owns one definition environment and at most one
refinement session.  `exec_command` dispatches a parsed command and
returns a `CommandResult`; every result is also appended to the state's
transcript, and replaying a transcript from a fresh state reproduces the
same results.  Queries (Show, Eval, Test) never mutate.
"""

import os
import time
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from . import lang
from .config import DEFAULT_CONFIG
from .lattice import Subspace, equals, leq
from .opeval import EvalError, _eval, _to_subspace, eval_operator
from .qop import (DensityState, LabelledOp, MatrixOp, Register,
                  builtin_operators, extend_matrix, lift_state)
from .refine import Session, TacticError, contains_prescription, strip_refined
from .semantics import (FixpointTrace, NonConvergence, SemanticsError,
                        free_qubits, simulate)


class EngineError(Exception):
    """A command failed; the engine state is unchanged."""


@dataclass
class Definition:
    name: str
    kind: str            # "operator" | "program" | "proof" | "state"
    value: object
    source: object = None


class Environment(Mapping):
    """User definitions layered over the built-in gate table and any
    operators injected at startup.  Definitions shadow the base tables
    but are themselves append-only: redefining a name is an error.

    The mapping view is what expression evaluation sees; it exposes the
    raw values (matrices and program syntax), with definitions first.
    """

    def __init__(self, injected=None):
        self._base = builtin_operators()
        if injected:
            self._base.update(injected)
        self.defs = {}

    def define(self, name, kind, value, source=None):
        if name in self.defs:
            raise EngineError(f"{name!r} is already defined")
        self.defs[name] = Definition(name, kind, value, source)

    def lookup(self, name):
        return self.defs.get(name)

    def names(self):
        return list(self.defs)

    def __getitem__(self, name):
        d = self.defs.get(name)
        if d is not None:
            return d.value
        return self._base[name]

    def __iter__(self):
        seen = dict.fromkeys(self.defs)
        seen.update(dict.fromkeys(self._base))
        return iter(seen)

    def __len__(self):
        return len(set(self.defs) | set(self._base))


@dataclass
class CommandResult:
    ok: bool
    kind: str                 # command kind, e.g. "Def", "Step", "Test"
    message: str = ""
    goals: str | None = None  # session goal display after the command
    value: object = None      # Test verdict / Eval payload
    mutated: bool = False
    span: object = None       # SourceSpan of the failing command, if any

    def report(self):
        """One stable line per result, used for transcript comparison."""
        flag = "ok" if self.ok else "error"
        return f"{self.kind}: {flag}{' — ' + self.message if self.message else ''}"


class EngineState:
    def __init__(self, config=None):
        self.config = config or DEFAULT_CONFIG
        self.env = Environment(self.config.operators)
        self.session = None
        self.transcript = []
        self.trace = FixpointTrace()

    @property
    def tol(self):
        return self.config.tolerances


def _fmt_matrix(mat):
    return np.array2string(np.asarray(mat), precision=6, suppress_small=True,
                           max_line_width=120)


def _kind_name(cmd):
    return type(cmd).__name__[1:]


def _pretty_def(d):
    if d.kind == "operator":
        if d.source is not None:
            return f"{d.name} := {lang.pretty_op(d.source)}"
        return f"{d.name} :=\n{_fmt_matrix(d.value.mat)}"
    if d.kind == "program":
        return f"{d.name} := Prog {lang.pretty_prog(d.value)}"
    if d.kind == "proof":
        return _show_proof(d.value)
    if d.kind == "state":
        return f"{d.name}: state on {d.value.reg}\n{_fmt_matrix(d.value.mat)}"
    raise AssertionError(d.kind)


def _show_proof(sess):
    lines = [f"proof {sess.name} "
             f"({'complete' if sess.completed else 'in progress'})"]

    def walk(node, depth):
        head = "  " * depth
        goal = lang.goal_text(node.pre_ast, node.post_ast)
        rule = "(open)" if node.is_open() else f"by {node.rule}"
        lines.append(f"{head}{goal}  {rule}")
        for child in node.children:
            walk(child, depth + 1)

    walk(sess.root, 1)
    return "\n".join(lines)


def _coerce_test_side(mat, reg, ambient, tol):
    if reg is not None:
        mat = extend_matrix(mat, reg, ambient)
    elif ambient is not None and mat.shape[0] != ambient.dim:
        raise EngineError(
            "operands mix labelled and unlabelled operators of different size")
    return _to_subspace(mat, tol)


def _test_subspaces(state, lhs, rhs):
    env, tol = state.env, state.tol
    ma, ra = _eval(lhs, env, tol)
    mb, rb = _eval(rhs, env, tol)
    if ra is not None and rb is not None:
        ambient = ra.union(rb)
    else:
        ambient = ra if ra is not None else rb
    if ambient is None and ma.shape != mb.shape:
        raise EngineError("cannot compare operators of different dimension")
    return (_coerce_test_side(ma, ra, ambient, tol),
            _coerce_test_side(mb, rb, ambient, tol))


def _active_session(state):
    sess = state.session
    if sess is None or sess.completed:
        raise EngineError("no refinement in progress")
    return sess


def _initial_state(state, stm, op_ast):
    env, tol = state.env, state.tol
    free = free_qubits(stm, env)
    mat, reg = _eval(op_ast, env, tol)
    try:
        if reg is None:
            if mat.shape[0] != free.dim:
                raise EngineError(
                    f"initial state dimension {mat.shape[0]} does not match "
                    f"the program register {free}")
            return DensityState(mat, free)
        rho = DensityState(mat, reg)
    except ValueError as exc:
        raise EngineError(f"initial state: {exc}") from None
    return lift_state(rho, reg.union(free))


def exec_command(state, cmd, span=None):
    """Dispatch one parsed command; append and return its result."""
    kind = _kind_name(cmd)
    try:
        result = _dispatch(state, cmd, kind)
    except (EngineError, EvalError, SemanticsError, TacticError) as exc:
        result = CommandResult(False, kind, message=str(exc), span=span,
                               goals=_goals_of(state))
    except NonConvergence as exc:
        result = CommandResult(
            False, kind, span=span, goals=_goals_of(state),
            message=(f"simulation did not converge after {exc.iterations} "
                     f"loop iterations (residual {exc.residual:.3e})"))
    state.transcript.append((kind, result))
    return result


def _goals_of(state):
    return state.session.display() if state.session is not None else None


def _result(state, kind, message="", value=None, mutated=False):
    return CommandResult(True, kind, message=message, value=value,
                         mutated=mutated, goals=_goals_of(state))


def _dispatch(state, cmd, kind):
    env, tol = state.env, state.tol

    if isinstance(cmd, lang.CDefOp):
        value = eval_operator(cmd.op, env, tol)
        env.define(cmd.name, "operator", value, source=cmd.op)
        return _result(state, kind, f"{cmd.name} defined.", mutated=True)

    if isinstance(cmd, lang.CDefProg):
        env.define(cmd.name, "program", cmd.prog, source=cmd.prog)
        return _result(state, kind, f"{cmd.name} defined.", mutated=True)

    if isinstance(cmd, lang.CDefExtract):
        d = env.lookup(cmd.source)
        if d is None:
            raise EngineError(f"unknown definition {cmd.source!r}")
        if d.kind == "proof":
            prog = d.value.extract()
        elif d.kind == "program":
            prog = strip_refined(d.value)
            if contains_prescription(prog):
                raise EngineError(
                    f"{cmd.source!r} still contains unresolved prescriptions")
        else:
            raise EngineError(f"{cmd.source!r} is not a proof or program")
        env.define(cmd.name, "program", prog)
        return _result(state, kind, f"{cmd.name} defined.", mutated=True)

    if isinstance(cmd, lang.CDefSim):
        rho = _initial_state(state, cmd.prog, cmd.op)
        out = simulate(cmd.prog, rho, env, state.config.sim, tol)
        env.define(cmd.name, "state", out)
        return _result(state, kind,
                       f"{cmd.name} defined (trace {out.trace:.6f}).",
                       mutated=True)

    if isinstance(cmd, lang.CRefine):
        if state.session is not None and not state.session.completed:
            raise EngineError("a refinement is already in progress")
        if cmd.name in env.defs:
            raise EngineError(f"{cmd.name!r} is already defined")
        state.session = Session(cmd.name, cmd.pre, cmd.post, env, tol,
                                trace=state.trace)
        return _result(state, kind, mutated=True)

    if isinstance(cmd, lang.CStep):
        _active_session(state).step_program(cmd.prog)
        return _result(state, kind, mutated=True)

    if isinstance(cmd, lang.CStepSeq):
        _active_session(state).step_seq(cmd.op)
        return _result(state, kind, mutated=True)

    if isinstance(cmd, lang.CStepIf):
        _active_session(state).step_if(cmd.op)
        return _result(state, kind, mutated=True)

    if isinstance(cmd, lang.CStepWhile):
        _active_session(state).step_while(cmd.guard, cmd.inv)
        return _result(state, kind, mutated=True)

    if isinstance(cmd, lang.CWeakenPre):
        _active_session(state).weaken_pre(cmd.op)
        return _result(state, kind, mutated=True)

    if isinstance(cmd, lang.CStrengthenPost):
        _active_session(state).strengthen_post(cmd.op)
        return _result(state, kind, mutated=True)

    if isinstance(cmd, lang.CChoose):
        _active_session(state).choose(cmd.n)
        return _result(state, kind, mutated=True)

    if isinstance(cmd, lang.CEnd):
        sess = _active_session(state)
        if sess.name in env.defs:
            raise EngineError(f"{sess.name!r} is already defined")
        sess.end()
        env.define(sess.name, "proof", sess)
        return _result(state, kind, f"refinement {sess.name} complete.",
                       mutated=True)

    if isinstance(cmd, lang.CPause):
        return _result(state, kind, "paused.")

    if isinstance(cmd, lang.CShowDefs):
        names = env.names()
        return _result(state, kind,
                       "\n".join(names) if names else "(no definitions)",
                       value=names)

    if isinstance(cmd, lang.CShow):
        d = env.lookup(cmd.name)
        if d is None:
            raise EngineError(f"unknown definition {cmd.name!r}")
        return _result(state, kind, _pretty_def(d))

    if isinstance(cmd, lang.CEval):
        d = env.lookup(cmd.name)
        if d is not None:
            if d.kind == "operator":
                mat = d.value.mat
            elif d.kind == "state":
                mat = d.value.mat
            else:
                raise EngineError(f"{cmd.name!r} does not evaluate to a matrix")
        else:
            try:
                mat = env[cmd.name]
            except KeyError:
                raise EngineError(f"unknown definition {cmd.name!r}") from None
        text = _fmt_matrix(mat)
        return _result(state, kind, text, value=np.asarray(mat))

    if isinstance(cmd, lang.CTest):
        sa, sb = _test_subspaces(state, cmd.lhs, cmd.rhs)
        if cmd.kind == "=":
            verdict = equals(sa, sb, tol)
        else:
            verdict = leq(sa, sb, tol)
        if verdict:
            return _result(state, kind, "Test passed.", value=True)
        return CommandResult(False, kind, message="Test failed.", value=False,
                             goals=_goals_of(state))

    raise AssertionError(f"unhandled command {cmd!r}")


def run_script(state, text, halt_on_error=True):
    """Execute every command in `text` in order.

    Batch semantics halt at the first failing command; interactive
    semantics (halt_on_error=False) keep going.  A Pause command stops
    processing either way, leaving the state as of the Pause.
    """
    commands, diagnostics = lang.parse_script(text)
    results = []
    bad = iter(diagnostics)
    if not commands and diagnostics:
        diag = next(bad)
        res = CommandResult(False, "Parse", message=diag.message,
                            span=diag.span)
        state.transcript.append(("Parse", res))
        return [res]
    for ast, span in commands:
        if ast is None:
            diag = next(bad)
            res = CommandResult(False, "Parse", message=diag.message,
                                span=diag.span, goals=_goals_of(state))
            state.transcript.append(("Parse", res))
            results.append(res)
            if halt_on_error:
                break
            continue
        res = exec_command(state, ast, span)
        results.append(res)
        if isinstance(ast, lang.CPause):
            break
        if not res.ok and halt_on_error:
            break
    return results


def render_output(state, results):
    """The watch server's output file: current goals first (byte-equal
    to the session display), then one line per notable result."""
    lines = []
    goals = _goals_of(state)
    lines.append(goals if goals is not None else "No active session.")
    body = []
    for res in results:
        if not res.ok:
            where = ""
            if res.span is not None:
                where = f" [{res.span.start}..{res.span.end}]"
            body.append(f"! {res.kind}: {res.message}{where}")
        elif res.kind in ("Show", "ShowDefs", "Eval", "Test") and res.message:
            body.append(res.message)
    if body:
        lines.append("")
        lines.extend(body)
    return "\n".join(lines) + "\n"


def serve_watch(input_path, output_path, config=None, poll_interval=0.2,
                stop=None):
    """Re-run `input_path` from a fresh state on every save, writing the
    goal display and diagnostics to `output_path`.  Runs until `stop`
    (a threading.Event) is set.  Errors never terminate the server."""
    last = None
    while stop is None or not stop.is_set():
        try:
            st = os.stat(input_path)
            stamp = (st.st_mtime_ns, st.st_size)
        except OSError as exc:
            stamp = ("unreadable", str(exc))
        if stamp != last:
            last = stamp
            try:
                with open(input_path, "r", encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                _write_output(output_path, f"! cannot read input: {exc}\n")
            else:
                state = EngineState(config)
                results = run_script(state, text, halt_on_error=False)
                _write_output(output_path, render_output(state, results))
        if stop is not None and stop.wait(poll_interval):
            break
        if stop is None:
            time.sleep(poll_interval)


def _write_output(path, text):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError:
        pass
