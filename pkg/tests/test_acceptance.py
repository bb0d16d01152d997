"""End-to-end acceptance checks.

One test per shipped guarantee, in order: the lattice identity suite,
dual-route transformer agreement, the transformer adjunction, the phase
kickback circuit, the two bundled refinement walkthroughs, the value
arithmetic gadgets, the assertion-weakening counterexample, loop
fixpoint discipline, and fuzzed refinement soundness.  Each runs at its
stated tolerance; `pytest -v` reports one pass/fail line per criterion.
"""

import time
from dataclasses import replace
from importlib import resources

import numpy as np
import pytest

from qrefine import lang
from qrefine.config import DEFAULT_CONFIG, Config, load_config
from qrefine.engine import EngineState, exec_command, run_script
from qrefine.lattice import equals, leq
from qrefine.opeval import eval_subspace_on
from qrefine.qop import (DensityState, Register, builtin_operators,
                         param_gate, partial_trace)
from qrefine.refine import Session, contains_prescription
from qrefine.semantics import (FixpointTrace, SimOptions, hoare_valid,
                               kraus_ops, kraus_sp, kraus_wlp, simulate, sp,
                               wlp)

from helpers import gen_loopfree, rand_subspace, span_equal
from test_lattice import IDENTITIES
from test_refine import REPETITION_CHECKPOINTS, _Driver

# Shared fixpoint-iteration log: every hoare_valid call below threads it,
# and the discipline criterion audits the accumulated records.
TRACE = FixpointTrace()


def script_text(name):
    return (resources.files("qrefine") / "scripts" / name).read_text()


def script_path(name):
    return str(resources.files("qrefine") / "scripts" / name)


def one(state, text):
    (ast, span), = lang.parse_script(text)[0]
    return exec_command(state, ast, span)


def enc(h):
    """One-qubit carrier of the value h: (h|0> + |1>)/sqrt(1+h^2)."""
    v = np.array([h, 1.0], dtype=np.complex128)
    return v / np.linalg.norm(v)


def state_fidelity(mat, vec):
    mat = mat / np.trace(mat).real
    return float(np.real(vec.conj() @ mat @ vec))


# ---------------------------------------------------------------------------
# shared replays (module-scoped so the fixpoint audit sees their traces)
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def loopfree_programs():
    rng = np.random.default_rng(9001)
    qubits = ["q0", "q1", "q2"]
    return rng, [gen_loopfree(rng, qubits, int(rng.integers(0, 5)))
                 for _ in range(200)]


@pytest.fixture(scope="module")
def rotation_replay():
    cfg = load_config(script_path("zrotation_config.json"))
    cfg = replace(cfg, sim=SimOptions(max_while_iters=200,
                                      residual_tol=1e-10))
    state = EngineState(cfg)
    results = run_script(state, script_text("zrotation.qrs"))
    sess = state.env.lookup("pf").value
    report = None
    if sess is not None and sess.completed:
        amb = sess.ambient
        pre = eval_subspace_on(sess.root.pre_ast, state.env, amb)
        post = eval_subspace_on(sess.root.post_ast, state.env, amb)
        report = hoare_valid(pre, sess.extract(), post, amb, state.env,
                             trace=TRACE, cross_check=True)
    return {"config": cfg, "state": state, "results": results,
            "session": sess, "report": report}


@pytest.fixture(scope="module")
def repetition_replay():
    state = EngineState()
    results = run_script(state, script_text("repetition.qrs"))
    return {"state": state, "results": results}


@pytest.fixture(scope="module")
def bernoulli_replay():
    cfg = replace(DEFAULT_CONFIG, sim=SimOptions(max_while_iters=1000,
                                                 residual_tol=1e-12))
    state = EngineState(cfg)
    results = run_script(state, script_text("bernoulli.qrs"))
    return {"state": state, "results": results}


@pytest.fixture(scope="module")
def fuzzed_sessions():
    rng = np.random.default_rng(27182818)
    reports = []
    for _ in range(100):
        env = dict(builtin_operators())
        for name in ("RG0", "RG1", "RG2", "RootP", "RootQ"):
            env[name] = rand_subspace(rng, 4).projector()
        sess = Session("F", lang.parse_operator("RootP[q0 q1]"),
                       lang.parse_operator("RootQ[q0 q1]"), env)
        _Driver(rng, env).run(sess, budget=int(rng.integers(2, 10)))
        prog = sess.extract()
        amb = sess.ambient
        pre = eval_subspace_on(sess.root.pre_ast, env, amb)
        post = eval_subspace_on(sess.root.post_ast, env, amb)
        reports.append((sess, prog,
                        hoare_valid(pre, prog, post, amb, env,
                                    trace=TRACE, cross_check=True)))
    return reports


# ---------------------------------------------------------------------------
# the criteria
# ---------------------------------------------------------------------------

def test_c01_sasaki_identity_suite_random_dims():
    """Every lattice/Sasaki identity on 500 random pairs/triples in each
    of dims 2, 4, 8 (equality tolerance 1e-7), in under 60 s."""
    rng = np.random.default_rng(50081)
    t0 = time.monotonic()
    for d in (2, 4, 8):
        for _ in range(500):
            args = [rand_subspace(rng, d) for _ in range(3)]
            for name, nargs, fn in IDENTITIES:
                lhs, rhs = fn(*args[:nargs])
                assert equals(lhs, rhs), f"{name} at d={d}"
    assert time.monotonic() - t0 < 60.0


def test_c02_structural_transformers_match_kraus_oracle(loopfree_programs):
    """On 200 random loop-free programs over three qubits, the structural
    precondition/postcondition transformers agree with the independent
    operator-sum route at tolerance 1e-6."""
    rng, programs = loopfree_programs
    env = builtin_operators()
    amb = Register(("q0", "q1", "q2"))
    for stm in programs:
        ops = kraus_ops(stm, env, amb)
        r = rand_subspace(rng, 8)
        assert span_equal(wlp(stm, r, amb, env), kraus_wlp(ops, r), 1e-6)
        p = rand_subspace(rng, 8)
        assert span_equal(sp(stm, p, amb, env), kraus_sp(ops, p), 1e-6)


def test_c03_transformer_adjunction_no_disagreements(loopfree_programs):
    """P below wlp(S, Q) exactly when sp(S, P) below Q, over the same 200
    programs with fresh random P, Q: zero disagreements."""
    _, programs = loopfree_programs
    rng = np.random.default_rng(40404)
    env = builtin_operators()
    amb = Register(("q0", "q1", "q2"))
    disagreements = 0
    for stm in programs:
        p = rand_subspace(rng, 8)
        q = rand_subspace(rng, 8)
        if leq(p, wlp(stm, q, amb, env)) != leq(sp(stm, p, amb, env), q):
            disagreements += 1
    assert disagreements == 0


def test_c04_phase_kickback_circuit_statistics_and_triple():
    """The phase-kickback circuit on |00><00| tensor the maximally
    entangled pair splits 5/8 : 3/8 on the |00>-outcome (within 1e-9),
    satisfies its correctness triple, and runs in under 1 s."""
    env = dict(builtin_operators())
    env["Rz"] = param_gate("Rz", np.arccos(0.6))
    env["Pnot00"] = np.eye(4) - env["P00"]
    prog = lang.parse_program(
        "H[q0]; H[q1]; CCX[q0 q1 t]; S[t]; CCX[q0 q1 t]; H[q0]; H[q1]; "
        "if Pnot00[q0 q1] then Z[t] else skip end")
    amb = Register(("q0", "q1", "t", "t'"))
    rho = DensityState(np.kron(env["P00"], env["Omega"]), amb)

    t0 = time.monotonic()
    out = simulate(prog, rho, env)
    p00_big = np.kron(env["P00"], np.eye(4))
    kept = float(np.trace(p00_big @ out.mat).real)
    rest = float(np.trace((np.eye(16) - p00_big) @ out.mat).real)
    assert abs(kept - 5 / 8) <= 1e-9
    assert abs(rest - 3 / 8) <= 1e-9

    pre = eval_subspace_on(
        lang.parse_operator("P00[q0 q1] ⊗ Omega[t t']"), env, amb)
    post = eval_subspace_on(
        lang.parse_operator("(Pnot00[q0 q1] ⊗ Omega[t t']) ∨ "
                            "(P00[q0 q1] ⊗ (Rz[t] * Omega[t t'] * Rz[t]†))"),
        env, amb)
    report = hoare_valid(pre, prog, post, amb, env, trace=TRACE,
                         cross_check=True)
    assert report.valid and report.sp_agrees
    assert time.monotonic() - t0 < 1.0


def test_c05_rotation_script_replay_extract_and_fidelity(rotation_replay):
    """The bundled rotation script replays to a cleared goal and End; the
    extracted program is executable and, simulated on |+> (loop residual
    1e-10, at most 200 iterations), matches the target one-qubit rotation
    of |+> with fidelity at least 1 - 1e-6."""
    results = rotation_replay["results"]
    assert all(r.ok for r in results), [r.report() for r in results if not r.ok]
    end = [r for r in results if r.kind == "End"]
    assert len(end) == 1 and end[0].goals == "Goal Clear."

    sess = rotation_replay["session"]
    assert sess.completed
    prog = rotation_replay["state"].env.lookup("S0")
    assert prog is not None and not contains_prescription(prog.value)
    assert rotation_replay["report"].valid

    rho = rotation_replay["state"].env.lookup("rho").value
    reduced = partial_trace(rho.mat, rho.reg,
                            rho.reg.minus(Register(("t",))))
    rz = rotation_replay["config"].operators["Rz"]
    target = rz @ (np.array([1.0, 1.0]) / np.sqrt(2.0))
    assert state_fidelity(reduced, target) >= 1.0 - 1e-6


def test_c06_repetition_script_goal_transcript_and_recovery(repetition_replay):
    """The repetition-code script replays with byte-identical goal
    displays at the pinned checkpoints; the extracted recovery program
    satisfies its triple and maps each single-flip code state back to the
    undamaged one within 1e-9."""
    state = repetition_replay["state"]
    results = repetition_replay["results"]
    assert all(r.ok for r in results)
    for i, expected in REPETITION_CHECKPOINTS.items():
        assert results[i - 1].goals == expected, f"command {i}"

    sess = state.env.lookup("Rep").value
    body = sess.extract()
    amb = sess.ambient
    pre = eval_subspace_on(sess.root.pre_ast, state.env, amb)
    post = eval_subspace_on(sess.root.post_ast, state.env, amb)
    report = hoare_valid(pre, body, post, amb, state.env, trace=TRACE,
                         cross_check=True)
    assert report.valid and report.sp_agrees

    pairs = {"e0": (0b0000, 0b1111), "e1": (0b1000, 0b0111),
             "e2": (0b0100, 0b1011), "e3": (0b0010, 0b1101)}
    vecs = {}
    for name, (a, b) in pairs.items():
        v = np.zeros(16, dtype=np.complex128)
        v[a] = v[b] = 1.0 / np.sqrt(2.0)
        vecs[name] = v
    target = np.outer(vecs["e0"], vecs["e0"].conj())
    for name in ("e1", "e2", "e3"):
        rho = DensityState(np.outer(vecs[name], vecs[name].conj()), amb)
        out = simulate(body, rho, state.env)
        assert np.max(np.abs(out.mat - target)) <= 1e-9, name


def test_c07_value_arithmetic_gadgets(bernoulli_replay):
    """At parameter 0.3: the carrier gates are unitary within 1e-10; the
    product gadget yields the value 3/7 and the two sum gadgets the
    values sqrt(3/7)+1 and 10/7, each with state fidelity at least
    1 - 1e-6 under loop residual 1e-12."""
    for c in (np.sqrt(3 / 7), 3 / 7, 1.0, np.sqrt(2.0)):
        u = param_gate("Uc", c)
        assert np.max(np.abs(u @ u.conj().T - np.eye(2))) <= 1e-10
    b = builtin_operators()["B"]
    assert np.max(np.abs(b @ b.conj().T - np.eye(4))) <= 1e-10

    state = bernoulli_replay["state"]
    assert all(r.ok for r in bernoulli_replay["results"])
    targets = {"mulOut": 3 / 7,
               "addOut": np.sqrt(3 / 7) + 1.0,
               "addcOut": 10 / 7}
    for name, h in targets.items():
        rho = state.env.lookup(name).value
        assert rho.reg == Register(("q",))
        assert state_fidelity(rho.mat, enc(h)) >= 1.0 - 1e-6, name


def test_c08_assertion_weakening_counterexample_via_test_command():
    """The computed precondition of `assert |0><0|` for the target |+><+|
    is |1><1|, which the engine's Test confirms; the follow-up inclusion
    |1><1| below |+><+| fails, so the classical rule of weakening an
    assertion's target is unsound here."""
    env = dict(builtin_operators())
    q = Register(("q",))
    post = eval_subspace_on(lang.parse_operator("Pp[q]"), env, q)
    w = wlp(lang.parse_program("assert P0[q]"), post, q, env)

    cfg = Config(operators={"W": w.projector()})
    st = EngineState(cfg)
    confirmed = one(st, "Test W[q] = P1[q].")
    assert confirmed.ok and confirmed.value is True
    inclusion = one(st, "Test P1[q] <= Pp[q].")
    assert not inclusion.ok and inclusion.value is False


def test_c09_loop_fixpoint_rank_discipline(rotation_replay,
                                           repetition_replay,
                                           bernoulli_replay,
                                           fuzzed_sessions):
    """Across every loop fixpoint computed above: precondition iterate
    ranks never increase, postcondition iterate ranks never decrease, and
    the fixpoint lands within dim+1 iterations."""
    kinds = {kind for kind, _, _ in TRACE.records}
    assert kinds == {"wlp", "sp"}, TRACE.records
    for kind, dim, ranks in TRACE.records:
        assert len(ranks) - 1 <= dim + 1, (kind, dim, ranks)
        deltas = [b - a for a, b in zip(ranks, ranks[1:])]
        if kind == "wlp":
            assert all(d <= 0 for d in deltas), (kind, dim, ranks)
        else:
            assert all(d >= 0 for d in deltas), (kind, dim, ranks)
        assert ranks[-2] == ranks[-1], (kind, dim, ranks)


def test_c10_random_refinements_extract_valid_programs(fuzzed_sessions):
    """100 random tactic sequences over random two-qubit prescriptions,
    each driven to End: every extracted program is prescription-free and
    satisfies the triple it was refined from."""
    assert len(fuzzed_sessions) == 100
    for i, (sess, prog, report) in enumerate(fuzzed_sessions):
        assert sess.completed, i
        assert not contains_prescription(prog), i
        assert report.valid, i
        assert report.sp_agrees, i
