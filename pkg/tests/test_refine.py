"""Tests for interactive refinement sessions.

The error-correction walkthrough pins the exact goal display after each
command; the random driver applies arbitrary tactic sequences and checks
every extracted program against the triple it was refined from.
"""

from importlib.resources import files

import numpy as np
import pytest

from qrefine import lang as L
from qrefine.lattice import DEFAULT_TOL, Subspace, equals, leq
from qrefine.opeval import eval_operator, eval_subspace_on
from qrefine.qop import DensityState, Register, builtin_operators
from qrefine.refine import Session, TacticError
from qrefine.semantics import SimOptions, hoare_valid, simulate

from helpers import rand_subspace


def op(text):
    ast, = [L.parse_operator(text)]
    return ast


def new_env():
    return dict(builtin_operators())


def session(pre, post, env=None, name="C"):
    return Session(name, op(pre), op(post), env or new_env())


def apply_command(cmd, env, sess):
    """Minimal dispatcher used to replay scripts at the session level."""
    if isinstance(cmd, L.CDefOp):
        env[cmd.name] = eval_operator(cmd.op, env)
        return sess
    if isinstance(cmd, L.CRefine):
        return Session(cmd.name, cmd.pre, cmd.post, env)
    if isinstance(cmd, L.CStep):
        sess.step_program(cmd.prog)
    elif isinstance(cmd, L.CStepSeq):
        sess.step_seq(cmd.op)
    elif isinstance(cmd, L.CStepIf):
        sess.step_if(cmd.op)
    elif isinstance(cmd, L.CStepWhile):
        sess.step_while(cmd.guard, cmd.inv)
    elif isinstance(cmd, L.CWeakenPre):
        sess.weaken_pre(cmd.op)
    elif isinstance(cmd, L.CStrengthenPost):
        sess.strengthen_post(cmd.op)
    elif isinstance(cmd, L.CChoose):
        sess.choose(cmd.n)
    elif isinstance(cmd, L.CEnd):
        sess.end()
    else:
        raise AssertionError(f"unexpected command {cmd}")
    return sess


def load_script(name):
    text = files("qrefine").joinpath(f"scripts/{name}").read_text()
    cmds, diags = L.parse_script(text)
    assert diags == []
    return [c for c, _span in cmds]


class TestBasicTactics:
    def test_initial_goal(self):
        s = session("Pp[q]", "P0[q]")
        assert s.display() == "Goal (1/1)\n< Pp[q], P0[q] >"
        assert s.ambient.names == ("q",)
        assert not s.completed

    def test_step_skip_closes_matching_goal(self):
        s = session("P0[q]", "P0[q]")
        s.step_program(L.parse_program("skip"))
        assert s.display() == "Goal Clear."
        s.end()
        # extraction yields the bare program: no wrapper, no prescription
        assert isinstance(s.extract(), L.SSkip)

    def test_step_rejects_insufficient_program(self):
        s = session("Pp[q]", "P0[q]")
        with pytest.raises(TacticError):
            s.step_program(L.parse_program("skip"))
        # failed tactic must leave the session untouched
        assert len(s.goals) == 1 and s.goals[0].is_open()
        assert s.display() == "Goal (1/1)\n< Pp[q], P0[q] >"

    def test_step_unknown_operator_is_tactic_error(self):
        s = session("P0[q]", "P0[q]")
        with pytest.raises(TacticError):
            s.step_program(L.parse_program("Mystery[q]"))

    def test_step_seq_splits(self):
        s = session("Pp[q]", "Pp[q]")
        s.step_seq(op("P0[q]"))
        assert len(s.goals) == 2
        assert s.display() == (
            "Goal (1/2)\n< Pp[q], P0[q] >\n"
            "Goal (2/2)\n< P0[q], Pp[q] >")
        # assert discharges both halves: P ⇝ P is the whole space
        s.step_program(L.parse_program("assert P0[q]"))
        s.step_program(L.parse_program("assert Pp[q]"))
        s.end()
        body = s.extract()
        assert isinstance(body, L.SSeq)
        assert isinstance(body.first, L.SAssert)
        assert isinstance(body.second, L.SAssert)

    def test_step_if_guard_partitions_precondition(self):
        s = session("Pp[q]", "P0[q]")
        s.step_if(op("P0[q]"))
        assert len(s.goals) == 2
        env = new_env()
        amb = Register(("q",))
        p0 = eval_subspace_on(op("P0[q]"), env, amb)
        p1 = eval_subspace_on(op("P1[q]"), env, amb)
        # |+⟩ is compatible with neither branch alone; the Sasaki
        # conjunction projects it onto the measurement outcome
        assert equals(s.goals[0].pre, p0)
        assert equals(s.goals[1].pre, p1)
        s.step_program(L.parse_program("skip"))
        s.step_program(L.parse_program("X[q]"))
        s.end()
        body = s.extract()
        assert isinstance(body, L.SIf)
        assert isinstance(body.then_s, L.SSkip)
        assert isinstance(body.else_s, L.SUnitary)
        amb2 = Register(("q",))
        pre = eval_subspace_on(s.root.pre_ast, env, amb2)
        post = eval_subspace_on(s.root.post_ast, env, amb2)
        assert hoare_valid(pre, body, post, amb2, env)

    def test_step_while(self):
        s = session("P0[q]", "P0[q]")
        s.step_while(op("P1[q]"), op("P0[q]"))
        assert len(s.goals) == 1
        # body precondition P1 ⋒ P0 is empty, so abort discharges it
        assert s.goals[0].pre.is_zero()
        s.step_program(L.parse_program("abort"))
        s.end()
        body = s.extract()
        assert isinstance(body, L.SWhile)
        assert isinstance(body.body, L.SAbort)

    def test_step_while_rejects_bad_invariant(self):
        s = session("Pp[q]", "P0[q]")
        with pytest.raises(TacticError, match="invariant"):
            s.step_while(op("P1[q]"), op("P0[q]"))
        s2 = session("P0[q]", "P1[q]")
        with pytest.raises(TacticError, match="postcondition"):
            s2.step_while(op("P1[q]"), op("I[q]"))
        assert len(s2.goals) == 1

    def test_step_repeat(self):
        s = session("Pp[q]", "P0[q]")
        s.step_repeat(op("P0[q]"))
        assert len(s.goals) == 1
        env = new_env()
        amb = Register(("q",))
        # run-again-or-arrive condition collapses to P0 here
        assert equals(s.goals[0].post, eval_subspace_on(op("P0[q]"), env, amb))
        s.step_program(L.parse_program("H[q]"))
        s.end()
        body = s.extract()
        assert isinstance(body, L.SRepeat)
        assert isinstance(body.body, L.SUnitary)
        pre = eval_subspace_on(s.root.pre_ast, env, amb)
        post = eval_subspace_on(s.root.post_ast, env, amb)
        assert hoare_valid(pre, body, post, amb, env)
        # execution agrees: from |+⟩ the loop lands in |0⟩ almost surely
        plus = np.array([1.0, 1.0], dtype=np.complex128) / np.sqrt(2.0)
        rho = DensityState(np.outer(plus, plus.conj()), amb)
        out = simulate(body, rho, env, SimOptions(max_while_iters=300,
                                                  residual_tol=1e-12))
        target = np.zeros((2, 2), dtype=np.complex128)
        target[0, 0] = 1.0
        assert np.max(np.abs(out.mat - target)) < 1e-9

    def test_step_pchoice_wpc(self):
        s = session("P0[q]", "P0[q]")
        s.step_pchoice(0.3, "wpc", (op("P0[q]"), op("P0[q]")))
        assert len(s.goals) == 2
        s.step_program(L.parse_program("skip"))
        s.step_program(L.parse_program("skip"))
        s.end()
        body = s.extract()
        assert isinstance(body, L.SPChoice)
        assert body.p == 0.3

    def test_step_pchoice_spc(self):
        s = session("P0[q]", "P0[q]")
        s.step_pchoice(0.5, "spc", (op("P0[q]"), op("c0[]")))
        assert len(s.goals) == 2
        assert s.goals[1].post.is_zero()
        s.step_program(L.parse_program("skip"))
        s.step_program(L.parse_program("abort"))
        s.end()
        assert isinstance(s.extract(), L.SPChoice)

    def test_step_pchoice_side_conditions(self):
        with pytest.raises(TacticError, match="between 0 and 1"):
            session("P0[q]", "P0[q]").step_pchoice(
                1.0, "wpc", (op("P0[q]"), op("P0[q]")))
        with pytest.raises(TacticError, match="meet"):
            session("P0[q]", "P0[q]").step_pchoice(
                0.5, "wpc", (op("P1[q]"), op("P1[q]")))
        with pytest.raises(TacticError, match="join"):
            session("P0[q]", "P0[q]").step_pchoice(
                0.5, "spc", (op("P1[q]"), op("c0[]")))
        with pytest.raises(TacticError, match="mode"):
            session("P0[q]", "P0[q]").step_pchoice(
                0.5, "mixed", (op("P0[q]"), op("P0[q]")))

    def test_weaken_pre_direction(self):
        s = session("P0[q]", "P0[q]")
        s.weaken_pre(op("I[q]"))
        assert s.display() == "Goal (1/1)\n< I[q], P0[q] >"
        bad = session("I[q]", "P0[q]")
        with pytest.raises(TacticError, match="precondition"):
            bad.weaken_pre(op("P0[q]"))
        assert bad.display() == "Goal (1/1)\n< I[q], P0[q] >"

    def test_strengthen_post_direction(self):
        s = session("P0[q]", "I[q]")
        s.strengthen_post(op("P0[q]"))
        assert s.display() == "Goal (1/1)\n< P0[q], P0[q] >"
        with pytest.raises(TacticError, match="postcondition"):
            session("P0[q]", "P0[q]").strengthen_post(op("I[q]"))

    def test_weaken_strengthen_drop_out_of_extract(self):
        s = session("P0[q]", "I[q]")
        s.weaken_pre(op("I[q]"))
        s.strengthen_post(op("I[q]"))
        s.step_program(L.parse_program("skip"))
        s.end()
        assert isinstance(s.extract(), L.SSkip)

    def test_step_strips_literal_refinement_wrappers(self):
        s = session("P0[q]", "P1[q]")
        s.step_program(L.parse_program("< P0[q], P1[q] > <= X[q]"))
        s.end()
        assert isinstance(s.extract(), L.SUnitary)

    def test_step_block_wrapped_prescription(self):
        s = session("P0[q]", "P0[q]")
        s.step_program(L.parse_program(
            "begin local a : < P0[q], P0[q] ∧ P0[a] > end"))
        assert s.ambient.names == ("q", "a")
        assert s.display() == "Goal (1/1)\n< P0[q], (P0[q] ∧ P0[a]) >"
        # initializing the local establishes the strengthened inner post
        s.step_program(L.parse_program("a :=0"))
        s.end()
        body = s.extract()
        assert isinstance(body, L.SBlockLocal)
        assert isinstance(body.body, L.SInit)
        env = new_env()
        amb = Register(("q",))
        p0 = np.zeros((2, 2), dtype=np.complex128)
        p0[0, 0] = 1.0
        out = simulate(body, DensityState(p0, amb), env)
        assert np.max(np.abs(out.mat - p0)) < 1e-12

    def test_step_block_rejects_stale_local(self):
        s = session("P0[q]", "P0[q]")
        with pytest.raises(TacticError, match="fresh"):
            s.step_program(L.parse_program(
                "begin local q : < P0[q], P0[q] > end"))


class TestGoalManagement:
    def test_choose_switches_current_goal(self):
        s = session("Pp[q]", "P0[q]")
        s.step_if(op("P0[q]"))
        s.choose(2)
        s.step_program(L.parse_program("X[q]"))
        # the surviving goal is the untouched then-branch
        assert s.display() == "Goal (1/1)\n< (P0[q] ⋒ Pp[q]), P0[q] >"
        with pytest.raises(TacticError):
            s.choose(2)
        with pytest.raises(TacticError):
            s.choose(0)

    def test_children_splice_at_goal_position(self):
        s = session("Pp[q]", "P0[q]")
        s.step_if(op("P0[q]"))
        s.choose(2)
        s.step_if(op("P1[q]"))
        # goal 2 expanded in place: [then, else-then, else-else]
        assert len(s.goals) == 3
        assert s.current == 1
        texts = s.display().split("Goal ")
        assert "< (P0[q] ⋒ Pp[q]), P0[q] >" in texts[1]

    def test_end_requires_no_goals(self):
        s = session("P0[q]", "P0[q]")
        with pytest.raises(TacticError, match="open"):
            s.end()
        s.step_program(L.parse_program("skip"))
        s.end()
        assert s.completed
        with pytest.raises(TacticError, match="complete"):
            s.end()
        with pytest.raises(TacticError, match="complete"):
            s.step_program(L.parse_program("skip"))

    def test_extract_requires_end(self):
        s = session("P0[q]", "P0[q]")
        s.step_program(L.parse_program("skip"))
        with pytest.raises(TacticError, match="End"):
            s.extract()

    def test_to_dict_snapshot(self):
        s = session("Pp[q]", "P0[q]")
        s.step_if(op("P0[q]"))
        d = s.to_dict()
        assert d["name"] == "C"
        assert d["ambient"] == ["q"]
        assert d["completed"] is False
        assert d["current"] == 1
        assert len(d["goals"]) == 2
        tree = d["tree"]
        assert tree["rule"] == "if"
        assert [c["goal_id"] for c in tree["children"]] == d["goals"]
        assert tree["pre"] == "Pp[q]"


class TestAmbientGrowth:
    def test_step_seq_extends_ambient_and_lifts_goals(self):
        s = session("P0[a]", "P0[a]")
        assert s.ambient.names == ("a",)
        s.step_seq(op("Omega[a b]"))
        assert s.ambient.names == ("a", "b")
        env = new_env()
        lifted = eval_subspace_on(op("P0[a]"), env, s.ambient)
        assert s.goals[0].pre.dim == 4
        assert equals(s.goals[0].pre, lifted)
        omega = eval_subspace_on(op("Omega[a b]"), env, s.ambient)
        assert equals(s.goals[0].post, omega)

    def test_step_program_extends_ambient(self):
        s = session("P0[a]", "P0[a]")
        s.step_program(L.parse_program("CX[a b]"))
        assert s.ambient.names == ("a", "b")
        s.end()
        env = new_env()
        prog = s.extract()
        pre = eval_subspace_on(s.root.pre_ast, env, s.ambient)
        post = eval_subspace_on(s.root.post_ast, env, s.ambient)
        assert hoare_valid(pre, prog, post, s.ambient, env)

    def test_failed_tactic_leaves_goals_consistent(self):
        s = session("Pp[a]", "P0[a]")
        with pytest.raises(TacticError):
            s.step_program(L.parse_program("CX[a b]"))
        # the check ran against the grown register, but no goal changed
        assert len(s.goals) == 1 and s.goals[0].is_open()
        assert s.goals[0].pre.dim == s.ambient.dim
        env = new_env()
        assert equals(s.goals[0].pre,
                      eval_subspace_on(s.goals[0].pre_ast, env, s.ambient))


REPETITION_CHECKPOINTS = {
    7: "Goal (1/1)\n"
       "< Pe[q1 q2 q3 a], Pe0[q1 q2 q3 a] >",
    8: "Goal (1/2)\n"
       "< (Peq[q1 q2] ⋒ Pe[q1 q2 q3 a]), Pe0[q1 q2 q3 a] >\n"
       "Goal (2/2)\n"
       "< ((Peq[q1 q2]^⊥) ⋒ Pe[q1 q2 q3 a]), Pe0[q1 q2 q3 a] >",
    10: "Goal (1/3)\n"
        "< Pe0[q1 q2 q3 a], Pe0[q1 q2 q3 a] >\n"
        "Goal (2/3)\n"
        "< ((Peq[q2 q3]^⊥) ⋒ (Peq[q1 q2] ⋒ Pe[q1 q2 q3 a])), Pe0[q1 q2 q3 a] >\n"
        "Goal (3/3)\n"
        "< ((Peq[q1 q2]^⊥) ⋒ Pe[q1 q2 q3 a]), Pe0[q1 q2 q3 a] >",
    13: "Goal (1/1)\n"
        "< ((Peq[q1 q2]^⊥) ⋒ Pe[q1 q2 q3 a]), Pe0[q1 q2 q3 a] >",
    19: "Goal Clear.",
}


class TestRepetitionWalkthrough:
    def test_goal_evolution_matches_transcript(self):
        cmds = load_script("repetition.qrs")
        env = new_env()
        sess = None
        counts = []
        for i, cmd in enumerate(cmds, 1):
            sess = apply_command(cmd, env, sess)
            if sess is not None:
                counts.append(len(sess.goals))
                if i in REPETITION_CHECKPOINTS:
                    assert sess.display() == REPETITION_CHECKPOINTS[i], i
        assert counts == [1, 2, 3, 3, 2, 2, 1, 2, 2, 1, 1, 0, 0]
        assert sess.completed

    def _finished_session(self):
        cmds = load_script("repetition.qrs")
        env = new_env()
        sess = None
        for cmd in cmds:
            sess = apply_command(cmd, env, sess)
        return env, sess

    def test_extracted_recovery_program(self):
        env, sess = self._finished_session()
        body = sess.extract()
        assert isinstance(body, L.SIf)
        assert isinstance(body.then_s, L.SIf)
        assert isinstance(body.else_s, L.SIf)
        assert isinstance(body.then_s.then_s, L.SSkip)
        amb = sess.ambient
        pre = eval_subspace_on(sess.root.pre_ast, env, amb)
        post = eval_subspace_on(sess.root.post_ast, env, amb)
        report = hoare_valid(pre, body, post, amb, env, cross_check=True)
        assert report.valid and report.sp_agrees

    def test_extracted_program_corrects_single_flips(self):
        env, sess = self._finished_session()
        body = sess.extract()
        amb = sess.ambient
        vecs = {}
        for name, a, b in (("e0", 0b0000, 0b1111), ("e1", 0b1000, 0b0111),
                           ("e2", 0b0100, 0b1011), ("e3", 0b0010, 0b1101)):
            v = np.zeros(16, dtype=np.complex128)
            v[a] = v[b] = 1.0 / np.sqrt(2.0)
            vecs[name] = v
        target = np.outer(vecs["e0"], vecs["e0"].conj())
        for name in ("e1", "e2", "e3"):
            rho = DensityState(np.outer(vecs[name], vecs[name].conj()), amb)
            out = simulate(body, rho, env)
            assert np.max(np.abs(out.mat - target)) < 1e-9, name


class _Driver:
    """Applies random tactics to a session until every goal is closed."""

    GUARDS = ["P0[q0]", "P1[q1]", "Pp[q0]", "Omega[q0 q1]",
              "RG0[q0 q1]", "RG1[q0 q1]"]
    MIDS = ["P0[q0]", "Pp[q1]", "RG2[q0 q1]", "I[q0]"]
    UNITS = ["X[q0]", "H[q1]", "CX[q0 q1]", "S[q0]", "Z[q1]"]

    def __init__(self, rng, env):
        self.rng = rng
        self.env = env
        self.used = {"if": 0, "seq": 0, "while": 0, "repeat": 0,
                     "pchoice": 0, "weaken": 0, "strengthen": 0,
                     "unitary": 0, "abort": 0, "choose": 0}

    def _try(self, sess, kind):
        rng = self.rng
        if kind == "if":
            sess.step_if(op(rng.choice(self.GUARDS)))
        elif kind == "seq":
            sess.step_seq(op(rng.choice(self.MIDS)))
        elif kind == "while":
            sess.step_while(op(rng.choice(self.GUARDS)),
                            op(rng.choice(self.MIDS + ["I[q0]"])))
        elif kind == "repeat":
            sess.step_repeat(op(rng.choice(self.GUARDS)))
        elif kind == "pchoice":
            goal = sess.goals[sess.current - 1]
            p = float(rng.uniform(0.1, 0.9))
            if rng.random() < 0.5:
                sess.step_pchoice(p, "wpc", (goal.pre_ast, goal.pre_ast))
            else:
                sess.step_pchoice(p, "spc", (goal.post_ast, op("c0[]")))
        elif kind == "weaken":
            sess.weaken_pre(op("I[q0]"))
        elif kind == "strengthen":
            sess.strengthen_post(op("c0[]"))
        elif kind == "unitary":
            sess.step_program(L.parse_program(rng.choice(self.UNITS)))
        elif kind == "choose":
            sess.choose(int(rng.integers(1, len(sess.goals) + 1)))
        self.used[kind] += 1

    def run(self, sess, budget):
        kinds = [k for k in self.used if k != "abort"]
        while budget > 0 and sess.goals:
            kind = self.rng.choice(kinds)
            try:
                self._try(sess, kind)
            except TacticError:
                continue
            budget -= 1
        while sess.goals:
            sess.step_program(L.parse_program("abort"))
            self.used["abort"] += 1
        sess.end()


class TestRandomTacticDriver:
    def test_random_sessions_extract_valid_programs(self):
        rng = np.random.default_rng(20260825)
        totals = None
        for trial in range(30):
            env = new_env()
            for name in ("RG0", "RG1", "RG2", "RootP", "RootQ"):
                env[name] = rand_subspace(rng, 4).projector()
            sess = Session("T", op("RootP[q0 q1]"), op("RootQ[q0 q1]"), env)
            driver = _Driver(rng, env)
            driver.run(sess, budget=int(rng.integers(2, 9)))
            assert sess.completed
            prog = sess.extract()
            from qrefine.refine import contains_prescription
            assert not contains_prescription(prog)
            amb = sess.ambient
            pre = eval_subspace_on(sess.root.pre_ast, env, amb)
            post = eval_subspace_on(sess.root.post_ast, env, amb)
            assert hoare_valid(pre, prog, post, amb, env), trial
            if totals is None:
                totals = dict(driver.used)
            else:
                for k, v in driver.used.items():
                    totals[k] += v
        # the run must actually exercise the structural rules
        for kind in ("if", "seq", "repeat", "pchoice", "weaken", "unitary"):
            assert totals[kind] > 0, totals
