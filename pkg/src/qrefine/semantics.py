"""Program semantics: the wlp / sp subspace transformers, a density-matrix
simulator, Hoare-triple checking, and an independent Kraus-operator oracle.

All three semantic views run over a fixed ambient register.  Guards and
assertions inside a program are operator expressions; they are evaluated
against an environment and cylindrically extended into the ambient space.

wlp(S, R) is the largest subspace P such that every execution of S from a
state inside P ends inside R; sp(S, P) is the smallest subspace containing
every output reachable from P.  Probabilistic choice takes the meet (dually
the join) over its branches; loops are computed as rank-monotone fixpoint
iterations, which terminate because ranks move through a finite chain.

The simulator never truncates silently: a loop that still carries more
than `residual_tol` of trace mass after `max_while_iters` rounds raises
NonConvergence.
"""

from dataclasses import dataclass

import numpy as np

from . import lang
from .lattice import (DEFAULT_TOL, Subspace, complement, eigenspace_one,
                      equals, full, join, kernel_of, leq, meet,
                      sasaki_conjunct, sasaki_implies, support_of, zero)
from .opeval import EvalError, _eval, eval_subspace_on
from .qop import (DensityState, LabelledOp, MatrixOp, Register,
                  extend_matrix, lift_state, partial_trace, split_index_map)


class SemanticsError(Exception):
    """A program cannot be given the requested semantics."""


class NonConvergence(SemanticsError):
    """A simulated loop retained too much trace mass."""

    def __init__(self, iterations, residual):
        super().__init__(
            f"loop kept trace {residual:.3e} after {iterations} iterations")
        self.iterations = iterations
        self.residual = residual


@dataclass
class SimOptions:
    max_while_iters: int = 1000
    residual_tol: float = 1e-10


class FixpointTrace:
    """Records the rank sequence of every loop fixpoint iteration."""

    def __init__(self):
        self.records = []  # (kind, dim, [rank0, rank1, ...])

    def record(self, kind, dim, ranks):
        self.records.append((kind, dim, list(ranks)))


_WLP_WHILE_CAP_FACTOR = 4


# ---------------------------------------------------------------------------
# free qubits
# ---------------------------------------------------------------------------

def _op_names(ast, out):
    if isinstance(ast, lang.OpLabelled):
        for q in ast.names:
            if q not in out:
                out.append(q)
        _op_names(ast.op, out)
    elif isinstance(ast, (lang.OpNeg, lang.OpScalarMul, lang.OpAdjoint,
                          lang.OpComplement)):
        _op_names(ast.a, out)
    elif isinstance(ast, lang._BinOp):
        _op_names(ast.a, out)
        _op_names(ast.b, out)


def free_qubits(stm, env, _seen=None):
    """The qubits a program touches, in first-appearance order; local
    blocks bind their own names away."""
    out = []
    _collect_qubits(stm, env, out, _seen if _seen is not None else set())
    return Register(out)


def _collect_qubits(stm, env, out, seen):
    if isinstance(stm, (lang.SAbort, lang.SSkip)):
        return
    if isinstance(stm, lang.SInit):
        for q in stm.names:
            if q not in out:
                out.append(q)
        return
    if isinstance(stm, (lang.SUnitary, lang.SAssert)):
        _op_names(stm.op, out)
        return
    if isinstance(stm, lang.SPrescription):
        _op_names(stm.pre, out)
        _op_names(stm.post, out)
        return
    if isinstance(stm, lang.SRefined):
        _op_names(stm.pre, out)
        _op_names(stm.post, out)
        _collect_qubits(stm.body, env, out, seen)
        return
    if isinstance(stm, lang.SSeq):
        _collect_qubits(stm.first, env, out, seen)
        _collect_qubits(stm.second, env, out, seen)
        return
    if isinstance(stm, lang.SPChoice):
        _collect_qubits(stm.s1, env, out, seen)
        _collect_qubits(stm.s2, env, out, seen)
        return
    if isinstance(stm, lang.SIf):
        _op_names(stm.guard, out)
        _collect_qubits(stm.then_s, env, out, seen)
        _collect_qubits(stm.else_s, env, out, seen)
        return
    if isinstance(stm, (lang.SWhile, lang.SRepeat)):
        _op_names(stm.guard, out)
        _collect_qubits(stm.body, env, out, seen)
        return
    if isinstance(stm, lang.SBlockLocal):
        inner = []
        _collect_qubits(stm.body, env, inner, seen)
        for q in inner:
            if q not in stm.names and q not in out:
                out.append(q)
        return
    if isinstance(stm, lang.SProc):
        body = _lookup_program(env, stm.name)
        if stm.name in seen:
            raise SemanticsError(f"recursive procedure {stm.name!r}")
        seen.add(stm.name)
        _collect_qubits(body, env, out, seen)
        seen.discard(stm.name)
        return
    raise SemanticsError(f"not a program node: {stm!r}")


_STM_NODES = (lang.SAbort, lang.SSkip, lang.SInit, lang.SUnitary, lang.SAssert,
              lang.SPrescription, lang.SRefined, lang.SSeq, lang.SPChoice,
              lang.SIf, lang.SWhile, lang.SRepeat, lang.SBlockLocal, lang.SProc)


def _lookup_program(env, name):
    try:
        value = env[name]
    except KeyError:
        raise SemanticsError(f"unknown procedure {name!r}") from None
    if not isinstance(value, _STM_NODES):
        raise SemanticsError(f"{name!r} does not name a program")
    return value


# ---------------------------------------------------------------------------
# register plumbing
# ---------------------------------------------------------------------------

def _front_split(ambient, names):
    """Permutations between the ambient index order and the order that
    puts `names` in front."""
    front = Register(names)
    if not front.issubset(ambient):
        raise SemanticsError(f"qubits {front} not inside ambient {ambient}")
    u_of_t = np.asarray(split_index_map(ambient, front), dtype=np.intp)
    t_of_u = np.empty_like(u_of_t)
    t_of_u[u_of_t] = np.arange(u_of_t.size)
    return front, u_of_t, t_of_u


def _guard(ast, env, ambient, tol):
    try:
        return eval_subspace_on(ast, env, ambient, tol)
    except EvalError as exc:
        raise SemanticsError(str(exc)) from None


def _unitary_ext(ast, env, ambient, tol):
    try:
        m, r = _eval(ast, env, tol)
    except EvalError as exc:
        raise SemanticsError(str(exc)) from None
    if r is not None:
        if not r.issubset(ambient):
            raise SemanticsError(f"operator on {r} not inside ambient {ambient}")
        m = extend_matrix(m, r, ambient)
    elif m.shape[0] != ambient.dim:
        raise SemanticsError(
            f"unlabelled operator of dimension {m.shape[0]} in ambient of "
            f"dimension {ambient.dim}")
    if np.max(np.abs(m.conj().T @ m - np.eye(ambient.dim))) > tol.incl:
        raise SemanticsError("statement operator is not unitary")
    return m


def _desugar_repeat(stm):
    # repeat S until P  ==  S; while P^⊥ do S end
    return lang.SSeq(stm.body, lang.SWhile(lang.OpComplement(stm.guard), stm.body))


def _check_weight(p):
    if not 0.0 <= p <= 1.0:
        raise SemanticsError(f"choice weight {p} outside [0, 1]")


# ---------------------------------------------------------------------------
# weakest liberal precondition
# ---------------------------------------------------------------------------

def wlp(stm, post, ambient, env, tol=DEFAULT_TOL, trace=None):
    """Largest subspace from which every run of `stm` lands in `post`."""
    d = ambient.dim
    if post.dim != d:
        raise SemanticsError(f"postcondition dim {post.dim} vs ambient {d}")
    if isinstance(stm, lang.SAbort):
        return full(d)
    if isinstance(stm, lang.SSkip):
        return post
    if isinstance(stm, lang.SInit):
        front, u_of_t, t_of_u = _front_split(ambient, stm.names)
        fdim = front.dim
        rdim = d // fdim
        big = post.projector()[np.ix_(t_of_u, t_of_u)]
        corner = big[:rdim, :rdim]  # <0...0| R |0...0> on the other qubits
        e = eigenspace_one(corner, tol)
        lifted = np.kron(np.eye(fdim, dtype=np.complex128), e.projector())
        return support_of(lifted[np.ix_(u_of_t, u_of_t)], tol)
    if isinstance(stm, lang.SUnitary):
        u = _unitary_ext(stm.op, env, ambient, tol)
        return Subspace(d, u.conj().T @ post.basis)
    if isinstance(stm, lang.SAssert):
        p = _guard(stm.op, env, ambient, tol)
        return sasaki_implies(p, post, tol)
    if isinstance(stm, lang.SPrescription):
        p = _guard(stm.pre, env, ambient, tol)
        q = _guard(stm.post, env, ambient, tol)
        if post.is_full():
            return full(d)
        if leq(q, post, tol):
            return p
        return zero(d)
    if isinstance(stm, lang.SRefined):
        return wlp(stm.body, post, ambient, env, tol, trace)
    if isinstance(stm, lang.SSeq):
        return wlp(stm.first, wlp(stm.second, post, ambient, env, tol, trace),
                   ambient, env, tol, trace)
    if isinstance(stm, lang.SPChoice):
        _check_weight(stm.p)
        if stm.p >= 1.0:
            return wlp(stm.s1, post, ambient, env, tol, trace)
        if stm.p <= 0.0:
            return wlp(stm.s2, post, ambient, env, tol, trace)
        return meet(wlp(stm.s1, post, ambient, env, tol, trace),
                    wlp(stm.s2, post, ambient, env, tol, trace), tol)
    if isinstance(stm, lang.SIf):
        g = _guard(stm.guard, env, ambient, tol)
        wt = wlp(stm.then_s, post, ambient, env, tol, trace)
        we = wlp(stm.else_s, post, ambient, env, tol, trace)
        return meet(sasaki_implies(g, wt, tol),
                    sasaki_implies(complement(g), we, tol), tol)
    if isinstance(stm, lang.SWhile):
        g = _guard(stm.guard, env, ambient, tol)
        gbar = complement(g)
        cur = full(d)
        ranks = [cur.rank]
        for _ in range(_WLP_WHILE_CAP_FACTOR * d):
            nxt = meet(sasaki_implies(g, wlp(stm.body, cur, ambient, env, tol, trace), tol),
                       sasaki_implies(gbar, post, tol), tol)
            ranks.append(nxt.rank)
            if nxt.rank > cur.rank:
                raise SemanticsError("loop precondition rank increased")
            if equals(nxt, cur, tol):
                if trace is not None:
                    trace.record("wlp", d, ranks)
                return nxt
            cur = nxt
        raise SemanticsError("loop precondition failed to reach a fixpoint")
    if isinstance(stm, lang.SRepeat):
        return wlp(_desugar_repeat(stm), post, ambient, env, tol, trace)
    if isinstance(stm, lang.SBlockLocal):
        raise SemanticsError(
            "local blocks have no predicate-transformer semantics here; "
            "run them with the simulator")
    if isinstance(stm, lang.SProc):
        return wlp(_lookup_program(env, stm.name), post, ambient, env, tol, trace)
    raise SemanticsError(f"not a program node: {stm!r}")


# ---------------------------------------------------------------------------
# strongest postcondition
# ---------------------------------------------------------------------------

def sp(stm, pre, ambient, env, tol=DEFAULT_TOL, trace=None):
    """Smallest subspace containing every output of `stm` from `pre`."""
    d = ambient.dim
    if pre.dim != d:
        raise SemanticsError(f"precondition dim {pre.dim} vs ambient {d}")
    if isinstance(stm, lang.SAbort):
        return zero(d)
    if isinstance(stm, lang.SSkip):
        return pre
    if isinstance(stm, lang.SInit):
        front, u_of_t, t_of_u = _front_split(ambient, stm.names)
        fdim = front.dim
        rdim = d // fdim
        big = pre.projector()[np.ix_(t_of_u, t_of_u)]
        reduced = sum(big[f * rdim:(f + 1) * rdim, f * rdim:(f + 1) * rdim]
                      for f in range(fdim))
        ground = np.zeros((fdim, fdim), dtype=np.complex128)
        ground[0, 0] = 1.0
        lifted = np.kron(ground, support_of(reduced, tol).projector())
        return support_of(lifted[np.ix_(u_of_t, u_of_t)], tol)
    if isinstance(stm, lang.SUnitary):
        u = _unitary_ext(stm.op, env, ambient, tol)
        return Subspace(d, u @ pre.basis)
    if isinstance(stm, lang.SAssert):
        p = _guard(stm.op, env, ambient, tol)
        return sasaki_conjunct(p, pre, tol)
    if isinstance(stm, lang.SPrescription):
        p = _guard(stm.pre, env, ambient, tol)
        q = _guard(stm.post, env, ambient, tol)
        if pre.is_zero():
            return zero(d)
        if leq(pre, p, tol):
            return q
        return full(d)
    if isinstance(stm, lang.SRefined):
        return sp(stm.body, pre, ambient, env, tol, trace)
    if isinstance(stm, lang.SSeq):
        return sp(stm.second, sp(stm.first, pre, ambient, env, tol, trace),
                  ambient, env, tol, trace)
    if isinstance(stm, lang.SPChoice):
        _check_weight(stm.p)
        if stm.p >= 1.0:
            return sp(stm.s1, pre, ambient, env, tol, trace)
        if stm.p <= 0.0:
            return sp(stm.s2, pre, ambient, env, tol, trace)
        return join(sp(stm.s1, pre, ambient, env, tol, trace),
                    sp(stm.s2, pre, ambient, env, tol, trace), tol)
    if isinstance(stm, lang.SIf):
        g = _guard(stm.guard, env, ambient, tol)
        return join(sp(stm.then_s, sasaki_conjunct(g, pre, tol), ambient, env, tol, trace),
                    sp(stm.else_s, sasaki_conjunct(complement(g), pre, tol),
                       ambient, env, tol, trace), tol)
    if isinstance(stm, lang.SWhile):
        g = _guard(stm.guard, env, ambient, tol)
        cur = zero(d)
        ranks = [cur.rank]
        for _ in range(_WLP_WHILE_CAP_FACTOR * d):
            nxt = join(pre, sp(stm.body, sasaki_conjunct(g, cur, tol),
                               ambient, env, tol, trace), tol)
            ranks.append(nxt.rank)
            if nxt.rank < cur.rank:
                raise SemanticsError("loop postcondition rank decreased")
            if equals(nxt, cur, tol):
                if trace is not None:
                    trace.record("sp", d, ranks)
                return sasaki_conjunct(complement(g), nxt, tol)
            cur = nxt
        raise SemanticsError("loop postcondition failed to reach a fixpoint")
    if isinstance(stm, lang.SRepeat):
        return sp(_desugar_repeat(stm), pre, ambient, env, tol, trace)
    if isinstance(stm, lang.SBlockLocal):
        raise SemanticsError(
            "local blocks have no predicate-transformer semantics here; "
            "run them with the simulator")
    if isinstance(stm, lang.SProc):
        return sp(_lookup_program(env, stm.name), pre, ambient, env, tol, trace)
    raise SemanticsError(f"not a program node: {stm!r}")


# ---------------------------------------------------------------------------
# density-matrix simulation
# ---------------------------------------------------------------------------

def simulate(stm, state, env, opts=None, tol=DEFAULT_TOL):
    """Run `stm` on a density state whose register covers the program's
    qubits; the result may be subnormalised (assertions postselect)."""
    opts = opts or SimOptions()
    needed = free_qubits(stm, env)
    if not needed.issubset(state.reg):
        raise SemanticsError(
            f"program touches {needed}, state only carries {state.reg}")
    mat = _run(stm, state.mat, state.reg, env, opts, tol)
    return DensityState(mat, state.reg, check=False)


def _run(stm, rho, reg, env, opts, tol):
    d = reg.dim
    if isinstance(stm, lang.SAbort):
        return np.zeros((d, d), dtype=np.complex128)
    if isinstance(stm, lang.SSkip):
        return rho
    if isinstance(stm, lang.SInit):
        front, u_of_t, t_of_u = _front_split(reg, stm.names)
        fdim = front.dim
        rdim = d // fdim
        big = rho[np.ix_(t_of_u, t_of_u)]
        acc = sum(big[f * rdim:(f + 1) * rdim, f * rdim:(f + 1) * rdim]
                  for f in range(fdim))
        out = np.zeros((d, d), dtype=np.complex128)
        out[:rdim, :rdim] = acc
        return out[np.ix_(u_of_t, u_of_t)]
    if isinstance(stm, lang.SUnitary):
        u = _unitary_ext(stm.op, env, reg, tol)
        return u @ rho @ u.conj().T
    if isinstance(stm, lang.SAssert):
        p = _guard(stm.op, env, reg, tol).projector()
        return p @ rho @ p
    if isinstance(stm, lang.SPrescription):
        raise SemanticsError("prescriptions cannot be executed; refine them away")
    if isinstance(stm, lang.SRefined):
        return _run(stm.body, rho, reg, env, opts, tol)
    if isinstance(stm, lang.SSeq):
        return _run(stm.second, _run(stm.first, rho, reg, env, opts, tol),
                    reg, env, opts, tol)
    if isinstance(stm, lang.SPChoice):
        _check_weight(stm.p)
        return (stm.p * _run(stm.s1, rho, reg, env, opts, tol)
                + (1.0 - stm.p) * _run(stm.s2, rho, reg, env, opts, tol))
    if isinstance(stm, lang.SIf):
        g = _guard(stm.guard, env, reg, tol).projector()
        gbar = np.eye(d) - g
        return (_run(stm.then_s, g @ rho @ g, reg, env, opts, tol)
                + _run(stm.else_s, gbar @ rho @ gbar, reg, env, opts, tol))
    if isinstance(stm, lang.SWhile):
        g = _guard(stm.guard, env, reg, tol).projector()
        gbar = np.eye(d) - g
        acc = np.zeros((d, d), dtype=np.complex128)
        cur = rho
        residual = float(np.real(np.trace(rho)))
        for _ in range(opts.max_while_iters):
            acc = acc + gbar @ cur @ gbar
            inside = g @ cur @ g
            residual = float(np.real(np.trace(inside)))
            if residual <= opts.residual_tol:
                return acc
            cur = _run(stm.body, inside, reg, env, opts, tol)
        raise NonConvergence(opts.max_while_iters, residual)
    if isinstance(stm, lang.SRepeat):
        return _run(_desugar_repeat(stm), rho, reg, env, opts, tol)
    if isinstance(stm, lang.SBlockLocal):
        for q in stm.names:
            if q in reg:
                raise SemanticsError(f"local qubit {q!r} shadows an outer qubit")
        wide = Register(reg.names + tuple(stm.names))
        lifted = lift_state(DensityState(rho, reg, check=False), wide)
        out = _run(stm.body, lifted.mat, wide, env, opts, tol)
        return partial_trace(out, wide, Register(stm.names))
    if isinstance(stm, lang.SProc):
        return _run(_lookup_program(env, stm.name), rho, reg, env, opts, tol)
    raise SemanticsError(f"not a program node: {stm!r}")


# ---------------------------------------------------------------------------
# Kraus oracle
# ---------------------------------------------------------------------------

def kraus_ops(stm, env, ambient, tol=DEFAULT_TOL, while_unroll=12):
    """Kraus operators of the channel denoted by `stm` over the ambient
    register.  Loops are unrolled syntactically to `while_unroll` turns,
    so the result is exact only for programs whose loops exit within that
    bound; the intended use is as an independent cross-check on the
    transformer clauses for loop-free programs."""
    d = ambient.dim
    if isinstance(stm, lang.SAbort):
        return []
    if isinstance(stm, lang.SSkip):
        return [np.eye(d, dtype=np.complex128)]
    if isinstance(stm, lang.SInit):
        front, _, _ = _front_split(ambient, stm.names)
        fdim = front.dim
        ops = []
        for i in range(fdim):
            e = np.zeros((fdim, fdim), dtype=np.complex128)
            e[0, i] = 1.0
            ops.append(extend_matrix(e, front, ambient))
        return ops
    if isinstance(stm, lang.SUnitary):
        return [_unitary_ext(stm.op, env, ambient, tol)]
    if isinstance(stm, lang.SAssert):
        return [np.asarray(_guard(stm.op, env, ambient, tol).projector())]
    if isinstance(stm, lang.SRefined):
        return kraus_ops(stm.body, env, ambient, tol, while_unroll)
    if isinstance(stm, lang.SSeq):
        first = kraus_ops(stm.first, env, ambient, tol, while_unroll)
        second = kraus_ops(stm.second, env, ambient, tol, while_unroll)
        return [f @ e for e in first for f in second]
    if isinstance(stm, lang.SPChoice):
        _check_weight(stm.p)
        return ([np.sqrt(stm.p) * e
                 for e in kraus_ops(stm.s1, env, ambient, tol, while_unroll)]
                + [np.sqrt(1.0 - stm.p) * e
                   for e in kraus_ops(stm.s2, env, ambient, tol, while_unroll)])
    if isinstance(stm, lang.SIf):
        g = np.asarray(_guard(stm.guard, env, ambient, tol).projector())
        gbar = np.eye(d) - g
        return ([e @ g for e in kraus_ops(stm.then_s, env, ambient, tol, while_unroll)]
                + [e @ gbar
                   for e in kraus_ops(stm.else_s, env, ambient, tol, while_unroll)])
    if isinstance(stm, lang.SWhile):
        return kraus_ops(_unroll_while(stm, while_unroll), env, ambient, tol,
                         while_unroll)
    if isinstance(stm, lang.SRepeat):
        return kraus_ops(_desugar_repeat(stm), env, ambient, tol, while_unroll)
    if isinstance(stm, lang.SProc):
        return kraus_ops(_lookup_program(env, stm.name), env, ambient, tol,
                         while_unroll)
    raise SemanticsError(f"no Kraus form for {type(stm).__name__}")


def _unroll_while(stm, k):
    if k <= 0:
        return lang.SIf(stm.guard, lang.SAbort(), lang.SSkip())
    return lang.SIf(stm.guard,
                    lang.SSeq(stm.body, _unroll_while(stm, k - 1)),
                    lang.SSkip())


def kraus_wlp(ops, post, tol=DEFAULT_TOL):
    """wlp via Kraus operators: ker(sum_E E^† (I - Q) E)."""
    d = post.dim
    qbar = np.eye(d) - post.projector()
    acc = np.zeros((d, d), dtype=np.complex128)
    for e in ops:
        acc += e.conj().T @ qbar @ e
    return kernel_of(acc, tol)


def kraus_sp(ops, pre, tol=DEFAULT_TOL):
    """sp via Kraus operators: supp(sum_E E P E^†)."""
    d = pre.dim
    p = pre.projector()
    acc = np.zeros((d, d), dtype=np.complex128)
    for e in ops:
        acc += e @ p @ e.conj().T
    return support_of(acc, tol)


# ---------------------------------------------------------------------------
# Hoare triples
# ---------------------------------------------------------------------------

@dataclass
class HoareReport:
    valid: bool
    wlp: Subspace
    residual: float
    witness: np.ndarray | None = None
    sp_agrees: bool | None = None

    def __bool__(self):
        return self.valid


def hoare_valid(pre, stm, post, ambient, env, tol=DEFAULT_TOL, trace=None,
                cross_check=False):
    """Does `pre` guarantee `post` across `stm`?  Decided as
    pre <= wlp(stm, post); on failure the report carries a state in `pre`
    that the transformer rejects."""
    w = wlp(stm, post, ambient, env, tol, trace)
    valid = leq(pre, w, tol)
    residual = 0.0
    witness = None
    if pre.rank:
        resid = (np.eye(ambient.dim) - w.projector()) @ pre.basis
        per_col = np.max(np.abs(resid), axis=0) if resid.size else np.zeros(pre.rank)
        residual = float(np.max(per_col))
        if not valid:
            witness = np.ascontiguousarray(pre.basis[:, int(np.argmax(per_col))])
    sp_agrees = None
    if cross_check:
        sp_agrees = leq(sp(stm, pre, ambient, env, tol, trace), post, tol)
    return HoareReport(valid, w, residual, witness, sp_agrees)


def annotate_post(stm, pre, ambient, env, tol=DEFAULT_TOL):
    """Strongest provable postcondition of `stm` from `pre`."""
    return sp(stm, pre, ambient, env, tol)


def annotate_pre(stm, post, ambient, env, tol=DEFAULT_TOL):
    """States that can possibly land in `post`: the complement of the
    certain-failure region wlp(stm, post^⊥)."""
    return complement(wlp(stm, complement(post), ambient, env, tol))
