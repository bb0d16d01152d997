"""Evaluation of operator expressions against an environment.

An environment maps names to matrices: raw ndarrays (the builtin table),
`MatrixOp`, or `LabelledOp`.  Evaluation produces a `MatrixOp` for
unlabelled expressions and a `LabelledOp` for labelled ones; the two may
never be mixed inside one algebraic expression.

Labelled operands of a binary operation are auto-extended to the union
of their registers, ordered left-operand-first.  The lattice connectives
(∧ ∨ ⇝ ⋒) additionally require both operands to be projectors — square,
Hermitian and idempotent within tolerance.
"""

import numpy as np

from . import lang
from .lattice import (DEFAULT_TOL, Subspace, complement, join, meet,
                      sasaki_conjunct, sasaki_implies, support_of)
from .qop import (KetExpr, LabelledOp, MatrixOp, Register, extend_matrix,
                  ket_projector, param_gate)


class EvalError(Exception):
    """An operator expression does not denote a value."""


def _lookup(env, name):
    try:
        value = env[name]
    except KeyError:
        raise EvalError(f"unknown operator {name!r}") from None
    if isinstance(value, np.ndarray):
        return value, None
    if isinstance(value, MatrixOp):
        return value.mat, None
    if isinstance(value, LabelledOp):
        return value.mat, value.reg
    raise EvalError(f"{name!r} is not an operator")


def _ket(k):
    if isinstance(k, lang.KetLit):
        return KetExpr.basis(k.bits)
    if isinstance(k, lang.KetSum):
        try:
            return _ket(k.a) + _ket(k.b)
        except ValueError as exc:
            raise EvalError(str(exc)) from None
    if isinstance(k, lang.KetScale):
        return _ket(k.k).scale(k.c)
    raise EvalError(f"not a ket expression: {k!r}")


def _to_subspace(mat, tol):
    """Coerce a matrix to the subspace it projects onto; reject matrices
    that are not projectors."""
    if np.max(np.abs(mat - mat.conj().T)) > tol.incl:
        raise EvalError("lattice operand is not Hermitian")
    if np.max(np.abs(mat @ mat - mat)) > tol.incl:
        raise EvalError("lattice operand is not idempotent")
    return support_of(0.5 * (mat + mat.conj().T), tol)


def _align(va, vb, what):
    """Bring two operands onto a common register (or a common bare
    dimension); labelled and unlabelled operands never mix."""
    (ma, ra), (mb, rb) = va, vb
    if (ra is None) != (rb is None):
        raise EvalError(f"cannot mix labelled and unlabelled operands of {what}")
    if ra is None:
        if ma.shape != mb.shape:
            raise EvalError(
                f"dimension mismatch in {what}: {ma.shape[0]} vs {mb.shape[0]}")
        return ma, mb, None
    reg = ra.union(rb)
    return extend_matrix(ma, ra, reg), extend_matrix(mb, rb, reg), reg


_LATTICE = {
    lang.OpMeet: meet,
    lang.OpJoin: join,
    lang.OpSasakiImp: sasaki_implies,
    lang.OpSasakiConj: sasaki_conjunct,
}


def _eval(ast, env, tol):
    """Returns (matrix, register-or-None)."""
    if isinstance(ast, (lang.OpConst, lang.OpIqRef)):
        return _lookup(env, ast.name)
    if isinstance(ast, lang.OpParamGate):
        if ast.name == "Rz" and abs(complex(ast.arg).imag) > 1e-12:
            raise EvalError("Rz needs a real angle")
        try:
            return param_gate(ast.name, ast.arg), None
        except KeyError:
            raise EvalError(f"unknown parameterised gate {ast.name!r}") from None
    if isinstance(ast, lang.OpKetProj):
        return ket_projector(_ket(ast.ket)), None
    if isinstance(ast, lang.OpLabelled):
        m, r = _eval(ast.op, env, tol)
        if r is not None:
            raise EvalError("operator already carries a register label")
        try:
            reg = Register(ast.names)
        except ValueError as exc:
            raise EvalError(str(exc)) from None
        if reg.dim != m.shape[0]:
            raise EvalError(
                f"label {reg} has dimension {reg.dim}, operator has {m.shape[0]}")
        return m, reg
    if isinstance(ast, lang.OpNeg):
        m, r = _eval(ast.a, env, tol)
        return -m, r
    if isinstance(ast, lang.OpScalarMul):
        m, r = _eval(ast.a, env, tol)
        return ast.c * m, r
    if isinstance(ast, lang.OpAdjoint):
        m, r = _eval(ast.a, env, tol)
        return m.conj().T, r
    if isinstance(ast, lang.OpComplement):
        m, r = _eval(ast.a, env, tol)
        return complement(_to_subspace(m, tol)).projector(), r
    if isinstance(ast, lang.OpTensor):
        (ma, ra), (mb, rb) = _eval(ast.a, env, tol), _eval(ast.b, env, tol)
        if (ra is None) != (rb is None):
            raise EvalError("cannot mix labelled and unlabelled operands of ⊗")
        if ra is None:
            return np.kron(ma, mb), None
        overlap = [q for q in rb.names if q in ra]
        if overlap:
            raise EvalError(f"⊗ operands share qubits {overlap}")
        return np.kron(ma, mb), Register(ra.names + rb.names)
    if isinstance(ast, (lang.OpAdd, lang.OpSub, lang.OpMatMul)):
        sym = {lang.OpAdd: "+", lang.OpSub: "-", lang.OpMatMul: "*"}[type(ast)]
        ma, mb, reg = _align(_eval(ast.a, env, tol), _eval(ast.b, env, tol), sym)
        if isinstance(ast, lang.OpAdd):
            return ma + mb, reg
        if isinstance(ast, lang.OpSub):
            return ma - mb, reg
        return ma @ mb, reg
    for klass, fn in _LATTICE.items():
        if isinstance(ast, klass):
            ma, mb, reg = _align(
                _eval(ast.a, env, tol), _eval(ast.b, env, tol),
                lang._BIN_SYMBOL[klass])
            return fn(_to_subspace(ma, tol), _to_subspace(mb, tol), tol).projector(), reg
    raise EvalError(f"cannot evaluate {ast!r}")


def eval_operator(ast, env, tol=DEFAULT_TOL):
    """Evaluate an operator expression to a MatrixOp or LabelledOp."""
    m, r = _eval(ast, env, tol)
    return MatrixOp(m) if r is None else LabelledOp(m, r)


def eval_subspace_on(ast, env, ambient, tol=DEFAULT_TOL):
    """Evaluate an expression as a projector and view it as a subspace of
    the ambient register's space (cylindrical extension for labelled
    operators contained in the ambient register)."""
    m, r = _eval(ast, env, tol)
    if r is not None:
        if not r.issubset(ambient):
            raise EvalError(f"operator on {r} does not fit ambient {ambient}")
        m = extend_matrix(m, r, ambient)
    elif m.shape[0] != ambient.dim:
        raise EvalError(
            f"unlabelled operator of dimension {m.shape[0]} in ambient "
            f"{ambient} of dimension {ambient.dim}")
    return _to_subspace(m, tol)
