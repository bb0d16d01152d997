"""Registers, labelled operators and density states.

A `Register` is an ordered tuple of distinct qubit names; the first
name is the most significant bit of a basis-state index.  Labelled
operators pair a square matrix with the register it acts on, and
`extend_matrix` embeds such a matrix into any enclosing register by
index permutation, so that operators over different (overlapping)
registers can be combined after extension to the ordered union.
"""

import numpy as np

SQ2 = 1.0 / np.sqrt(2.0)


class Register:
    """Ordered collection of distinct qubit names."""

    __slots__ = ("names",)

    def __init__(self, names):
        names = tuple(names)
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate qubit in register: {names}")
        self.names = names

    def __len__(self):
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __contains__(self, q):
        return q in self.names

    def __eq__(self, other):
        return isinstance(other, Register) and self.names == other.names

    def __hash__(self):
        return hash(self.names)

    def index(self, q):
        return self.names.index(q)

    def union(self, other):
        """Ordered union: self's names first, then other's new names."""
        extra = tuple(q for q in other.names if q not in self.names)
        return Register(self.names + extra)

    def minus(self, other):
        return Register(tuple(q for q in self.names if q not in other))

    def issubset(self, other):
        return all(q in other for q in self.names)

    @property
    def dim(self):
        return 2 ** len(self.names)

    def __repr__(self):
        return "[" + " ".join(self.names) + "]"


EMPTY_REGISTER = Register(())


class MatrixOp:
    """An unlabelled operator on n qubits (a square 2^n matrix)."""

    __slots__ = ("mat",)

    def __init__(self, mat):
        mat = np.ascontiguousarray(mat, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"operator must be square, got {mat.shape}")
        n = mat.shape[0].bit_length() - 1
        if 2 ** n != mat.shape[0]:
            raise ValueError(f"dimension {mat.shape[0]} is not a power of two")
        self.mat = mat

    @property
    def dim(self):
        return self.mat.shape[0]

    @property
    def nqubits(self):
        return self.dim.bit_length() - 1

    def __repr__(self):
        return f"MatrixOp({self.nqubits} qubits)"


class LabelledOp:
    """A matrix together with the register it acts on."""

    __slots__ = ("mat", "reg")

    def __init__(self, mat, reg):
        if not isinstance(reg, Register):
            reg = Register(reg)
        mat = np.ascontiguousarray(mat, dtype=np.complex128)
        if mat.shape != (reg.dim, reg.dim):
            raise ValueError(
                f"matrix shape {mat.shape} does not match register {reg} of dim {reg.dim}")
        self.mat = mat
        self.reg = reg

    def __repr__(self):
        return f"LabelledOp({self.reg})"


class DensityState:
    """A (possibly subnormalised) density operator over a register."""

    __slots__ = ("mat", "reg")

    def __init__(self, mat, reg, check=True, tol=1e-8):
        if not isinstance(reg, Register):
            reg = Register(reg)
        mat = np.ascontiguousarray(mat, dtype=np.complex128)
        if mat.shape != (reg.dim, reg.dim):
            raise ValueError(f"state shape {mat.shape} vs register dim {reg.dim}")
        if check:
            if np.max(np.abs(mat - mat.conj().T)) > tol:
                raise ValueError("density matrix not Hermitian")
            w = np.linalg.eigvalsh(mat)
            if w.size and w[0] < -tol:
                raise ValueError(f"density matrix not PSD (min eig {w[0]:.3e})")
            if mat.trace().real > 1.0 + tol:
                raise ValueError(f"density matrix trace {mat.trace().real} > 1")
        self.mat = mat
        self.reg = reg

    @property
    def trace(self):
        return float(self.mat.trace().real)

    def __repr__(self):
        return f"DensityState({self.reg}, trace={self.trace:.6f})"


class KetExpr:
    """A linear combination of computational-basis kets on n qubits."""

    __slots__ = ("terms", "nqubits")

    def __init__(self, terms, nqubits):
        self.terms = dict(terms)
        self.nqubits = nqubits

    @classmethod
    def basis(cls, bits):
        return cls({bits: 1.0 + 0.0j}, len(bits))

    def __add__(self, other):
        if self.nqubits != other.nqubits:
            raise ValueError(
                f"ket width mismatch: {self.nqubits} vs {other.nqubits} qubits")
        terms = dict(self.terms)
        for bits, c in other.terms.items():
            terms[bits] = terms.get(bits, 0.0) + c
        return KetExpr(terms, self.nqubits)

    def scale(self, c):
        return KetExpr({b: c * v for b, v in self.terms.items()}, self.nqubits)

    def vector(self):
        v = np.zeros(2 ** self.nqubits, dtype=np.complex128)
        for bits, c in self.terms.items():
            v[int(bits, 2)] += c
        return v


# ---------------------------------------------------------------------------
# register embedding
# ---------------------------------------------------------------------------

def split_index_map(amb, front):
    """For each ambient basis index t, the corresponding index in the
    reordered register (front qubits first, remaining ambient qubits after,
    both in their existing relative order)."""
    if not front.issubset(amb):
        raise ValueError(f"{front} is not contained in {amb}")
    n = len(amb)
    m = len(front)
    rest = amb.minus(front)
    t = np.arange(2 ** n)
    u = np.zeros_like(t)
    for k, q in enumerate(front.names):
        bit = (t >> (n - 1 - amb.index(q))) & 1
        u |= bit << (n - 1 - k)
    for k, q in enumerate(rest.names):
        bit = (t >> (n - 1 - amb.index(q))) & 1
        u |= bit << (n - m - 1 - k)
    return u


def extend_matrix(mat, src, dst):
    """Embed an operator on src into the larger register dst (identity on
    the extra qubits)."""
    if src.names == dst.names:
        return np.ascontiguousarray(mat, dtype=np.complex128)
    u_of_t = split_index_map(dst, src)
    big = np.kron(mat, np.eye(2 ** (len(dst) - len(src)), dtype=np.complex128))
    return np.ascontiguousarray(big[np.ix_(u_of_t, u_of_t)])


def extend(lop, dst):
    """LabelledOp version of extend_matrix."""
    return LabelledOp(extend_matrix(lop.mat, lop.reg, dst), dst)


def partial_trace(mat, reg, out):
    """Trace the qubits of `out` from a matrix over `reg`; returns the
    reduced matrix over reg.minus(out)."""
    if not out.issubset(reg):
        raise ValueError(f"cannot trace {out} out of {reg}")
    n = len(reg)
    keep = [i for i, q in enumerate(reg.names) if q not in out]
    drop = [i for i, q in enumerate(reg.names) if q in out]
    tensor = mat.reshape((2,) * (2 * n))
    subs = list(range(2 * n))
    for i in drop:
        subs[n + i] = subs[i]
    out_subs = [subs[i] for i in keep] + [subs[n + i] for i in keep]
    reduced = np.einsum(tensor, subs, out_subs)
    dk = 2 ** len(keep)
    return np.ascontiguousarray(reduced.reshape(dk, dk))


def lift_state(state, dst):
    """Extend a density state to a larger register, fresh qubits in |0>."""
    if state.reg.names == dst.names:
        return state
    extra = dst.minus(state.reg)
    ground = np.zeros((extra.dim, extra.dim), dtype=np.complex128)
    ground[0, 0] = 1.0
    combined = np.kron(state.mat, ground)
    combo_reg = Register(state.reg.names + extra.names)
    u_of_t = split_index_map(dst, state.reg)
    # combo_reg ordering coincides with (front=state.reg, rest=extra) split
    assert combo_reg.names == state.reg.names + dst.minus(state.reg).names
    mat = combined[np.ix_(u_of_t, u_of_t)]
    return DensityState(mat, dst, check=False)


# ---------------------------------------------------------------------------
# gate and constant tables
# ---------------------------------------------------------------------------

_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
_H = SQ2 * np.array([[1, 1], [1, -1]], dtype=np.complex128)
_S = np.array([[1, 0], [0, 1j]], dtype=np.complex128)
_CX = np.eye(4, dtype=np.complex128)[[0, 1, 3, 2]]
_CCX = np.eye(8, dtype=np.complex128)[[0, 1, 2, 3, 4, 5, 7, 6]]
_B = np.array([
    [1, 0, 0, 0],
    [0, SQ2, SQ2, 0],
    [0, SQ2, -SQ2, 0],
    [0, 0, 0, 1],
], dtype=np.complex128)

_KET0 = np.array([1, 0], dtype=np.complex128)
_KET1 = np.array([0, 1], dtype=np.complex128)
_KETP = SQ2 * (_KET0 + _KET1)
_OMEGA_VEC = SQ2 * np.array([1, 0, 0, 1], dtype=np.complex128)


def _proj(v):
    return np.outer(v, v.conj())


def builtin_operators():
    """Names pre-loaded into every engine environment."""
    return {
        "I": np.eye(2, dtype=np.complex128),
        "X": _X.copy(),
        "Y": _Y.copy(),
        "Z": _Z.copy(),
        "H": _H.copy(),
        "S": _S.copy(),
        "CX": _CX.copy(),
        "CCX": _CCX.copy(),
        "B": _B.copy(),
        "P0": _proj(_KET0),
        "P1": _proj(_KET1),
        "Pp": _proj(_KETP),
        "P00": _proj(np.array([1, 0, 0, 0], dtype=np.complex128)),
        "Omega": _proj(_OMEGA_VEC),
        "c0": np.zeros((1, 1), dtype=np.complex128),
        "c1": np.ones((1, 1), dtype=np.complex128),
    }


def param_gate(name, value):
    """Parameterised one-qubit gates: Rz(theta) and Uc(c)."""
    if name == "Rz":
        theta = float(np.real(value))
        return np.array([
            [np.exp(-0.5j * theta), 0],
            [0, np.exp(0.5j * theta)],
        ], dtype=np.complex128)
    if name == "Uc":
        c = complex(value)
        s = 1.0 / np.sqrt(1.0 + abs(c) ** 2)
        return s * np.array([[c, 1], [1, -np.conj(c)]], dtype=np.complex128)
    raise KeyError(f"unknown parameterised gate {name!r}")


def ket_projector(kexpr):
    """Literal outer product |v><v| of an (unnormalised) ket expression."""
    v = kexpr.vector() if isinstance(kexpr, KetExpr) else np.asarray(kexpr, dtype=np.complex128)
    return np.outer(v, v.conj())
