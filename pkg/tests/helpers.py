"""Shared test utilities: random subspace generation plus independent
oracle routes for the lattice operations.

The oracles deliberately use different algorithms from the package
(QR/stacked-SVD instead of eigendecompositions of projector sums), so a
bug in the implementation cannot hide in its own mirror image.
"""

from fractions import Fraction

import numpy as np

from qrefine.lattice import Subspace


def rand_subspace(rng, d, r=None):
    """Haar-ish random r-dimensional subspace of C^d via QR."""
    if r is None:
        r = int(rng.integers(0, d + 1))
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, _ = np.linalg.qr(a)
    return Subspace(d, q[:, :r])


def rand_state(rng, d):
    """Random unit vector in C^d."""
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def proj_of(sub):
    return sub.basis @ sub.basis.conj().T


def span_equal(a, b, tol=1e-7):
    """Compare column spans through plain-numpy projectors."""
    pa = a.basis @ a.basis.conj().T if isinstance(a, Subspace) else a @ a.conj().T
    pb = b.basis @ b.basis.conj().T if isinstance(b, Subspace) else b @ b.conj().T
    return np.max(np.abs(pa - pb)) <= tol


# --- independent oracle routes -------------------------------------------

def oracle_meet(p, q, tol=1e-9):
    """Intersection as the right null space of stacked constraints."""
    d = p.dim
    eye = np.eye(d)
    stacked = np.vstack([eye - proj_of(p), eye - proj_of(q)])
    _u, s, vh = np.linalg.svd(stacked)
    cut = tol * max(s[0] if s.size else 0.0, 1.0)
    null_mask = np.concatenate([s, np.zeros(d - s.size)]) <= cut
    return Subspace(d, vh.conj().T[:, null_mask])


def oracle_join(p, q, tol=1e-9):
    """Closed span of the concatenated bases via rectangular SVD."""
    d = p.dim
    both = np.hstack([p.basis, q.basis])
    if both.shape[1] == 0:
        return Subspace(d, both)
    u, s, _vh = np.linalg.svd(both, full_matrices=False)
    cut = tol * max(s[0], 1.0)
    return Subspace(d, u[:, s > cut])


def oracle_complement(p, tol=1e-9):
    """Right null space of basis^H."""
    d = p.dim
    if p.rank == 0:
        return Subspace(d, np.eye(d, dtype=complex))
    _u, s, vh = np.linalg.svd(p.basis.conj().T, full_matrices=True)
    cut = tol * max(s[0], 1.0)
    nkeep = int(np.sum(s > cut))
    return Subspace(d, vh.conj().T[:, nkeep:])


def oracle_leq(p, q, tol=1e-7):
    """Inclusion through principal angles: all singular values of
    q.basis^H p.basis must equal 1."""
    if p.rank == 0:
        return True
    if p.rank > q.rank:
        return False
    s = np.linalg.svd(q.basis.conj().T @ p.basis, compute_uv=False)
    return s.size == p.rank and bool(np.min(s) >= 1.0 - tol)


def oracle_sasaki_implies(p, q):
    return oracle_join(oracle_complement(p), oracle_meet(p, q))


def oracle_sasaki_conjunct(p, q):
    return oracle_meet(p, oracle_join(oracle_complement(p), q))


# --- exact rational Gram-Schmidt (for hand-written frozen cases) ---------

def exact_orthonormalize(rows):
    """Gram-Schmidt over Fractions; returns float columns of an exactly
    orthogonal (not normalised) spanning set, for cross-checking small
    rational examples without rounding during elimination."""
    basis = []
    for row in rows:
        v = [Fraction(x) for x in row]
        for b in basis:
            num = sum(bi * vi for bi, vi in zip(b, v))
            den = sum(bi * bi for bi in b)
            v = [vi - num / den * bi for vi, bi in zip(v, b)]
        if any(vi != 0 for vi in v):
            basis.append(v)
    cols = np.array([[float(x) for x in b] for b in basis], dtype=complex).T
    if cols.size == 0:
        return np.empty((len(rows[0]), 0), dtype=complex)
    return cols / np.linalg.norm(cols, axis=0)


# --- random executable programs -------------------------------------------

from qrefine import lang as L  # noqa: E402

_GATES = {1: ["X", "Y", "Z", "H", "S"], 2: ["CX", "B"], 3: ["CCX"]}
_PROJS = {1: ["P0", "P1", "Pp"], 2: ["P00", "Omega"]}


def _pick_qubits(rng, qubits, k):
    idx = rng.choice(len(qubits), size=k, replace=False)
    return tuple(qubits[int(i)] for i in idx)


def rand_guard_ast(rng, qubits):
    """A labelled projector expression over the given qubit pool."""
    arity = 1 if len(qubits) < 2 or rng.random() < 0.6 else 2
    name = _PROJS[arity][int(rng.integers(len(_PROJS[arity])))]
    ast = L.OpLabelled(L.OpConst(name), _pick_qubits(rng, qubits, arity))
    if rng.random() < 0.3:
        ast = L.OpComplement(ast)
    return ast


def rand_unitary_ast(rng, qubits):
    arity = int(rng.integers(1, min(3, len(qubits)) + 1))
    name = _GATES[arity][int(rng.integers(len(_GATES[arity])))]
    return L.OpLabelled(L.OpConst(name), _pick_qubits(rng, qubits, arity))


def gen_loopfree(rng, qubits, depth):
    """Random executable loop-free program over the given qubits."""
    if depth <= 0 or rng.random() < 0.3:
        r = rng.random()
        if r < 0.1:
            return L.SAbort()
        if r < 0.2:
            return L.SSkip()
        if r < 0.35:
            k = int(rng.integers(1, len(qubits) + 1))
            return L.SInit(_pick_qubits(rng, qubits, k))
        if r < 0.7:
            return L.SUnitary(rand_unitary_ast(rng, qubits))
        return L.SAssert(rand_guard_ast(rng, qubits))
    r = rng.random()
    if r < 0.45:
        return L.SSeq(gen_loopfree(rng, qubits, depth - 1),
                      gen_loopfree(rng, qubits, depth - 1))
    if r < 0.7:
        return L.SIf(rand_guard_ast(rng, qubits),
                     gen_loopfree(rng, qubits, depth - 1),
                     gen_loopfree(rng, qubits, depth - 1))
    return L.SPChoice(float(rng.uniform(0.1, 0.9)),
                      gen_loopfree(rng, qubits, depth - 1),
                      gen_loopfree(rng, qubits, depth - 1))
