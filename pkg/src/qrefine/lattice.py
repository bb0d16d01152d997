"""Subspaces of C^d and their orthomodular lattice operations.

A subspace is stored as a d x r matrix with orthonormal columns (r = 0
gives the zero space, r = d the full space).  All operations are pure
functions of their inputs plus a `Tolerances` record; they never mutate
a `Subspace`.

The two derived connectives are

    sasaki_implies(P, Q)  =  ~P v (P ^ Q)
    sasaki_conjunct(P, Q) =  P ^ (~P v Q)

which collapse to the classical implication/conjunction whenever the
projectors commute, and which drive both assertion semantics and the
conditional/loop precondition transformers.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass(frozen=True)
class Tolerances:
    """Numeric thresholds used by every lattice decision.

    rank   relative eigenvalue/singular-value cutoff for rank decisions
    ortho  allowed deviation of basis^H basis from the identity
    incl   residual threshold for inclusion / membership tests
    eig1   half-width of the eigenvalue-1 window for eigenspace_one
    """

    rank: float = 1e-9
    ortho: float = 1e-10
    incl: float = 1e-7
    eig1: float = 1e-7


DEFAULT_TOL = Tolerances()


class Subspace:
    """An r-dimensional subspace of C^d, held as an orthonormal d x r basis."""

    __slots__ = ("dim", "basis", "_proj")

    def __init__(self, dim, basis):
        basis = np.ascontiguousarray(basis, dtype=np.complex128)
        if basis.ndim != 2 or basis.shape[0] != dim:
            raise ValueError(f"basis must be {dim} x r, got shape {basis.shape}")
        if basis.shape[1] > dim:
            raise ValueError(f"rank {basis.shape[1]} exceeds dimension {dim}")
        self.dim = dim
        self.basis = basis
        self._proj = None

    @property
    def rank(self):
        return self.basis.shape[1]

    def projector(self):
        """Hermitian d x d projector onto the subspace (cached)."""
        if self._proj is None:
            self._proj = kernels.projector(self.basis, self.dim)
        return self._proj

    def is_zero(self):
        return self.rank == 0

    def is_full(self):
        return self.rank == self.dim

    def validate(self, tol=DEFAULT_TOL):
        """Check the orthonormality invariant; raises ValueError if violated."""
        g = self.basis.conj().T @ self.basis
        err = np.max(np.abs(g - np.eye(self.rank))) if self.rank else 0.0
        if err > tol.ortho:
            raise ValueError(f"basis not orthonormal: deviation {err:.3e}")
        return self

    def __repr__(self):
        return f"Subspace(dim={self.dim}, rank={self.rank})"


def zero(d):
    return Subspace(d, np.empty((d, 0), dtype=np.complex128))


def full(d):
    return Subspace(d, np.eye(d, dtype=np.complex128))


def from_spanning(vectors, tol=DEFAULT_TOL):
    """Subspace spanned by the given vectors (columns of a matrix, or a
    sequence of 1-D vectors).  Rank is decided relative to the largest
    singular value; an all-zero input yields the zero space."""
    v = np.asarray(vectors, dtype=np.complex128)
    if v.ndim == 1:
        v = v.reshape(-1, 1)
    elif v.ndim == 2 and not isinstance(vectors, np.ndarray):
        # sequence of vectors: rows -> columns
        v = v.T
    if v.ndim != 2:
        raise ValueError("expected a matrix of column vectors")
    return Subspace(v.shape[0], kernels.orthonormal_cols(v, tol.rank))


def support_of(m, tol=DEFAULT_TOL):
    """Span of the eigenvectors of a Hermitian PSD matrix above the rank cutoff."""
    m = np.asarray(m, dtype=np.complex128)
    return Subspace(m.shape[0], kernels.support_cols(m, tol.rank))


def kernel_of(m, tol=DEFAULT_TOL):
    """Numerical null space of a Hermitian PSD matrix."""
    m = np.asarray(m, dtype=np.complex128)
    return Subspace(m.shape[0], kernels.kernel_cols(m, tol.rank))


def eigenspace_one(m, tol=DEFAULT_TOL):
    """Eigenspace of a Hermitian matrix for eigenvalues within tol.eig1 of 1.

    Returns the zero space when no eigenvalue lies in the window.
    """
    m = np.asarray(m, dtype=np.complex128)
    return Subspace(m.shape[0], kernels.eig1_cols(m, tol.eig1))


def complement(p):
    """Orthogonal complement, computed exactly from the basis SVD."""
    return Subspace(p.dim, kernels.complement_cols(p.basis, p.dim))


def meet(p, q, tol=DEFAULT_TOL):
    """Intersection P ^ Q, as the null space of (I - P) + (I - Q).

    A single eigendecomposition of 2I - P_proj - Q_proj; the sum of the
    two complement projectors is PSD and vanishes exactly on P n Q.
    """
    _same_dim(p, q)
    d = p.dim
    m = 2.0 * np.eye(d, dtype=np.complex128) - p.projector() - q.projector()
    return Subspace(d, kernels.kernel_cols(m, tol.rank))


def join(p, q, tol=DEFAULT_TOL):
    """Closed span P v Q, as the support of P_proj + Q_proj."""
    _same_dim(p, q)
    return Subspace(p.dim, kernels.support_cols(p.projector() + q.projector(), tol.rank))


def leq(p, q, tol=DEFAULT_TOL):
    """Inclusion P <= Q: every basis vector of P lies in Q up to tol.incl."""
    _same_dim(p, q)
    if p.rank == 0:
        return True
    if p.rank > q.rank:
        return False
    return kernels.incl_residual(q.projector(), p.basis) <= tol.incl


def equals(p, q, tol=DEFAULT_TOL):
    """Equality: identical rank plus inclusion both ways."""
    _same_dim(p, q)
    return p.rank == q.rank and leq(p, q, tol) and leq(q, p, tol)


def sasaki_implies(p, q, tol=DEFAULT_TOL):
    """~P v (P ^ Q)."""
    return join(complement(p), meet(p, q, tol), tol)


def sasaki_conjunct(p, q, tol=DEFAULT_TOL):
    """P ^ (~P v Q)."""
    return meet(p, join(complement(p), q, tol), tol)


def contains_vector(p, v, tol=DEFAULT_TOL):
    """Membership test for a single (nonzero) vector, after normalisation."""
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    n = np.linalg.norm(v)
    if n == 0.0:
        return True
    v = (v / n).reshape(-1, 1)
    return kernels.incl_residual(p.projector(), v) <= tol.incl


def _same_dim(p, q):
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
