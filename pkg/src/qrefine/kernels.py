"""Dense linear-algebra kernels behind the subspace lattice.

Two interchangeable backends compute the same results:

  * a numba backend, where the hot loops are compiled with ``@njit`` and
    eigendecompositions run inside nopython mode, and
  * a pure-numpy fallback using vectorised expressions.

The numba backend is selected automatically when numba imports cleanly.
Setting the environment variable ``QREFINE_PURE_NUMPY=1`` forces the
fallback; ``BACKEND`` records which one is active.  Both backends are
exercised against each other in the test suite, and
``benchmarks/kernels_bench.py`` compares their throughput.

Eigenvalue rank decisions use the cutoff ``tol * max(lambda_max, 1.0)``.
The floor at 1.0 matters: operands here are sums and differences of
projectors, so a matrix that is mathematically zero still carries
O(1e-16) arithmetic noise, and a cutoff relative to *that* noise would
read it as full rank.  Spanning-set orthonormalisation
(`orthonormal_cols`) instead cuts relative to the largest singular value
alone, because user-supplied vectors carry arbitrary scale and no
cancellation.
"""

import os

import numpy as np

_flag = os.environ.get("QREFINE_PURE_NUMPY", "0")
_want_numba = _flag in ("", "0")

_HAVE_NUMBA = False
if _want_numba:
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except Exception:  # pragma: no cover - depends on host environment
        _HAVE_NUMBA = False

BACKEND = "numba" if _HAVE_NUMBA else "numpy"


def _as_c(m):
    return np.ascontiguousarray(m, dtype=np.complex128)


# ---------------------------------------------------------------------------
# numpy backend: vectorised reference implementations
# ---------------------------------------------------------------------------

def _np_support_cols(m, tol):
    w, v = np.linalg.eigh(m)
    cut = tol * max(w[-1], 1.0)
    return np.ascontiguousarray(v[:, w > cut])


def _np_kernel_cols(m, tol):
    w, v = np.linalg.eigh(m)
    cut = tol * max(w[-1], 1.0)
    return np.ascontiguousarray(v[:, ~(w > cut)])


def _np_eig1_cols(m, tol):
    w, v = np.linalg.eigh(m)
    return np.ascontiguousarray(v[:, np.abs(w - 1.0) <= tol])


def _np_complement_cols(b):
    u, _s, _vh = np.linalg.svd(b, full_matrices=True)
    return np.ascontiguousarray(u[:, b.shape[1]:])


def _np_orthonormal_cols(v, rel_tol):
    u, s, _vh = np.linalg.svd(v, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        return np.empty((v.shape[0], 0), dtype=np.complex128)
    return np.ascontiguousarray(u[:, s > rel_tol * s[0]])


def _np_projector(b, d):
    p = b @ b.conj().T
    return np.ascontiguousarray(0.5 * (p + p.conj().T))


def _np_incl_residual(q_proj, p_basis):
    rem = p_basis - q_proj @ p_basis
    return float(np.max(np.abs(rem))) if rem.size else 0.0


# ---------------------------------------------------------------------------
# numba backend: explicit loops, nopython compiled
# ---------------------------------------------------------------------------

def _nb_support_cols(m, tol):
    w, v = np.linalg.eigh(m)
    d = m.shape[0]
    cut = tol * max(w[d - 1], 1.0)
    r = 0
    for k in range(d):
        if w[k] > cut:
            r += 1
    out = np.empty((d, r), dtype=np.complex128)
    j = 0
    for k in range(d):
        if w[k] > cut:
            for i in range(d):
                out[i, j] = v[i, k]
            j += 1
    return out


def _nb_kernel_cols(m, tol):
    w, v = np.linalg.eigh(m)
    d = m.shape[0]
    cut = tol * max(w[d - 1], 1.0)
    r = 0
    for k in range(d):
        if not (w[k] > cut):
            r += 1
    out = np.empty((d, r), dtype=np.complex128)
    j = 0
    for k in range(d):
        if not (w[k] > cut):
            for i in range(d):
                out[i, j] = v[i, k]
            j += 1
    return out


def _nb_eig1_cols(m, tol):
    w, v = np.linalg.eigh(m)
    d = m.shape[0]
    r = 0
    for k in range(d):
        if abs(w[k] - 1.0) <= tol:
            r += 1
    out = np.empty((d, r), dtype=np.complex128)
    j = 0
    for k in range(d):
        if abs(w[k] - 1.0) <= tol:
            for i in range(d):
                out[i, j] = v[i, k]
            j += 1
    return out


def _nb_complement_cols(b):
    u, _s, _vh = np.linalg.svd(b, True)
    d = b.shape[0]
    r = b.shape[1]
    out = np.empty((d, d - r), dtype=np.complex128)
    for j in range(d - r):
        for i in range(d):
            out[i, j] = u[i, r + j]
    return out


def _nb_orthonormal_cols(v, rel_tol):
    u, s, _vh = np.linalg.svd(v, False)
    d = v.shape[0]
    n = s.shape[0]
    if n == 0 or s[0] <= 0.0:
        return np.empty((d, 0), dtype=np.complex128)
    cut = rel_tol * s[0]
    r = 0
    for k in range(n):
        if s[k] > cut:
            r += 1
    out = np.empty((d, r), dtype=np.complex128)
    for j in range(r):
        for i in range(d):
            out[i, j] = u[i, j]
    return out


def _nb_projector(b, d):
    r = b.shape[1]
    p = np.zeros((d, d), dtype=np.complex128)
    for k in range(r):
        for i in range(d):
            bik = b[i, k]
            for j in range(d):
                p[i, j] += bik * np.conj(b[j, k])
    # hermitize to kill one-sided rounding
    for i in range(d):
        for j in range(i, d):
            h = 0.5 * (p[i, j] + np.conj(p[j, i]))
            p[i, j] = h
            p[j, i] = np.conj(h)
    return p


def _nb_incl_residual(q_proj, p_basis):
    d = p_basis.shape[0]
    r = p_basis.shape[1]
    worst = 0.0
    for j in range(r):
        for i in range(d):
            acc = p_basis[i, j]
            for k in range(d):
                acc -= q_proj[i, k] * p_basis[k, j]
            a = abs(acc)
            if a > worst:
                worst = a
    return worst


if _HAVE_NUMBA:
    _nb_support_cols = njit(cache=True)(_nb_support_cols)
    _nb_kernel_cols = njit(cache=True)(_nb_kernel_cols)
    _nb_eig1_cols = njit(cache=True)(_nb_eig1_cols)
    _nb_complement_cols = njit(cache=True)(_nb_complement_cols)
    _nb_orthonormal_cols = njit(cache=True)(_nb_orthonormal_cols)
    _nb_projector = njit(cache=True)(_nb_projector)
    _nb_incl_residual = njit(cache=True)(_nb_incl_residual)


# ---------------------------------------------------------------------------
# public interface; wrappers own the degenerate shapes so the jitted cores
# never see empty matrices
# ---------------------------------------------------------------------------

def support_cols(m, tol):
    """Orthonormal basis of the span of eigenvectors above the rank cutoff."""
    m = _as_c(m)
    if _HAVE_NUMBA:
        return _nb_support_cols(m, float(tol))
    return _np_support_cols(m, float(tol))


def kernel_cols(m, tol):
    """Orthonormal basis of the numerical null space (eigenvalues below cutoff)."""
    m = _as_c(m)
    if _HAVE_NUMBA:
        return _nb_kernel_cols(m, float(tol))
    return _np_kernel_cols(m, float(tol))


def eig1_cols(m, tol):
    """Orthonormal basis of the eigenvalue-1 eigenspace of a Hermitian m."""
    m = _as_c(m)
    if _HAVE_NUMBA:
        return _nb_eig1_cols(m, float(tol))
    return _np_eig1_cols(m, float(tol))


def complement_cols(b, d):
    """Orthonormal basis of the orthogonal complement of the column span of b.

    b must already have orthonormal columns; the complement comes from the
    unused left-singular vectors of a full SVD.
    """
    b = _as_c(b)
    if b.shape[1] == 0:
        return np.eye(d, dtype=np.complex128)
    if b.shape[1] == d:
        return np.empty((d, 0), dtype=np.complex128)
    if _HAVE_NUMBA:
        return _nb_complement_cols(b)
    return _np_complement_cols(b)


def orthonormal_cols(v, rel_tol):
    """Orthonormalise spanning columns, dropping singular values <= rel_tol * s_max.

    A numerically zero input (s_max == 0) has rank 0 by convention.
    """
    v = _as_c(v)
    if v.shape[1] == 0:
        return np.empty((v.shape[0], 0), dtype=np.complex128)
    if _HAVE_NUMBA:
        return _nb_orthonormal_cols(v, float(rel_tol))
    return _np_orthonormal_cols(v, float(rel_tol))


def projector(b, d):
    """Hermitian projector b @ b^H onto the column span of b."""
    b = _as_c(b)
    if b.shape[1] == 0:
        return np.zeros((d, d), dtype=np.complex128)
    if _HAVE_NUMBA:
        return _nb_projector(b, d)
    return _np_projector(b, d)


def incl_residual(q_proj, p_basis):
    """max-abs entry of (I - q_proj) @ p_basis; 0.0 for an empty basis."""
    q_proj = _as_c(q_proj)
    p_basis = _as_c(p_basis)
    if p_basis.shape[1] == 0:
        return 0.0
    if _HAVE_NUMBA:
        return float(_nb_incl_residual(q_proj, p_basis))
    return _np_incl_residual(q_proj, p_basis)


def backend_pairs():
    """(numpy_impl, numba_impl) by name, for cross-backend agreement tests."""
    return {
        "support_cols": (_np_support_cols, _nb_support_cols),
        "kernel_cols": (_np_kernel_cols, _nb_kernel_cols),
        "eig1_cols": (_np_eig1_cols, _nb_eig1_cols),
        "complement_cols": (_np_complement_cols, _nb_complement_cols),
        "orthonormal_cols": (_np_orthonormal_cols, _nb_orthonormal_cols),
        "projector": (_np_projector, _nb_projector),
        "incl_residual": (_np_incl_residual, _nb_incl_residual),
    }
