"""Complex linear-algebra kernels.

Vectors are 1-D numpy arrays (complex unless stated otherwise); lists of
vectors are passed either as sequences or as 2-D arrays with one vector per
row.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

ORTHO_TOL = 1e-10
CANONICAL_TOL = 1e-9
DROP_TOL = 1e-12


def _as_rows(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        return vectors.astype(complex)
    vectors = [np.asarray(v) for v in vectors]
    if not vectors:
        return np.zeros((0, 0), dtype=complex)
    dims = {v.shape for v in vectors}
    if len(dims) != 1 or vectors[0].ndim != 1:
        raise InputError(f"vectors must share one dimension, got shapes {sorted(dims)}")
    return np.vstack(vectors).astype(complex)


def gram_schmidt(vectors, tol: float = DROP_TOL):
    """Orthonormalize `vectors` in order.

    Parameters
    ----------
    vectors : sequence of 1-D arrays or 2-D array (one vector per row)
    tol : float
        Vectors whose residual norm after projection falls below
        ``tol * max_norm`` are dropped.

    Returns
    -------
    basis : ndarray, shape (k, dim)
        Orthonormal rows spanning the same space as the input.
    dropped : list of int
        Indices of input vectors that were linearly dependent on earlier ones.
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    rows = _as_rows(vectors)
    if rows.size == 0:
        return rows, []
    scale = max(np.linalg.norm(rows, axis=1).max(), np.finfo(float).tiny)
    basis: list[np.ndarray] = []
    dropped = []
    for idx, v in enumerate(rows):
        w = v.copy()
        # two passes of modified Gram-Schmidt keep orthogonality at roundoff level
        for _ in range(2):
            for q in basis:
                w -= np.vdot(q, w) * q
        nrm = np.linalg.norm(w)
        if nrm < tol * scale:
            dropped.append(idx)
            continue
        basis.append(w / nrm)
    dim = rows.shape[1]
    out = np.array(basis) if basis else np.zeros((0, dim), dtype=complex)
    return out, dropped


def is_orthonormal(rows, tol: float = ORTHO_TOL) -> bool:
    rows = _as_rows(rows)
    if rows.size == 0:
        return True
    gram = rows.conj() @ rows.T
    return bool(np.max(np.abs(gram - np.eye(len(rows)))) < tol)


def complete_basis(orthonormal, dim: int) -> np.ndarray:
    """Extend an orthonormal set to a basis of C^dim.

    The given vectors come first.  New vectors are taken from the standard
    basis: at each step the unit vector with the largest residual after
    projection is added (lowest index on ties), so the result is
    deterministic.
    """
    rows = _as_rows(orthonormal) if len(orthonormal) else np.zeros((0, dim), dtype=complex)
    if rows.shape[0] and rows.shape[1] != dim:
        raise InputError(f"vectors have dimension {rows.shape[1]}, expected {dim}")
    if rows.shape[0] > dim:
        raise InputError("more vectors than the space dimension")
    if not is_orthonormal(rows):
        raise InputError("input vectors are not orthonormal")
    basis = list(rows)
    while len(basis) < dim:
        q = np.array(basis) if basis else np.zeros((0, dim), dtype=complex)
        # residual of each standard unit vector: e_k - Q^H Q e_k
        resid = np.eye(dim, dtype=complex) - q.T @ q.conj()
        norms = np.linalg.norm(resid, axis=0)
        k = int(np.argmax(norms))
        w = resid[:, k]
        for _ in range(2):
            for b in basis:
                w = w - np.vdot(b, w) * b
        basis.append(w / np.linalg.norm(w))
    return np.array(basis)


@dataclass(frozen=True)
class BlockForm:
    """Canonical form of a real antisymmetric matrix.

    ``P @ m @ P.T`` is block diagonal with 2x2 blocks ``[[0, b], [-b, 0]]``
    for each ``b`` in ``betas`` (descending, nonnegative) followed by
    ``zeros`` zero rows/columns.
    """

    P: np.ndarray
    betas: np.ndarray
    zeros: int

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def r(self) -> int:
        return len(self.betas)

    def canonical(self) -> np.ndarray:
        return canonical_skew(self.betas, self.zeros)


def canonical_skew(betas, zeros: int) -> np.ndarray:
    betas = np.asarray(betas, dtype=float)
    n = 2 * len(betas) + zeros
    out = np.zeros((n, n))
    for j, b in enumerate(betas):
        out[2 * j, 2 * j + 1] = b
        out[2 * j + 1, 2 * j] = -b
    return out


def skew_block_diagonalize(m, zero_tol: float = 1e-12) -> BlockForm:
    """Real orthogonal block diagonalization of an antisymmetric matrix.

    Uses the Hermitian eigendecomposition of ``1j * m``.  For an eigenvector
    ``x + iy`` with eigenvalue ``b > 0`` one has ``m x = b y`` and
    ``m y = -b x``, so the rows ``(x, -y)`` (normalized) realize the block
    ``[[0, b], [-b, 0]]``.  The eigenvector phase is fixed by making its
    largest component real and positive, which returns P = I for input
    already in canonical form.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError("matrix must be square")
    if np.iscomplexobj(m):
        if np.max(np.abs(m.imag), initial=0.0) > ORTHO_TOL:
            raise InputError("matrix must be real")
        m = m.real
    m = m.astype(float)
    n = m.shape[0]
    if n and np.max(np.abs(m + m.T)) > ORTHO_TOL:
        raise InputError("matrix is not antisymmetric")
    m = 0.5 * (m - m.T)
    if n == 0:
        return BlockForm(np.zeros((0, 0)), np.zeros(0), 0)

    w, v = np.linalg.eigh(1j * m)
    cutoff = zero_tol * max(1.0, np.max(np.abs(w)))
    pos = [k for k in range(n) if w[k] > cutoff]
    pos = _stable_tie_order(pos, w, v)

    rows = []
    betas = []
    for k in pos:
        vk = v[:, k]
        piv = int(np.argmax(np.abs(vk)))
        vk = vk * (abs(vk[piv]) / vk[piv])
        rows.append(vk.real)
        rows.append(-vk.imag)
        betas.append(w[k])
    rows_arr = np.array(rows, dtype=float).reshape(-1, n)
    q, _ = gram_schmidt(rows_arr, tol=1e-8)
    q = q.real
    if len(q) != len(rows_arr):
        raise InputError("eigenvector pairs are degenerate; cannot build canonical form")
    full = complete_basis(q.astype(complex), n)
    tail = _real_tail(full[len(q):], q, n)
    P = np.vstack([q, tail]) if len(tail) else q
    betas_arr = np.array(betas, dtype=float)
    # exact block values from the orthogonal transform
    blocked = P @ m @ P.T
    for j in range(len(betas_arr)):
        val = blocked[2 * j, 2 * j + 1]
        if val < 0:
            P[2 * j + 1] *= -1
            val = -val
        betas_arr[j] = val
    return BlockForm(P=P, betas=betas_arr, zeros=n - 2 * len(betas_arr))


def _stable_tie_order(pos, w, v):
    # beta descending; near-equal betas ordered by pivot index of the eigenvector
    pos = sorted(pos, key=lambda k: -w[k])
    out = []
    i = 0
    while i < len(pos):
        j = i + 1
        while j < len(pos) and abs(w[pos[j]] - w[pos[i]]) <= CANONICAL_TOL:
            j += 1
        group = sorted(pos[i:j], key=lambda k: int(np.argmax(np.abs(v[:, k]))))
        out.extend(group)
        i = j
    return out


def _real_tail(candidates, q, n):
    """Real orthonormal basis of the orthogonal complement of the rows of q."""
    k = n - len(q)
    if k == 0:
        return np.zeros((0, n))
    # complement of a real subspace is spanned by real vectors
    reals = []
    for c in candidates:
        reals.append(c.real)
        reals.append(c.imag)
    basis = list(q)
    tail = []
    for r in reals:
        w = r.copy()
        for _ in range(2):
            for b in basis:
                w -= np.dot(b, w) * b
        nrm = np.linalg.norm(w)
        if nrm > 1e-8:
            w /= nrm
            basis.append(w)
            tail.append(w)
        if len(tail) == k:
            break
    return np.array(tail)


def dense_first_column_orthogonal(dim: int) -> np.ndarray:
    """Householder reflection sending e_0 to the uniform unit vector.

    The result is symmetric, orthogonal, and its first column has every
    entry equal to ``1/sqrt(dim)``.
    """
    if dim < 1:
        raise InputError("dim must be at least 1")
    u = np.full(dim, 1.0 / np.sqrt(dim))
    w = -u
    w[0] += 1.0
    nw = np.dot(w, w)
    if nw < 1e-30:
        return np.eye(dim)
    return np.eye(dim) - 2.0 * np.outer(w, w) / nw
