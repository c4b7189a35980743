"""Dense operator algebra on composite Hilbert spaces.

Operators are plain complex ``numpy`` arrays. Superoperators act on
row-stacked vectors: ``vectorize(X)[r * d + c] == X[r, c]``. Under that
convention ``X -> A X B`` is the matrix ``kron(A, B.T)``, which every
superoperator in this package relies on.
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError

__all__ = [
    "CompositeSpace",
    "annihilation",
    "pauli",
    "embed",
    "vectorize",
    "unvectorize",
    "sandwich",
    "super_anticommutator",
    "super_commutator",
    "as_square",
    "superop_to_basis",
    "superop_from_basis",
]


@dataclass(frozen=True)
class CompositeSpace:
    """Ordered tensor product of finite subsystems.

    The leftmost entry of ``dims`` is the leftmost Kronecker factor.
    """

    dims: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise DimensionError("a composite space needs at least one subsystem")
        if any(d < 2 for d in dims):
            raise DimensionError(f"subsystem dimensions must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total_dim(self):
        return int(np.prod(self.dims))

    def identity(self):
        return np.eye(self.total_dim, dtype=complex)


def as_square(op, name="operator"):
    """Return ``op`` as a complex 2-D square array or raise DimensionError."""
    arr = np.asarray(op, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {arr.shape}")
    return arr


def annihilation(n):
    """Bosonic annihilation operator truncated to ``n`` levels."""
    if int(n) < 2:
        raise DimensionError(f"truncation dimension must be >= 2, got {n}")
    n = int(n)
    return np.diag(np.sqrt(np.arange(1, n)), k=1).astype(complex)


_PAULI = {
    # basis order (|e>, |g>), sigma_z |e> = +|e>
    "x": [[0, 1], [1, 0]],
    "y": [[0, -1j], [1j, 0]],
    "z": [[1, 0], [0, -1]],
    "plus": [[0, 1], [0, 0]],
    "minus": [[0, 0], [1, 0]],
    "id": [[1, 0], [0, 1]],
}


def pauli(kind):
    """Two-level operator ``kind`` in {x, y, z, plus, minus, id}.

    ``plus`` is |e><g| with basis order (|e>, |g>).
    """
    try:
        return np.array(_PAULI[kind], dtype=complex)
    except KeyError:
        raise ValueError(f"unknown Pauli kind {kind!r}; expected one of {sorted(_PAULI)}") from None


def embed(local, site, space):
    """Lift ``local`` acting on subsystem ``site`` to the full ``space``."""
    local = as_square(local, "local operator")
    if not 0 <= site < len(space.dims):
        raise DimensionError(f"site {site} out of range for dims {space.dims}")
    if local.shape[0] != space.dims[site]:
        raise DimensionError(
            f"local operator has side {local.shape[0]} but subsystem {site} has dimension {space.dims[site]}"
        )
    factors = [np.eye(d, dtype=complex) for d in space.dims]
    factors[site] = local
    return reduce(np.kron, factors)


def vectorize(rho):
    """Row-stack a square matrix into a vector of length d**2."""
    rho = as_square(rho, "density matrix")
    return rho.reshape(-1).copy()


def unvectorize(vec):
    """Inverse of :func:`vectorize`."""
    vec = np.asarray(vec, dtype=complex).reshape(-1)
    d = int(round(np.sqrt(vec.size)))
    if d * d != vec.size:
        raise DimensionError(f"vector length {vec.size} is not a perfect square")
    return vec.reshape(d, d).copy()


def sandwich(a, b):
    """Superoperator of ``X -> a @ X @ b``."""
    a = as_square(a, "left operator")
    b = as_square(b, "right operator")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return np.kron(a, b.T)


def super_anticommutator(x):
    """Superoperator of ``rho -> x rho + rho x``."""
    x = as_square(x)
    eye = np.eye(x.shape[0], dtype=complex)
    return np.kron(x, eye) + np.kron(eye, x.T)


def super_commutator(x):
    """Superoperator of ``rho -> x rho - rho x``."""
    x = as_square(x)
    eye = np.eye(x.shape[0], dtype=complex)
    return np.kron(x, eye) - np.kron(eye, x.T)


def _contract_sparse(s4, factors):
    d = s4.shape[0]
    t = s4
    for m in factors:
        # contract the leading axis, then cycle it to the back
        t = np.asarray(m @ t.reshape(d, -1)).reshape(d, d, d, d)
        t = np.ascontiguousarray(t.transpose(1, 2, 3, 0))
    return t


def _contract_four(s4, left, right):
    """Return ``(left (x) conj(left))^dag S (right (x) conj(right))`` on a 4-index view.

    ``s4[i, k, j, l]`` is the superoperator entry for row (i, k), column (j, l).
    Mostly-zero bases (product or block-diagonal eigenvectors) go through
    sparse products, which skips the structural zeros exactly.
    """
    d = s4.shape[0]
    nnz = max(np.count_nonzero(left), np.count_nonzero(right))
    if nnz <= 4 * d:
        # nearly a permutation: the Kronecker factors themselves stay small
        lk = sp.kron(sp.csr_matrix(left), sp.csr_matrix(left.conj()), format="csr")
        rk = sp.kron(sp.csr_matrix(right), sp.csr_matrix(right.conj()), format="csr")
        t = np.asarray(lk.conj().T @ s4.reshape(d * d, d * d))
        return np.asarray(rk.T @ t.T).T.reshape(d, d, d, d)
    if nnz < 0.2 * d * d:
        factors = [left.conj().T, left.T, right.T, right.conj().T]
        return _contract_sparse(s4, [sp.csr_matrix(m) for m in factors])
    t = np.tensordot(left.conj(), s4, axes=([0], [0]))  # a k j l
    t = np.tensordot(t, left, axes=([1], [0]))  # a j l b
    t = np.tensordot(t, right, axes=([1], [0]))  # a l b c
    t = np.tensordot(t, right.conj(), axes=([1], [0]))  # a b c e
    return t


def superop_to_basis(superop, basis):
    """Express ``superop`` in the operator basis ``|v_a><v_b|`` given by unitary columns ``basis``.

    Equivalent to ``kron(V, V.conj()).conj().T @ S @ kron(V, V.conj())`` in O(d**5).
    """
    v = as_square(basis, "basis")
    d = v.shape[0]
    s4 = np.asarray(superop).reshape(d, d, d, d)
    return np.ascontiguousarray(_contract_four(s4, v, v)).reshape(d * d, d * d)


def superop_from_basis(superop, basis):
    """Inverse of :func:`superop_to_basis`."""
    v = as_square(basis, "basis")
    d = v.shape[0]
    s4 = np.asarray(superop).reshape(d, d, d, d)
    vh = v.conj().T
    return np.ascontiguousarray(_contract_four(s4, vh, vh)).reshape(d * d, d * d)
