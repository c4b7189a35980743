"""Weak symmetries of a generator and the block decomposition they induce."""

import json
import pathlib

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp

from .errors import ConsistencyError, ConvergenceError, DimensionError, SymmetryError
from .liouvillian import LiouvillianBuild
from .operators import as_square, super_commutator, superop_to_basis
from .spectral import check_hermitian

__all__ = [
    "BlockDecomposition",
    "superop_adjoint",
    "check_weak_symmetry",
    "block_transform",
    "block_steady_state",
    "export_blocks",
]


def _matrix(L):
    if isinstance(L, LiouvillianBuild):
        return L.total
    mat = np.asarray(L, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionError(f"superoperator must be square, got {mat.shape}")
    return mat


def superop_adjoint(J):
    """Superoperator of ``rho -> [J, rho]``."""
    return super_commutator(J)


def _commutator_with_adjoint(mat, j):
    """``L @ adj(J) - adj(J) @ L`` for ``adj(J) = J (x) 1 - 1 (x) J^T`` in O(d**5)."""
    d = j.shape[0]
    l4 = mat.reshape(d, d, d, d)  # [i, k, m, n]
    # L adj(J): column index (m, n) hit by J on m and by -J^T on n
    right = np.tensordot(l4, j, axes=([2], [0])).transpose(0, 1, 3, 2)
    right -= np.tensordot(l4, j, axes=([3], [1]))
    # adj(J) L: row index (i, k)
    left = np.tensordot(j, l4, axes=([1], [0]))
    left -= np.tensordot(j, l4, axes=([0], [1])).transpose(1, 0, 2, 3)
    return (right - left).reshape(d * d, d * d)


def check_weak_symmetry(L, J, tol=1e-9):
    """Relative residual ``||[L, adj(J)]||_F / ||L||_F`` and whether it is below ``tol``.

    ``J`` is either an operator (``d x d``), handled in O(d**5), or an explicit
    ``d**2 x d**2`` superoperator.
    """
    mat = _matrix(L)
    j = np.asarray(J, dtype=complex)
    n = mat.shape[0]
    if j.shape == (n, n):
        comm = mat @ j - j @ mat
    else:
        j = as_square(j, "symmetry generator")
        if j.shape[0] ** 2 != n:
            raise DimensionError(f"generator J of side {j.shape[0]} does not match superoperator side {n}")
        comm = _commutator_with_adjoint(mat, j)
    norm = np.linalg.norm(mat)
    residual = float(np.linalg.norm(comm) / norm) if norm > 0 else float(np.linalg.norm(comm))
    return residual < tol, residual


class BlockDecomposition:
    """``U^dag L U`` split into blocks of constant symmetry label.

    Column ``c`` of ``U`` is ``vec(|v_i><v_j|)`` for ``basis_pairs[c] == (i, j)``,
    where ``v`` are eigenvectors of the symmetry generator.
    """

    def __init__(self, vectors, order, block_labels, block_ranges, blocks, basis_pairs, off_block_residual):
        self.vectors = vectors
        self.order = order
        self.block_labels = block_labels
        self.block_ranges = block_ranges
        self.blocks = blocks
        self.basis_pairs = basis_pairs
        self.off_block_residual = off_block_residual

    @property
    def transform_U(self):
        v = self.vectors
        return np.kron(v, v.conj())[:, self.order]

    def block_index(self, label, tol=1e-9):
        for k, lab in enumerate(self.block_labels):
            if abs(lab - label) <= tol:
                return k
        raise KeyError(f"no block with label {label}")

    def block_basis(self, label):
        """``(i, j)`` index pairs spanning the block with ``label``."""
        start, stop = self.block_ranges[self.block_index(label)]
        return self.basis_pairs[start:stop]

    def summary(self):
        return {
            "labels": [float(x) for x in self.block_labels],
            "sizes": [int(b - a) for a, b in self.block_ranges],
            "off_block_residual": float(self.off_block_residual),
        }


def _group(values, tol):
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    breaks = np.flatnonzero(np.diff(sorted_vals) > tol) + 1
    edges = np.concatenate([[0], breaks, [values.size]])
    ranges = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]
    labels = []
    for a, b in ranges:
        spread = sorted_vals[b - 1] - sorted_vals[a]
        if spread > 100 * tol:
            raise ConsistencyError(
                f"labels chain together over a spread of {spread:.3e} with grouping tolerance {tol:.1e}"
            )
        labels.append(float(sorted_vals[a:b].mean()))
    return order, labels, ranges


def block_transform(L, J, tol=None, symmetry_tol=1e-9):
    """Block-diagonalize ``L`` with the weak symmetry generated by Hermitian ``J``.

    Parameters
    ----------
    L : LiouvillianBuild or ndarray
    J : ndarray
        Hermitian operator with ``[adj(J), L] = 0``.
    tol : float, optional
        Label grouping tolerance, default ``1e-8`` times the spread of ``J``'s spectrum.
    symmetry_tol : float
        Relative commutator residual accepted before refusing.

    Raises
    ------
    SymmetryError
        ``J`` does not generate a symmetry of ``L``.
    """
    mat = _matrix(L)
    j = check_hermitian(J, "symmetry generator")
    d = j.shape[0]
    if d * d != mat.shape[0]:
        raise DimensionError(f"J of side {d} does not match superoperator side {mat.shape[0]}")
    ok, residual = check_weak_symmetry(mat, j, symmetry_tol)
    if not ok:
        raise SymmetryError(f"J is not a weak symmetry: relative residual {residual:.3e}", residual=residual)

    if np.count_nonzero(j - np.diag(np.diag(j))) == 0:
        # keep the computational basis when J is already diagonal
        n_vals = np.diag(j).real.copy()
        v = np.eye(d, dtype=complex)
    else:
        n_vals, v = np.linalg.eigh(0.5 * (j + j.conj().T))
    span = float(n_vals.max() - n_vals.min())
    tol = (1e-8 * span if span > 0 else 1e-12) if tol is None else tol
    labels_flat = (n_vals[:, None] - n_vals[None, :]).reshape(-1)
    order, labels, ranges = _group(labels_flat, tol)

    rotated = superop_to_basis(mat, v)[np.ix_(order, order)]
    blocks = [rotated[a:b, a:b].copy() for a, b in ranges]
    off = rotated.copy()
    for a, b in ranges:
        off[a:b, a:b] = 0.0
    norm = np.linalg.norm(mat)
    off_res = float(np.linalg.norm(off) / norm) if norm > 0 else 0.0
    pairs = [divmod(int(c), d) for c in order]
    return BlockDecomposition(v, order, labels, ranges, blocks, pairs, off_res)


def block_steady_state(decomp, tol=1e-10):
    """Steady state found inside the label-0 block only.

    Rows are scaled to unit max-norm and one population equation is
    replaced by the trace condition, as in the full solver; a weighted
    least-squares solve is the fallback when the factorization is singular.
    """
    k = decomp.block_index(0.0)
    block = decomp.blocks[k]
    pairs = decomp.basis_pairs[slice(*decomp.block_ranges[k])]
    v = decomp.vectors
    d = v.shape[0]
    # Tr |v_i><v_j| = <v_j|v_i> = delta_ij for an orthonormal basis
    pops = np.array([n for n, (i, jj) in enumerate(pairs) if i == jj])
    norms = np.abs(block).max(axis=1)
    x = None
    if pops.size and np.all(norms > 0):
        a = block / norms[:, None]
        k0 = pops[np.argmax(norms[pops])]
        a[k0] = 0.0
        a[k0, pops] = 1.0
        rhs = np.zeros(a.shape[0], dtype=complex)
        rhs[k0] = 1.0
        try:
            lu = scipy.linalg.lu_factor(a, check_finite=False)
            diag = np.abs(np.diag(lu[0]))
            if diag.min() >= 1e-13 * diag.max():
                x = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            x = None
    if x is None:
        trace_row = np.zeros(block.shape[0], dtype=complex)
        trace_row[pops] = 1.0
        weight = np.linalg.norm(block) / d if np.linalg.norm(block) > 0 else 1.0
        aug = np.vstack([block, weight * trace_row[None, :]])
        rhs = np.zeros(aug.shape[0], dtype=complex)
        rhs[-1] = weight
        x, *_ = scipy.linalg.lstsq(aug, rhs)
    residual = float(np.linalg.norm(block @ x))
    if residual > tol:
        raise ConvergenceError(f"block steady state residual {residual:.3e} above {tol:g}", residuals={"block": residual})
    rho_v = np.zeros((d, d), dtype=complex)
    for (i, jj), val in zip(pairs, x):
        rho_v[i, jj] = val
    rho = v @ rho_v @ v.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def export_blocks(decomp, directory, matrix_market=False):
    """Write ``blocks.json`` (labels and sizes) and optionally one ``.mtx`` per block."""
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "blocks.json"
    path.write_text(json.dumps(decomp.summary(), indent=2))
    paths = [path]
    if matrix_market:
        for n, block in enumerate(decomp.blocks):
            p = directory / f"block_{n:03d}.mtx"
            scipy.io.mmwrite(str(p), sp.coo_matrix(block), field="complex")
            paths.append(p)
    return paths
