"""Eigendecomposition, Bohr frequencies and jump operators."""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError
from .operators import as_square

__all__ = [
    "EigenSystem",
    "JumpOperator",
    "diagonalize",
    "bohr_frequencies",
    "transition_table",
    "jump_operators",
    "check_hermitian",
]


@dataclass(frozen=True, eq=False)
class EigenSystem:
    energies: np.ndarray
    vectors: np.ndarray
    tol_degeneracy: float

    @property
    def dim(self):
        return self.energies.size


@dataclass(frozen=True, eq=False)
class JumpOperator:
    """Projection of coupling operator ``beta`` of a bath onto Bohr frequency ``omega``.

    ``matrix`` is expressed in the original (not the eigen-) basis.
    """

    bath_label: str
    beta: int
    omega: float
    matrix: np.ndarray


def check_hermitian(op, name="operator", rtol=1e-10):
    op = as_square(op, name)
    scale = max(np.linalg.norm(op), 1.0)
    if np.linalg.norm(op - op.conj().T) > rtol * scale:
        raise ValidationError(f"{name} is not Hermitian")
    return op


def diagonalize(hamiltonian, tol_degeneracy=None):
    """Diagonalize a Hermitian matrix with a deterministic eigenvector phase.

    Each eigenvector is rotated so that its largest-magnitude component
    (first one on ties) is real and positive. ``tol_degeneracy`` defaults to
    ``1e-9`` times the spectral span.
    """
    h = check_hermitian(hamiltonian, "Hamiltonian")
    h = 0.5 * (h + h.conj().T)
    energies, vectors = np.linalg.eigh(h)
    mags = np.abs(vectors)
    lead = np.argmax(mags >= mags.max(axis=0) * (1 - 1e-12), axis=0)
    phase = vectors[lead, np.arange(vectors.shape[1])]
    vectors = vectors * (np.abs(phase) / phase)[None, :]
    if tol_degeneracy is None:
        span = float(energies[-1] - energies[0])
        tol_degeneracy = 1e-9 * span if span > 0 else 1e-12
    return EigenSystem(energies, vectors, float(tol_degeneracy))


def _dedupe(values, tol):
    """Group sorted-able values whose consecutive gaps are <= tol.

    Returns (representatives, labels) with labels indexing representatives.
    """
    flat = np.asarray(values, dtype=float).reshape(-1)
    order = np.argsort(flat, kind="stable")
    sorted_vals = flat[order]
    breaks = np.diff(sorted_vals) > tol
    group_of_sorted = np.concatenate([[0], np.cumsum(breaks)])
    n_groups = int(group_of_sorted[-1]) + 1
    sums = np.bincount(group_of_sorted, weights=sorted_vals, minlength=n_groups)
    counts = np.bincount(group_of_sorted, minlength=n_groups)
    reps = sums / counts
    # exact zeros (diagonal transitions) pin their group to 0
    zero_groups = np.unique(group_of_sorted[sorted_vals == 0.0])
    reps[zero_groups] = 0.0
    labels = np.empty(flat.size, dtype=int)
    labels[order] = group_of_sorted
    return reps, labels.reshape(np.shape(values))


def transition_table(eig):
    """Distinct Bohr frequencies and, for each pair (i, j), the index of ``E_j - E_i``."""
    diffs = eig.energies[None, :] - eig.energies[:, None]
    return _dedupe(diffs, eig.tol_degeneracy)


def bohr_frequencies(eig):
    """Sorted distinct Bohr frequencies ``E_j - E_i`` (zero and negatives included)."""
    freqs, _ = transition_table(eig)
    return freqs


def jump_operators(eig, coupling, bath_label="bath", beta=0, prune=1e-12):
    """Split ``coupling`` into jump operators ``A(omega)``, one per Bohr frequency.

    ``A(omega)`` collects the matrix elements ``<e_i|A|e_j>`` with
    ``E_j - E_i = omega``. Elements below ``prune * ||A||_F`` are discarded
    and frequencies with no surviving element are omitted, so
    ``sum(A(omega))`` reproduces ``A`` up to the pruned mass.
    """
    a = as_square(coupling, "coupling operator")
    if a.shape[0] != eig.dim:
        raise DimensionError(f"coupling operator has side {a.shape[0]}, Hamiltonian has {eig.dim}")
    freqs, labels = transition_table(eig)
    v = eig.vectors
    a_eig = v.conj().T @ a @ v
    keep = np.abs(a_eig) > prune * max(np.linalg.norm(a), np.finfo(float).tiny)
    out = []
    for f in np.unique(labels[keep]):
        block = np.where(keep & (labels == f), a_eig, 0.0)
        out.append(JumpOperator(bath_label, int(beta), float(freqs[f]), v @ block @ v.conj().T))
    return out
