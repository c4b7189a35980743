"""Assembly of the vectorized Liouvillian from jump operators and a secular policy.

For one bath with stacked jump operators ``A_p`` (any beta, any frequency)
and a masked coefficient matrix ``G[p, q] = alpha**2 gamma(w_p, w_q)``, the
dissipator is

    sum_pq G[p, q] (A_p rho A_q^dag - 1/2 {A_q^dag A_p, rho}).

Writing ``B_p = sum_q conj(G[p, q]) A_q`` turns the double sum into a single
one, ``sum_p A_p (x) conj(B_p)`` for the jump part and ``K = sum_p B_p^dag A_p``
for the anticommutator. The operators are moved to the eigenbasis of the jump
Hamiltonian first, where each ``A_p`` is sparse, and the result is rotated
back. Every policy runs through the same code, only the mask changes.
"""

import logging
import math
import pathlib
from collections import namedtuple

import numpy as np
import scipy.io
import scipy.sparse as sp

from .bath import I_of_omega, S_of_omega
from .errors import DimensionError, ValidationError
from .operators import as_square, superop_from_basis
from .secular import FullSecular, Partial, Redfield, Unified, cluster_frequencies, cluster_jump_ops, psa_drop
from .spectral import check_hermitian, diagonalize, jump_operators

__all__ = [
    "LiouvillianBuild",
    "DissipatorTerms",
    "build_dissipator",
    "build_lamb_shift",
    "build_liouvillian",
    "relaxation_time",
    "export_matrix_market",
]

log = logging.getLogger(__name__)

DissipatorTerms = namedtuple("DissipatorTerms", ["dissipators", "kept_pairs", "dropped_pairs"])


class LiouvillianBuild:
    """Generator together with its pieces and construction metadata.

    The dissipators are stored in ``basis`` (the eigenvectors of the jump
    Hamiltonian), where assembly is cheap. ``total`` and
    ``per_bath_dissipators`` are rotated to the original basis on first
    access and cached. ``per_bath_dissipators`` carry the ``alpha**2``
    prefactor, so ``total == -i[hamiltonian, .] + sum(per_bath_dissipators)``.

    Parameters
    ----------
    eigen_dissipators : dict
        Bath label to ``d**2 x d**2`` dissipator expressed in ``basis``.
    basis : ndarray or None
        Unitary whose columns span the working basis; ``None`` means the
        dissipators are already in the original basis.
    """

    def __init__(
        self,
        eigen_dissipators,
        lamb_shift,
        hamiltonian,
        system_hamiltonian,
        policy,
        kept_pairs,
        dropped_pairs,
        clusters=None,
        is_local=False,
        basis=None,
        jump_hamiltonian=None,
        baths=(),
        pair_counts=None,
    ):
        self.eigen_dissipators = dict(eigen_dissipators)
        self.lamb_shift = lamb_shift
        self.hamiltonian = hamiltonian
        self.system_hamiltonian = system_hamiltonian
        self.policy = policy
        self.kept_pairs = int(kept_pairs)
        self.dropped_pairs = int(dropped_pairs)
        self.clusters = clusters
        self.is_local = bool(is_local)
        self.basis = basis
        self.jump_hamiltonian = system_hamiltonian if jump_hamiltonian is None else jump_hamiltonian
        self.baths = tuple(baths)
        self.pair_counts = dict(pair_counts or {})
        self._total = None
        self._per_bath = None

    @property
    def dim(self):
        return self.system_hamiltonian.shape[0]

    def _to_original(self, superop):
        return superop.copy() if self.basis is None else superop_from_basis(superop, self.basis)

    def dissipator_sum(self):
        """Sum of the dissipators in the working basis."""
        d = self.dim
        out = np.zeros((d * d, d * d), dtype=complex)
        for diss in self.eigen_dissipators.values():
            out += diss
        return out

    @property
    def total(self):
        if self._total is None:
            total = self._to_original(self.dissipator_sum())
            _add_commutator(total, self.hamiltonian, -1j)
            self._total = total
        return self._total

    @property
    def per_bath_dissipators(self):
        if self._per_bath is None:
            self._per_bath = {lab: self._to_original(m) for lab, m in self.eigen_dissipators.items()}
        return self._per_bath


def _add_commutator(superop, h, scale):
    """In place ``superop += scale * super_commutator(h)`` without forming the Kronecker products."""
    d = h.shape[0]
    s4 = superop.reshape(d, d, d, d)
    for n in range(d):
        s4[:, n, :, n] += scale * h
        s4[n, :, n, :] -= scale * h.T


def relaxation_time(baths):
    """``tau_R = 1 / alpha_max**2``; infinite when every bath is decoupled."""
    amax = max((abs(b.alpha) for b in baths), default=0.0)
    return math.inf if amax == 0 else 1.0 / amax**2


def _check_policy(policy):
    if not isinstance(policy, (Redfield, FullSecular, Partial, Unified)):
        raise ValidationError(f"unknown secular policy {policy!r}")


def _group_by_bath(jumps, baths):
    labels = [b.label for b in baths]
    if len(set(labels)) != len(labels):
        raise ValidationError(f"bath labels must be unique, got {labels}")
    if isinstance(jumps, dict):
        grouped = {lab: list(jumps.get(lab, [])) for lab in labels}
        extra = set(jumps) - set(labels)
    else:
        grouped = {lab: [] for lab in labels}
        extra = set()
        for j in jumps:
            if j.bath_label in grouped:
                grouped[j.bath_label].append(j)
            else:
                extra.add(j.bath_label)
    if extra:
        raise ValidationError(f"jump operators reference unknown baths {sorted(extra)}")
    dims = {j.matrix.shape for js in grouped.values() for j in js}
    if len(dims) > 1:
        raise DimensionError(f"jump operators live on different spaces: {sorted(dims)}")
    return grouped


def _cluster_all(grouped, width):
    freqs = sorted({j.omega for js in grouped.values() for j in js})
    clusters = cluster_frequencies(freqs, width)
    return {lab: cluster_jump_ops(js, clusters) for lab, js in grouped.items()}, clusters


def _prepare(jumps, baths, policy):
    _check_policy(policy)
    grouped = _group_by_bath(jumps, baths)
    clusters = None
    if isinstance(policy, Unified):
        grouped, clusters = _cluster_all(grouped, policy.width)
    for lab in grouped:
        grouped[lab] = sorted(grouped[lab], key=lambda j: (j.beta, j.omega))
    return grouped, clusters


def _keep_mask(omegas, policy, tau_r, tol):
    delta = np.abs(omegas[:, None] - omegas[None, :])
    if isinstance(policy, Redfield):
        return np.ones(delta.shape, dtype=bool)
    if isinstance(policy, (FullSecular, Unified)):
        # clustered operators carry their representative, so unified keeps equal clusters
        return delta <= tol
    if not math.isfinite(tau_r):
        return np.ones(delta.shape, dtype=bool)
    # frequencies inside tol are the same Bohr frequency
    drop = np.asarray(psa_drop(omegas[:, None], omegas[None, :], tau_r, policy.cutoff), dtype=bool)
    return ~drop | (delta <= tol)


def _coefficients(omegas, bath, policy, keep):
    """Masked ``alpha**2 gamma`` and ``alpha**2 pi`` matrices for one bath."""
    uniq, inv = np.unique(omegas, return_inverse=True)
    i_vals = I_of_omega(uniq, bath)[inv]
    s_vals = S_of_omega(uniq, bath)[inv]
    a2 = bath.alpha**2
    if isinstance(policy, Unified):
        # only equal clusters survive, where gamma(w, w) = gamma_full(w) and pi(w, w) = S(w)
        shape = (omegas.size, omegas.size)
        g = np.broadcast_to(2.0 * np.pi * i_vals[:, None], shape).astype(complex)
        p = np.broadcast_to(s_vals[:, None], shape).astype(complex)
    else:
        g = np.pi * (i_vals[:, None] + i_vals[None, :]) + 1j * (s_vals[:, None] - s_vals[None, :])
        p = np.pi / 2j * (i_vals[:, None] - i_vals[None, :]) + 0.5 * (s_vals[:, None] + s_vals[None, :])
    g = np.where(keep, a2 * g, 0.0)
    p = np.where(keep, a2 * p, 0.0)
    return g, p


def _stack(jumps, basis, d):
    mats = np.empty((len(jumps), d, d), dtype=complex)
    for n, j in enumerate(jumps):
        m = as_square(j.matrix, "jump operator")
        mats[n] = m if basis is None else basis.conj().T @ m @ basis
    if basis is not None and mats.size:
        # rotation leaves roundoff where the operator vanishes in this basis
        mats[np.abs(mats) < 1e-13 * np.abs(mats).max()] = 0.0
    return mats


def _bath_pieces(jumps, bath, policy, tau_r, tol, basis, d, want_dissipator=True, want_lamb=True):
    """Dissipator and Lamb shift of one bath, both in ``basis`` if given."""
    f = len(jumps)
    if f == 0:
        zero_d = np.zeros((d * d, d * d), dtype=complex) if want_dissipator else None
        return zero_d, np.zeros((d, d), dtype=complex), 0, 0
    omegas = np.array([j.omega for j in jumps], dtype=float)
    keep = _keep_mask(omegas, policy, tau_r, tol)
    kept = int(keep.sum())
    g, p = _coefficients(omegas, bath, policy, keep)
    mats = _stack(jumps, basis, d)
    flat = sp.csr_matrix(mats.reshape(f, d * d))

    diss = None
    if want_dissipator:
        # B_p = sum_q conj(G[p, q]) A_q, as (A^T conj(G)^T)^T to keep the sparse factor on the left
        b = np.asarray((flat.T @ g.conj().T).T).reshape(f, d, d)
        jump = np.asarray(flat.T @ b.conj().reshape(f, d * d))  # [(i, j), (k, l)]
        diss = np.ascontiguousarray(jump.reshape(d, d, d, d).transpose(0, 2, 1, 3)).reshape(d * d, d * d)
        del jump
        k = np.tensordot(b.conj(), mats, axes=([0, 1], [0, 1]))
        d4 = diss.reshape(d, d, d, d)
        for n in range(d):
            d4[:, n, :, n] -= 0.5 * k
            d4[n, :, n, :] -= 0.5 * k.T
    lamb = np.zeros((d, d), dtype=complex)
    if want_lamb:
        c = np.asarray((flat.T @ p.conj().T).T).reshape(f, d, d)
        lamb = np.tensordot(c.conj(), mats, axes=([0, 1], [0, 1]))
    return diss, lamb, kept, f * f - kept


def _space_dim(grouped):
    for js in grouped.values():
        if js:
            return js[0].matrix.shape[0]
    return None


def build_dissipator(jumps, baths, policy, tau_r=None, tol_degeneracy=1e-12, basis=None):
    """Per-bath dissipator superoperators and pair counts.

    Parameters
    ----------
    jumps : dict or iterable of JumpOperator
        Either ``{bath_label: [JumpOperator, ...]}`` or a flat list.
    baths : sequence of BathSpec
    policy : Redfield, FullSecular, Partial or Unified
        ``Unified`` clusters the frequencies of all given jumps first.
    tau_r : float, optional
        Relaxation time for ``Partial``; defaults to ``1 / alpha_max**2``.
    tol_degeneracy : float
        Frequencies closer than this count as equal.
    basis : ndarray, optional
        Unitary in which the jump operators are sparse, typically the
        eigenvectors of the jump Hamiltonian. Only affects speed.

    Returns
    -------
    DissipatorTerms
        ``dissipators`` maps bath label to a ``d**2 x d**2`` matrix including
        ``alpha**2``; pair counts are summed over baths.
    """
    grouped, _ = _prepare(jumps, baths, policy)
    tau_r = relaxation_time(baths) if tau_r is None else tau_r
    d = _space_dim(grouped)
    out, kept, dropped = {}, 0, 0
    for bath in baths:
        if d is None:
            out[bath.label] = np.zeros((0, 0), dtype=complex)
            continue
        diss, _, k, dr = _bath_pieces(grouped[bath.label], bath, policy, tau_r, tol_degeneracy, basis, d, want_lamb=False)
        out[bath.label] = diss if basis is None else superop_from_basis(diss, basis)
        kept += k
        dropped += dr
    return DissipatorTerms(out, kept, dropped)


def build_lamb_shift(jumps, baths, policy, tau_r=None, tol_degeneracy=1e-12, dim=None):
    """Lamb-shift Hamiltonian over the same retained pairs as the dissipator.

    With no jump operators the result is the zero matrix of side ``dim``.
    """
    grouped, _ = _prepare(jumps, baths, policy)
    tau_r = relaxation_time(baths) if tau_r is None else tau_r
    d = _space_dim(grouped)
    if d is None:
        return np.zeros((dim or 0, dim or 0), dtype=complex)
    total = np.zeros((d, d), dtype=complex)
    for bath in baths:
        _, lamb, _, _ = _bath_pieces(grouped[bath.label], bath, policy, tau_r, tol_degeneracy, None, d, want_dissipator=False)
        total += lamb
    return total


def build_liouvillian(H_full, H_jump_basis, baths, policy, include_lamb_shift=True, tol_degeneracy=None):
    """Assemble the generator in global (``H_jump_basis is H_full``) or local form.

    Jump operators come from the eigenbasis of ``H_jump_basis``; the unitary
    part uses ``H_full`` plus the Lamb shift when ``include_lamb_shift``.
    """
    _check_policy(policy)
    h_full = check_hermitian(H_full, "H_full")
    h_jump = check_hermitian(H_jump_basis, "H_jump_basis")
    if h_full.shape != h_jump.shape:
        raise DimensionError(f"H_full {h_full.shape} and H_jump_basis {h_jump.shape} differ")
    d = h_full.shape[0]
    for bath in baths:
        for n, op in enumerate(bath.coupling_ops):
            if np.shape(op) != (d, d):
                raise DimensionError(f"coupling operator {n} of bath {bath.label!r} has shape {np.shape(op)}, expected {(d, d)}")
    is_local = not np.array_equal(h_full, h_jump)

    eig = diagonalize(h_jump, tol_degeneracy)
    raw = {b.label: [j for n, op in enumerate(b.coupling_ops) for j in jump_operators(eig, op, b.label, n)] for b in baths}
    grouped, clusters = _prepare(raw, baths, policy)
    tau_r = relaxation_time(baths)
    v = eig.vectors

    eigen, kept, dropped, counts = {}, 0, 0, {}
    lamb = np.zeros((d, d), dtype=complex)
    for bath in baths:
        diss, lb, k, dr = _bath_pieces(grouped[bath.label], bath, policy, tau_r, eig.tol_degeneracy, v, d)
        eigen[bath.label] = diss
        lamb += v @ lb @ v.conj().T
        kept += k
        dropped += dr
        counts[bath.label] = (k, dr)

    h = h_full + lamb if include_lamb_shift else h_full.copy()
    log.debug("built %s liouvillian (d=%d, kept=%d, dropped=%d)", policy.describe(), d, kept, dropped)
    return LiouvillianBuild(
        eigen_dissipators=eigen,
        lamb_shift=lamb,
        hamiltonian=h,
        system_hamiltonian=h_full,
        policy=policy,
        kept_pairs=kept,
        dropped_pairs=dropped,
        clusters=clusters,
        is_local=is_local,
        basis=v,
        jump_hamiltonian=h_jump,
        baths=baths,
        pair_counts=counts,
    )


def export_matrix_market(build, directory, prefix="liouvillian"):
    """Write the total generator and each dissipator as complex Matrix Market files.

    Returns the list of written paths.
    """
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    items = [(prefix, build.total)] + [(f"{prefix}_dissipator_{lab}", m) for lab, m in build.per_bath_dissipators.items()]
    paths = []
    for name, mat in items:
        path = directory / f"{name}.mtx"
        scipy.io.mmwrite(str(path), sp.coo_matrix(mat), field="complex")
        paths.append(path)
    return paths
