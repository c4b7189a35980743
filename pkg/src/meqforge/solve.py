"""Steady states, time propagation and steady-state heat flows.

Generators built by :func:`meqforge.liouvillian.build_liouvillian` are
solved in the eigenbasis of their unitary Hamiltonian, where the commutator
is exactly diagonal and only the small dissipative rates need rotating.
Each row is scaled to unit max-norm before factorization, so population
equations with rates many orders below the Bohr frequencies are solved to
their own relative precision. That is what keeps ``sum_i J_i`` at roundoff
level relative to the individual currents.
"""

import logging
from collections import namedtuple

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import ConsistencyError, ConvergenceError, DimensionError, NumericalError, ValidationError
from .liouvillian import LiouvillianBuild
from .operators import as_square, superop_to_basis
from .spectral import diagonalize

__all__ = [
    "SteadyState",
    "HeatFlowResult",
    "working_generator",
    "steady_state",
    "evolve",
    "heat_flow",
    "trace_distance",
]

log = logging.getLogger(__name__)

SteadyState = namedtuple("SteadyState", ["rho", "residual", "method", "min_eigenvalue"])
HeatFlowResult = namedtuple("HeatFlowResult", ["per_bath", "imbalance", "flag", "residual"])

WorkingGenerator = namedtuple("WorkingGenerator", ["matrix", "basis"])


def trace_distance(rho, sigma):
    """Half the trace norm of ``rho - sigma``."""
    diff = as_square(rho) - as_square(sigma)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


def working_generator(L):
    """Generator in the eigenbasis of its Hamiltonian.

    Returns ``(matrix, basis)``: ``rho = basis @ rho_w @ basis^dag``. For a
    bare matrix the basis is ``None`` and the matrix is returned unchanged.
    """
    if not isinstance(L, LiouvillianBuild):
        mat = np.asarray(L, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionError(f"generator must be square, got shape {mat.shape}")
        d = int(round(np.sqrt(mat.shape[0])))
        if d * d != mat.shape[0]:
            raise DimensionError(f"generator side {mat.shape[0]} is not a perfect square")
        return WorkingGenerator(mat, None)

    d = L.dim
    if L.basis is not None and np.array_equal(L.hamiltonian, L.jump_hamiltonian):
        w = L.basis
        energies = np.einsum("ji,jk,ki->i", w.conj(), L.hamiltonian, w).real
        mat = L.dissipator_sum()
    else:
        eig = diagonalize(L.hamiltonian)
        w, energies = eig.vectors, eig.energies
        rot = w if L.basis is None else L.basis.conj().T @ w
        mat = superop_to_basis(L.dissipator_sum(), rot)
    # -i[H, rho] is -i(E_i - E_j) rho_ij in the eigenbasis
    mat[np.diag_indices(d * d)] -= 1j * (energies[:, None] - energies[None, :]).reshape(-1)
    return WorkingGenerator(mat, w)


def _to_original(rho_w, basis):
    return rho_w if basis is None else basis @ rho_w @ basis.conj().T


def _to_working(rho, basis):
    return rho if basis is None else basis.conj().T @ rho @ basis


def _finish(x, mat, d):
    rho = x.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    residual = float(np.linalg.norm(mat @ rho.reshape(-1)))
    return rho, residual


def _null_dim_estimate(mat, pivots=None):
    n = mat.shape[0]
    if n <= 1024:
        s = scipy.linalg.svdvals(mat)
        return int(np.sum(s <= 1e-10 * s[0]))
    return None if pivots is None else int(pivots) + 1


def _lu(mat, d):
    pops = np.arange(d) * (d + 1)
    a = mat.copy()
    norms = np.abs(a).max(axis=1)
    if np.any(norms == 0):
        return None, int(np.sum(norms == 0))
    a /= norms[:, None]
    # the trace row replaces one population equation, which trace preservation makes redundant
    k0 = pops[np.argmax(norms[pops])]
    a[k0] = 0.0
    a[k0, pops] = 1.0
    b = np.zeros(d * d, dtype=complex)
    b[k0] = 1.0
    lu, piv = scipy.linalg.lu_factor(a, overwrite_a=True, check_finite=False)
    diag = np.abs(np.diag(lu))
    tiny = int(np.sum(diag < 1e-13 * diag.max()))
    if tiny:
        return None, tiny
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False), 0


def _qr(mat, d):
    weight = np.linalg.norm(mat) / d
    trace_row = np.zeros(d * d, dtype=complex)
    trace_row[np.arange(d) * (d + 1)] = weight
    aug = np.vstack([mat, trace_row[None, :]])
    q, r = scipy.linalg.qr(aug, mode="economic", check_finite=False)
    rhs = q[-1].conj() * weight
    return scipy.linalg.solve_triangular(r, rhs, check_finite=False)


def _eig(mat, d):
    n = mat.shape[0]
    if n <= 1024:
        vals, vecs = scipy.linalg.eig(mat, check_finite=False)
        k = int(np.argmin(np.abs(vals)))
        x = vecs[:, k]
    else:
        shift = -1e-10 * np.linalg.norm(mat) / d
        _, vecs = scipy.sparse.linalg.eigs(mat, k=1, sigma=shift)
        x = vecs[:, 0]
    tr = x[np.arange(d) * (d + 1)].sum()
    if abs(tr) == 0:
        raise NumericalError("null vector has zero trace")
    return x / tr


def steady_state(L, tol=1e-10):
    """Unique fixed point of the generator.

    Parameters
    ----------
    L : LiouvillianBuild or ndarray
    tol : float
        Accepted ``||L vec(rho)||_2``.

    Returns
    -------
    SteadyState
        ``rho`` is Hermitian with unit trace; ``min_eigenvalue`` is reported
        but positivity is not enforced.

    Raises
    ------
    ConvergenceError
        When no method reaches ``tol`` or the null space is degenerate.
    """
    mat, basis = working_generator(L)
    d = int(round(np.sqrt(mat.shape[0])))
    pops = np.arange(d) * (d + 1)
    leak = np.abs(mat[pops].sum(axis=0)).max()
    scale = np.abs(mat).max()
    if leak > 1e-8 * max(scale, 1e-300):
        raise ValidationError(f"generator is not trace preserving (column-sum defect {leak:.3e})")

    residuals = {}
    x, tiny = _lu(mat, d)
    if x is None:
        null = _null_dim_estimate(mat, tiny)
        if null is not None and null > 1:
            raise ConvergenceError(f"steady state is not unique: null space dimension ~{null}", null_dim=null)
    best = None
    for method, solver in (("lu", None), ("qr", _qr), ("eig", _eig)):
        try:
            if solver is not None:
                x = solver(mat, d)
            if x is None or not np.all(np.isfinite(x)):
                raise NumericalError("non-finite solution")
        except (NumericalError, np.linalg.LinAlgError, scipy.sparse.linalg.ArpackError, ValueError) as exc:
            residuals[method] = float("nan")
            log.debug("steady-state method %s failed: %s", method, exc)
            x = None
            continue
        rho_w, res = _finish(x, mat, d)
        residuals[method] = res
        if best is None or res < best[1]:
            best = (rho_w, res, method)
        if res <= tol:
            break
        log.info("steady-state method %s residual %.3e above tol %.1e", method, res, tol)
        x = None
    if best is None or best[1] > tol:
        raise ConvergenceError(f"no steady-state method reached tol={tol:g}: {residuals}", residuals=residuals)
    rho_w, res, method = best
    rho = _to_original(rho_w, basis)
    rho = 0.5 * (rho + rho.conj().T)
    return SteadyState(rho, res, method, float(np.linalg.eigvalsh(rho)[0]))


def evolve(L, rho0, times):
    """Density matrices at ``times`` (ascending, >= 0) starting from ``rho0`` at t = 0.

    Propagators ``expm(L dt)`` are computed by scaling and squaring and
    reused when consecutive steps have equal length.
    """
    mat, basis = working_generator(L)
    d = int(round(np.sqrt(mat.shape[0])))
    rho0 = as_square(rho0, "rho0")
    if rho0.shape != (d, d):
        raise DimensionError(f"rho0 has shape {rho0.shape}, generator acts on {d}x{d}")
    if np.linalg.norm(rho0 - rho0.conj().T) > 1e-10 * max(1.0, np.linalg.norm(rho0)):
        raise ValidationError("rho0 is not Hermitian")
    if abs(np.trace(rho0) - 1) > 1e-10:
        raise ValidationError(f"rho0 has trace {np.trace(rho0)}, expected 1")
    times = np.asarray(times, dtype=float).reshape(-1)
    if times.size and (times[0] < 0 or np.any(np.diff(times) < 0)):
        raise ValidationError("times must be non-negative and ascending")

    vec = _to_working(rho0, basis).reshape(-1)
    out, t_prev, cache = [], 0.0, {}
    for t in times:
        dt = t - t_prev
        if dt > 0:
            if dt not in cache:
                cache.clear()
                cache[dt] = scipy.linalg.expm(mat * dt)
            vec = cache[dt] @ vec
            if not np.all(np.isfinite(vec)):
                raise NumericalError(f"propagation produced non-finite values at t={t}")
        t_prev = t
        out.append(rho0.copy() if t == 0 else _to_original(vec.reshape(d, d), basis))
    return out


def heat_flow(H_S, build, rho_ss, hamiltonian="system", stale_tol=1e-8):
    """Steady-state energy current out of each bath, ``Tr[H D_i[rho]]``.

    Parameters
    ----------
    H_S : ndarray
        System Hamiltonian used inside the trace.
    build : LiouvillianBuild
    rho_ss : ndarray
        Steady state of ``build``; rechecked against ``stale_tol``.
    hamiltonian : {"system", "system+lamb"}
        ``"system+lamb"`` adds the Lamb shift to ``H_S`` in the trace.

    Returns
    -------
    HeatFlowResult
        ``flag`` is empty for a clean point, otherwise a ``;``-joined list
        of ``imbalance`` and ``negative_flow``.
    """
    if hamiltonian not in ("system", "system+lamb"):
        raise ValidationError(f"hamiltonian must be 'system' or 'system+lamb', got {hamiltonian!r}")
    h = as_square(H_S, "H_S")
    if hamiltonian == "system+lamb":
        h = h + build.lamb_shift
    rho = as_square(rho_ss, "rho_ss")
    d = build.dim
    if h.shape != (d, d) or rho.shape != (d, d):
        raise DimensionError("H_S, rho_ss and the generator must share one space")

    basis = build.basis
    rho_w = _to_working(rho, basis)
    h_w = _to_working(h, basis)
    h_gen = _to_working(build.hamiltonian, basis)
    drift = -1j * (h_gen @ rho_w - rho_w @ h_gen)
    per_bath = {}
    rate = 0.0
    for label, diss in build.eigen_dissipators.items():
        x = (diss @ rho_w.reshape(-1)).reshape(d, d)
        drift += x
        per_bath[label] = float(np.einsum("ij,ji->", h_w, x).real)
        rate = max(rate, float(np.abs(diss).max()))
    residual = float(np.linalg.norm(drift))
    if residual > stale_tol:
        raise ConsistencyError(f"rho_ss is not a steady state of this generator (residual {residual:.3e})")

    values = list(per_bath.values())
    imbalance = abs(float(np.sum(values)))
    flags = []
    scale = max((abs(v) for v in values), default=0.0)
    # currents that are themselves roundoff (single bath, equal temperatures) carry no balance information
    noise = 1e-13 * rate * float(np.abs(h_w).max())
    if imbalance > max(1e-10 * scale, noise):
        flags.append("imbalance")
    temps = {b.label: b.temperature for b in build.baths}
    if len(temps) == 2 and set(temps) == set(per_bath):
        hot, cold = sorted(temps, key=temps.get, reverse=True)
        if temps[hot] > temps[cold] and per_bath[hot] < 0:
            flags.append("negative_flow")
            log.warning("heat flows from cold to hot bath: J[%s] = %.3e", hot, per_bath[hot])
    return HeatFlowResult(per_bath, imbalance, ";".join(flags), residual)
