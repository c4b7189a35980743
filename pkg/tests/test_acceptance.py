"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``PASS``/``FAIL`` line; run with ``pytest -s`` or read them
from the terminal since they bypass output capture. Chain builds at N=4 use
several hundred MB each, so every test drops its builds before the next one.
"""

import gc
import itertools
import math
import time

import numpy as np
import pytest

from meqforge.bath import BathSpec, I_of_omega, S_of_omega, pv_quadrature_S
from meqforge.liouvillian import build_liouvillian
from meqforge.models import ChainParams, chain_baths, chain_hamiltonians, local_explicit_liouvillian, number_operator
from meqforge.operators import annihilation, pauli
from meqforge.secular import FullSecular, Partial, Redfield, Unified
from meqforge.solve import heat_flow, steady_state, trace_distance
from meqforge.errors import ConvergenceError
from meqforge.symmetry import block_steady_state, block_transform, check_weak_symmetry

PSA = Partial(1e4)


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
        assert ok, detail

    yield emit
    gc.collect()


def chain_flow(p, policy, mode="global", include_lamb_shift=True):
    """Steady-state heat flows of one chain configuration."""
    model = chain_hamiltonians(p)
    jump = model.H_bare if mode == "local" else model.H_full
    build = build_liouvillian(model.H_full, jump, chain_baths(p, model), policy, include_lamb_shift=include_lamb_shift)
    ss = steady_state(build)
    flow = heat_flow(model.H_full, build, ss.rho, hamiltonian="system+lamb" if include_lamb_shift else "system")
    del build
    gc.collect()
    return flow


def test_gibbs_fixed_point(report):
    start = time.perf_counter()
    n, big_omega, temp = 8, 1.0, 0.5
    a = annihilation(n)
    h = big_omega * a.conj().T @ a
    bath = BathSpec(temp, 0.01, 0.1, 100.0, [a + a.conj().T], label="bath")
    build = build_liouvillian(h, h, [bath], FullSecular())
    rho = steady_state(build).rho
    weights = np.exp(-np.arange(n) * big_omega / temp)
    err = float(np.max(np.abs(np.diag(rho).real - weights / weights.sum())))
    elapsed = time.perf_counter() - start
    report(1, err < 1e-8 and elapsed < 1.0, f"max population error {err:.2e} (< 1e-8), {elapsed:.2f} s (< 1 s)")


def test_local_oracle_equivalence(report):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    for n_levels in (4, 3, 3):
        p = ChainParams(
            N=n_levels,
            omega1=rng.uniform(0.8, 1.2),
            omega2=rng.uniform(0.8, 1.2),
            Omega_L=rng.uniform(0.8, 1.8),
            Omega_R=rng.uniform(0.8, 1.8),
            g1=rng.uniform(0.005, 0.1),
            g2=rng.uniform(0.005, 0.1),
            g12=rng.uniform(0.005, 0.5),
            T_L=rng.uniform(0.2, 1.0),
            T_R=rng.uniform(0.05, 0.2),
            alpha_L=rng.uniform(0.005, 0.05),
            alpha_R=rng.uniform(0.005, 0.05),
        )
        model = chain_hamiltonians(p)
        generic = build_liouvillian(model.H_full, model.H_bare, chain_baths(p, model), FullSecular()).total
        oracle = local_explicit_liouvillian(p).total
        worst = max(worst, float(np.linalg.norm(generic - oracle) / np.linalg.norm(oracle)))
        del generic, oracle
        gc.collect()
    elapsed = time.perf_counter() - start
    report(2, worst < 1e-10 and elapsed < 10, f"max relative Frobenius difference {worst:.2e} (< 1e-10), {elapsed:.1f} s (< 10 s)")


def test_policy_limits(report):
    start = time.perf_counter()
    p = ChainParams(N=3, Omega_L=1.5, Omega_R=1.5, g1=0.05, g2=0.05, g12=0.1)
    model = chain_hamiltonians(p)
    baths = chain_baths(p, model)

    def total(policy):
        return build_liouvillian(model.H_full, model.H_full, baths, policy).total

    fsa, red = total(FullSecular()), total(Redfield())
    d0 = float(np.linalg.norm(total(Partial(0.0)) - fsa) / np.linalg.norm(fsa))
    dinf = float(np.linalg.norm(total(Partial(math.inf)) - red) / np.linalg.norm(red))
    elapsed = time.perf_counter() - start
    ok = d0 <= 1e-12 and dinf <= 1e-12 and elapsed < 10
    report(3, ok, f"Partial(0) vs FSA {d0:.1e}, Partial(inf) vs Redfield {dinf:.1e} (<= 1e-12), {elapsed:.1f} s (< 10 s)")


def test_lamb_shift_quadrature_and_kms(report):
    start = time.perf_counter()
    worst_s, worst_kms = 0.0, 0.0
    for omega, temp in itertools.product((0.1, 0.5, 1.0, 2.0, 5.0), (0.1, 0.5, 1.0)):
        bath = BathSpec(temp, 0.01, 0.1, 100.0, [pauli("x")])
        closed = float(S_of_omega(omega, bath))
        quad = pv_quadrature_S(omega, bath)
        worst_s = max(worst_s, abs(closed - quad) / abs(quad))
        up, down = float(I_of_omega(omega, bath)), float(I_of_omega(-omega, bath))
        worst_kms = max(worst_kms, abs(down - math.exp(-omega / temp) * up) / down)
    elapsed = time.perf_counter() - start
    ok = worst_s < 1e-6 and worst_kms < 1e-12 and elapsed < 5
    report(4, ok, f"S vs quadrature {worst_s:.1e} (< 1e-6), KMS {worst_kms:.1e} (< 1e-12), {elapsed:.1f} s (< 5 s)")


def test_energy_balance(report):
    start = time.perf_counter()
    worst, converged, skipped = 0.0, 0, []
    for g, g12, policy in itertools.product((0.01, 0.05, 0.1), (0.1, 0.3, 0.5), (Redfield(), FullSecular(), PSA, Unified(0.01))):
        p = ChainParams(N=4, Omega_L=1.5, Omega_R=1.5, g1=g, g2=g, g12=g12)
        try:
            flow = chain_flow(p, policy, include_lamb_shift=False)
        except ConvergenceError as exc:
            skipped.append((g, g12, policy.describe(), str(exc)))
            continue
        converged += 1
        worst = max(worst, flow.imbalance / max(abs(v) for v in flow.per_bath.values()))
    elapsed = time.perf_counter() - start
    ok = converged > 0 and worst < 1e-10 and elapsed < 600
    detail = f"max |J_L + J_R| / max|J| {worst:.1e} (< 1e-10) over {converged}/36 converged points, {elapsed:.0f} s (< 600 s)"
    if skipped:
        detail += f"; not converged: {skipped}"
    report(5, ok, detail)


def test_local_global_agreement(report):
    start = time.perf_counter()
    p = ChainParams(N=4, Omega_L=1.0, Omega_R=1.0, T_L=0.5, T_R=0.1, g1=0.05, g2=0.05, g12=0.05)
    j_global = chain_flow(p, PSA).per_bath["L"]
    j_local = chain_flow(p, PSA, mode="local").per_bath["L"]
    rel = abs(j_local - j_global) / abs(j_global)
    elapsed = time.perf_counter() - start
    ok = rel < 0.10 and elapsed < 120
    report(6, ok, f"J_local {j_local:.5e}, J_global {j_global:.5e}, relative difference {rel:.2%} (< 10%), {elapsed:.0f} s (< 120 s)")


NON_RESONANT = dict(N=4, Omega_L=1.5, Omega_R=1.5, T_L=0.5, T_R=0.1, g1=0.01, g2=0.01, g12=0.1)


def test_full_secular_overestimates(report):
    start = time.perf_counter()
    p = ChainParams(**NON_RESONANT)
    j_fsa = chain_flow(p, FullSecular()).per_bath["L"]
    j_psa = chain_flow(p, PSA).per_bath["L"]
    # a hotter left bath, checked qualitatively
    p_hot = ChainParams(**{**NON_RESONANT, "T_L": 1.0})
    j_fsa_hot = chain_flow(p_hot, FullSecular()).per_bath["L"]
    j_psa_hot = chain_flow(p_hot, PSA).per_bath["L"]
    elapsed = time.perf_counter() - start
    ok = j_fsa > j_psa and j_fsa_hot > j_psa_hot and elapsed < 120
    report(
        7,
        ok,
        f"J_FSA {j_fsa:.4e} > J_PSA {j_psa:.4e}; at T_L=1: {j_fsa_hot:.4e} > {j_psa_hot:.4e}; {elapsed:.0f} s (< 120 s)",
    )


def test_unified_matches_partial(report):
    start = time.perf_counter()
    p = ChainParams(**NON_RESONANT)
    j_uni = chain_flow(p, Unified(0.01)).per_bath["L"]
    j_psa = chain_flow(p, PSA).per_bath["L"]
    rel = abs(j_uni - j_psa) / abs(j_psa)
    elapsed = time.perf_counter() - start
    ok = rel < 0.05 and elapsed < 120
    report(8, ok, f"J_unified {j_uni:.5e}, J_PSA {j_psa:.5e}, relative difference {rel:.2%} (< 5%), {elapsed:.0f} s (< 120 s)")


def test_sweet_spot(report):
    start = time.perf_counter()
    couplings = (0.3, 0.4, 0.5, 0.6, 0.7)
    flows = []
    for g12 in couplings:
        p = ChainParams(N=4, Omega_L=1.5, Omega_R=1.5, g1=0.02, g2=0.02, g12=g12)
        flows.append(chain_flow(p, PSA).per_bath["L"])
    best = couplings[int(np.argmax(flows))]
    elapsed = time.perf_counter() - start
    ok = best == 0.5 and elapsed < 300
    values = ", ".join(f"{g}: {j:.5e}" for g, j in zip(couplings, flows))
    report(9, ok, f"argmax g12 = {best} (expected 0.5) from {{{values}}}, {elapsed:.0f} s (< 300 s)")


def _occupation_ket(index):
    # computational index 0 of a qubit is its excited state
    b1, b2 = divmod(index, 2)
    return f"{1 - b1}{1 - b2}"


def test_symmetry_suite(report):
    start = time.perf_counter()
    p = ChainParams(**NON_RESONANT)
    model = chain_hamiltonians(p)
    baths = chain_baths(p, model)
    fsa = build_liouvillian(model.H_full, model.H_full, baths, FullSecular())
    _, fsa_res = check_weak_symmetry(fsa, model.H_full)
    del fsa
    gc.collect()

    psa = build_liouvillian(model.H_full, model.H_full, baths, PSA)
    n_op = number_operator(p)
    _, psa_res = check_weak_symmetry(psa, n_op)
    rho_full = steady_state(psa).rho
    decomp = block_transform(psa, n_op)
    del psa
    gc.collect()
    rho_block = block_steady_state(decomp)
    dist = trace_distance(rho_block, rho_full)
    off = decomp.off_block_residual
    del decomp
    gc.collect()

    sp_, sm = pauli("plus"), pauli("minus")
    eye = np.eye(2)
    h_toy = 0.5 * (np.kron(pauli("z"), eye) + np.kron(eye, pauli("z"))) + 0.05 * (np.kron(sp_, sm) + np.kron(sm, sp_))
    toy_bath = BathSpec(0.5, 0.01, 0.1, 100.0, [np.kron(pauli("x"), eye)])
    toy = build_liouvillian(h_toy, h_toy, [toy_bath], FullSecular())
    toy_n = np.kron(sp_ @ sm, eye) + np.kron(eye, sp_ @ sm)
    labels = sorted(f"|{_occupation_ket(i)}><{_occupation_ket(j)}|" for i, j in block_transform(toy, toy_n).block_basis(1))
    expected = sorted(["|01><00|", "|10><00|", "|11><01|", "|11><10|"])

    elapsed = time.perf_counter() - start
    ok = fsa_res < 1e-9 and psa_res < 1e-9 and off < 1e-9 and dist < 1e-9 and labels == expected and elapsed < 60
    report(
        10,
        ok,
        f"[L,H_S] {fsa_res:.1e}, [L,N] {psa_res:.1e}, off-block {off:.1e} (< 1e-9), "
        f"block steady state distance {dist:.1e} (< 1e-9), d=1 basis {labels}, {elapsed:.0f} s (< 60 s)",
    )


def test_trace_and_hermiticity(report):
    start = time.perf_counter()
    rng = np.random.default_rng(11)
    p = ChainParams(N=4, Omega_L=1.5, Omega_R=1.5, g1=0.05, g2=0.05, g12=0.1)
    model = chain_hamiltonians(p)
    baths = chain_baths(p, model)
    d = model.H_full.shape[0]
    states = []
    for _ in range(20):
        x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        x = x + x.conj().T
        states.append(x / np.linalg.norm(x))
    worst_trace, worst_herm = 0.0, 0.0
    for policy in (Redfield(), FullSecular(), PSA, Unified(0.01)):
        total = build_liouvillian(model.H_full, model.H_full, baths, policy).total
        worst_trace = max(worst_trace, float(np.abs(np.eye(d).reshape(-1) @ total).max()))
        for rho in states:
            out = (total @ rho.reshape(-1)).reshape(d, d)
            worst_herm = max(worst_herm, float(np.abs(out - out.conj().T).max()))
        del total
        gc.collect()
    elapsed = time.perf_counter() - start
    ok = worst_trace < 1e-10 and worst_herm < 1e-10 and elapsed < 60
    report(11, ok, f"max |vec(1)^dag L| {worst_trace:.1e}, max Hermiticity defect {worst_herm:.1e} (< 1e-10), {elapsed:.0f} s (< 60 s)")


def test_construction_cost(report):
    start = time.perf_counter()
    p = ChainParams(N=4, Omega_L=1.5, Omega_R=1.5, g1=0.01, g2=0.01, g12=0.1)
    model = chain_hamiltonians(p)
    baths = chain_baths(p, model)

    def assembly_time(policy):
        best = math.inf
        for _ in range(3):
            t0 = time.perf_counter()
            build = build_liouvillian(model.H_full, model.H_full, baths, policy)
            build.total
            best = min(best, time.perf_counter() - t0)
            del build
            gc.collect()
        return best

    t_uni, t_psa = assembly_time(Unified(0.01)), assembly_time(PSA)
    elapsed = time.perf_counter() - start
    ok = t_uni < t_psa and elapsed < 300
    report(12, ok, f"Unified(0.01) {t_uni:.2f} s < PSA(1e4) {t_psa:.2f} s, {elapsed:.0f} s (< 300 s)")
