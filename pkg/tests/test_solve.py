import numpy as np
import pytest
import scipy.linalg

from meqforge.bath import BathSpec
from meqforge.errors import ConsistencyError, ConvergenceError, DimensionError, ValidationError
from meqforge.liouvillian import build_liouvillian
from meqforge.models import ChainParams, chain_baths, chain_hamiltonians
from meqforge.operators import annihilation, pauli
from meqforge.secular import FullSecular, Partial, Redfield, Unified
from meqforge.solve import evolve, heat_flow, steady_state, trace_distance, working_generator

from ._helpers import drude_bath, random_density


def gibbs(h, temperature):
    rho = scipy.linalg.expm(-h / temperature)
    return rho / np.trace(rho)


def resonator_build(policy=FullSecular(), n=8, T=0.5, alpha=0.05):
    a = annihilation(n)
    h = 1.0 * a.conj().T @ a
    bath = BathSpec(T, alpha, 0.1, 100.0, [a + a.conj().T], label="R")
    return h, build_liouvillian(h, h, [bath], policy)


def test_single_resonator_thermalizes():
    h, build = resonator_build()
    ss = steady_state(build)
    assert trace_distance(ss.rho, gibbs(h, 0.5)) < 1e-8
    assert ss.residual < 1e-10
    assert ss.min_eigenvalue > -1e-12
    assert np.trace(ss.rho).real == pytest.approx(1.0, abs=1e-14)


def test_qubit_thermalizes_with_every_secular_policy():
    h = 0.5 * pauli("z")
    for policy in (FullSecular(), Partial(1e4), Unified(0.01)):
        build = build_liouvillian(h, h, [drude_bath(T=0.3, alpha=0.05)], policy)
        assert trace_distance(steady_state(build).rho, gibbs(h, 0.3)) < 1e-10


def test_bare_matrix_input():
    h, build = resonator_build(n=4)
    ss = steady_state(build.total)
    assert trace_distance(ss.rho, steady_state(build).rho) < 1e-9
    mat, basis = working_generator(build.total)
    assert basis is None and mat is not None


def test_decoupled_system_has_degenerate_steady_states():
    h = 0.5 * pauli("z")
    bath = BathSpec(0.5, 0.0, 0.1, 100.0, [pauli("x")])
    build = build_liouvillian(h, h, [bath], FullSecular())
    with pytest.raises(ConvergenceError) as err:
        steady_state(build)
    assert err.value.null_dim is None or err.value.null_dim > 1


def test_rejects_non_trace_preserving_generator():
    with pytest.raises(ValidationError):
        steady_state(-np.eye(4))
    with pytest.raises(DimensionError):
        steady_state(np.eye(3))


def test_larmor_precession():
    h = 0.5 * pauli("z")
    bath = BathSpec(0.5, 0.0, 0.1, 100.0, [pauli("x")])
    build = build_liouvillian(h, h, [bath], FullSecular())
    rho0 = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
    times = np.linspace(0, 2 * np.pi, 9)
    states = evolve(build, rho0, times)
    sx = [np.trace(pauli("x") @ r).real for r in states]
    assert np.allclose(sx, np.cos(times), atol=1e-12)


def test_evolution_reaches_steady_state(rng):
    h, build = resonator_build(n=4, alpha=0.3)
    rho_ss = steady_state(build).rho
    rho0 = random_density(rng, 4)
    final = evolve(build, rho0, [0.0, 500.0, 1000.0])
    assert np.allclose(final[0], rho0)
    assert trace_distance(final[-1], rho_ss) < 1e-8
    for r in final:
        assert np.trace(r).real == pytest.approx(1.0, abs=1e-10)


def test_evolve_validation():
    _, build = resonator_build(n=3)
    rho = np.eye(3) / 3
    with pytest.raises(ValidationError):
        evolve(build, 2 * rho, [1.0])
    with pytest.raises(ValidationError):
        evolve(build, rho, [1.0, 0.5])
    with pytest.raises(DimensionError):
        evolve(build, np.eye(2) / 2, [1.0])


def test_single_bath_heat_flow_vanishes():
    h, build = resonator_build()
    rho = steady_state(build).rho
    flow = heat_flow(h, build, rho)
    assert abs(flow.per_bath["R"]) < 1e-12
    assert flow.flag == ""


def small_chain(policy, include_lamb_shift=False, **kw):
    p = ChainParams(N=2, g1=0.05, g2=0.05, g12=0.1, **kw)
    h, *_ = chain_hamiltonians(p)
    return h, build_liouvillian(h, h, chain_baths(p), policy, include_lamb_shift=include_lamb_shift)


def test_equal_temperatures_carry_no_current():
    h, build = small_chain(FullSecular(), T_L=0.3, T_R=0.3)
    flow = heat_flow(h, build, steady_state(build).rho)
    assert max(abs(v) for v in flow.per_bath.values()) < 1e-14
    assert flow.flag == ""


@pytest.mark.parametrize("policy", [Redfield(), FullSecular(), Partial(1e4), Unified(0.01)], ids=str)
def test_energy_balance(policy):
    h, build = small_chain(policy)
    flow = heat_flow(h, build, steady_state(build).rho)
    j_l, j_r = flow.per_bath["L"], flow.per_bath["R"]
    assert j_l > 0 > j_r
    assert flow.imbalance < 1e-10 * max(abs(j_l), abs(j_r))
    assert "imbalance" not in flow.flag


def test_energy_balance_with_lamb_shift_uses_shifted_hamiltonian():
    h, build = small_chain(FullSecular(), include_lamb_shift=True)
    rho = steady_state(build).rho
    flow = heat_flow(h, build, rho, hamiltonian="system+lamb")
    scale = max(abs(v) for v in flow.per_bath.values())
    assert flow.imbalance < 1e-10 * scale


def test_stale_steady_state_is_rejected():
    h, build = small_chain(FullSecular())
    with pytest.raises(ConsistencyError):
        heat_flow(h, build, np.eye(h.shape[0]) / h.shape[0] + 0.01 * np.diag(np.arange(h.shape[0])))
    with pytest.raises(ValidationError):
        heat_flow(h, build, steady_state(build).rho, hamiltonian="lamb")


def test_trace_distance():
    a = np.diag([1.0, 0.0])
    b = np.diag([0.0, 1.0])
    assert trace_distance(a, b) == pytest.approx(1.0)
    assert trace_distance(a, a) == 0.0
