import json

import numpy as np
import pytest

from meqforge.errors import DimensionError, SymmetryError
from meqforge.liouvillian import build_liouvillian
from meqforge.models import ChainParams, chain_baths, chain_hamiltonians, number_operator
from meqforge.operators import annihilation, super_commutator
from meqforge.secular import FullSecular, Partial, Redfield
from meqforge.solve import steady_state, trace_distance
from meqforge.symmetry import (
    block_steady_state,
    block_transform,
    check_weak_symmetry,
    export_blocks,
    superop_adjoint,
)

from ._helpers import drude_bath, random_hermitian


def two_bosons():
    a = annihilation(2)
    eye = np.eye(2)
    a1, a2 = np.kron(a, eye), np.kron(eye, a)
    n_op = a1.conj().T @ a1 + a2.conj().T @ a2
    h = n_op + 0.1 * (a1.conj().T @ a2 + a2.conj().T @ a1)
    bath = drude_bath(T=0.5, alpha=0.05, ops=[a1 + a1.conj().T])
    return h, n_op, build_liouvillian(h, h, [bath], FullSecular())


def test_two_boson_block_labels():
    h, n_op, build = two_bosons()
    decomp = block_transform(build, n_op)
    assert np.allclose(decomp.block_labels, [-2, -1, 0, 1, 2])
    assert decomp.summary()["sizes"] == [1, 4, 6, 4, 1]
    # index 2 n1 + n2: |00>=0, |01>=1, |10>=2, |11>=3
    assert sorted(decomp.block_basis(1)) == [(1, 0), (2, 0), (3, 1), (3, 2)]
    assert decomp.off_block_residual < 1e-14


def test_identity_gives_single_block():
    _, _, build = two_bosons()
    decomp = block_transform(build, np.eye(4))
    assert decomp.block_labels == [0.0]
    assert np.allclose(decomp.blocks[0], build.total)


def test_blocks_preserve_spectrum():
    _, n_op, build = two_bosons()
    decomp = block_transform(build, n_op)
    full = np.linalg.eigvals(build.total)
    parts = np.concatenate([np.linalg.eigvals(b) for b in decomp.blocks])
    # pair every eigenvalue with its nearest partner
    dist = np.abs(full[:, None] - parts[None, :])
    assert dist.min(axis=1).max() < 1e-12 and dist.min(axis=0).max() < 1e-12
    u = decomp.transform_U
    assert np.allclose(u.conj().T @ u, np.eye(16), atol=1e-14)


def test_non_diagonal_generator_basis(rng):
    # rotating both H and J leaves the block structure intact
    h, n_op, _ = two_bosons()
    q, _ = np.linalg.qr(random_hermitian(rng, 4) + 1j * np.eye(4))
    a = annihilation(2)
    c = np.kron(a, np.eye(2))
    bath = drude_bath(T=0.5, alpha=0.05, ops=[q @ (c + c.conj().T) @ q.conj().T])
    hr = q @ h @ q.conj().T
    build = build_liouvillian(hr, hr, [bath], FullSecular())
    decomp = block_transform(build, q @ n_op @ q.conj().T)
    assert decomp.summary()["sizes"] == [1, 4, 6, 4, 1]
    assert decomp.off_block_residual < 1e-12


def test_block_steady_state_matches_full_solution():
    _, n_op, build = two_bosons()
    decomp = block_transform(build, n_op)
    rho = block_steady_state(decomp)
    assert trace_distance(rho, steady_state(build).rho) < 1e-10


def test_chain_number_symmetry_by_policy():
    p = ChainParams(N=2, g1=0.05, g2=0.05, g12=0.1)
    h, *_ = chain_hamiltonians(p)
    n_op = number_operator(p)
    fsa = build_liouvillian(h, h, chain_baths(p), FullSecular())
    psa = build_liouvillian(h, h, chain_baths(p), Partial(1e4))
    red = build_liouvillian(h, h, chain_baths(p), Redfield())
    assert check_weak_symmetry(fsa, n_op)[0]
    assert check_weak_symmetry(psa, n_op)[0]
    assert check_weak_symmetry(fsa, h)[0]
    ok, residual = check_weak_symmetry(red, n_op)
    assert not ok and residual > 1e-6
    with pytest.raises(SymmetryError) as err:
        block_transform(red, n_op)
    assert err.value.residual == pytest.approx(residual)


def test_superoperator_generator_path():
    _, n_op, build = two_bosons()
    ok_op, res_op = check_weak_symmetry(build, n_op)
    ok_sup, res_sup = check_weak_symmetry(build, superop_adjoint(n_op))
    assert ok_op and ok_sup
    assert res_op == pytest.approx(res_sup, abs=1e-15)
    assert np.array_equal(superop_adjoint(n_op), super_commutator(n_op))
    with pytest.raises(DimensionError):
        check_weak_symmetry(build, np.eye(3))


def test_export_blocks(tmp_path):
    _, n_op, build = two_bosons()
    decomp = block_transform(build, n_op)
    paths = export_blocks(decomp, tmp_path, matrix_market=True)
    assert len(paths) == 6
    data = json.loads((tmp_path / "blocks.json").read_text())
    assert data["sizes"] == [1, 4, 6, 4, 1]
