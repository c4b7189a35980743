"""Two-qubit chain between two resonators, each resonator coupled to its own bath.

Subsystem order is ``[resonator L, qubit 1, qubit 2, resonator R]``.
"""

from dataclasses import dataclass

import numpy as np

from .bath import BathSpec, S_of_omega, spectral_density
from .errors import ValidationError
from .liouvillian import LiouvillianBuild
from .operators import CompositeSpace, annihilation, embed, pauli, sandwich, super_anticommutator
from .secular import FullSecular

__all__ = [
    "ChainParams",
    "ChainModel",
    "chain_hamiltonians",
    "chain_baths",
    "number_operator",
    "local_explicit_liouvillian",
    "local_rate",
    "qq_effective_spectrum",
    "resonance_predictor",
]


@dataclass(frozen=True)
class ChainParams:
    omega1: float = 1.0
    omega2: float = 1.0
    Omega_L: float = 1.0
    Omega_R: float = 1.0
    g1: float = 0.01
    g2: float = 0.01
    g12: float = 0.01
    N: int = 4
    T_L: float = 0.5
    T_R: float = 0.1
    alpha_L: float = 0.01
    alpha_R: float = 0.01
    chi: float = 0.1
    omega_c: float = 100.0
    coupling: str = "position"

    def __post_init__(self):
        if int(self.N) < 2:
            raise ValidationError(f"N must be >= 2, got {self.N}")
        for name in ("omega1", "omega2", "Omega_L", "Omega_R", "T_L", "T_R", "omega_c"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.coupling not in ("position", "momentum"):
            raise ValidationError(f"coupling must be 'position' or 'momentum', got {self.coupling!r}")


@dataclass(frozen=True, eq=False)
class ChainModel:
    H_full: np.ndarray
    H_bare: np.ndarray
    couple_L: np.ndarray
    couple_R: np.ndarray
    space: CompositeSpace

    def __iter__(self):
        return iter((self.H_full, self.H_bare, self.couple_L, self.couple_R, self.space))


def _site_ops(p):
    space = CompositeSpace((int(p.N), 2, 2, int(p.N)))
    a = annihilation(int(p.N))
    ops = {
        "aL": embed(a, 0, space),
        "aR": embed(a, 3, space),
        "sz1": embed(pauli("z"), 1, space),
        "sz2": embed(pauli("z"), 2, space),
        "sp1": embed(pauli("plus"), 1, space),
        "sp2": embed(pauli("plus"), 2, space),
    }
    ops["sm1"] = ops["sp1"].conj().T
    ops["sm2"] = ops["sp2"].conj().T
    return space, ops


def chain_hamiltonians(p):
    """Full and bare Hamiltonians plus the two bath coupling operators.

    Returns a :class:`ChainModel`, which unpacks as
    ``(H_full, H_bare, couple_L, couple_R, space)``.
    """
    space, o = _site_ops(p)
    aL, aR = o["aL"], o["aR"]
    bare = (
        0.5 * p.omega1 * o["sz1"]
        + 0.5 * p.omega2 * o["sz2"]
        + p.Omega_L * aL.conj().T @ aL
        + p.Omega_R * aR.conj().T @ aR
    )
    hop = (
        p.g1 * (o["sp1"] @ aL + o["sm1"] @ aL.conj().T)
        + p.g2 * (o["sp2"] @ aR + o["sm2"] @ aR.conj().T)
        + p.g12 * (o["sp1"] @ o["sm2"] + o["sm1"] @ o["sp2"])
    )
    if p.coupling == "position":
        cL, cR = aL + aL.conj().T, aR + aR.conj().T
    else:
        cL, cR = 1j * (aL.conj().T - aL), 1j * (aR.conj().T - aR)
    return ChainModel(bare + hop, bare, cL, cR, space)


def chain_baths(p, model=None):
    """The left and right :class:`BathSpec` of the chain."""
    model = chain_hamiltonians(p) if model is None else model
    left = BathSpec(p.T_L, p.alpha_L, p.chi, p.omega_c, [model.couple_L], label="L")
    right = BathSpec(p.T_R, p.alpha_R, p.chi, p.omega_c, [model.couple_R], label="R")
    return left, right


def number_operator(p):
    """Total excitation number ``a_L^dag a_L + s+s-(1) + s+s-(2) + a_R^dag a_R``."""
    _, o = _site_ops(p)
    return (
        o["aL"].conj().T @ o["aL"]
        + o["sp1"] @ o["sm1"]
        + o["sp2"] @ o["sm2"]
        + o["aR"].conj().T @ o["aR"]
    )


def local_explicit_liouvillian(p, include_lamb_shift=True):
    """Hand-written local generator with one emission and one absorption term per side.

    Rates are ``gamma (1 + n)`` and ``gamma n`` with ``gamma = 2 pi alpha**2 J(Omega)``.
    The optional Lamb shift is ``alpha**2 [S(Omega) a^dag a + S(-Omega) a a^dag]``.
    Only valid for position coupling, where the jump operators are ``a`` and ``a^dag``.
    """
    if p.coupling != "position":
        raise ValidationError("the explicit local generator assumes position coupling")
    model = chain_hamiltonians(p)
    _, o = _site_ops(p)
    baths = chain_baths(p, model)
    d = model.space.total_dim
    per_bath = {}
    lamb = np.zeros((d, d), dtype=complex)
    for bath, a, big_omega in ((baths[0], o["aL"], p.Omega_L), (baths[1], o["aR"], p.Omega_R)):
        ad = a.conj().T
        gamma = 2 * np.pi * bath.alpha**2 * float(spectral_density(big_omega, bath))
        n_bar = 1.0 / np.expm1(big_omega / bath.temperature)
        down, up = gamma * (1 + n_bar), gamma * n_bar
        diss = down * sandwich(a, ad)
        diss += up * sandwich(ad, a)
        diss -= 0.5 * super_anticommutator(down * ad @ a + up * a @ ad)
        per_bath[bath.label] = diss
        lamb += bath.alpha**2 * (float(S_of_omega(big_omega, bath)) * ad @ a + float(S_of_omega(-big_omega, bath)) * a @ ad)
    h = model.H_full + lamb if include_lamb_shift else model.H_full.copy()
    return LiouvillianBuild(
        eigen_dissipators=per_bath,
        lamb_shift=lamb,
        hamiltonian=h,
        system_hamiltonian=model.H_full,
        policy=FullSecular(),
        kept_pairs=4,
        dropped_pairs=0,
        clusters=None,
        is_local=True,
        jump_hamiltonian=model.H_bare,
        baths=baths,
    )


def local_rate(big_omega, bath):
    """``2 pi alpha**2 J(Omega)``, the bare rate of a local resonator channel."""
    return 2 * np.pi * bath.alpha**2 * float(spectral_density(big_omega, bath))


def qq_effective_spectrum(omega, g12):
    """Eigenenergies of the exchange-coupled qubit pair at ``omega1 = omega2 = omega``.

    ``{-omega, -g12, g12, omega}`` in ascending order.
    """
    if g12 < 0:
        raise ValidationError(f"g12 must be >= 0, got {g12}")
    return np.sort(np.array([-omega, -g12, g12, omega], dtype=float))


def resonance_predictor(big_omega, omega=1.0):
    """Qubit-qubit coupling at which a transition of the pair matches the resonators."""
    return big_omega - omega

