"""Markovian master-equation generators for systems coupled to bosonic thermal baths."""

from .bath import BathSpec, I_of_omega, S_of_omega, gamma_full, gamma_pair, pi_pair, pv_quadrature_S
from .errors import (
    ConfigError,
    ConsistencyError,
    ConvergenceError,
    DimensionError,
    DomainError,
    MeqforgeError,
    NumericalError,
    SymmetryError,
    ValidationError,
)
from .liouvillian import LiouvillianBuild, build_dissipator, build_lamb_shift, build_liouvillian
from .models import ChainParams, chain_baths, chain_hamiltonians, local_explicit_liouvillian, number_operator
from .operators import CompositeSpace, annihilation, embed, pauli, sandwich, vectorize, unvectorize
from .secular import FullSecular, Partial, Redfield, Unified, parse_policy
from .solve import evolve, heat_flow, steady_state
from .spectral import diagonalize, jump_operators
from .symmetry import block_transform, check_weak_symmetry

__version__ = "0.1.0"
