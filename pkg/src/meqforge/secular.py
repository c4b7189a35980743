"""Secular-approximation policies, the pairwise drop test and frequency clustering."""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, ValidationError
from .spectral import JumpOperator

__all__ = [
    "Redfield",
    "FullSecular",
    "Partial",
    "Unified",
    "parse_policy",
    "FrequencyCluster",
    "ClusterChainingWarning",
    "psa_drop",
    "cluster_frequencies",
    "cluster_jump_ops",
]


@dataclass(frozen=True)
class Redfield:
    """Keep every jump-operator pair."""

    def describe(self):
        return "redfield"


@dataclass(frozen=True)
class FullSecular:
    """Keep only pairs with equal Bohr frequencies."""

    def describe(self):
        return "full_secular"


@dataclass(frozen=True)
class Partial:
    """Term-by-term partial secular approximation with cutoff ``C_PSA``.

    ``Partial(0)`` reproduces :class:`FullSecular` and ``Partial(math.inf)``
    reproduces :class:`Redfield`.
    """

    cutoff: float

    def __post_init__(self):
        if not self.cutoff >= 0:
            raise ValidationError(f"C_PSA must be >= 0, got {self.cutoff}")

    def describe(self):
        return f"partial(C_PSA={self.cutoff:g})"


@dataclass(frozen=True)
class Unified:
    """Unified master equation with frequency clusters of maximum gap ``width``."""

    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValidationError(f"cluster width must be > 0, got {self.width}")

    def describe(self):
        return f"unified(w={self.width:g})"


def parse_policy(spec):
    """Build a policy from a string or mapping.

    Accepts ``"redfield"``, ``"full_secular"``, ``{"kind": "partial",
    "C_PSA": 1e4}`` or ``{"kind": "unified", "w": 0.01}``. ``C_PSA`` may be
    ``"inf"``.
    """
    if isinstance(spec, (Redfield, FullSecular, Partial, Unified)):
        return spec
    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValidationError(f"cannot parse policy from {spec!r}")
    kind = str(spec["kind"]).lower().replace("-", "_")
    if kind == "redfield":
        return Redfield()
    if kind in ("full_secular", "fsa", "full"):
        return FullSecular()
    if kind in ("partial", "psa"):
        if "C_PSA" not in spec:
            raise ValidationError("partial policy needs C_PSA")
        return Partial(float(spec["C_PSA"]))
    if kind == "unified":
        if "w" not in spec:
            raise ValidationError("unified policy needs w")
        return Unified(float(spec["w"]))
    raise ValidationError(f"unknown policy kind {spec['kind']!r}")


def psa_drop(omega1, omega2, tau_r, cutoff):
    """Whether the cross term of two Bohr frequencies is discarded.

    Equal frequencies are always kept. Otherwise the term is dropped iff
    ``cutoff / |omega1 - omega2| < tau_r``. Broadcasts over arrays.
    """
    if not tau_r > 0:
        raise ValidationError("tau_R must be > 0")
    if not cutoff >= 0:
        raise ValidationError("C_PSA must be >= 0")
    delta = np.abs(np.asarray(omega1, dtype=float) - np.asarray(omega2, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        tau_pair = np.where(delta == 0, np.inf, 1.0 / np.where(delta == 0, 1.0, delta))
        # inf * 0 is nan; with C_PSA = 0 every distinct pair is dropped, equal ones never are
        scaled = np.where(np.isinf(tau_pair), np.inf, tau_pair * cutoff)
    drop = scaled < tau_r
    return bool(drop) if drop.ndim == 0 else drop


@dataclass(frozen=True)
class FrequencyCluster:
    members: tuple
    representative: float

    @property
    def width(self):
        return self.members[-1] - self.members[0]


class ClusterChainingWarning(UserWarning):
    """A cluster is wider than the gap separating it from a neighbour."""


def cluster_frequencies(freqs, width, warn=True):
    """Single-pass gap clustering of sorted Bohr frequencies.

    Consecutive frequencies closer than ``width`` share a cluster; a gap of
    at least ``width`` starts a new one. The last frequency follows the
    same gap rule against its predecessor. Representatives are member means.
    """
    if not width > 0:
        raise ValidationError("cluster width must be > 0")
    freqs = [float(f) for f in freqs]
    if not freqs:
        return []
    if any(b < a for a, b in zip(freqs, freqs[1:])):
        raise ValidationError("frequencies must be sorted ascending")

    clusters, current = [], []
    for i in range(len(freqs) - 1):
        current.append(freqs[i])
        if freqs[i + 1] - freqs[i] >= width:
            clusters.append(current)
            current = []
    current.append(freqs[-1])
    clusters.append(current)

    out = [FrequencyCluster(tuple(c), math.fsum(c) / len(c)) for c in clusters]
    if warn:
        for i, c in enumerate(out):
            gaps = []
            if i > 0:
                gaps.append(c.members[0] - out[i - 1].members[-1])
            if i + 1 < len(out):
                gaps.append(out[i + 1].members[0] - c.members[-1])
            if gaps and c.width > min(gaps):
                warnings.warn(
                    f"cluster around {c.representative:.6g} has width {c.width:.3g} "
                    f"exceeding its separation {min(gaps):.3g} from a neighbour",
                    ClusterChainingWarning,
                    stacklevel=2,
                )
    return out


def _cluster_index(clusters):
    lookup = {}
    for k, c in enumerate(clusters):
        for m in c.members:
            lookup[m] = k
    members = np.array(sorted(lookup))
    return lookup, members


def cluster_jump_ops(jumps, clusters):
    """Merge jump operators whose frequencies share a cluster.

    One operator per (bath, beta, cluster), with ``omega`` set to the
    cluster representative and ``matrix`` the sum of the members.
    """
    lookup, members = _cluster_index(clusters)
    merged = {}
    for jump in jumps:
        k = lookup.get(jump.omega)
        if k is None and members.size:
            pos = int(np.argmin(np.abs(members - jump.omega)))
            if abs(members[pos] - jump.omega) <= 1e-12 * max(1.0, abs(jump.omega)):
                k = lookup[float(members[pos])]
        if k is None:
            raise ConsistencyError(f"jump frequency {jump.omega} belongs to no cluster")
        key = (jump.bath_label, jump.beta, k)
        if key in merged:
            merged[key] = merged[key] + jump.matrix
        else:
            merged[key] = jump.matrix.copy()
    return [
        JumpOperator(label, beta, clusters[k].representative, mat)
        for (label, beta, k), mat in sorted(merged.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2]))
    ]
