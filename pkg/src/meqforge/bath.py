"""Thermal bosonic baths and their correlation-function coefficients.

All bath quantities are expressed through two real functions of the
transition frequency,

* ``I(w) = J(w) (1 + n(w))`` with ``J`` odd-extended to ``w < 0``, and
* ``S(w) = P.V. int_0^inf dk J(k) [(1 + n(k))/(w - k) + n(k)/(w + k)]``,

so that the one-sided Fourier transform of the correlation function is
``Gamma(w) = pi I(w) + i S(w)``. The dissipator and Lamb-shift coefficients
follow as ``gamma(w, w') = Gamma(w) + conj(Gamma(w'))`` and
``pi(w, w') = (Gamma(w) - conj(Gamma(w'))) / 2i``.
"""

import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericalError, ValidationError
from .operators import as_square

__all__ = [
    "BathSpec",
    "CorrelationCoefficients",
    "QuadratureResult",
    "ohmic_drude",
    "bose_einstein",
    "spectral_density",
    "I_of_omega",
    "quadrature_I",
    "S_of_omega",
    "pv_quadrature_S",
    "digamma_complex",
    "harmonic_number",
    "gamma_pair",
    "pi_pair",
    "gamma_full",
    "correlation_coefficients",
]

EULER_GAMMA = 0.57721566490153286060651209


def ohmic_drude(omega, chi, omega_c):
    """Ohmic spectral density with a Drude cutoff, odd in ``omega``."""
    omega = np.asarray(omega, dtype=float)
    return chi * omega / (1.0 + omega**2 / omega_c**2)


@dataclass(eq=False)
class BathSpec:
    """A thermal bosonic bath and the system operators it couples to.

    Parameters
    ----------
    temperature : float
        Bath temperature (units with hbar = k_B = 1).
    alpha : float
        Dimensionless system-bath coupling; the dissipator scales as alpha**2.
    chi, omega_c : float
        Spectral-density strength and cutoff.
    coupling_ops : sequence of ndarray
        Hermitian system operators ``A_beta``. All of them see the same
        correlation functions (one shared bath).
    label : str
    spectral_density : callable
        ``J(omega, chi, omega_c)``, arguments in that order.
    """

    temperature: float
    alpha: float
    chi: float
    omega_c: float
    coupling_ops: tuple
    label: str = "bath"
    spectral_density: object = field(default=ohmic_drude)

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValidationError(f"bath {self.label!r}: temperature must be > 0")
        if not self.alpha >= 0:
            raise ValidationError(f"bath {self.label!r}: alpha must be >= 0")
        if not self.chi > 0:
            raise ValidationError(f"bath {self.label!r}: chi must be > 0")
        if not self.omega_c > 0:
            raise ValidationError(f"bath {self.label!r}: omega_c must be > 0")
        if isinstance(self.coupling_ops, np.ndarray) and self.coupling_ops.ndim == 2:
            self.coupling_ops = (self.coupling_ops,)
        ops = tuple(as_square(a, "coupling operator") for a in self.coupling_ops)
        if not ops:
            raise ValidationError(f"bath {self.label!r}: needs at least one coupling operator")
        for beta, a in enumerate(ops):
            scale = max(np.linalg.norm(a), 1.0)
            if np.linalg.norm(a - a.conj().T) > 1e-12 * scale:
                raise ValidationError(f"bath {self.label!r}: coupling operator {beta} is not Hermitian")
        self.coupling_ops = ops

    @property
    def is_ohmic_drude(self):
        return self.spectral_density is ohmic_drude


CorrelationCoefficients = namedtuple("CorrelationCoefficients", "gamma pi gamma_full")
QuadratureResult = namedtuple("QuadratureResult", "value abserr converged")


def bose_einstein(omega, temperature):
    """Bose-Einstein occupation ``1/(exp(omega/T) - 1)``, negative for ``omega < 0``."""
    if temperature <= 0:
        raise DomainError("temperature must be > 0")
    omega = np.asarray(omega, dtype=float)
    if np.any(omega == 0):
        raise DomainError("Bose-Einstein occupation diverges at omega = 0")
    with np.errstate(over="ignore"):
        out = 1.0 / np.expm1(omega / temperature)
    return out[()] if out.ndim == 0 else out


def spectral_density(omega, bath):
    """``J(omega)`` of ``bath``."""
    return bath.spectral_density(omega, bath.chi, bath.omega_c)


def _zero_limit_I(bath):
    # lim_{w->0} J(w)(1 + n(w)) = T J'(0)
    if bath.is_ohmic_drude:
        return bath.chi * bath.temperature
    h = 1e-8 * bath.omega_c
    return bath.temperature * float(spectral_density(h, bath)) / h


def I_of_omega(omega, bath):
    """``J(omega) (1 + n(omega))``; equals ``chi T`` at ``omega = 0``."""
    omega = np.asarray(omega, dtype=float)
    out = np.empty(omega.shape)
    zero = omega == 0
    nz = ~zero
    w = omega[nz]
    with np.errstate(over="ignore"):
        # 1 + n(w) = 1/(1 - exp(-w/T))
        out[nz] = spectral_density(w, bath) / -np.expm1(-w / bath.temperature)
    out[zero] = _zero_limit_I(bath)
    return out[()] if out.ndim == 0 else out


def quadrature_I(omega, bath):
    """Delta-collapsed form of the I integral, evaluated term by term.

    Only one of the two delta functions fires: ``J(w)(1 + n(w))`` for
    ``w > 0`` and ``J(|w|) n(|w|)`` for ``w < 0``. Serves as an independent
    check of :func:`I_of_omega`.
    """
    omega = float(omega)
    if omega == 0:
        raise DomainError("quadrature_I is undefined at omega = 0")
    k = abs(omega)
    j = float(spectral_density(k, bath))
    n = float(bose_einstein(k, bath.temperature))
    return j * (1.0 + n) if omega > 0 else j * n


_BERNOULLI_TERMS = (
    (2, 1.0 / 6.0),
    (4, -1.0 / 30.0),
    (6, 1.0 / 42.0),
    (8, -1.0 / 30.0),
    (10, 5.0 / 66.0),
    (12, -691.0 / 2730.0),
)


def digamma_complex(z):
    """Digamma function for complex argument.

    Upward recurrence ``psi(z) = psi(z + 1) - 1/z`` until ``Re z >= 10``,
    then the asymptotic series through ``z**-12``.
    """
    z = complex(z)
    if z.imag == 0 and z.real <= 0 and z.real == math.floor(z.real):
        raise DomainError(f"digamma has a pole at {z.real}")
    acc = 0j
    while z.real < 10.0:
        acc -= 1.0 / z
        z += 1.0
    inv2 = 1.0 / (z * z)
    series = 0j
    power = inv2
    for k, b in _BERNOULLI_TERMS:
        series += b / k * power
        power *= inv2
    return acc + np.log(z) - 0.5 / z - series


def harmonic_number(x):
    """Harmonic number ``H(x) = psi(x + 1) + gamma_Euler`` for complex ``x``."""
    return digamma_complex(complex(x) + 1.0) + EULER_GAMMA


def _S_scalar(omega, chi, omega_c, temperature):
    x = omega_c / (2.0 * math.pi * temperature)
    h_imag = harmonic_number(-1j * omega / (2.0 * math.pi * temperature)).real
    if abs(x - round(x)) < 1e-6:
        # -pi cot(pi x) + H(-x) == H(x - 1); both terms diverge separately here
        edge = omega * harmonic_number(x - 1.0).real
    else:
        edge = -math.pi * omega / math.tan(omega_c / (2.0 * temperature)) + omega * harmonic_number(-x).real
    bracket = math.pi * omega_c - 2.0 * omega * h_imag + edge + omega * harmonic_number(x).real
    return -chi / (2.0 * (1.0 + omega**2 / omega_c**2)) * bracket


def S_of_omega(omega, bath):
    """Principal-value integral ``S(omega)`` of the bath.

    Closed form for the Ohmic-Drude density, built from harmonic numbers of
    complex argument. ``S(0) = -pi chi omega_c / 2``. Other spectral
    densities fall back to :func:`pv_quadrature_S`.
    """
    omega = np.asarray(omega, dtype=float)
    flat = omega.reshape(-1)
    if bath.is_ohmic_drude:
        vals = [_S_scalar(float(w), bath.chi, bath.omega_c, bath.temperature) for w in flat]
    else:
        vals = [pv_quadrature_S(float(w), bath) for w in flat]
    out = np.array(vals, dtype=float).reshape(omega.shape)
    return out[()] if out.ndim == 0 else out


def _thermal_up(k, bath):
    # J(k)(1 + n(k)) for k > 0
    return spectral_density(k, bath) / -np.expm1(-k / bath.temperature)


def _thermal_down(k, bath):
    # J(k) n(k) for k > 0
    with np.errstate(over="ignore"):
        return spectral_density(k, bath) / np.expm1(k / bath.temperature)


def _drude_tail(omega, cutoff, bath):
    """Exact ``int_L^inf J(k)/(omega - k) dk`` for the Drude density."""
    c, L, w = bath.omega_c, cutoff, omega
    C = w / (c * c + w * w)
    log_part = -C * (0.5 * math.log(c * c + L * L) - math.log(L - w))
    atan_part = (C * w - 1.0) / c * (0.5 * math.pi - math.atan(L / c))
    return bath.chi * c * c * (log_part + atan_part)


def pv_quadrature_S(omega, bath, tol=1e-8, full_output=False):
    """Cauchy principal value of the one-sided S integral by adaptive quadrature.

    The pole at ``k = |omega|`` is removed by pairing ``k0 - u`` with
    ``k0 + u`` inside a window of half-width ``delta``; the remaining pieces
    are regular. The integrand is cut at ``L = 50 max(omega_c, |omega|)``
    and the tail beyond it (where ``n(k)`` is negligible) is added
    analytically for the Drude density, numerically otherwise.

    Raises
    ------
    NumericalError
        If the summed error estimate exceeds ``100 * tol``.
    """
    omega = float(omega)
    T = bath.temperature
    k0 = abs(omega)
    cutoff = 50.0 * max(bath.omega_c, k0)

    if omega > 0:
        def g(k):
            return _thermal_up(k, bath)

        def h(k):
            return _thermal_down(k, bath) / (omega + k)
    elif omega < 0:
        # n/(omega + k) = -n/(k0 - k)
        def g(k):
            return -_thermal_down(k, bath)

        def h(k):
            return _thermal_up(k, bath) / (omega - k)
    else:
        def g(k):
            return 0.0

        def h(k):
            # J(k)[(1 + n)/(-k) + n/k] = -J(k)/k
            return -spectral_density(k, bath) / k

    def regular(k):
        return g(k) / (k0 - k) + h(k)

    pieces = []
    opts = dict(epsabs=tol / 10, epsrel=1e-12, limit=400, full_output=1)
    if k0 > 0:
        delta = min(0.5 * k0, 1.0)

        def paired(u):
            return (g(k0 - u) - g(k0 + u)) / u + h(k0 - u) + h(k0 + u)

        pieces.append(integrate.quad(regular, 0.0, k0 - delta, **opts))
        pieces.append(integrate.quad(paired, 0.0, delta, **opts))
        lo = k0 + delta
    else:
        lo = 0.0
    marks = sorted({p for p in (2 * k0 + 1, 10 * T, 10.0, bath.omega_c, 5 * bath.omega_c) if lo < p < cutoff})
    pieces.append(integrate.quad(regular, lo, cutoff, points=marks or None, **opts))

    if bath.is_ohmic_drude:
        tail, tail_err = _drude_tail(omega, cutoff, bath), 0.0
    else:
        tail, tail_err = integrate.quad(
            lambda k: spectral_density(k, bath) / (omega - k), cutoff, np.inf, epsabs=tol / 10, limit=400
        )
    value = sum(p[0] for p in pieces) + tail
    abserr = sum(p[1] for p in pieces) + tail_err
    converged = bool(np.isfinite(value)) and abserr <= 100 * tol
    if not converged:
        raise NumericalError(f"PV quadrature for S({omega}) did not converge: error estimate {abserr:.3e}")
    if full_output:
        return QuadratureResult(value, abserr, converged)
    return value


def gamma_pair(omega, omega_p, bath):
    """Dissipator coefficient ``pi[I(w) + I(w')] + i[S(w) - S(w')]``."""
    return np.pi * (I_of_omega(omega, bath) + I_of_omega(omega_p, bath)) + 1j * (
        S_of_omega(omega, bath) - S_of_omega(omega_p, bath)
    )


def pi_pair(omega, omega_p, bath):
    """Lamb-shift coefficient ``(pi/2i)[I(w) - I(w')] + [S(w) + S(w')]/2``."""
    return np.pi / 2j * (I_of_omega(omega, bath) - I_of_omega(omega_p, bath)) + 0.5 * (
        S_of_omega(omega, bath) + S_of_omega(omega_p, bath)
    )


def gamma_full(omega_bar, bath):
    """Two-sided Fourier transform of the correlation function, ``2 pi I``."""
    return 2.0 * np.pi * I_of_omega(omega_bar, bath)


def correlation_coefficients(bath):
    """Bundle the coefficient functions of ``bath``."""
    return CorrelationCoefficients(
        gamma=lambda w, wp: gamma_pair(w, wp, bath),
        pi=lambda w, wp: pi_pair(w, wp, bath),
        gamma_full=lambda wb: gamma_full(wb, bath),
    )
