# models/besselk.py
"""
Modified Bessel functions K0, K1 of positive real argument and the decay
envelope G(d) of the coordinate-space projector kernel.

Two regimes, switching at z = 2:
- series: power/log series around the origin
- asymptotic: exponentially scaled Steed/Temme continued fraction,
  K_nu(z) ~ sqrt(pi/2z) e^{-z} / s(z), which carries the large-z expansion
  to full double precision down to z = 2

An independent oracle (integral representation with adaptive quadrature)
is kept next to the fast path for self-checks.
"""
from dataclasses import dataclass
import logging
from typing import Union

import numpy as np
from numpy.typing import NDArray
from scipy import integrate

from backend.errors import DomainError

logger = logging.getLogger(__name__)

ArrayR = NDArray[np.float64]
RealLike = Union[float, ArrayR]

CROSSOVER = 2.0
EULER_GAMMA = 0.57721566490153286061
_SERIES_TERMS = 30
_CF_EPS = 1e-16
_CF_MAXIT = 10000


@dataclass(frozen=True)
class BesselEval:
    z: float
    k0: float
    k1: float
    regime: str  # "series" | "asymptotic"


@dataclass(frozen=True)
class DecayEnvelope:
    d: float
    value: float


def _check_positive(z, name: str = "z") -> ArrayR:
    arr = np.asarray(z, dtype=np.float64)
    if arr.size == 0:
        return arr
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError(f"{name} must be finite and > 0")
    return arr


def _series(z: ArrayR):
    """K0, K1 from the power/log series (accurate for z <= 2)."""
    t = 0.25 * z * z
    log_half = np.log(0.5 * z)
    # t^k / (k!)^2 and t^k / (k! (k+1)!) built by recurrence
    term0 = np.ones_like(z)
    term1 = np.ones_like(z)
    i0 = np.zeros_like(z)
    i1_sum = np.zeros_like(z)
    harmonic_sum0 = np.zeros_like(z)
    psi_sum1 = np.zeros_like(z)
    harmonic = 0.0
    for k in range(_SERIES_TERMS):
        if k > 0:
            term0 = term0 * t / (k * k)
            term1 = term1 * t / (k * (k + 1))
            harmonic += 1.0 / k
        i0 += term0
        i1_sum += term1
        harmonic_sum0 += harmonic * term0
        # psi(k+1) + psi(k+2) = -2 gamma + 2 H_k + 1/(k+1)
        psi_sum1 += (-2.0 * EULER_GAMMA + 2.0 * harmonic + 1.0 / (k + 1)) * term1
    i1 = 0.5 * z * i1_sum
    k0 = -(log_half + EULER_GAMMA) * i0 + harmonic_sum0
    k1 = 1.0 / z + log_half * i1 - 0.25 * z * psi_sum1
    return k0, k1


def _continued_fraction_scaled(z: ArrayR):
    """e^z K0(z), e^z K1(z) via the Steed/Temme continued fraction (z >= 2)."""
    b = 2.0 * (1.0 + z)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(z)
    q2 = np.ones_like(z)
    a1 = 0.25
    q = np.full_like(z, a1)
    c = np.full_like(z, a1)
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _CF_MAXIT):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels / s) < _CF_EPS):
            break
    else:
        logger.warning("continued fraction hit %d iterations", _CF_MAXIT)
    h = a1 * h
    k0e = np.sqrt(np.pi / (2.0 * z)) / s
    k1e = k0e * (z + 0.5 - h) / z
    return k0e, k1e


def bessel_k01(z: RealLike):
    """Return (K0(z), K1(z)) elementwise; z must be > 0."""
    arr = _check_positive(z)
    scalar = arr.ndim == 0
    flat = np.atleast_1d(arr).ravel()
    k0 = np.empty_like(flat)
    k1 = np.empty_like(flat)
    low = flat <= CROSSOVER
    if np.any(low):
        k0[low], k1[low] = _series(flat[low])
    if np.any(~low):
        zz = flat[~low]
        k0e, k1e = _continued_fraction_scaled(zz)
        damp = np.exp(-zz)
        k0[~low] = k0e * damp
        k1[~low] = k1e * damp
    if scalar:
        return float(k0[0]), float(k1[0])
    return k0.reshape(arr.shape), k1.reshape(arr.shape)


def bessel_k0(z: RealLike) -> RealLike:
    return bessel_k01(z)[0]


def bessel_k1(z: RealLike) -> RealLike:
    return bessel_k01(z)[1]


def bessel_eval(z: float) -> BesselEval:
    k0, k1 = bessel_k01(float(z))
    regime = "series" if z <= CROSSOVER else "asymptotic"
    return BesselEval(z=float(z), k0=k0, k1=k1, regime=regime)


def branch_mismatch(z: float = CROSSOVER) -> float:
    """Largest relative gap between the two regimes evaluated at the same z."""
    point = np.array([z], dtype=np.float64)
    s0, s1 = _series(point)
    c0e, c1e = _continued_fraction_scaled(point)
    damp = np.exp(-point)
    gap0 = abs(s0[0] - c0e[0] * damp[0]) / abs(s0[0])
    gap1 = abs(s1[0] - c1e[0] * damp[0]) / abs(s1[0])
    return float(max(gap0, gap1))


def g_decay_values(d: RealLike) -> RealLike:
    """(1/4 pi^2)(K1(d)/d + 3 K0(d)/d + 6 K1(d)/d^2), elementwise."""
    arr = _check_positive(d, name="d")
    k0, k1 = bessel_k01(arr)
    value = (k1 / arr + 3.0 * k0 / arr + 6.0 * k1 / (arr * arr)) / (4.0 * np.pi**2)
    if np.ndim(value) == 0:
        return float(value)
    return value


def g_decay(d: float) -> DecayEnvelope:
    return DecayEnvelope(d=float(d), value=float(g_decay_values(float(d))))


def k_integral_oracle(nu: int, z: float) -> float:
    """
    K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt by adaptive quadrature.

    Kept independent of the series / continued-fraction code.
    """
    if z <= 0.0:
        raise DomainError("z must be > 0")
    # beyond t_max the integrand is below exp(-700) relative to its peak
    t_max = float(np.arccosh(max(1.0, (700.0 + nu * 50.0) / z + 1.0)))

    def integrand(t: float) -> float:
        return np.exp(-z * (np.cosh(t) - 1.0)) * np.cosh(nu * t)

    peak = float(np.arccosh(max(1.0, nu / z))) if nu else 0.0
    points = [p for p in (peak, 0.5 * t_max) if 0.0 < p < t_max]
    value, _ = integrate.quad(
        integrand, 0.0, t_max, points=points or None, limit=400, epsabs=0.0, epsrel=1e-14
    )
    return float(value * np.exp(-z))


def commutator_envelope_integral() -> float:
    """
    (1/4 pi^2) int_{R^3} (K1(r) + 3 K0(r) + 6 K1(r)/r) d^3r by quadrature.

    Closed form: (2 + 9 pi / 2) / pi.
    """

    def radial(r: float) -> float:
        if r == 0.0:
            return 6.0  # r^2 * 6 K1(r) / r -> 6
        k0, k1 = bessel_k01(r)
        return r * r * (k1 + 3.0 * k0) + 6.0 * r * k1

    value, _ = integrate.quad(radial, 0.0, 60.0, limit=400, epsabs=0.0, epsrel=1e-12)
    return float(4.0 * np.pi * value / (4.0 * np.pi**2))
