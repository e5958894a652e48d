"""Closed-form Wigner functions written out term by term.

These are an independent second path to the values the Gaussian engine
computes.  The qubit cross kernel of ``wigner_ent_ref`` carries a ``2 alpha``
factor, so the engine agrees with ``wigner_ent_ref(alpha, ...)`` at the
mirrored qubit point ``conj(alpha)``.
"""
import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, ZeroTrace
from .utils import check_variance, parse_sign


__all__ = ('CrossTermCoeffs', 'coeffs', 'wth', 'vc', 'wigner_ent_ref',
           'wigner_sup_ref', 'sup_trace_ref', 'success_probability_formula',
           'temperature_of_variance')


@dataclass(frozen=True)
class CrossTermCoeffs:
    K: complex
    J: complex


def coeffs(V, phi):
    V = check_variance(V)
    half = phi / 2
    K = 2 + (V - 1) * (1 - cmath.exp(1j * phi))
    J = ((math.sin(half) + 1j * V * math.cos(half))
         / (2 * V * math.sin(half) + 2j * math.cos(half)))
    return CrossTermCoeffs(K, J)


def wth(beta, V, d=0):
    """``2/(pi V) exp(-2|beta - d|^2 / V)``."""
    V = check_variance(V)
    beta = np.asarray(beta, dtype=complex)
    return 2 / (math.pi * V) * np.exp(-2 * abs(beta - d) ** 2 / V)


def vc(beta, V, d, phi):
    """Wigner function of ``Int P^th |alpha e^{i phi}><alpha|`` for real ``d``."""
    c = coeffs(V, phi)
    K, J = c.K, c.J
    if J * K == 0:
        raise InvalidParameter("cross term undefined for V=%r, phi=%r" % (V, phi))
    E = cmath.exp(1j * phi)
    d = float(np.real(d))
    beta = np.asarray(beta, dtype=complex)
    exponent = (-(2 / K) * (1 - E) * d ** 2
                - (1 / J) * (beta - 2 * E * d / K) * (beta.conj() - 2 * d / K))
    return 2 / (math.pi * J * K) * np.exp(exponent)


def wigner_ent_ref(alpha, beta, V, d, phi):
    """Two-mode Wigner function of the qubit-oscillator state after the coupling."""
    alpha = np.asarray(alpha, dtype=complex)
    cross = 2 * alpha * vc(beta, V, d, phi)
    bracket = (wth(beta, V, d) + cross + cross.conj()
               + (4 * abs(alpha) ** 2 - 1) * wth(beta, V, d * cmath.exp(1j * phi)))
    return (np.exp(-2 * abs(alpha) ** 2) / math.pi * bracket).real


def sup_trace_ref(V, d, phi, sign):
    """Trace of the unnormalized ``rho^th +- sigma +- sigma^dagger + rho^th``.

    The cross term integrates to ``(2/K) exp(-(2/K)(1 - e^{i phi}) d^2)``.
    """
    sign = parse_sign(sign)
    c = coeffs(V, phi)
    cross = 2 / c.K * cmath.exp(-(2 / c.K) * (1 - cmath.exp(1j * phi)) * d ** 2)
    return 2 + 2 * sign * cross.real, 2 + 2 * abs(cross)


def wigner_sup_ref(beta, V, d, phi, sign):
    sign = parse_sign(sign)
    total, magnitude = sup_trace_ref(V, d, phi, sign)
    if abs(total) <= 1e-12 * magnitude:
        raise ZeroTrace("superposition with V=%g, d=%g has vanishing trace" % (V, d))
    cross = vc(beta, V, d, phi)
    value = (wth(beta, V, d) + sign * cross + sign * cross.conj()
             + wth(beta, V, d * cmath.exp(1j * phi)))
    return value.real / total


def success_probability_formula(V, d):
    """The closed formula ``P+- = (1 +- exp(-2 d^2 / V)) / 2``."""
    V = check_variance(V)
    overlap = math.exp(-2 * abs(d) ** 2 / V)
    return (1 + overlap) / 2, (1 - overlap) / 2


def temperature_of_variance(V):
    """Temperature in units of ``h nu`` from ``e^{h nu / tau} = (V + 1)/(V - 1)``."""
    V = check_variance(V)
    if V == 1:
        return 0.0
    return 1 / math.log1p(2 / (V - 1))
