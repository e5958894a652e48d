"""Constructors for thermal states and their superpositions.

Every constructor returns a normalized ``StateSum``.  A state built from a
thermal mixture of displacement ``d`` carries its physical parameters in
``state.params`` (``V``, ``d``, ``phi``, ``sign``) so observables can derive
fringe periods and the Bell optimizer can derive setting scales.
"""
import math
from dataclasses import dataclass

import numpy as np
from traitlets.log import get_logger

from .errors import InvalidParameter, ZeroTrace
from .gaussian import (GaussianDyadicTerm, GaussianMeasure, StateSum,
                       add_vacuum_mode, apply_beam_splitter, apply_loss,
                       normalize, phase_rotate, trace)
from .reference import success_probability_formula
from .utils import check_variance, parse_sign, sign_label


__all__ = ('KerrInteractionSpec', 'MeasurementOutcome', 'displaced_thermal',
           'micro_macro_entangled', 'measure_qubit_superposed_basis',
           'thermal_superposition', 'two_mode_thermal_entangled',
           'bs_split_superposition', 'pure_cat', 'lossy_split_superposition',
           'lossy_split_cat', 'probability_report')


@dataclass(frozen=True)
class KerrInteractionSpec:
    """Conditional phase ``phi = lambda t`` imprinted by the cross-Kerr coupling."""
    phi: float = math.pi

    def __post_init__(self):
        phi = float(self.phi)
        if not (math.isfinite(phi) and -2 * math.pi < phi <= 2 * math.pi):
            raise InvalidParameter("phi must lie in (-2 pi, 2 pi], got %r" % (phi,))
        object.__setattr__(self, 'phi', phi)

    @classmethod
    def from_coupling(cls, coupling, time):
        """Only the product ``coupling * time`` matters."""
        return cls(coupling * time)

    @property
    def rotation(self):
        return complex(np.exp(1j * self.phi))


@dataclass(frozen=True)
class MeasurementOutcome:
    sign: int
    probability: float

    @property
    def label(self):
        return sign_label(self.sign)


def _as_spec(spec):
    if spec is None:
        return KerrInteractionSpec()
    if isinstance(spec, KerrInteractionSpec):
        return spec
    return KerrInteractionSpec(spec)


def _log_sign(c):
    """Log of a real weight that may be negative."""
    return math.log(abs(c)) + (1j * math.pi if c < 0 else 0)


def _canonical(d):
    """Split a displacement into a real magnitude and the phase to restore."""
    d = complex(d)
    return abs(d), math.atan2(d.imag, d.real)


def _restore_phase(state, angle):
    if angle == 0:
        return state
    for mode in range(state.num_modes):
        state = phase_rotate(state, mode, angle)
    return state


def displaced_thermal(V, d=0):
    """``rho^th(V, d)``: a thermal state of variance ``V`` displaced by ``d``."""
    V = check_variance(V)
    measure = GaussianMeasure.thermal(V)
    coeffs = np.ones((1, measure.dim))
    term = GaussianDyadicTerm(measure, coeffs, [complex(d)], coeffs, [complex(d)])
    state = StateSum(1, [term], params=dict(V=V, d=complex(d)))
    return normalize(state)


def _superposition_terms(V, d, rotation, coefficients):
    """The four terms ``c_i c_j Int P^th |E^i (w + d)><E^j (w + d)|``."""
    measure = GaussianMeasure.thermal(V)
    r = measure.dim
    blocks = {}
    for i in (0, 1):
        for j in (0, 1):
            ket, bra = rotation ** i, rotation ** j
            term = GaussianDyadicTerm(
                measure, np.full((1, r), ket), [ket * d],
                np.full((1, r), bra), [bra * d],
                _log_sign(coefficients[i] * coefficients[j]))
            blocks[(i, j)] = term
    return blocks


def micro_macro_entangled(V, d, spec=None):
    """Qubit in ``(|0> + |1>)/sqrt 2`` after a cross-Kerr coupling to ``rho^th(V, d)``.

    ``qubit_blocks[(i, j)]`` is ``1/2 Int P^th |alpha e^{i i phi}><alpha e^{i j phi}|``.
    """
    V = check_variance(V)
    spec = _as_spec(spec)
    magnitude, angle = _canonical(d)
    blocks = _superposition_terms(V, magnitude, spec.rotation, (1, 1))
    half = math.log(0.5)
    qubit_blocks = {label: [term._replace(log_weight=term.log_weight + half)]
                    for label, term in blocks.items()}
    state = StateSum(1, qubit_blocks=qubit_blocks,
                     params=dict(V=V, d=magnitude, phi=spec.phi))
    state = _restore_phase(state, angle)
    return normalize(state).with_params(d=complex(d))


def _project(state, sign):
    """The unnormalized ``<s|rho|s>`` for ``|s> = (|0> + sign |1>)/sqrt 2``."""
    if not state.has_qubit:
        raise InvalidParameter("state has no qubit to measure")
    coefficients = (1, sign)
    terms = []
    for (i, j), block in state.qubit_blocks.items():
        shift = _log_sign(coefficients[i] * coefficients[j] / 2)
        terms.extend(t._replace(log_weight=t.log_weight + shift) for t in block)
    params = dict(state.params, sign=sign)
    return StateSum(state.num_modes, terms, norm_constant=state.norm_constant,
                    params=params)


def measure_qubit_superposed_basis(state, sign):
    """Project the qubit onto ``(|0> +- |1>)/sqrt 2`` and renormalize.

    Returns the conditional oscillator state and the outcome probability,
    computed from the trace of the projected state.
    """
    sign = parse_sign(sign)
    projected = _project(state, sign)
    probability = trace(projected) / _trace_or_one(state)
    try:
        conditional = normalize(projected)
    except ZeroTrace:
        raise ZeroTrace("measurement outcome %s has vanishing probability (%g)"
                        % (sign_label(sign), probability))
    outcome = MeasurementOutcome(sign, probability)
    get_logger().debug("qubit measured %s with probability %.6g",
                       outcome.label, probability)
    return conditional, outcome


def _trace_or_one(state):
    return 1.0 if state.norm_status == 'normalized' else trace(state)


def thermal_superposition(V, d, spec=None, sign='+'):
    """``rho^th(V, d) +- sigma +- sigma^dagger + rho^th(V, d e^{i phi})``, normalized."""
    V = check_variance(V)
    spec = _as_spec(spec)
    sign = parse_sign(sign)
    magnitude, angle = _canonical(d)
    blocks = _superposition_terms(V, magnitude, spec.rotation, (1, sign))
    state = StateSum(1, list(blocks.values()),
                     params=dict(V=V, d=magnitude, phi=spec.phi, sign=sign))
    state = _restore_phase(state, angle)
    try:
        state = normalize(state)
    except ZeroTrace:
        raise ZeroTrace("superposition with V=%g, d=%s, sign %s has vanishing trace"
                        % (V, d, sign_label(sign)))
    return state.with_params(d=complex(d))


def two_mode_thermal_entangled(V, d, sign='+', phi=math.pi):
    """``rho^tm``: both modes conditionally rotated by ``phi``, one common sign.

    Each mode carries its own thermal integration variable.
    """
    V = check_variance(V)
    sign = parse_sign(sign)
    rotation = KerrInteractionSpec(phi).rotation
    magnitude, angle = _canonical(d)
    single = GaussianMeasure.thermal(V)
    measure = single.direct_sum(single)
    r = single.dim
    coefficients = (1, sign)
    terms = []
    for i in (0, 1):
        for j in (0, 1):
            ket, bra = rotation ** i, rotation ** j
            ket_coeffs = np.kron(np.eye(2), np.full((1, r), ket))
            bra_coeffs = np.kron(np.eye(2), np.full((1, r), bra))
            terms.append(GaussianDyadicTerm(
                measure, ket_coeffs, [ket * magnitude] * 2,
                bra_coeffs, [bra * magnitude] * 2,
                _log_sign(coefficients[i] * coefficients[j])))
    state = StateSum(2, terms, params=dict(V=V, d=magnitude, phi=float(phi),
                                           sign=sign))
    state = _restore_phase(state, angle)
    try:
        state = normalize(state)
    except ZeroTrace:
        raise ZeroTrace("two-mode state with V=%g, d=%s, sign %s has vanishing trace"
                        % (V, d, sign_label(sign)))
    return state.with_params(d=complex(d))


def bs_split_superposition(V, d, spec=None, sign='+', transmittance=0.5):
    """A thermal superposition mixed with vacuum at a beam splitter."""
    state = thermal_superposition(V, d, spec, sign)
    state = apply_beam_splitter(add_vacuum_mode(state), 0, 1, transmittance)
    return state.with_params(transmittance=transmittance)


def pure_cat(alpha, sign='+'):
    """``|alpha> +- |-alpha>``, normalized."""
    return thermal_superposition(1, alpha, KerrInteractionSpec(math.pi), sign)


def lossy_split_superposition(V, d, sign, gamma_t, phi=math.pi, transmittance=0.5):
    """A split thermal superposition after amplitude damping on both arms."""
    state = bs_split_superposition(V, d, KerrInteractionSpec(phi), sign,
                                   transmittance)
    for mode in (0, 1):
        state = apply_loss(state, mode, gamma_t)
    return state.with_params(gamma_t=gamma_t)


def lossy_split_cat(alpha, sign, gamma_t):
    return lossy_split_superposition(1, alpha, sign, gamma_t)


def probability_report(V, d, phi=math.pi):
    """Outcome probabilities from the state's trace next to the closed formula."""
    state = micro_macro_entangled(V, d, phi)
    report = {}
    for sign in (1, -1):
        label = sign_label(sign)
        report['P%s_trace' % label] = max(trace(_project(state, sign)), 0.0)
    formula_plus, formula_minus = success_probability_formula(V, abs(d))
    report['P+_formula'] = formula_plus
    report['P-_formula'] = formula_minus
    report['difference'] = report['P-_trace'] - formula_minus
    if abs(report['difference']) > 1e-10:
        get_logger().warning(
            "P- from the state trace (%.6g) differs from the closed formula (%.6g)",
            report['P-_trace'], formula_minus)
    return report
