"""Closed-form algebra over Gaussian-weighted coherent-state dyadics.

Phase-space convention, used everywhere in thermocat: a point is ``beta = x + ip``
with ``x = Re[beta]`` and ``p = Im[beta]``, Wigner functions integrate to one over
``dx dp``, the vacuum has ``W = (2/pi) exp(-2|beta|^2)`` and a thermal state of
variance ``V`` has x-variance ``V/4``. Units are hbar = nu = 1.

Every state is a finite sum of terms

    log_weight * Int d^2r w  exp(-w^H P w + s.w + t.conj(w) + log_norm)
                             |mu_1(w)...mu_M(w)><nu_1(w)...nu_M(w)|

where ket and bra amplitudes are affine in the integration variables ``w``. The
exponents of every operation here only ever contain ``conj(y_j) y_k``, ``y_j`` and
``conj(y_j)`` monomials, so all integrals reduce to

    Int d^2n y exp(-y^H H y + sigma.y + tau.conj(y))
        = pi^n / det(H) exp(sigma H^{-1} tau)

valid whenever the Hermitian part of ``H`` is positive definite. All weights are
kept as complex logarithms so that displacements in the thousands neither
overflow nor underflow.
"""
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ImaginaryResidual, InvalidParameter, NonConvergent, ZeroTrace
from .utils import (checked_real, check_transmittance, check_time, check_variance,
                    linalg_errors, sum_exp)

__all__ = ('GaussianForm', 'GaussianMeasure', 'GaussianDyadicTerm',
           'WignerGaussianTerm', 'StateSum', 'CompiledState',
           'gaussian_integral', 'coherent_dyadic_wigner_kernel',
           'compile_term', 'compile_state', 'wigner_eval', 'trace',
           'normalize', 'purity', 'mean_photon', 'partial_trace',
           'add_vacuum_mode', 'apply_beam_splitter', 'apply_loss',
           'displace', 'phase_rotate', 'adjoint', 'as_points',
           'QUBIT_LABELS')


LOG_PI = math.log(math.pi)
LOG_TWO_OVER_PI = math.log(2 / math.pi)

# Qubit Fock dyadics |i><j|, in the order used by ``CompiledState.qubit``
QUBIT_LABELS = ((0, 0), (0, 1), (1, 0), (1, 1))

# Relative size under which a trace is considered to have cancelled to zero
_CANCELLATION = 1e-12


def _check_positive(H, what):
    if H.shape[0] == 0:
        return
    herm = (H + H.conj().T) / 2
    with linalg_errors(what):
        eigs = np.linalg.eigvalsh(herm)
    if not np.all(eigs > 0):
        raise NonConvergent(
            "Hermitian part of the %s exponent is not positive definite "
            "(smallest eigenvalue %g)" % (what, eigs.min()))


def _log_det(H, what):
    with linalg_errors(what):
        sign, logabs = np.linalg.slogdet(H)
    return logabs + 1j * np.angle(sign)


def gaussian_integral(P, s, t):
    """Log of ``Int d^2r z exp(-z^H P z + s.z + t.conj(z))``.

    Raises ``NonConvergent`` unless the Hermitian part of ``P`` is positive
    definite.
    """
    P = np.atleast_2d(np.asarray(P, dtype=complex))
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    t = np.atleast_1d(np.asarray(t, dtype=complex))
    r = P.shape[0]
    if r == 0:
        return 0j
    _check_positive(P, "Gaussian integral")
    with linalg_errors("Gaussian integral"):
        solved = np.linalg.solve(P, t)
    return complex(r * LOG_PI - _log_det(P, "Gaussian integral") + s @ solved)


@dataclass(frozen=True, eq=False)
class GaussianForm:
    """``exp(-conj(y)^T H y + sigma.y + tau.conj(y) + kappa)`` over ``n`` variables."""
    H: np.ndarray
    sigma: np.ndarray
    tau: np.ndarray
    kappa: complex = 0j

    def __post_init__(self):
        n = len(self.sigma)
        object.__setattr__(self, 'H', np.asarray(self.H, dtype=complex).reshape(n, n))
        object.__setattr__(self, 'sigma', np.asarray(self.sigma, dtype=complex))
        object.__setattr__(self, 'tau', np.asarray(self.tau, dtype=complex))
        object.__setattr__(self, 'kappa', complex(self.kappa))

    @property
    def size(self):
        return len(self.sigma)

    @classmethod
    def zeros(cls, n, kappa=0j):
        return cls(np.zeros((n, n), complex), np.zeros(n, complex),
                   np.zeros(n, complex), kappa)

    def _replace(self, **kwargs):
        fields = dict(H=self.H, sigma=self.sigma, tau=self.tau, kappa=self.kappa)
        fields.update(kwargs)
        return type(self)(**fields)

    def as_form(self):
        return GaussianForm(self.H, self.sigma, self.tau, self.kappa)

    def add_constant(self, value):
        return self._replace(kappa=self.kappa + value)

    def add_product(self, hol, anti, weight=1.0):
        """Add ``weight * (c1.y + k1) * (c2.conj(y) + k2)`` to the exponent.

        ``hol = (c1, k1)`` is a linear form in the variables and
        ``anti = (c2, k2)`` a linear form in their conjugates.
        """
        (c1, k1), (c2, k2) = hol, anti
        c1 = np.asarray(c1, dtype=complex)
        c2 = np.asarray(c2, dtype=complex)
        return self._replace(
            H=self.H - weight * np.outer(c2, c1),
            sigma=self.sigma + weight * k2 * c1,
            tau=self.tau + weight * k1 * c2,
            kappa=self.kappa + weight * k1 * k2)

    def conjugate(self):
        """The form of the complex-conjugated function."""
        return self._replace(H=self.H.conj().T, sigma=self.tau.conj(),
                             tau=self.sigma.conj(), kappa=self.kappa.conjugate())

    def direct_sum(self, other):
        n, m = self.size, other.size
        H = np.zeros((n + m, n + m), complex)
        H[:n, :n] = self.H
        H[n:, n:] = other.H
        return self._replace(H=H,
                             sigma=np.concatenate([self.sigma, other.sigma]),
                             tau=np.concatenate([self.tau, other.tau]),
                             kappa=self.kappa + other.kappa)

    def shifted(self, offset):
        """Re-express the form in ``y' = y - offset``."""
        e = np.asarray(offset, dtype=complex)
        He = self.H @ e
        return self._replace(
            sigma=self.sigma - e.conj() @ self.H,
            tau=self.tau - He,
            kappa=(self.kappa - e.conj() @ He + self.sigma @ e
                   + self.tau @ e.conj()))

    def integrate_leading(self, k, what="Gaussian form"):
        """Integrate out the first ``k`` variables in closed form.

        The constant picks up ``gaussian_integral`` of the leading block; the
        remaining variables see its Schur complement.
        """
        if k == 0:
            return self
        H_ww, H_wd = self.H[:k, :k], self.H[:k, k:]
        H_dw, H_dd = self.H[k:, :k], self.H[k:, k:]
        s_w, s_d = self.sigma[:k], self.sigma[k:]
        t_w, t_d = self.tau[:k], self.tau[k:]
        _check_positive(H_ww, what)
        with linalg_errors(what):
            Q_Hwd = np.linalg.solve(H_ww, H_wd)
            Q_tw = np.linalg.solve(H_ww, t_w)
        return GaussianForm(
            H=H_dd - H_dw @ Q_Hwd,
            sigma=s_d - s_w @ Q_Hwd,
            tau=t_d - H_dw @ Q_tw,
            kappa=self.kappa + gaussian_integral(H_ww, s_w, t_w))

    def total_integral(self, what="Gaussian form"):
        """Log of the integral over every variable."""
        _check_positive(self.H, what)
        return self.kappa + gaussian_integral(self.H, self.sigma, self.tau)

    def log_values(self, points):
        """Exponent at each row of ``points`` (shape ``(P, n)``)."""
        y = np.asarray(points, dtype=complex)
        quad = np.einsum('pj,jk,pk->p', y.conj(), self.H, y)
        return -quad + y @ self.sigma + y.conj() @ self.tau + self.kappa


@dataclass(frozen=True, eq=False)
class GaussianMeasure(GaussianForm):
    """The integration measure of a term.

    ``dim`` is the number of complex integration variables; ``dim = 0`` is a
    point mass, i.e. a pure coherent dyadic.
    """

    def __post_init__(self):
        super().__post_init__()
        if self.dim > 0:
            _check_positive(self.H, "measure")

    @property
    def dim(self):
        return self.size

    P = property(lambda self: self.H)
    s = property(lambda self: self.sigma)
    t = property(lambda self: self.tau)
    log_norm = property(lambda self: self.kappa)

    @classmethod
    def point(cls):
        return cls.zeros(0)

    @classmethod
    def thermal(cls, V):
        """Centred ``P^th`` ``2/(pi (V-1)) exp(-2|w|^2/(V-1))``; a point mass at V = 1."""
        V = check_variance(V)
        if V == 1:
            return cls.point()
        return cls([[2 / (V - 1)]], [0], [0], math.log(2 / (math.pi * (V - 1))))


def _affine(coeffs, const):
    return np.asarray(coeffs, dtype=complex), complex(const)


def _conj_affine(coeffs, const):
    return np.asarray(coeffs, dtype=complex).conj(), complex(const).conjugate()


@dataclass(frozen=True, eq=False)
class GaussianDyadicTerm:
    """One Gaussian-integrated coherent-state dyadic over ``M`` modes.

    Mode ``m`` has ket amplitude ``ket_coeffs[m] . w + ket_consts[m]`` and bra
    amplitude ``bra_coeffs[m] . w + bra_consts[m]``.
    """
    measure: GaussianMeasure
    ket_coeffs: np.ndarray
    ket_consts: np.ndarray
    bra_coeffs: np.ndarray
    bra_consts: np.ndarray
    log_weight: complex = 0j

    def __post_init__(self):
        r = self.measure.dim
        ket_consts = np.atleast_1d(np.asarray(self.ket_consts, dtype=complex))
        M = len(ket_consts)
        object.__setattr__(self, 'ket_consts', ket_consts)
        object.__setattr__(self, 'bra_consts',
                           np.atleast_1d(np.asarray(self.bra_consts, dtype=complex)))
        for name in ('ket_coeffs', 'bra_coeffs'):
            coeffs = np.asarray(getattr(self, name), dtype=complex)
            if coeffs.size != M * r:
                raise InvalidParameter(
                    "%s references %d variables but the measure has %d"
                    % (name, coeffs.size // max(M, 1), r))
            object.__setattr__(self, name, coeffs.reshape(M, r))
        object.__setattr__(self, 'log_weight', complex(self.log_weight))

    @property
    def num_modes(self):
        return len(self.ket_consts)

    @classmethod
    def coherent(cls, ket, bra=None, log_weight=0j):
        """The pure dyadic ``|ket><bra|`` (``bra`` defaults to ``ket``)."""
        ket = np.atleast_1d(np.asarray(ket, dtype=complex))
        bra = ket if bra is None else np.atleast_1d(np.asarray(bra, dtype=complex))
        M = len(ket)
        return cls(GaussianMeasure.point(), np.zeros((M, 0)), ket,
                   np.zeros((M, 0)), bra, log_weight)

    def ket(self, m):
        return _affine(self.ket_coeffs[m], self.ket_consts[m])

    def bra(self, m):
        return _affine(self.bra_coeffs[m], self.bra_consts[m])

    def _replace(self, **kwargs):
        fields = dict(measure=self.measure, ket_coeffs=self.ket_coeffs,
                      ket_consts=self.ket_consts, bra_coeffs=self.bra_coeffs,
                      bra_consts=self.bra_consts, log_weight=self.log_weight)
        fields.update(kwargs)
        return GaussianDyadicTerm(**fields)

    def matches(self, other, rtol=1e-10, atol=1e-10):
        if (self.num_modes != other.num_modes
                or self.measure.dim != other.measure.dim):
            return False
        pairs = [(self.measure.H, other.measure.H),
                 (self.measure.sigma, other.measure.sigma),
                 (self.measure.tau, other.measure.tau),
                 (self.ket_coeffs, other.ket_coeffs),
                 (self.ket_consts, other.ket_consts),
                 (self.bra_coeffs, other.bra_coeffs),
                 (self.bra_consts, other.bra_consts)]
        if not all(np.allclose(a, b, rtol=rtol, atol=atol) for a, b in pairs):
            return False
        # Compare overall weights modulo 2 pi i in the phase
        a = self.log_weight + self.measure.kappa
        b = other.log_weight + other.measure.kappa
        diff = a - b
        phase = (diff.imag + math.pi) % (2 * math.pi) - math.pi
        return abs(diff.real) <= atol + rtol * abs(a.real) and abs(phase) <= 1e-8


def adjoint(term):
    """The Hermitian adjoint ``Int conj(f) |nu><mu|`` of a term."""
    return term._replace(measure=term.measure.conjugate(),
                         ket_coeffs=term.bra_coeffs, ket_consts=term.bra_consts,
                         bra_coeffs=term.ket_coeffs, bra_consts=term.ket_consts,
                         log_weight=term.log_weight.conjugate())


def coherent_dyadic_wigner_kernel(mu, nu, beta):
    """Wigner function of the dyadic ``|mu><nu|`` at ``beta``."""
    beta = np.asarray(beta, dtype=complex)
    mu, nu = complex(mu), complex(nu)
    exponent = (-2 * (beta - mu) * (beta.conj() - nu.conjugate())
                + mu * nu.conjugate() - abs(mu) ** 2 / 2 - abs(nu) ** 2 / 2)
    return 2 / math.pi * np.exp(exponent)


@dataclass(frozen=True, eq=False)
class WignerGaussianTerm:
    """Integration-free Wigner function of one term.

    ``exp(-conj(delta)^T H delta + sigma.delta + tau.conj(delta) + log_coeff)``
    with ``delta = beta - origin``.
    """
    origin: np.ndarray
    form: GaussianForm

    @property
    def num_modes(self):
        return len(self.origin)

    @property
    def log_coeff(self):
        return self.form.kappa

    @property
    def A(self):
        """Quadratic coefficients over ``(delta, conj(delta))``."""
        M = self.num_modes
        A = np.zeros((2 * M, 2 * M), complex)
        A[:M, M:] = -self.form.H.T
        A[M:, :M] = -self.form.H
        return A

    @property
    def b(self):
        return np.concatenate([self.form.sigma, self.form.tau])

    def log_values(self, points):
        points = np.asarray(points, dtype=complex).reshape(-1, self.num_modes)
        return self.form.log_values(points - self.origin)

    def __call__(self, points):
        return np.exp(self.log_values(points))

    def recentred(self, origin):
        origin = np.asarray(origin, dtype=complex)
        return WignerGaussianTerm(origin, self.form.shifted(origin - self.origin))


def compile_term(term):
    """Integrate a term's measure away, leaving a Gaussian in phase space."""
    r, M = term.measure.dim, term.num_modes
    origin = (term.ket_consts + term.bra_consts) / 2
    form = term.measure.as_form().direct_sum(GaussianForm.zeros(M))
    form = form.add_constant(term.log_weight + M * LOG_TWO_OVER_PI)
    pad = np.zeros(M, complex)

    for m in range(M):
        unit = np.zeros(r + M, complex)
        unit[r + m] = 1
        u, a = term.ket(m)
        v, b = term.bra(m)
        mu = (np.concatenate([u, pad]), a)
        nu = (np.concatenate([v, pad]), b)
        # -2 (delta - mu') (conj(delta) - conj(nu'))
        left = (unit - mu[0], -(a - origin[m]))
        right = (unit - nu[0].conj(), -(b - origin[m]).conjugate())
        form = form.add_product(left, right, -2.0)
        # mu conj(nu) - |mu|^2/2 - |nu|^2/2 = -|mu - nu|^2/2 + i Im(mu conj(nu))
        diff = (mu[0] - nu[0], a - b)
        form = form.add_product(diff, _conj_affine(*diff), -0.5)
        form = form.add_product(mu, _conj_affine(*nu), 0.5)
        form = form.add_product(nu, _conj_affine(*mu), -0.5)

    form = form.integrate_leading(r, "term compilation")
    return WignerGaussianTerm(origin, form)


def _qubit_kernels(alpha):
    """Polynomial parts of the |i><j| Wigner functions, order ``QUBIT_LABELS``.

    The common factor ``(2/pi) exp(-2|alpha|^2)`` is applied separately.
    """
    alpha = np.asarray(alpha, dtype=complex)
    return np.stack([np.ones_like(alpha), 2 * alpha, 2 * alpha.conj(),
                     4 * abs(alpha) ** 2 - 1])


class CompiledState:
    """All compiled terms of a state, stacked for batched evaluation."""

    def __init__(self, num_modes, terms, qubit=None):
        self.num_modes = num_modes
        self.terms = tuple(terms)
        self.qubit = None if qubit is None else np.asarray(qubit, dtype=int)
        T, M = len(self.terms), num_modes
        self.origin = np.array([t.origin for t in self.terms]).reshape(T, M)
        self.H = np.array([t.form.H for t in self.terms]).reshape(T, M, M)
        self.sigma = np.array([t.form.sigma for t in self.terms]).reshape(T, M)
        self.tau = np.array([t.form.tau for t in self.terms]).reshape(T, M)
        self.kappa = np.array([t.form.kappa for t in self.terms], dtype=complex)

    @property
    def has_qubit(self):
        return self.qubit is not None

    def log_values(self, points):
        """Exponents of every term at every point, shape ``(T, P)``."""
        y = points[None, :, :] - self.origin[:, None, :]
        quad = np.einsum('tpj,tjk,tpk->tp', y.conj(), self.H, y)
        lin = (np.einsum('tpj,tj->tp', y, self.sigma)
               + np.einsum('tpj,tj->tp', y.conj(), self.tau))
        return -quad + lin + self.kappa[:, None]

    def evaluate(self, points, with_scale=False):
        """Complex sum of all terms at ``points`` (shape ``(P, M [+1])``).

        With ``with_scale`` also returns the sum of the terms' magnitudes, the
        reference for judging cancellation.
        """
        points = np.asarray(points, dtype=complex)
        if self.has_qubit:
            alpha, beta = points[:, 0], points[:, 1:]
            logs = self.log_values(beta)
            logs = logs + (LOG_TWO_OVER_PI - 2 * abs(alpha) ** 2)[None, :]
            poly = _qubit_kernels(alpha)[self.qubit]
        else:
            logs = self.log_values(points)
            poly = None
        values = sum_exp(logs, axis=0, multipliers=poly)
        if not with_scale:
            return values
        weights = None if poly is None else abs(poly)
        scale = sum_exp(logs.real, axis=0, multipliers=weights).real
        return values, scale

    def integrals(self):
        """Log of each term's integral over all of phase space."""
        return np.array([t.form.total_integral("trace") for t in self.terms],
                        dtype=complex)

    def diagonal_mask(self):
        """Terms surviving the qubit trace, ``int K_ij = delta_ij``."""
        if not self.has_qubit:
            return np.ones(len(self.terms), bool)
        return np.isin(self.qubit, [0, 3])


@dataclass(frozen=True, eq=False)
class StateSum:
    """A (possibly unnormalized) density operator as a sum of dyadic terms.

    If ``qubit_blocks`` is set, the state has an extra two-level mode in front
    of the ``num_modes`` oscillators and ``qubit_blocks[(i, j)]`` holds the
    oscillator terms multiplying ``|i><j|``.
    """
    num_modes: int
    terms: tuple = ()
    qubit_blocks: dict = None
    norm_status: str = 'raw'
    norm_constant: float = 1.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'terms', tuple(self.terms))
        if self.qubit_blocks is not None:
            blocks = {label: tuple(self.qubit_blocks.get(label, ()))
                      for label in QUBIT_LABELS}
            object.__setattr__(self, 'qubit_blocks', blocks)
        for term in self._all_terms():
            if term.num_modes != self.num_modes:
                raise InvalidParameter(
                    "term has %d modes, state has %d"
                    % (term.num_modes, self.num_modes))
        self._check_hermitian()

    def _all_terms(self):
        if self.qubit_blocks is None:
            return self.terms
        return tuple(t for label in QUBIT_LABELS for t in self.qubit_blocks[label])

    def _check_hermitian(self):
        if self.qubit_blocks is None:
            groups = [(self.terms, self.terms)]
        else:
            groups = [(self.qubit_blocks[(i, j)], self.qubit_blocks[(j, i)])
                      for i, j in QUBIT_LABELS]
        for terms, partners in groups:
            for term in terms:
                adj = adjoint(term)
                if not any(adj.matches(p) for p in partners):
                    raise ImaginaryResidual(
                        "state is not Hermitian: a term has no adjoint partner")

    @property
    def has_qubit(self):
        return self.qubit_blocks is not None

    @property
    def total_modes(self):
        return self.num_modes + (1 if self.has_qubit else 0)

    def map_terms(self, func, **changes):
        """A new state with ``func`` applied to every oscillator term."""
        if self.qubit_blocks is None:
            kwargs = dict(terms=[func(t) for t in self.terms])
        else:
            kwargs = dict(qubit_blocks={label: [func(t) for t in terms]
                                        for label, terms in self.qubit_blocks.items()})
        fields = dict(num_modes=self.num_modes, norm_status=self.norm_status,
                      norm_constant=self.norm_constant, params=dict(self.params))
        fields.update(kwargs)
        fields.update(changes)
        return StateSum(**fields)

    def with_params(self, **params):
        merged = dict(self.params)
        merged.update(params)
        return self.map_terms(lambda t: t, params=merged)

    @cached_property
    def compiled(self):
        return compile_state(self)


def compile_state(state):
    if state.qubit_blocks is None:
        return CompiledState(state.num_modes, [compile_term(t) for t in state.terms])
    terms, labels = [], []
    for index, label in enumerate(QUBIT_LABELS):
        for t in state.qubit_blocks[label]:
            terms.append(compile_term(t))
            labels.append(index)
    return CompiledState(state.num_modes, terms, labels)


def as_points(points, num_modes):
    """Coerce phase points to a complex array of shape ``(P, num_modes)``."""
    points = np.asarray(points, dtype=complex)
    if points.ndim <= 1 and points.size == num_modes:
        return points.reshape(1, num_modes), True
    if points.ndim == 1 and num_modes == 1:
        return points.reshape(-1, 1), False
    if points.ndim != 2 or points.shape[1] != num_modes:
        raise InvalidParameter("expected phase points with %d modes, got shape %s"
                               % (num_modes, points.shape))
    return points, False


def wigner_eval(state, points):
    """Wigner function of ``state`` at one or more phase points.

    For states with a qubit, the qubit coordinate comes first in each point.
    """
    compiled = state.compiled
    points, single = as_points(points, state.total_modes)
    values, scale = compiled.evaluate(points, with_scale=True)
    result = checked_real(values, scale, "Wigner function")
    return float(result[0]) if single else result


def _raw_trace(state):
    compiled = state.compiled
    mask = compiled.diagonal_mask()
    logs = compiled.integrals()[mask]
    if len(logs) == 0:
        return 0.0, 0.0
    total = complex(sum_exp(logs))
    magnitude = float(np.sum(np.exp(logs.real - logs.real.max()))
                      * np.exp(logs.real.max()))
    return total, magnitude


def trace(state):
    total, magnitude = _raw_trace(state)
    return float(checked_real(np.array([total]), magnitude, "trace")[0])


def normalize(state):
    """Divide a state by its trace; the constant is kept in ``norm_constant``."""
    total, magnitude = _raw_trace(state)
    value = float(np.real(total))
    if abs(value) < 1e-300 or abs(value) <= _CANCELLATION * magnitude:
        raise ZeroTrace("state has vanishing trace (%g)" % value)
    shift = math.log(abs(value)) + (1j * math.pi if value < 0 else 0)
    return state.map_terms(lambda t: t._replace(log_weight=t.log_weight - shift),
                           norm_status='normalized',
                           norm_constant=value * state.norm_constant)


def _pair_log_integral(a, b):
    """Log of the integral of the product of two compiled terms."""
    mid = (a.origin + b.origin) / 2
    fa, fb = a.recentred(mid).form, b.recentred(mid).form
    product = GaussianForm(fa.H + fb.H, fa.sigma + fb.sigma, fa.tau + fb.tau,
                           fa.kappa + fb.kappa)
    return product.total_integral("purity")


def purity(state):
    """``Tr rho^2 = pi^M Int W^2``, from closed-form pairwise products."""
    compiled = state.compiled
    terms = compiled.terms
    labels = compiled.qubit if compiled.has_qubit else [None] * len(terms)
    logs, M = [], state.num_modes
    for i, a in enumerate(terms):
        for j, b in enumerate(terms):
            if labels[i] is not None:
                (p, q), (r, s) = QUBIT_LABELS[labels[i]], QUBIT_LABELS[labels[j]]
                # pi Int K_pq K_rs = Tr(|p><q|r><s|)
                if not (q == r and p == s):
                    continue
            logs.append(M * LOG_PI + _pair_log_integral(a, b))
    total = complex(sum_exp(np.array(logs)))
    return float(total.real) / trace(state) ** 2


def mean_photon(state, mode):
    """``<n_mode>`` from the second moment of the compiled Gaussians."""
    if state.has_qubit:
        state = partial_trace(state, range(state.num_modes))
    compiled = state.compiled
    logs, weights = [], []
    for term in compiled.terms:
        form, o = term.form, term.origin[mode]
        with linalg_errors("mean photon number"):
            Hinv = np.linalg.inv(form.H)
        mean_ket = (Hinv @ form.tau)[mode] + o
        mean_bra = (form.sigma @ Hinv)[mode] + o.conjugate()
        logs.append(form.total_integral("mean photon number"))
        weights.append(Hinv[mode, mode] + mean_bra * mean_ket - 0.5)
    total = sum_exp(np.array(logs), multipliers=np.array(weights))
    return float(np.real(total)) / trace(state)


def _trace_mode_factor(term, m):
    """Fold ``<nu_m|mu_m>`` into the measure and drop mode ``m``."""
    u, a = term.ket(m)
    v, b = term.bra(m)
    measure = term.measure
    diff = (u - v, a - b)
    measure = measure.add_product(diff, _conj_affine(*diff), -0.5)
    measure = measure.add_product((u, a), _conj_affine(v, b), 0.5)
    measure = measure.add_product((v, b), _conj_affine(u, a), -0.5)
    keep = [k for k in range(term.num_modes) if k != m]
    return term._replace(measure=measure,
                         ket_coeffs=term.ket_coeffs[keep],
                         ket_consts=term.ket_consts[keep],
                         bra_coeffs=term.bra_coeffs[keep],
                         bra_consts=term.bra_consts[keep])


def partial_trace(state, keep):
    """Trace out every oscillator mode not in ``keep`` (and the qubit, if any)."""
    keep = sorted(set(int(k) for k in keep))
    drop = [m for m in range(state.num_modes) if m not in keep]

    def reduce(term):
        for m in reversed(drop):
            term = _trace_mode_factor(term, m)
        return term

    if state.has_qubit:
        terms = state.qubit_blocks[(0, 0)] + state.qubit_blocks[(1, 1)]
    else:
        terms = state.terms
    return StateSum(len(keep), [reduce(t) for t in terms],
                    norm_status=state.norm_status,
                    norm_constant=state.norm_constant, params=dict(state.params))


def add_vacuum_mode(state):
    def extend(term):
        r = term.measure.dim
        return term._replace(
            ket_coeffs=np.vstack([term.ket_coeffs, np.zeros((1, r))]),
            ket_consts=np.append(term.ket_consts, 0),
            bra_coeffs=np.vstack([term.bra_coeffs, np.zeros((1, r))]),
            bra_consts=np.append(term.bra_consts, 0))
    return state.map_terms(extend, num_modes=state.num_modes + 1)


def _check_mode(state, mode):
    if not 0 <= mode < state.num_modes:
        raise InvalidParameter("mode %r out of range for a %d-mode state"
                               % (mode, state.num_modes))


def apply_beam_splitter(state, mode_i, mode_j, transmittance=0.5):
    """``(mu_i, mu_j) -> (sqrt(T) mu_i + sqrt(R) mu_j, -sqrt(R) mu_i + sqrt(T) mu_j)``."""
    T = check_transmittance(transmittance)
    _check_mode(state, mode_i)
    _check_mode(state, mode_j)
    if mode_i == mode_j:
        raise InvalidParameter("beam splitter needs two distinct modes")
    U = np.eye(state.num_modes)
    c, s = math.sqrt(T), math.sqrt(1 - T)
    U[mode_i, mode_i], U[mode_i, mode_j] = c, s
    U[mode_j, mode_i], U[mode_j, mode_j] = -s, c

    def mix(term):
        return term._replace(ket_coeffs=U @ term.ket_coeffs,
                             ket_consts=U @ term.ket_consts,
                             bra_coeffs=U @ term.bra_coeffs,
                             bra_consts=U @ term.bra_consts)
    return state.map_terms(mix)


def apply_loss(state, mode, gamma_t):
    """Amplitude damping of one mode for a time ``gamma_t`` (in units of 1/gamma).

    ``|a><b| -> exp(-(1 - e^{-gt}) ((|a|^2 + |b|^2)/2 - a conj(b)))``
    ``|e^{-gt/2} a><e^{-gt/2} b|``
    """
    gamma_t = check_time(gamma_t)
    _check_mode(state, mode)
    if gamma_t == 0:
        return state
    eta = math.exp(-gamma_t)
    loss = 1 - eta
    amp = math.sqrt(eta)

    def damp(term):
        u, a = term.ket(mode)
        v, b = term.bra(mode)
        diff = (u - v, a - b)
        # -loss * (|mu - nu|^2/2 - i Im(mu conj(nu)))
        measure = term.measure.add_product(diff, _conj_affine(*diff), -loss / 2)
        measure = measure.add_product((u, a), _conj_affine(v, b), loss / 2)
        measure = measure.add_product((v, b), _conj_affine(u, a), -loss / 2)
        ket_coeffs, ket_consts = term.ket_coeffs.copy(), term.ket_consts.copy()
        bra_coeffs, bra_consts = term.bra_coeffs.copy(), term.bra_consts.copy()
        ket_coeffs[mode] *= amp
        ket_consts[mode] *= amp
        bra_coeffs[mode] *= amp
        bra_consts[mode] *= amp
        return term._replace(measure=measure, ket_coeffs=ket_coeffs,
                             ket_consts=ket_consts, bra_coeffs=bra_coeffs,
                             bra_consts=bra_consts)
    return state.map_terms(damp)


def displace(state, mode, delta):
    """Apply ``D(delta)`` to one mode.

    ``D|mu> = e^{(delta conj(mu) - conj(delta) mu)/2}|mu + delta>``.
    """
    _check_mode(state, mode)
    delta = complex(delta)
    if delta == 0:
        return state

    def shift(term):
        u, a = term.ket(mode)
        v, b = term.bra(mode)
        one = (np.zeros_like(u), 1.0)
        measure = term.measure
        measure = measure.add_product(one, _conj_affine(u, a), delta / 2)
        measure = measure.add_product((u, a), one, -delta.conjugate() / 2)
        measure = measure.add_product(one, _conj_affine(v, b), -delta / 2)
        measure = measure.add_product((v, b), one, delta.conjugate() / 2)
        ket_consts, bra_consts = term.ket_consts.copy(), term.bra_consts.copy()
        ket_consts[mode] += delta
        bra_consts[mode] += delta
        return term._replace(measure=measure, ket_consts=ket_consts,
                             bra_consts=bra_consts)
    return state.map_terms(shift)


def phase_rotate(state, mode, theta):
    """Apply ``exp(i theta n)`` to one mode, i.e. ``|mu> -> |mu e^{i theta}>``."""
    _check_mode(state, mode)
    rot = np.exp(1j * theta)

    def rotate(term):
        ket_coeffs, ket_consts = term.ket_coeffs.copy(), term.ket_consts.copy()
        bra_coeffs, bra_consts = term.bra_coeffs.copy(), term.bra_consts.copy()
        ket_coeffs[mode] *= rot
        ket_consts[mode] *= rot
        bra_coeffs[mode] *= rot
        bra_consts[mode] *= rot
        return term._replace(ket_coeffs=ket_coeffs, ket_consts=ket_consts,
                             bra_coeffs=bra_coeffs, bra_consts=bra_consts)
    return state.map_terms(rotate)
