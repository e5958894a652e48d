"""Dense truncated Fock-space versions of the states and observables.

Slow, simple and independent of the Gaussian engine: every state is built
from its operator definition (``U_phi = exp(i phi n)``, ``D(beta)`` as a
matrix exponential, beam splitters per photon-number block, loss through
amplitude-damping Kraus operators) and Wigner values come from displaced
parity.  Two-mode entangled states are kept as sums of products of
single-mode operators.  Used only for small parameters.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.special import binom, eval_laguerre
from scipy.stats import poisson
from traitlets import Float, Integer
from traitlets.config import LoggingConfigurable

from .errors import CutoffTooSmall, UnphysicalState, ZeroTrace
from .gaussian import mean_photon, purity, wigner_eval
from .observables import bell_chsh
from .states import (displaced_thermal, lossy_split_superposition,
                     micro_macro_entangled, probability_report,
                     thermal_superposition, two_mode_thermal_entangled)
from .utils import (check_time, check_transmittance, check_variance, parse_sign,
                    sign_label)


__all__ = ('FockOperator', 'FockProductSum', 'FockOracle', 'cutoff_selector',
           'fock_thermal', 'projector_states', 'fock_two_mode',
           'displaced_parity_wigner', 'oracle_bell', 'oracle_bs_and_loss',
           'oracle_micro_macro', 'oracle_check', 'CheckRow')


@dataclass(frozen=True, eq=False)
class FockOperator:
    """A density matrix on a product of truncated Fock spaces."""
    dims: tuple
    matrix: np.ndarray
    tail_mass: float = 0.0
    raw_trace: float = 1.0

    @property
    def num_modes(self):
        return len(self.dims)

    @property
    def cutoff(self):
        return max(self.dims) - 1

    @property
    def probability(self):
        """Outcome probability of a projected state, ``raw_trace / 4``."""
        return self.raw_trace / 4

    def tensor(self):
        return self.matrix.reshape(tuple(self.dims) * 2)

    def trace(self):
        return float(np.trace(self.matrix).real)

    def purity(self):
        return float(np.einsum('ij,ji->', self.matrix, self.matrix).real)

    def mean_photon(self, mode=0):
        n = np.arange(self.dims[mode], dtype=float)
        diag = np.einsum(self._diag_subscripts(mode), self.tensor())
        return float(np.real(diag @ n))

    def _diag_subscripts(self, mode):
        letters = 'abcdefgh'[:self.num_modes]
        bra = ''.join('x' if k == mode else c for k, c in enumerate(letters))
        ket = bra
        return ket + bra + '->x'

    def contract(self, factors):
        """``Tr[rho (F_0 x F_1 x ...)]`` through the mode tensor."""
        M = self.num_modes
        letters = 'abcdefgh'[:M]
        primes = 'ijklmnop'[:M]
        subscripts = (letters + primes + ','
                      + ','.join(p + l for l, p in zip(letters, primes)) + '->')
        return np.einsum(subscripts, self.tensor(), *factors)

    def check_physical(self, tol=1e-8):
        m = self.matrix
        if not np.allclose(m, m.conj().T, atol=1e-10):
            raise UnphysicalState("Fock density matrix is not Hermitian")
        if abs(self.trace() - 1) > tol:
            raise UnphysicalState("Fock density matrix has trace %.12g" % self.trace())
        smallest = np.linalg.eigvalsh((m + m.conj().T) / 2).min()
        if smallest < -tol:
            raise UnphysicalState("Fock density matrix has eigenvalue %g" % smallest)
        return self


def _pair_trace(A, B):
    return np.einsum('ij,ji->', A, B)


@dataclass(frozen=True, eq=False)
class FockProductSum:
    """Two-mode density matrix ``sum_k w_k A_k x B_k`` kept in product form.

    The ``dim**2`` square matrix is never formed; every observable reduces
    to single-mode traces of the factors.
    """
    dims: tuple
    weights: np.ndarray
    factors: tuple
    tail_mass: float = 0.0
    raw_trace: float = 1.0

    num_modes = 2

    @property
    def cutoff(self):
        return max(self.dims) - 1

    @property
    def probability(self):
        return self.raw_trace / 4

    def contract(self, factors):
        """``Tr[rho (F_0 x F_1)]``."""
        F, G = factors
        return sum(w * _pair_trace(A, F) * _pair_trace(B, G)
                   for w, (A, B) in zip(self.weights, self.factors))

    def trace(self):
        eyes = [np.eye(dim) for dim in self.dims]
        return float(np.real(self.contract(eyes)))

    def purity(self):
        total = 0j
        for w, (A, B) in zip(self.weights, self.factors):
            for v, (C, D) in zip(self.weights, self.factors):
                total += w * v * _pair_trace(A, C) * _pair_trace(B, D)
        return float(total.real)

    def mean_photon(self, mode=0):
        factors = [np.eye(dim) for dim in self.dims]
        factors[mode] = np.diag(np.arange(self.dims[mode], dtype=float))
        return float(np.real(self.contract(factors)))

    def _has_adjoint(self, w, A, B):
        return any(abs(v - np.conj(w)) <= 1e-12
                   and np.allclose(C, A.conj().T, atol=1e-10)
                   and np.allclose(D, B.conj().T, atol=1e-10)
                   for v, (C, D) in zip(self.weights, self.factors))

    def check_physical(self, tol=1e-8):
        """Hermiticity, unit trace and purity at most one.

        Positivity is not checked; it would need the full matrix.
        """
        for w, (A, B) in zip(self.weights, self.factors):
            if not self._has_adjoint(w, A, B):
                raise UnphysicalState("Fock product sum is not Hermitian")
        if abs(self.trace() - 1) > tol:
            raise UnphysicalState("Fock product sum has trace %.12g" % self.trace())
        if self.purity() > 1 + tol:
            raise UnphysicalState("Fock product sum has purity %.12g"
                                  % self.purity())
        return self


def annihilation(dim):
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def displacement(beta, dim, padding=0.25):
    """``exp(beta a^dagger - conj(beta) a)`` on a padded space, then truncated."""
    big = int(math.ceil(dim * (1 + padding))) + 1
    a = annihilation(big)
    beta = complex(beta)
    return expm(beta * a.conj().T - beta.conjugate() * a)[:dim, :dim]


def parity(dim):
    return np.diag((-1.0) ** np.arange(dim)).astype(complex)


def rotation(phi, dim):
    return np.diag(np.exp(1j * phi * np.arange(dim)))


def _thermal_occupations(V, dim):
    nbar = (V - 1) / 2
    if nbar == 0:
        p = np.zeros(dim)
        p[0] = 1
        return p
    ratio = nbar / (nbar + 1)
    return (1 - ratio) * ratio ** np.arange(dim)


def _check_tail(tail, tolerance, what):
    if tail > tolerance:
        raise CutoffTooSmall("%s loses %.3g of its trace to the Fock cutoff"
                             % (what, tail))


def cutoff_selector(V, d, beta_max=0.0, epsilon=1e-10, max_cutoff=200):
    """Smallest ``N`` whose photon-number tail beyond ``N`` is below ``epsilon``.

    The tail is that of a thermal state displaced by ``|d| + |beta_max|``.
    """
    V = check_variance(V)
    nbar = (V - 1) / 2
    x2 = (abs(d) + abs(beta_max)) ** 2
    n = np.arange(max_cutoff + 1)
    if nbar == 0:
        tails = poisson.sf(n, x2)
    else:
        y = x2 / (nbar * (nbar + 1))
        with np.errstate(over='raise', invalid='raise'):
            try:
                logs = (n * math.log(nbar) - (n + 1) * math.log1p(nbar)
                        - x2 / (nbar + 1) + np.log(eval_laguerre(n, -y)))
            except FloatingPointError:
                raise CutoffTooSmall("displacement %g too large for the Fock oracle"
                                     % math.sqrt(x2))
        p = np.exp(logs)
        tails = 1 - np.cumsum(p)
    below = np.nonzero(tails < epsilon)[0]
    if len(below) == 0 or below[0] > max_cutoff:
        raise CutoffTooSmall("no cutoff up to %d reaches a tail below %g"
                             % (max_cutoff, epsilon))
    return int(below[0])


def fock_thermal(V, d, cutoff, padding=0.25, tail_tolerance=1e-8):
    """``D(d) rho^th D(d)^dagger`` with ``nbar = (V - 1)/2``."""
    V = check_variance(V)
    dim = cutoff + 1
    D = displacement(d, dim, padding)
    rho = D @ np.diag(_thermal_occupations(V, dim)).astype(complex) @ D.conj().T
    total = float(np.trace(rho).real)
    tail = 1 - total
    _check_tail(tail, tail_tolerance, "thermal state")
    return FockOperator((dim,), rho / total, tail)


def _project(rho, unitary, sign, what):
    """Project with a diagonal unitary: ``(1 + sign U) rho (1 + sign U)^dagger``."""
    a = 1 + sign * np.diag(unitary)
    X = a[:, None] * rho.matrix * a.conj()[None, :]
    raw = float(np.trace(X).real)
    scale = 2 + 2 * abs(np.trace(unitary @ rho.matrix))
    if abs(raw) <= 1e-12 * scale:
        raise ZeroTrace("%s has vanishing trace" % what)
    return FockOperator(rho.dims, X / raw, rho.tail_mass, raw)


def projector_states(V, d, phi, sign, cutoff, padding=0.25, tail_tolerance=1e-8):
    """``(1 +- U_phi) rho^th (1 +- U_phi)^dagger``, normalized.

    ``raw_trace / 4`` is the probability of the corresponding qubit outcome.
    """
    sign = parse_sign(sign)
    th = fock_thermal(V, d, cutoff, padding, tail_tolerance)
    return _project(th, rotation(phi, cutoff + 1), sign, "superposition")


def fock_two_mode(V, d, sign, cutoff, phi=math.pi, padding=0.25,
                  tail_tolerance=1e-8):
    """``(1 +- U x U)(rho^th x rho^th)(1 +- U x U)^dagger``, normalized.

    Returned as ``sum_ij sign^(i+j) X_ij x X_ij`` with ``X_ij = U^i rho^th U^-j``.
    """
    sign = parse_sign(sign)
    th = fock_thermal(V, d, cutoff, padding, tail_tolerance)
    u = np.exp(1j * phi * np.arange(cutoff + 1))
    weights, factors = [], []
    for i in (0, 1):
        for j in (0, 1):
            X = (u ** i)[:, None] * th.matrix * (u.conj() ** j)[None, :]
            weights.append(float(sign ** (i + j)))
            factors.append((X, X))
    weights = np.array(weights)
    traces = np.array([np.trace(X) for X, _ in factors])
    raw = float(np.real(weights @ traces ** 2))
    if abs(raw) <= 1e-12 * (2 + 2 * abs(traces[2]) ** 2):
        raise ZeroTrace("two-mode state has vanishing trace")
    return FockProductSum(th.dims * 2, weights / raw, tuple(factors),
                          2 * th.tail_mass, raw)


def oracle_micro_macro(V, d, phi, cutoff, qubit_dim=2, padding=0.25,
                       tail_tolerance=1e-8):
    """Qubit (as Fock levels 0 and 1 of a mode of size ``qubit_dim``) entangled
    with ``rho^th``: ``1/2 sum_ij |i><j| x U^i rho^th U^-j``."""
    th = fock_thermal(V, d, cutoff, padding, tail_tolerance)
    U = rotation(phi, cutoff + 1)
    zero, one = np.zeros((qubit_dim, 1)), np.zeros((qubit_dim, 1))
    zero[0], one[1] = 1, 1
    C = np.kron(zero, np.eye(cutoff + 1)) + np.kron(one, U)
    rho = C @ th.matrix @ C.conj().T / 2
    return FockOperator((qubit_dim, cutoff + 1), rho, th.tail_mass)


def displaced_parity_wigner(rho, beta, padding=0.25, tail_tolerance=1e-8):
    """``(2/pi)^M Tr[rho D(beta) Pi D(beta)^dagger]``, one displacement per mode."""
    beta = np.atleast_1d(np.asarray(beta, dtype=complex))
    if len(beta) != rho.num_modes:
        raise UnphysicalState("expected %d displacements, got %d"
                              % (rho.num_modes, len(beta)))
    observables, keeps = [], []
    for b, dim in zip(beta, rho.dims):
        D = displacement(b, dim, padding)
        observables.append(D @ parity(dim) @ D.conj().T)
        keeps.append(D.conj().T @ D)
    tail = 1 - float(np.real(rho.contract(keeps)))
    _check_tail(tail, tail_tolerance, "displaced state")
    value = rho.contract(observables)
    return float((2 / math.pi) ** rho.num_modes * np.real(value))


def oracle_bell(rho, settings, padding=0.25, tail_tolerance=1e-8):
    a, ap, b, bp = settings
    W = [displaced_parity_wigner(rho, point, padding, tail_tolerance)
         for point in ((a, b), (a, bp), (ap, b), (ap, bp))]
    return math.pi ** 2 / 4 * (W[0] + W[1] + W[2] - W[3])


def beam_splitter_unitary(dim, transmittance):
    """Two-mode beam splitter ``exp(theta (a^dagger b - a b^dagger))``.

    ``cos theta = sqrt T``. Built per total photon number so truncation
    cannot mix blocks.
    """
    theta = math.acos(math.sqrt(check_transmittance(transmittance)))
    N = dim - 1
    U = np.zeros((dim * dim, dim * dim), complex)
    for K in range(2 * N + 1):
        G = np.zeros((K + 1, K + 1))
        for k in range(K + 1):
            if k < K:
                G[k + 1, k] = math.sqrt((k + 1) * (K - k))
            if k > 0:
                G[k - 1, k] = -math.sqrt(k * (K - k + 1))
        block = expm(theta * G)
        ks = [k for k in range(K + 1) if k <= N and K - k <= N]
        index = [k * dim + (K - k) for k in ks]
        U[np.ix_(index, index)] = block[np.ix_(ks, ks)]
    return U


def loss_kraus(dim, gamma_t):
    """Amplitude-damping Kraus operators.

    ``K_k |n> = sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k>``.
    """
    eta = math.exp(-check_time(gamma_t))
    kraus = np.zeros((dim, dim, dim))
    for k in range(dim):
        for n in range(k, dim):
            kraus[k, n - k, n] = math.sqrt(binom(n, k) * eta ** (n - k)
                                           * (1 - eta) ** k)
    return kraus


def _apply_to_mode(rho, mode, operators):
    """``sum_K (K on mode) rho (K on mode)^dagger``."""
    M = rho.num_modes
    T = rho.tensor()
    out = np.zeros_like(T)
    for K in operators:
        part = np.moveaxis(np.tensordot(K, T, axes=([1], [mode])), 0, mode)
        part = np.moveaxis(np.tensordot(part, K.conj(), axes=([M + mode], [1])),
                           -1, M + mode)
        out += part
    size = int(np.prod(rho.dims))
    return FockOperator(rho.dims, out.reshape(size, size), rho.tail_mass,
                        rho.raw_trace)


def oracle_bs_and_loss(rho, transmittance=None, gamma_t=0.0,
                       tail_tolerance=1e-8):
    """Optionally split a state with vacuum at a beam splitter, then damp every mode.

    A single-mode ``rho`` is paired with a vacuum mode before the beam splitter.
    """
    gamma_t = check_time(gamma_t)
    if transmittance is not None:
        if rho.num_modes == 1:
            vacuum = np.zeros((rho.dims[0], rho.dims[0]), complex)
            vacuum[0, 0] = 1
            rho = FockOperator(rho.dims * 2, np.kron(rho.matrix, vacuum),
                               rho.tail_mass, rho.raw_trace)
        if rho.num_modes != 2 or rho.dims[0] != rho.dims[1]:
            raise UnphysicalState("beam splitter needs two modes of equal cutoff")
        U = beam_splitter_unitary(rho.dims[0], transmittance)
        matrix = U @ rho.matrix @ U.conj().T
        tail = rho.tail_mass + 1 - float(np.trace(matrix).real)
        _check_tail(tail, tail_tolerance, "beam splitter output")
        rho = FockOperator(rho.dims, matrix / np.trace(matrix).real, tail,
                           rho.raw_trace)
    if gamma_t > 0:
        for mode, dim in enumerate(rho.dims):
            rho = _apply_to_mode(rho, mode, loss_kraus(dim, gamma_t))
    return rho


class FockOracle(LoggingConfigurable):
    """Chooses cutoffs and builds oracle states with one set of tolerances."""

    epsilon = Float(
        default_value=1e-10,
        config=True,
        help="Photon-number tail allowed beyond the chosen cutoff."
    )

    padding = Float(
        default_value=0.25,
        config=True,
        help="""
        Relative enlargement of the space on which displacement operators
        are exponentiated before truncating back to the cutoff.
        """
    )

    max_cutoff = Integer(
        default_value=200,
        config=True,
        help="Largest Fock cutoff the oracle will use."
    )

    tail_tolerance = Float(
        default_value=1e-8,
        config=True,
        help="Largest trace an oracle state may lose to truncation."
    )

    def cutoff(self, V, d, beta_max=0.0):
        N = cutoff_selector(V, d, beta_max, self.epsilon, self.max_cutoff)
        self.log.debug("Fock cutoff %d for V=%g, d=%g, |beta| <= %g",
                       N, V, abs(d), beta_max)
        return N

    def _kw(self):
        return dict(padding=self.padding, tail_tolerance=self.tail_tolerance)

    def thermal(self, V, d, beta_max=0.0):
        return fock_thermal(V, d, self.cutoff(V, d, beta_max), **self._kw())

    def superposition(self, V, d, phi, sign, beta_max=0.0):
        return projector_states(V, d, phi, sign, self.cutoff(V, d, beta_max),
                                **self._kw())

    def two_mode(self, V, d, sign, phi=math.pi, beta_max=0.0):
        return fock_two_mode(V, d, sign, self.cutoff(V, d, beta_max), phi,
                             **self._kw())

    def micro_macro(self, V, d, phi, beta_max=0.0, alpha_max=0.0):
        qubit_dim = self.cutoff(1, 1, alpha_max) + 1
        return oracle_micro_macro(V, d, phi, self.cutoff(V, d, beta_max),
                                  max(qubit_dim, 2), **self._kw())

    def wigner(self, rho, beta):
        return displaced_parity_wigner(rho, beta, **self._kw())

    def bell(self, rho, settings):
        return oracle_bell(rho, settings, **self._kw())

    def bs_and_loss(self, rho, transmittance=None, gamma_t=0.0):
        return oracle_bs_and_loss(rho, transmittance, gamma_t, self.tail_tolerance)

    def check(self, seed=7, points=20):
        """Compare closed-form values with the oracle over the small-parameter suite."""
        rng = np.random.default_rng(seed)
        rows = []
        for V in (1, 3, 5):
            for d in (0, 1, 2):
                rows += self._check_single(
                    "thermal V=%g d=%g" % (V, d), displaced_thermal(V, d),
                    self.thermal(V, d, 2), _disc(rng, points, 2))
                for phi in (math.pi / 2, math.pi):
                    for sign in (1, -1):
                        try:
                            state = thermal_superposition(V, d, phi, sign)
                        except ZeroTrace:
                            continue
                        case = "superposition V=%g d=%g phi=%.4f %s" % (
                            V, d, phi, sign_label(sign))
                        rho = self.superposition(V, d, phi, sign, 2)
                        rows += self._check_single(case, state, rho,
                                                   _disc(rng, points, 2))
        for V in (1, 3, 5):
            for d in (0, 1, 2):
                for sign in (1, -1):
                    try:
                        state = two_mode_thermal_entangled(V, d, sign)
                    except ZeroTrace:
                        continue
                    case = "two-mode V=%g d=%g %s" % (V, d, sign_label(sign))
                    rows += self._check_pair(
                        case, state, self.two_mode(V, d, sign, beta_max=1), rng)
        lossy = self.bs_and_loss(self.superposition(3, 1, math.pi, -1, 1), 0.5, 0.1)
        rows += self._check_pair("lossy split V=3 d=1 -",
                                 lossy_split_superposition(3, 1, '-', 0.1), lossy, rng)

        state = micro_macro_entangled(3, 1, math.pi / 2)
        rho = self.micro_macro(3, 1, math.pi / 2, beta_max=1, alpha_max=1)
        pts = _disc(rng, 2 * 5, 1).reshape(5, 2)
        rows.append(_worst("micro-macro V=3 d=1 phi=1.5708", 'wigner',
                           wigner_eval(state, pts),
                           [self.wigner(rho, p) for p in pts], 1e-6))

        closed = probability_report(5, 1)['P-_trace']
        rows.append(CheckRow("superposition V=5 d=1 phi=3.1416 -", 'probability',
                             closed, self.superposition(5, 1, math.pi, -1).probability,
                             1e-8))
        failed = [row for row in rows if not row.ok]
        for row in failed:
            self.log.error("Oracle mismatch for %s %s: %.12g vs %.12g",
                           row.case, row.quantity, row.closed_form, row.oracle)
        self.log.info("Oracle suite: %d checks, %d mismatches", len(rows), len(failed))
        return rows

    def _check_single(self, case, state, rho, pts):
        rho.check_physical()
        return [
            _worst(case, 'wigner', wigner_eval(state, pts),
                   [self.wigner(rho, b) for b in pts], 1e-6),
            CheckRow(case, 'purity', purity(state), rho.purity(), 1e-6),
            CheckRow(case, 'mean_photon', mean_photon(state, 0), rho.mean_photon(0),
                     1e-6),
        ]

    def _check_pair(self, case, state, rho, rng, points=5, settings=3):
        rho.check_physical()
        pts = _disc(rng, 2 * points, 1).reshape(points, 2)
        rows = [_worst(case, 'wigner', wigner_eval(state, pts),
                       [self.wigner(rho, p) for p in pts], 1e-6),
                CheckRow(case, 'purity', purity(state), rho.purity(), 1e-6)]
        for mode in (0, 1):
            rows.append(CheckRow(case, 'mean_photon[%d]' % mode,
                                 mean_photon(state, mode), rho.mean_photon(mode),
                                 1e-6))
        choices = _disc(rng, 4 * settings, 0.5).reshape(settings, 4)
        rows.append(_worst(case, 'bell', [bell_chsh(state, *s) for s in choices],
                           [self.bell(rho, s) for s in choices], 1e-4))
        return rows


@dataclass(frozen=True)
class CheckRow:
    case: str
    quantity: str
    closed_form: float
    oracle: float
    tolerance: float

    @property
    def ok(self):
        return abs(self.closed_form - self.oracle) <= self.tolerance

    def as_row(self):
        return dict(case=self.case, quantity=self.quantity,
                    closed_form=self.closed_form, oracle=self.oracle,
                    tolerance=self.tolerance, ok=self.ok)


def _disc(rng, n, radius):
    """``n`` points uniformly distributed on the disc ``|beta| <= radius``."""
    r = radius * np.sqrt(rng.uniform(size=n))
    return r * np.exp(2j * math.pi * rng.uniform(size=n))


def _worst(case, quantity, closed, oracle, tolerance):
    closed, oracle = np.asarray(closed, dtype=float), np.asarray(oracle, dtype=float)
    k = int(np.argmax(abs(closed - oracle)))
    return CheckRow(case, quantity, float(closed[k]), float(oracle[k]), tolerance)


def oracle_check(oracle=None, seed=7, points=20):
    """Run the small-parameter agreement suite; returns ``CheckRow`` objects."""
    oracle = oracle or FockOracle()
    return oracle.check(seed=seed, points=points)
