"""Physical quantities measured on a state.

Quadrature marginals are obtained in closed form from the compiled Gaussian
terms: each term contributes
``sqrt(pi/h) exp(-h u^2 + (sigma + tau) u + kappa - (sigma - tau)^2 / 4h)``
with ``u`` the quadrature coordinate relative to the term's origin.
"""
import math
from dataclasses import dataclass

import numpy as np
import pyarrow as pa
from scipy.integrate import trapezoid
from scipy.signal import find_peaks
from traitlets.log import get_logger

from .errors import (InvalidParameter, NoFringes, NonConvergent,
                     ResolutionTooCoarse, UnphysicalState)
from .gaussian import (as_points, partial_trace, phase_rotate, purity,
                       wigner_eval)
from .utils import checked_real, format_float, sum_exp, write_csv


__all__ = ('MarginalCurve', 'VisibilityResult', 'marginal', 'marginal_moments',
           'marginal_peaks', 'visibility', 'fringe_spacing', 'fringe_period',
           'fringe_axis', 'fringe_marginal',
           'parity_correlation', 'bell_chsh', 'linear_entropy')

#: Samples per expected fringe period on automatic visibility grids.
SAMPLES_PER_FRINGE = 40
DEFAULT_RESOLUTION = 4001
_CHUNK = 65536


@dataclass(frozen=True, eq=False)
class MarginalCurve:
    """Probability density of one quadrature, ``x cos(theta) + p sin(theta)``."""
    theta: float
    mode: int
    coordinates: np.ndarray
    density: np.ndarray

    def __len__(self):
        return len(self.coordinates)

    @property
    def spacing(self):
        return (self.coordinates[-1] - self.coordinates[0]) / (len(self) - 1)

    def mass(self):
        return float(trapezoid(self.density, self.coordinates))

    def to_table(self):
        return pa.table({
            'coordinate': [format_float(x) for x in self.coordinates],
            'density': [format_float(x) for x in self.density],
        })

    def write_csv(self, path):
        write_csv(path, {'coordinate': self.coordinates, 'density': self.density})


@dataclass(frozen=True)
class VisibilityResult:
    v: float
    i_max: float
    i_min: float
    max_position: float
    min_position: float


def _single_mode(state, mode, theta):
    """The reduced state of ``mode`` rotated so the quadrature becomes ``x``."""
    if state.num_modes > 1 or state.has_qubit:
        state = partial_trace(state, [mode])
    elif mode != 0:
        raise InvalidParameter("mode %r out of range for a one-mode state" % (mode,))
    if theta:
        state = phase_rotate(state, 0, -theta)
    return state


class _MarginalTerms:
    """Per-term coefficients of the closed-form x-marginal."""

    def __init__(self, state):
        compiled = state.compiled
        self.h = compiled.H[:, 0, 0]
        if np.any(self.h.real <= 0):
            raise NonConvergent("quadrature marginal of a non-normalizable term")
        sigma, tau = compiled.sigma[:, 0], compiled.tau[:, 0]
        self.centre = compiled.origin[:, 0].real
        self.linear = sigma + tau
        self.const = (compiled.kappa - (sigma - tau) ** 2 / (4 * self.h)
                      + 0.5 * (math.log(math.pi) - np.log(self.h)))

    @property
    def oscillating(self):
        """Terms whose marginal carries interference fringes."""
        imag = abs(self.h.imag) + abs(self.linear.imag)
        return imag > 1e-12 * (abs(self.h) + abs(self.linear))

    def log_values(self, x, mask=slice(None)):
        u = x[None, :] - self.centre[mask, None]
        return (-self.h[mask, None] * u ** 2 + self.linear[mask, None] * u
                + self.const[mask, None])

    def evaluate(self, x, mask=slice(None)):
        logs = self.log_values(x, mask)
        values = sum_exp(logs, axis=0)
        scale = sum_exp(logs.real, axis=0).real
        return checked_real(values, scale, "quadrature marginal")

    def moments(self):
        """Term-wise (log mass, mean, second moment) of the marginal."""
        shift = self.linear / (2 * self.h)
        log_mass = self.const + self.linear ** 2 / (4 * self.h)
        mean = shift + self.centre
        second = 1 / (2 * self.h) + mean ** 2
        return log_mass, mean, second

    def lobes(self):
        """Centre and width of each term's Gaussian envelope."""
        width = np.sqrt(1 / (2 * self.h.real))
        centre = self.centre + (self.linear / (2 * self.h)).real
        return centre, width


def marginal_moments(state, mode=0, theta=0.0):
    """Closed-form mean and variance of a quadrature."""
    terms = _MarginalTerms(_single_mode(state, mode, theta))
    log_mass, mean, second = terms.moments()
    mass = sum_exp(log_mass)
    m1 = sum_exp(log_mass, multipliers=mean)
    m2 = sum_exp(log_mass, multipliers=second)
    mean = float(np.real(m1 / mass))
    variance = float(np.real(m2 / mass)) - mean ** 2
    return mean, max(variance, 0.0)


def _default_window(terms, width=6.0):
    centre, std = terms.lobes()
    return float(np.min(centre - width * std)), float(np.max(centre + width * std))


def marginal(state, mode=0, theta=0.0, window=None, resolution=None):
    """Quadrature marginal on a uniform grid.

    The default window spans six envelope widths beyond the outermost lobe.
    """
    terms = _MarginalTerms(_single_mode(state, mode, theta))
    lo, hi = window if window is not None else _default_window(terms)
    n = int(resolution or DEFAULT_RESOLUTION)
    if n < 3 or not hi > lo:
        raise ResolutionTooCoarse("invalid marginal grid [%g, %g] with %d points"
                                  % (lo, hi, n))
    x = np.linspace(lo, hi, n)
    density = np.concatenate([terms.evaluate(x[i:i + _CHUNK])
                              for i in range(0, n, _CHUNK)])
    return MarginalCurve(float(theta), int(mode), x, np.clip(density, 0, None))


def fringe_period(state):
    """Expected fringe spacing ``pi / (2 |d| |sin(phi/2)|)`` or ``None``."""
    params = state.params
    if 'phi' not in params or 'd' not in params:
        return None
    scale = abs(params['d']) * abs(math.sin(params['phi'] / 2))
    if 'transmittance' in params:
        scale *= math.sqrt(params['transmittance'])
    if scale == 0:
        return None
    return math.pi / (2 * scale)


def fringe_axis(state):
    """Quadrature angle orthogonal to the separation of the two lobes.

    The lobes sit at ``d`` and ``d e^{i phi}``; their fringes show up in the
    marginal at angle ``arg(d) + phi/2`` (the p quadrature when ``phi = pi``).
    """
    params = state.params
    d = complex(params.get('d', 0))
    return math.atan2(d.imag, d.real) + params.get('phi', math.pi) / 2


def fringe_marginal(state, mode=0, theta=None, window=None, resolution=None,
                    fringe=None):
    """Marginal on a grid fine enough to resolve the interference fringes.

    Without a window the grid covers three standard deviations around the
    mean, at most ten fringe periods each way.
    """
    fringe = fringe_period(state) if fringe is None else fringe
    theta = fringe_axis(state) if theta is None else theta
    mean, variance = marginal_moments(state, mode, theta)
    if window is None:
        half = 3 * math.sqrt(variance)
        if fringe is not None:
            half = min(half, 10 * fringe)
        window = (mean - half, mean + half)
    lo, hi = window
    if resolution is None:
        if fringe is None:
            resolution = DEFAULT_RESOLUTION
        else:
            resolution = int(math.ceil((hi - lo) / fringe * SAMPLES_PER_FRINGE)) + 1
        resolution += (resolution + 1) % 2
    elif fringe is not None:
        spacing = (hi - lo) / (resolution - 1)
        if spacing > fringe / SAMPLES_PER_FRINGE:
            raise ResolutionTooCoarse(
                "grid spacing %g does not resolve fringes of period %g"
                % (spacing, fringe))
    return marginal(state, mode, theta, (lo, hi), resolution)


def _parabolic(y, i):
    """Vertex of the parabola through ``y[i-1], y[i], y[i+1]``: (offset, value)."""
    if i <= 0 or i >= len(y) - 1:
        return 0.0, float(y[i])
    a, b, c = y[i - 1], y[i], y[i + 1]
    curvature = a - 2 * b + c
    if curvature == 0:
        return 0.0, float(b)
    offset = 0.5 * (a - c) / curvature
    return float(offset), float(b - 0.25 * (a - c) * offset)


def visibility(state, mode=0, theta=None, window=None, resolution=None,
               fringe=None):
    """Fringe contrast ``(I_max - I_min)/(I_max + I_min)`` around the global maximum.

    ``I_min`` is the deepest point between the maxima adjacent to the global
    maximum; a curve without such neighbours has no fringes and ``v = 0``.
    """
    curve = fringe_marginal(state, mode, theta, window, resolution, fringe)
    y, x = curve.density, curve.coordinates
    g = int(np.argmax(y))
    offset, i_max = _parabolic(y, g)
    top = float(x[g] + offset * curve.spacing)
    peaks, _ = find_peaks(y, prominence=1e-9 * y[g])
    left = peaks[peaks < g]
    right = peaks[peaks > g]
    if len(left) == 0 and len(right) == 0:
        return VisibilityResult(0.0, i_max, i_max, top, top)
    lo = left[-1] if len(left) else g
    hi = right[0] if len(right) else g
    k = lo + int(np.argmin(y[lo:hi + 1]))
    offset, i_min = _parabolic(y, k)
    i_min = max(i_min, 0.0)
    v = (i_max - i_min) / (i_max + i_min)
    get_logger().debug("visibility %.6g (I_max %.6g, I_min %.6g)", v, i_max, i_min)
    return VisibilityResult(float(v), i_max, i_min, top,
                            float(x[k] + offset * curve.spacing))


def fringe_spacing(state, mode=0, theta=None, window=None, resolution=None,
                   fringe=None):
    """Mean distance between neighbouring fringe maxima.

    Measured on the interference terms alone, as twice the mean gap between
    their zero crossings; the envelope does not move those.  At least three
    fringe maxima must be resolved.
    """
    theta = fringe_axis(state) if theta is None else theta
    curve = fringe_marginal(state, mode, theta, window, resolution, fringe)
    terms = _MarginalTerms(_single_mode(state, mode, theta))
    mask = terms.oscillating
    if not mask.any():
        raise NoFringes("the marginal has no interference terms")
    x = curve.coordinates
    y = np.concatenate([terms.evaluate(x[i:i + _CHUNK], mask)
                        for i in range(0, len(x), _CHUNK)])
    extrema, _ = find_peaks(abs(y), prominence=0.05 * abs(y).max())
    if len(extrema) < 5:
        raise NoFringes("found %d fringe extrema, need at least 5" % len(extrema))
    lo, hi = extrema[0], extrema[-1]
    k = lo + np.nonzero(np.signbit(y[lo:hi]) != np.signbit(y[lo + 1:hi + 1]))[0]
    zeros = x[k] - y[k] * (x[k + 1] - x[k]) / (y[k + 1] - y[k])
    return float(2 * (zeros[-1] - zeros[0]) / (len(zeros) - 1))


def marginal_peaks(curve, prominence=0.1):
    """Positions of the lobes of a marginal, refined between grid points."""
    y = curve.density
    peaks, _ = find_peaks(y, prominence=prominence * y.max())
    if len(peaks) == 0:
        peaks = [int(np.argmax(y))]
    return [float(curve.coordinates[i] + _parabolic(y, i)[0] * curve.spacing)
            for i in peaks]


def parity_correlation(state, points):
    """Displaced parity expectation ``(pi/2)^M W``."""
    values = np.asarray(wigner_eval(state, points))
    values = (math.pi / 2) ** state.total_modes * values
    if np.any(abs(values) > 1 + 1e-8):
        raise UnphysicalState("parity correlation %g exceeds one"
                              % float(np.max(abs(values))))
    return float(values) if values.ndim == 0 else values


def bell_chsh(state, a, a_prime, b, b_prime):
    """``(pi^2/4)[W(a,b) + W(a,b') + W(a',b) - W(a',b')]`` for a two-mode state."""
    points, _ = as_points([[a, b], [a, b_prime], [a_prime, b], [a_prime, b_prime]],
                          2)
    W = wigner_eval(state, points)
    return float(math.pi ** 2 / 4 * (W[0] + W[1] + W[2] - W[3]))


def linear_entropy(state):
    """``1 - Tr rho^2``."""
    return 1 - purity(state)
