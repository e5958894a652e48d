import json
import math
from contextlib import contextmanager

import numpy as np
import pyarrow as pa
from pyarrow import csv

from .errors import (BadSign, BadTransmittance, BadVariance, ImaginaryResidual,
                     NegativeTime, NonConvergent)


_SIGNS = {'+': 1, 'plus': 1, '1': 1, '+1': 1,
          '-': -1, 'minus': -1, '-1': -1}


def parse_sign(sign):
    """Normalize a measurement sign to ``+1`` or ``-1``."""
    if isinstance(sign, (int, np.integer)) and sign in (1, -1):
        return int(sign)
    try:
        return _SIGNS[str(sign).strip().lower()]
    except KeyError:
        raise BadSign("sign must be '+' or '-', got %r" % (sign,))


def sign_label(sign):
    return '+' if parse_sign(sign) > 0 else '-'


def check_variance(V):
    if not math.isfinite(V) or V < 1:
        raise BadVariance("variance V must be >= 1, got %r" % (V,))
    return float(V)


def check_transmittance(T):
    if not math.isfinite(T) or T < 0 or T > 1:
        raise BadTransmittance("transmittance must lie in [0, 1], got %r" % (T,))
    return float(T)


def check_time(gamma_t):
    if not math.isfinite(gamma_t) or gamma_t < 0:
        raise NegativeTime("gamma_t must be >= 0, got %r" % (gamma_t,))
    return float(gamma_t)


@contextmanager
def linalg_errors(what):
    try:
        with np.errstate(over='raise', invalid='raise', divide='raise'):
            yield
    except np.linalg.LinAlgError as exc:
        raise NonConvergent("Singular Gaussian form in %s: %s" % (what, exc))
    except FloatingPointError as exc:
        raise NonConvergent("Floating point failure in %s: %s" % (what, exc))


def sum_exp(logs, axis=0, multipliers=None):
    """``sum(multipliers * exp(logs))`` along ``axis`` without overflow.

    ``logs`` may be complex; the largest real part is factored out first.
    """
    logs = np.asarray(logs, dtype=complex)
    if logs.shape[axis] == 0:
        shape = list(logs.shape)
        del shape[axis]
        return np.zeros(shape, dtype=complex)
    shift = np.max(logs.real, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    terms = np.exp(logs - shift)
    if multipliers is not None:
        terms = terms * multipliers
    return np.exp(np.squeeze(shift, axis=axis)) * terms.sum(axis=axis)


def checked_real(values, scale, what):
    """Real part of ``values``; the imaginary part must be rounding noise
    relative to the value or to ``scale``, the sum of the magnitudes."""
    values = np.asarray(values)
    bound = 1e-9 * abs(values.real) + 1e-12 * np.maximum(1.0, scale)
    if np.any(abs(values.imag) > bound):
        worst = np.max(abs(values.imag))
        raise ImaginaryResidual("%s has an imaginary residual of %g" % (what, worst))
    return values.real


def format_float(x):
    """Render a number with 12 significant digits, independent of locale."""
    x = float(x)
    if math.isnan(x):
        return 'nan'
    if math.isinf(x):
        return 'inf' if x > 0 else '-inf'
    return '%.11e' % x


def _format_cell(value):
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def write_csv(path, columns):
    """Write an ordered mapping of ``name -> sequence`` to ``path`` as CSV."""
    table = pa.table({name: pa.array([_format_cell(v) for v in values],
                                     type=pa.string())
                      for name, values in columns.items()})
    options = csv.WriteOptions(include_header=True, quoting_style='none')
    csv.write_csv(table, path, write_options=options)
    return path


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return format_float(value)
        return float(format_float(value))
    if isinstance(value, complex):
        return [_jsonable(value.real), _jsonable(value.imag)]
    return value


def write_json(path, payload):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
        f.write('\n')
    return path
