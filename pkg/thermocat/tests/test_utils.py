import math

import numpy as np
import pytest

from thermocat.errors import BadSign, ImaginaryResidual, NonConvergent
from thermocat.utils import (checked_real, format_float, linalg_errors, parse_sign,
                             sum_exp)


def test_sum_exp_large_exponents():
    logs = np.array([700.0, 700.0 + math.log(3)])
    assert sum_exp(logs).real / math.exp(700) == pytest.approx(4, rel=1e-12)
    assert sum_exp(logs).imag == 0


def test_sum_exp_complex_and_multipliers():
    logs = np.array([[0.0, 1j * math.pi], [math.log(2), math.log(2)]])
    np.testing.assert_allclose(sum_exp(logs, axis=1), [0, 4], atol=1e-14)
    np.testing.assert_allclose(sum_exp(logs, axis=0, multipliers=[[1, 1], [-1, 1]]),
                               [-1, 1], atol=1e-14)


def test_sum_exp_of_nothing():
    assert sum_exp(np.zeros((3, 0)), axis=1).shape == (3,)
    assert np.all(sum_exp(np.zeros((3, 0)), axis=1) == 0)
    assert sum_exp(np.array([-np.inf, -np.inf])) == 0


def test_checked_real():
    values = np.array([1 + 1e-14j, -2 + 0j])
    np.testing.assert_array_equal(checked_real(values, 3, "value"), [1, -2])
    with pytest.raises(ImaginaryResidual):
        checked_real(np.array([1 + 1e-3j]), 1, "value")


def test_checked_real_scales_with_magnitudes():
    # a cancelled sum may carry rounding noise from its large terms
    assert checked_real(np.array(1e-6j), 1e8, "trace") == 0
    with pytest.raises(ImaginaryResidual):
        checked_real(np.array(1e-6j), 1, "trace")


def test_parse_sign():
    assert parse_sign('+') == parse_sign('plus') == parse_sign(1) == 1
    assert parse_sign(' - ') == parse_sign(-1) == -1
    with pytest.raises(BadSign):
        parse_sign(0)


def test_format_float():
    assert format_float(0.13) == '1.30000000000e-01'
    assert format_float(float('inf')) == 'inf'
    assert format_float(float('nan')) == 'nan'


def test_linalg_errors():
    with pytest.raises(NonConvergent):
        with linalg_errors("test"):
            np.linalg.solve(np.zeros((2, 2)), np.ones(2))
