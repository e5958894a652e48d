import math

import numpy as np
import pytest

from thermocat.errors import (InvalidParameter, NoFringes, ResolutionTooCoarse,
                              UnphysicalState)
from thermocat.gaussian import add_vacuum_mode, apply_beam_splitter, wigner_eval
from thermocat.observables import (bell_chsh, fringe_axis, fringe_period,
                                   fringe_spacing, linear_entropy, marginal,
                                   marginal_moments, marginal_peaks,
                                   parity_correlation, visibility)
from thermocat.states import (displaced_thermal, pure_cat, thermal_superposition,
                              two_mode_thermal_entangled)

from .conftest import line_integral


def test_thermal_marginal():
    V, d = 3, 1 + 0.5j
    curve = marginal(displaced_thermal(V, d))
    expected = (math.sqrt(2 / (math.pi * V))
                * np.exp(-2 * (curve.coordinates - d.real) ** 2 / V))
    np.testing.assert_allclose(curve.density, expected, atol=1e-12)
    assert curve.mass() == pytest.approx(1, abs=1e-6)
    assert len(curve) == 4001


def test_thermal_moments():
    mean, variance = marginal_moments(displaced_thermal(3, 1 + 2j))
    assert mean == pytest.approx(1)
    assert variance == pytest.approx(0.75)
    mean, _ = marginal_moments(displaced_thermal(3, 1 + 2j), theta=math.pi / 2)
    assert mean == pytest.approx(2)


def test_marginal_matches_wigner():
    state = thermal_superposition(3, 1, math.pi / 2, '-')
    xs = np.linspace(-1.3, 1.1, 4)
    curve = marginal(state, window=(xs[0], xs[-1]), resolution=4)
    for x, density in zip(xs, curve.density):
        integral = line_integral(lambda p: wigner_eval(state, complex(x, p)), -10, 10)
        assert density == pytest.approx(integral, abs=1e-6)


def test_rotated_marginal_mass():
    state = thermal_superposition(100, 100, math.pi, '-')
    for theta in (0, 0.3, -1.1):
        assert marginal(state, theta=theta).mass() == pytest.approx(1, abs=1e-6)


def test_marginal_rejects_bad_input():
    with pytest.raises(InvalidParameter):
        marginal(displaced_thermal(3), mode=1)
    with pytest.raises(ResolutionTooCoarse):
        marginal(displaced_thermal(3), window=(1, -1))


def test_lobes_at_plus_minus_d():
    state = thermal_superposition(100, 100, math.pi, '-')
    curve = marginal(state)
    peaks = marginal_peaks(curve)
    assert len(peaks) == 2
    assert peaks[0] == pytest.approx(-100, abs=curve.spacing)
    assert peaks[1] == pytest.approx(100, abs=curve.spacing)


def test_fringe_axis_and_period():
    state = thermal_superposition(100, 100, math.pi, '-')
    assert fringe_axis(state) == pytest.approx(math.pi / 2)
    assert fringe_period(state) == pytest.approx(math.pi / 200)
    assert fringe_period(displaced_thermal(3, 1)) is None


@pytest.mark.parametrize('V, d', [(100, 100), (1000, 300)])
def test_visibility_is_one(V, d):
    result = visibility(thermal_superposition(V, d, math.pi, '-'))
    assert result.v >= 0.999
    assert result.i_min < 1e-3 * result.i_max


@pytest.mark.parametrize('V', [1, 5, 100, 1000])
def test_visibility_independent_of_V(V):
    state = thermal_superposition(V, 3 * math.sqrt(V), math.pi, '-')
    assert visibility(state).v >= 0.999


def test_weak_interaction_visibility():
    state = thermal_superposition(5, 2000, math.pi / 1000, '-')
    assert fringe_axis(state) == pytest.approx(math.pi / 2000)
    assert visibility(state).v >= 0.999


def test_no_fringes():
    state = displaced_thermal(3, 1)
    assert visibility(state, theta=0).v == 0
    with pytest.raises(NoFringes):
        fringe_spacing(state, theta=0)


def test_coarse_grid_is_rejected():
    state = thermal_superposition(100, 100, math.pi, '-')
    with pytest.raises(ResolutionTooCoarse):
        visibility(state, window=(-1, 1), resolution=101)


@pytest.mark.parametrize('V', [1, 100, 1000])
def test_fringe_spacing_depends_only_on_d(V):
    state = thermal_superposition(V, 100, math.pi, '-')
    assert fringe_spacing(state) == pytest.approx(math.pi / 200, rel=1e-3)


def test_cat_fringes():
    state = pure_cat(3, '+')
    assert visibility(state).v >= 0.999
    assert fringe_spacing(state) == pytest.approx(math.pi / 6, rel=1e-3)


def test_parity_correlation():
    assert parity_correlation(displaced_thermal(1), 0) == pytest.approx(1)
    odd = pure_cat(2, '-')
    assert parity_correlation(odd, 0) == pytest.approx(-1, abs=1e-10)
    values = parity_correlation(thermal_superposition(3, 1, math.pi, '-'),
                                np.linspace(-2, 2, 9))
    assert np.all(abs(values) <= 1 + 1e-8)
    assert values[4] == pytest.approx(-1, abs=1e-10)


def test_linear_entropy():
    assert linear_entropy(displaced_thermal(3)) == pytest.approx(2 / 3)
    assert linear_entropy(displaced_thermal(10)) == pytest.approx(0.9)
    assert linear_entropy(pure_cat(2, '+')) == pytest.approx(0, abs=1e-10)


def test_separable_state_obeys_chsh():
    split = apply_beam_splitter(add_vacuum_mode(displaced_thermal(3, 1)), 0, 1)
    rng = np.random.default_rng(3)
    for _ in range(20):
        settings = rng.normal(size=4) + 1j * rng.normal(size=4)
        assert abs(bell_chsh(split, *settings)) <= 2 + 1e-9


def test_chsh_is_bounded():
    state = two_mode_thermal_entangled(1, 2, '+')
    rng = np.random.default_rng(4)
    for _ in range(20):
        settings = 0.5 * (rng.normal(size=4) + 1j * rng.normal(size=4))
        assert abs(bell_chsh(state, *settings)) <= 2 * math.sqrt(2) + 1e-9


def test_parity_correlation_flags_corruption():
    state = displaced_thermal(1)
    corrupt = state.map_terms(lambda t: t._replace(log_weight=t.log_weight + 1))
    with pytest.raises(UnphysicalState):
        parity_correlation(corrupt, 0)
