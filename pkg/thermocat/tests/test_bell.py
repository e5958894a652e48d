import math

import numpy as np
import pytest

from thermocat.bell import (CIRELSON, DECOHERENCE_CASES, SPLIT_ASYMPTOTE,
                            BellOptimizer, BellResult, BellScan, SurvivalSearch,
                            bell_curve_vs_d, bell_curve_vs_V_split, maximize_bell)
from thermocat.errors import NoViolationAtZero, UnphysicalState
from thermocat.gaussian import add_vacuum_mode, apply_beam_splitter, apply_loss
from thermocat.observables import bell_chsh
from thermocat.oracle import FockOracle
from thermocat.states import (bs_split_superposition, displaced_thermal,
                              lossy_split_cat, lossy_split_superposition,
                              thermal_superposition, two_mode_thermal_entangled)


def separable_state():
    return apply_beam_splitter(add_vacuum_mode(displaced_thermal(3, 1)), 0, 1)


def test_seeds_are_deterministic():
    state = two_mode_thermal_entangled(3, 1, '+')
    a = BellOptimizer(restarts=12).seeds(state)
    b = BellOptimizer(restarts=12).seeds(state)
    assert len(a) == 12
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


def test_scales_follow_the_state():
    opt = BellOptimizer()
    scales, d = opt.scales(two_mode_thermal_entangled(100, 10, '+'))
    assert scales == pytest.approx([1 / 40, 0.1])
    scales, d = opt.scales(bs_split_superposition(100, 0, math.pi, '+'))
    assert d == 0
    assert scales == pytest.approx([0.1])


def test_requires_two_modes():
    with pytest.raises(UnphysicalState):
        maximize_bell(thermal_superposition(3, 1, math.pi, '-'))


def test_separable_state_never_violates():
    result = maximize_bell(separable_state(), optimizer=BellOptimizer(restarts=8))
    assert result.b_max <= 2 + 1e-6
    assert result.restarts_used == 8


def test_result_matches_reported_settings():
    state = two_mode_thermal_entangled(3, 1, '+')
    result = BellOptimizer(restarts=8).maximize(state)
    assert result.b_max == pytest.approx(abs(bell_chsh(state, *result.settings)),
                                         abs=1e-10)
    assert result.b_max <= CIRELSON + 1e-6
    row = result.as_row()
    assert row['b_max'] == result.b_max
    assert set(row) >= {'a_re', 'a_im', 'ap_re', 'bp_im', 'converged'}


def test_threads_do_not_change_the_result():
    state = two_mode_thermal_entangled(3, 1, '+')
    serial = BellOptimizer(restarts=6).maximize(state)
    threaded = BellOptimizer(restarts=6, threads=3).maximize(state)
    assert threaded.b_max == serial.b_max
    assert threaded.settings == serial.settings


@pytest.mark.parametrize('make', [
    lambda: two_mode_thermal_entangled(3, 1, '+'),
    lambda: two_mode_thermal_entangled(1, 3, '+'),
    lambda: bs_split_superposition(10, 0, math.pi, '+'),
])
def test_full_search_does_not_beat_symmetric_optimum(make):
    state = make()
    full = BellOptimizer(restarts=16).maximize(state)
    restricted = BellOptimizer(restarts=16).maximize(state, symmetric=True)
    assert full.b_max <= restricted.b_max + 1e-8


def test_seeds_follow_the_loss():
    state = lossy_split_cat(2.2, '+', 0.13)
    opt = BellOptimizer()
    _, d = opt.scales(state)
    assert d == pytest.approx(2.2 * math.sqrt(0.5) * math.exp(-0.065))
    seeds = opt.seeds(state)
    assert len(seeds) == opt.restarts
    far = np.array([d, 0, d, 3, d, 0, d, 0])
    assert any(np.allclose(x, far) for x in seeds)


def test_random_tail_is_reserved():
    state = two_mode_thermal_entangled(3, 1, '+')
    lattice = BellOptimizer(restarts=200).seeds(state)
    seeds = BellOptimizer(restarts=16).seeds(state)
    assert len(seeds) == 16
    for x, y in zip(seeds[:14], lattice[:14]):
        np.testing.assert_array_equal(x, y)
    assert not np.array_equal(seeds[14], lattice[14])


def test_warm_start_never_loses():
    state = two_mode_thermal_entangled(3, 1, '+')
    restricted = BellOptimizer(restarts=8).maximize(state, symmetric=True)
    full = BellOptimizer(restarts=8).maximize(state,
                                              warm_start=[restricted.settings])
    assert full.b_max >= restricted.b_max - 1e-6


def test_scan_bookkeeping():
    scan = BellScan('d')
    scan.add(0.0, BellResult(2.1, (0, 0, 0, 0), 4, True, 100))
    scan.add(1.0, BellResult(2.3, (0, 0, 0, 0), 4, True, 100))
    scan.add(2.0, excluded=True)
    np.testing.assert_array_equal(scan.values[:2], [2.1, 2.3])
    assert np.isnan(scan.values[2])
    assert scan.monotone
    assert scan.converged
    columns = scan.columns()
    assert columns['d'] == [0.0, 1.0, 2.0]


@pytest.mark.slow
def test_entangled_coherent_state():
    result = maximize_bell(two_mode_thermal_entangled(1, 3, '+'))
    assert 2.7 <= result.b_max <= CIRELSON + 1e-6


@pytest.mark.slow
def test_violation_grows_with_d():
    scan = bell_curve_vs_d(100, [10, 30, 100, 300], '+')
    values = scan.values
    assert all(b <= CIRELSON + 1e-6 for b in values)
    assert values[2] >= 2.5
    assert scan.monotone


@pytest.mark.slow
def test_split_asymptote():
    scan = bell_curve_vs_V_split([1, 10, 100, 1000])
    assert scan.rows[0]['excluded']
    values = list(scan.values[1:])
    assert values == sorted(values)
    assert values[-1] <= SPLIT_ASYMPTOTE + 1e-3
    assert values[-1] == pytest.approx(SPLIT_ASYMPTOTE, abs=0.05)


def test_no_violation_without_loss():
    search = SurvivalSearch(optimizer=BellOptimizer(restarts=4))
    with pytest.raises(NoViolationAtZero):
        search.search(lambda gt: apply_loss(apply_loss(separable_state(), 0, gt),
                                            1, gt))


@pytest.mark.slow
@pytest.mark.parametrize('name', sorted(DECOHERENCE_CASES))
def test_survival_times(name):
    case = DECOHERENCE_CASES[name]
    result = SurvivalSearch().search(case.factory)
    assert result.gamma_t == pytest.approx(case.expected, abs=case.tolerance)
    assert result.bracketed
    assert 3 <= case.quoted / result.gamma_t <= 5


@pytest.mark.slow
def test_survival_confirmed_in_fock_space():
    early = BellOptimizer().maximize(lossy_split_superposition(3, 1, '-', 0.02))
    late = BellOptimizer().maximize(lossy_split_superposition(3, 1, '-', 0.13))
    assert early.b_max > 2 > late.b_max
    oracle = FockOracle()
    beta_max = max(abs(s) for s in early.settings) + 0.25
    ideal = oracle.superposition(3, 1, math.pi, '-', beta_max)
    for gamma_t in (0.02, 0.13):
        closed = bell_chsh(lossy_split_superposition(3, 1, '-', gamma_t),
                           *early.settings)
        rho = oracle.bs_and_loss(ideal, 0.5, gamma_t)
        assert oracle.bell(rho, early.settings) == pytest.approx(closed, abs=1e-4)
        assert (abs(closed) > 2) == (gamma_t < 0.1)


@pytest.mark.slow
def test_lossy_cat_keeps_the_classical_optimum():
    result = BellOptimizer().maximize(lossy_split_cat(2.2, '+', 0.13))
    assert result.b_max >= 0.95
