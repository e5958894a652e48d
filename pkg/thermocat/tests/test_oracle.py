import math

import numpy as np
import pytest

from thermocat.errors import CutoffTooSmall, ZeroTrace
from thermocat.gaussian import mean_photon, purity, wigner_eval
from thermocat.observables import bell_chsh
from thermocat.oracle import (FockOperator, FockOracle, beam_splitter_unitary,
                              cutoff_selector, displaced_parity_wigner,
                              fock_thermal, fock_two_mode, loss_kraus,
                              oracle_bs_and_loss, oracle_check, parity,
                              projector_states, rotation)
from thermocat.states import (displaced_thermal, lossy_split_superposition,
                              micro_macro_entangled, probability_report,
                              thermal_superposition, two_mode_thermal_entangled)

from .conftest import random_points


@pytest.fixture
def oracle():
    return FockOracle()


def test_cutoff_selector():
    N = cutoff_selector(3, 1, beta_max=2)
    assert 10 < N < 100
    rho = fock_thermal(3, 1, N)
    assert rho.tail_mass < 1e-8
    assert cutoff_selector(1, 0) <= cutoff_selector(1, 2)
    with pytest.raises(CutoffTooSmall):
        cutoff_selector(1000, 300, max_cutoff=50)
    with pytest.raises(CutoffTooSmall):
        cutoff_selector(1000, 300)


def test_cutoff_tail_counts_all_missing_mass():
    # mean photon number 25: a cutoff of 10 keeps almost none of it
    with pytest.raises(CutoffTooSmall):
        cutoff_selector(1, 5, max_cutoff=10)
    N = cutoff_selector(1, 5)
    assert N > 25
    assert fock_thermal(1, 5, N).tail_mass < 1e-8


def test_thermal_state_is_physical(oracle):
    rho = oracle.thermal(5, 2)
    rho.check_physical()
    assert rho.mean_photon() == pytest.approx(2 + 4, rel=1e-8)
    assert rho.purity() == pytest.approx(0.2, rel=1e-8)


def test_thermal_wigner(oracle):
    pts = random_points(10, radius=2)
    rho = oracle.thermal(3, 1, beta_max=2)
    closed = wigner_eval(displaced_thermal(3, 1), pts)
    np.testing.assert_allclose([oracle.wigner(rho, b) for b in pts], closed,
                               atol=1e-6)


def test_superposition_at_origin(oracle):
    rho = oracle.superposition(3, 1, math.pi, '-')
    state = thermal_superposition(3, 1, math.pi, '-')
    assert oracle.wigner(rho, 0) == pytest.approx(wigner_eval(state, 0), abs=1e-6)
    assert rho.purity() == pytest.approx(purity(state), abs=1e-6)
    assert rho.mean_photon() == pytest.approx(mean_photon(state, 0), abs=1e-6)


def test_outcome_probability_follows_the_trace(oracle):
    rho = oracle.superposition(5, 1, math.pi, '-')
    assert rho.probability == pytest.approx(probability_report(5, 1)['P-_trace'],
                                            abs=1e-6)


def test_vanishing_projection():
    with pytest.raises(ZeroTrace):
        projector_states(1, 0, math.pi, '-', 10)


def test_cross_term_is_parity_times_thermal():
    # int P |-alpha><alpha| = parity . rho^th
    V, d, N = 3, 1, 40
    th = fock_thermal(V, d, N)
    P = parity(N + 1)
    sup = projector_states(V, d, math.pi, '+', N)
    expected = th.matrix + P @ th.matrix + th.matrix @ P + P @ th.matrix @ P
    np.testing.assert_allclose(sup.matrix * sup.raw_trace, expected, atol=1e-8)


def test_two_mode_parity(oracle):
    rho = oracle.two_mode(3, 1, '+')
    rho.check_physical()
    state = two_mode_thermal_entangled(3, 1, '+')
    value = displaced_parity_wigner(rho, [0, 0])
    assert value == pytest.approx(wigner_eval(state, [0, 0]), abs=1e-6)


def test_two_mode_product_form_matches_dense():
    V, d, N = 3, 1, 40
    th = fock_thermal(V, d, N)
    U = np.kron(rotation(math.pi, N + 1), rotation(math.pi, N + 1))
    projector = np.eye((N + 1) ** 2) - U
    dense = projector @ np.kron(th.matrix, th.matrix) @ projector.conj().T
    dense /= np.trace(dense).real
    rho = fock_two_mode(V, d, '-', N)
    n = np.diag(np.arange(N + 1, dtype=float))
    P = parity(N + 1)
    for factors in ((P, np.eye(N + 1)), (n, P), (P, P)):
        expected = np.trace(dense @ np.kron(*factors))
        assert rho.contract(factors) == pytest.approx(expected, abs=1e-12)
    assert rho.purity() == pytest.approx(np.trace(dense @ dense).real, abs=1e-12)


@pytest.mark.parametrize('sign', ['+', '-'])
def test_two_mode_largest_grid_point(oracle, sign):
    rho = oracle.two_mode(5, 2, sign, beta_max=1)
    assert rho.cutoff > 50
    rho.check_physical()
    state = two_mode_thermal_entangled(5, 2, sign)
    assert rho.purity() == pytest.approx(purity(state), abs=1e-6)
    for mode in (0, 1):
        assert rho.mean_photon(mode) == pytest.approx(mean_photon(state, mode),
                                                      abs=1e-6)
    for point in ([0, 0], [0.3 - 0.2j, 0.5j]):
        assert oracle.wigner(rho, point) == pytest.approx(
            wigner_eval(state, point), abs=1e-6)


def test_micro_macro(oracle):
    rho = oracle.micro_macro(3, 1, math.pi / 2, beta_max=1, alpha_max=1)
    rho.check_physical()
    state = micro_macro_entangled(3, 1, math.pi / 2)
    for point in ([0.2, 0.5], [0.4j, -0.3 + 0.1j]):
        assert oracle.wigner(rho, point) == pytest.approx(
            wigner_eval(state, point), abs=1e-6)


def test_two_mode_vanishing_trace():
    with pytest.raises(ZeroTrace):
        fock_two_mode(1, 0, '-', 10)


def test_beam_splitter_moves_a_photon():
    dim, T = 4, 0.3
    one = np.zeros((dim, dim), complex)
    one[1, 1] = 1
    vacuum = np.zeros((dim, dim), complex)
    vacuum[0, 0] = 1
    rho = FockOperator((dim, dim), np.kron(one, vacuum))
    U = beam_splitter_unitary(dim, T)
    out = FockOperator((dim, dim), U @ rho.matrix @ U.conj().T)
    assert out.mean_photon(0) == pytest.approx(T)
    assert out.mean_photon(1) == pytest.approx(1 - T)


def test_loss_kraus_is_complete():
    kraus = loss_kraus(8, 0.4)
    total = sum(K.conj().T @ K for K in kraus)
    np.testing.assert_allclose(total, np.eye(8), atol=1e-12)


def test_loss_keeps_coherent_states_coherent():
    N = 30
    damped = oracle_bs_and_loss(fock_thermal(1, 1, N), gamma_t=math.log(2))
    target = fock_thermal(1, 1 / math.sqrt(2), N)
    fidelity = np.trace(damped.matrix @ target.matrix).real
    assert fidelity > 1 - 1e-8


@pytest.mark.slow
def test_lossy_split_bell_values(oracle):
    rho = oracle.bs_and_loss(oracle.superposition(3, 1, math.pi, '-', 1), 0.5, 0.1)
    state = lossy_split_superposition(3, 1, '-', 0.1)
    rng = np.random.default_rng(11)
    for _ in range(3):
        settings = 0.5 * (rng.normal(size=4) + 1j * rng.normal(size=4)) / 2
        assert oracle.bell(rho, settings) == pytest.approx(
            bell_chsh(state, *settings), abs=1e-4)


@pytest.mark.slow
def test_full_agreement_suite():
    rows = oracle_check()
    failed = [row for row in rows if not row.ok]
    assert not failed, failed
