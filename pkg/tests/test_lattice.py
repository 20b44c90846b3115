"""Bath discretization, Lanczos chain mapping, and the designed device.

Oracles:
- Star coupling w = sqrt(gamma * spacing / pi); for Gamma=0.25, B=4, K=500
  the spacing is 0.008 and w = 0.02523132522... (hand-evaluated).
- Two-by-two Lanczos runs are small enough to solve on paper: diag(1, -1)
  started at e0 terminates immediately (off-diagonal 0) and the breakdown
  replacement supplies the second vector; the exchange matrix [[0,1],[1,0]]
  gives diagonal (0, 0) and off-diagonal (1,).
- The designed chain's published reference couplings appear to three
  decimals; tolerance 0.005 absolute, with the far tail pinned to 2.000.
"""
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aptfilter.lattice import (
    AptLattice,
    BathSpec,
    CouplingChain,
    SPACING_CALIBRATION,
    build_apt_lattice,
    build_ww_star,
    chain_hamiltonian,
    coupling_to_spacing,
    design_chain,
    lanczos_tridiagonalize,
    spacing_to_coupling,
    standard_lattice,
)

TABLE_REFS = (0.798, 2.309, 2.066, 2.028, 2.016, 2.010, 2.007, 2.005, 2.004, 2.003, 2.003)


def test_bath_spec_derived_quantities():
    spec = BathSpec(half_bandwidth=4.0, n_levels=1001, gamma=0.25)
    assert spec.k_max == 500
    assert spec.level_spacing == pytest.approx(0.008, abs=1e-15)
    assert spec.coupling == pytest.approx(0.0252313, abs=1e-7)


def test_bath_spec_validation():
    with pytest.raises(ValueError):
        BathSpec(half_bandwidth=4.0, n_levels=1000, gamma=0.25)  # even
    with pytest.raises(ValueError):
        BathSpec(half_bandwidth=4.0, n_levels=1, gamma=0.25)  # too few
    with pytest.raises(ValueError):
        BathSpec(half_bandwidth=0.0, n_levels=11, gamma=0.25)
    with pytest.raises(ValueError):
        BathSpec(half_bandwidth=4.0, n_levels=11, gamma=-0.1)


def test_ww_star_structure():
    spec = BathSpec(half_bandwidth=1.0, n_levels=5, gamma=0.2)
    h = build_ww_star(spec)
    assert h.shape == (6, 6)
    np.testing.assert_allclose(h, h.conj().T, atol=1e-15)
    # anchor first, detunings k * spacing for k = -2..2
    np.testing.assert_allclose(np.diag(h), [0.0, -1.0, -0.5, 0.0, 0.5, 1.0], atol=1e-15)
    np.testing.assert_allclose(h[0, 1:], spec.coupling, atol=1e-15)
    assert np.count_nonzero(h[1:, 1:] - np.diag(np.diag(h[1:, 1:]))) == 0


def test_lanczos_diagonal_breakdown():
    h = np.diag([1.0, -1.0])
    start = np.array([1.0, 0.0])
    diag, offdiag = lanczos_tridiagonalize(h, start, 2)
    np.testing.assert_allclose(diag, [1.0, -1.0], atol=1e-14)
    np.testing.assert_allclose(offdiag, [0.0], atol=1e-14)


def test_lanczos_exchange_matrix():
    h = np.array([[0.0, 1.0], [1.0, 0.0]])
    start = np.array([1.0, 0.0])
    diag, offdiag = lanczos_tridiagonalize(h, start, 2)
    np.testing.assert_allclose(diag, [0.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(offdiag, [1.0], atol=1e-14)


def test_lanczos_rejects_bad_inputs():
    h = np.eye(3)
    with pytest.raises(ValueError):
        lanczos_tridiagonalize(h, np.zeros(3), 2)  # zero start vector
    with pytest.raises(ValueError):
        lanczos_tridiagonalize(h, np.ones(2), 2)  # dimension mismatch
    with pytest.raises(ValueError):
        lanczos_tridiagonalize(h, np.ones(3), 0)
    with pytest.raises(ValueError):
        lanczos_tridiagonalize(h, np.ones(3), 4)  # more steps than dimension


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_lanczos_tridiagonalizes_exactly(seed):
    gen = np.random.default_rng(seed)
    a = gen.standard_normal((8, 8))
    h = (a + a.T) / 2.0
    start = gen.standard_normal(8)
    diag, offdiag, basis = lanczos_tridiagonalize(h, start, 8, return_basis=True)
    # basis orthonormal to reorthogonalization tolerance
    np.testing.assert_allclose(basis.conj().T @ basis, np.eye(8), atol=1e-10)
    t = basis.conj().T @ h @ basis
    np.testing.assert_allclose(np.diag(t), diag, atol=1e-9)
    np.testing.assert_allclose(np.diag(t, 1), offdiag, atol=1e-9)
    # spectrum preserved by the similarity transform
    t_explicit = np.diag(diag) + np.diag(offdiag, 1) + np.diag(offdiag, -1)
    np.testing.assert_allclose(
        np.sort(np.linalg.eigvalsh(t_explicit)), np.sort(np.linalg.eigvalsh(h)), atol=1e-8
    )


def test_coupling_chain_validation():
    with pytest.raises(ValueError):
        CouplingChain(np.zeros(3), np.array([1.0, -0.5]))  # negative coupling
    with pytest.raises(ValueError):
        CouplingChain(np.zeros(3), np.array([1.0]))  # length mismatch
    chain = CouplingChain(np.zeros(3), np.array([1.0, 2.0]))
    assert chain.n_sites == 3
    h = chain_hamiltonian(chain)
    np.testing.assert_allclose(h, [[0, 1, 0], [1, 0, 2], [0, 2, 0]], atol=1e-15)


def test_design_chain_matches_reference_table(table_chain):
    couplings = table_chain.couplings
    assert len(couplings) == 50
    np.testing.assert_allclose(couplings[:11], TABLE_REFS, atol=5e-3)
    np.testing.assert_allclose(couplings[11:], 2.0, atol=5e-3)
    np.testing.assert_allclose(table_chain.detunings, 0.0, atol=1e-12)


def test_design_chain_first_coupling_analytic(table_chain):
    # continuum value sqrt(2 * Gamma * B / pi); the discrete chain agrees to
    # the level-spacing correction
    analytic = math.sqrt(2.0 * 0.25 * 4.0 / math.pi)
    assert table_chain.couplings[0] == pytest.approx(analytic, abs=1e-3)
    assert table_chain.couplings[0] == pytest.approx(0.7983, abs=5e-4)


def test_apt_lattice_structure(small_lattice):
    h = small_lattice.hamiltonian()
    assert h.shape == (12, 12)
    np.testing.assert_allclose(h, h.conj().T, atol=1e-14)
    # no direct coupling between the two ports
    assert h[0, 1] == 0.0
    # both ports attach to the first chain site with the designed strength
    assert h[0, 2] == pytest.approx(small_lattice.j_left)
    assert h[1, 2] == pytest.approx(small_lattice.j_right)
    assert small_lattice.j_left == pytest.approx(small_lattice.j_right)


def test_apt_lattice_validation():
    chain = CouplingChain(np.zeros(2), np.array([1.0]))
    with pytest.raises(ValueError):
        AptLattice(chain, j_left=0.0, j_right=1.0)
    with pytest.raises(ValueError):
        AptLattice(chain, j_left=1.0, j_right=-1.0)
    h = build_apt_lattice(chain, 0.5, 0.5)
    assert h.shape == (4, 4)


def test_standard_lattice_uses_designed_couplings(lattice_52, table_chain):
    assert lattice_52.n_modes == 52
    assert lattice_52.j_left == pytest.approx(table_chain.couplings[0])
    np.testing.assert_allclose(
        lattice_52.chain.couplings, table_chain.couplings[1:], atol=1e-12
    )


def test_spacing_calibration_points_are_exact():
    for coupling, spacing in SPACING_CALIBRATION:
        assert coupling_to_spacing(coupling) == pytest.approx(spacing, abs=1e-9)
        assert spacing_to_coupling(spacing) == pytest.approx(coupling, abs=1e-9)


def test_spacing_example_value():
    # J = A exp(-d/d0) through (0.8, 20.0) and (2.3, 14.3): at J = 2
    assert coupling_to_spacing(2.0) == pytest.approx(15.0545, abs=1e-3)


@given(st.floats(min_value=0.15, max_value=9.5))
def test_spacing_round_trip(j):
    assert spacing_to_coupling(coupling_to_spacing(j)) == pytest.approx(j, rel=1e-12)


def test_spacing_warns_outside_calibrated_range():
    with pytest.warns(UserWarning):
        coupling_to_spacing(0.01)
    with pytest.warns(UserWarning):
        coupling_to_spacing(15.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        coupling_to_spacing(1.0)  # calibrated region stays silent
