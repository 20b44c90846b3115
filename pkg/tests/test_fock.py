"""Two-mode Fock sector states and the dark attractor.

Oracles: the attractor amplitudes have the closed form
c_k = (-1)^k sqrt(C(N,k) / 2^N); the reference five-decimal tables below
were computed from that formula by hand (binomials over powers of two)
rather than from the recurrence the implementation uses.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aptfilter.fock import (
    DegenerateKernelError,
    PhotonConfig,
    TwoModeNState,
    attractor_state,
    fidelity_to,
    kernel_steady_state,
    state_from_csv,
    state_to_csv,
)

# sqrt(C(N,k)/2^N) with alternating sign, rounded to 5 decimals.
ATTRACTOR_REFS = {
    1: (0.70711, -0.70711),
    2: (0.5, -0.70711, 0.5),
    4: (0.25, -0.5, 0.61237, -0.5, 0.25),
}


@pytest.mark.parametrize("n,ref", sorted(ATTRACTOR_REFS.items()))
def test_attractor_reference_amplitudes(n, ref):
    state = attractor_state(n)
    assert state.n_photons == n
    np.testing.assert_allclose(state.amplitudes.real, ref, atol=5e-6)
    np.testing.assert_allclose(state.amplitudes.imag, 0.0, atol=1e-15)


@given(st.integers(min_value=1, max_value=10))
def test_attractor_closed_form(n):
    state = attractor_state(n)
    for k, c in enumerate(state.amplitudes):
        expected = (-1.0) ** k * math.sqrt(math.comb(n, k) / 2.0**n)
        assert c == pytest.approx(expected, abs=1e-14)


@given(st.integers(min_value=1, max_value=10))
def test_attractor_recurrence_and_norm(n):
    c = attractor_state(n).amplitudes.real
    assert c[0] == pytest.approx(2.0 ** (-n / 2.0), abs=1e-14)
    for k in range(1, n + 1):
        assert c[k] == pytest.approx(-c[k - 1] * math.sqrt((n - k + 1) / k), abs=1e-13)
    assert np.sum(c**2) == pytest.approx(1.0, abs=1e-13)


def test_state_validation():
    with pytest.raises(ValueError):
        TwoModeNState(2, np.array([1.0, 0.0]))  # needs N+1 amplitudes
    with pytest.raises(ValueError):
        TwoModeNState(0, np.array([1.0]))
    with pytest.raises(ValueError):
        TwoModeNState(1, np.array([np.nan, 0.0]))


def test_normalized_and_probabilities():
    state = TwoModeNState(1, np.array([3.0, 4.0j]))
    assert state.norm == pytest.approx(5.0)
    assert not state.is_normalized()
    unit = state.normalized()
    assert unit.is_normalized()
    np.testing.assert_allclose(unit.probabilities(), [0.36, 0.64], atol=1e-15)


def test_canonical_rotates_global_phase():
    state = TwoModeNState(1, np.array([-0.6, 0.8j])).canonical()
    # first amplitude becomes real and positive; physics is unchanged
    assert state.amplitudes[0].real > 0
    assert abs(state.amplitudes[0].imag) < 1e-15
    np.testing.assert_allclose(
        state.probabilities(), [0.36, 0.64], atol=1e-15
    )


def test_canonical_skips_negligible_leading_amplitude():
    state = TwoModeNState(1, np.array([1e-18, -1.0j])).canonical()
    assert state.amplitudes[1].real == pytest.approx(1.0, abs=1e-12)


def test_fidelity_basics():
    a = attractor_state(2)
    assert fidelity_to(a, a) == pytest.approx(1.0, abs=1e-14)
    # |20> is orthogonal to |02>
    s20 = TwoModeNState(2, np.array([1.0, 0.0, 0.0]))
    s02 = TwoModeNState(2, np.array([0.0, 0.0, 1.0]))
    assert fidelity_to(s20, s02) == pytest.approx(0.0, abs=1e-15)
    # global phase invariance
    rotated = TwoModeNState(2, a.amplitudes * np.exp(0.7j))
    assert fidelity_to(a, rotated) == pytest.approx(1.0, abs=1e-14)


def test_fidelity_photon_number_mismatch():
    with pytest.raises(ValueError):
        fidelity_to(attractor_state(1), attractor_state(2))


def test_kernel_steady_state_recovers_attractor():
    # independent construction of the N=2 decay generator: tridiagonal
    # sqrt((N-k)(k+1)) plus N on the diagonal
    n = 2
    t = np.zeros((n + 1, n + 1))
    for k in range(n):
        t[k, k + 1] = t[k + 1, k] = math.sqrt((n - k) * (k + 1))
    state = kernel_steady_state(t + n * np.eye(n + 1))
    assert fidelity_to(state, attractor_state(n)) == pytest.approx(1.0, abs=1e-12)
    # canonical sign convention: leading amplitude positive
    assert state.amplitudes[0].real > 0


def test_kernel_steady_state_rejects_degenerate_kernel():
    with pytest.raises(DegenerateKernelError):
        kernel_steady_state(np.zeros((3, 3)))


def test_kernel_steady_state_rejects_empty_kernel():
    with pytest.raises(DegenerateKernelError):
        kernel_steady_state(np.eye(4))


def test_photon_config():
    cfg = PhotonConfig.two_port(2, 1, 5)
    assert cfg.occupations == (2, 1, 0, 0, 0)
    assert cfg.n_total == 3
    with pytest.raises(ValueError):
        PhotonConfig((1, -1))


@settings(max_examples=25)
@given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=2**32 - 1))
def test_csv_round_trip(n, seed):
    gen = np.random.default_rng(seed)
    raw = gen.standard_normal(n + 1) + 1j * gen.standard_normal(n + 1)
    state = TwoModeNState(n, raw).normalized()
    path = "/tmp/aptfilter_state_roundtrip.csv"
    state_to_csv(state, path)
    back = state_from_csv(path)
    assert back.n_photons == n
    np.testing.assert_allclose(back.amplitudes, state.amplitudes, atol=1e-13)
