"""Disorder ensembles, dark-state diagnostics, and kick recovery.

The ensemble runner perturbs chain couplings only; sudden port distortions
live in self_heal.  Trial 0 always carries the unperturbed control so a
regression in the clean device cannot hide inside ensemble statistics.
"""
import numpy as np
import pytest

from aptfilter.fock import TwoModeNState, attractor_state
from aptfilter.lattice import AptLattice, CouplingChain, design_chain
from aptfilter.propagate import steady_state_asymmetric
from aptfilter.robustness import (
    DfsCheckResult,
    PerturbationSpec,
    dfs_check,
    run_ensemble,
    self_heal,
)

Z_GRID = np.linspace(0.0, 8.0, 9)


def test_perturbation_spec_validation():
    with pytest.raises(ValueError):
        PerturbationSpec(relative_amplitude=-0.1)
    with pytest.raises(ValueError):
        PerturbationSpec(n_trials=0)
    with pytest.raises(ValueError):
        PerturbationSpec(segment_length=-1.0)
    with pytest.raises(ValueError):
        PerturbationSpec(distribution="cauchy")
    with pytest.raises(ValueError):
        PerturbationSpec(target="port_couplings")


def test_ensemble_is_deterministic(small_lattice):
    spec = PerturbationSpec(relative_amplitude=0.05, n_trials=6, seed=3)
    a = run_ensemble(small_lattice, attractor_state(1), spec, Z_GRID)
    b = run_ensemble(small_lattice, attractor_state(1), spec, Z_GRID)
    np.testing.assert_array_equal(a.trials, b.trials)
    assert a.trials.shape == (6, len(Z_GRID))
    assert "Philox" in a.generator


def test_ensemble_statistics_are_consistent(small_lattice):
    spec = PerturbationSpec(relative_amplitude=0.1, n_trials=8, seed=11)
    res = run_ensemble(small_lattice, TwoModeNState(1, np.array([1.0, 0.0])), spec, Z_GRID)
    assert np.all(res.trials >= -1e-12)
    assert np.all(res.trials <= 1.0 + 1e-12)
    np.testing.assert_allclose(res.mean, res.trials.mean(axis=0), atol=1e-14)
    np.testing.assert_allclose(res.std, res.trials.std(axis=0), atol=1e-14)
    np.testing.assert_allclose(res.minimum, res.trials.min(axis=0), atol=1e-14)
    np.testing.assert_allclose(res.maximum, res.trials.max(axis=0), atol=1e-14)
    np.testing.assert_array_equal(res.z_grid, Z_GRID)


def test_trial_zero_is_the_unperturbed_control(small_lattice):
    spec = PerturbationSpec(relative_amplitude=0.2, n_trials=4, seed=7)
    res = run_ensemble(small_lattice, attractor_state(1), spec, Z_GRID)
    clean = PerturbationSpec(relative_amplitude=0.0, n_trials=1, seed=99)
    control = run_ensemble(small_lattice, attractor_state(1), clean, Z_GRID)
    np.testing.assert_allclose(res.trials[0], control.trials[0], atol=1e-12)


def test_attractor_ignores_chain_disorder(small_lattice):
    # coupling disorder never touches the ports, so the dark state rides
    # through every trial untouched
    spec = PerturbationSpec(relative_amplitude=0.1, n_trials=5, seed=2)
    res = run_ensemble(small_lattice, attractor_state(1), spec, Z_GRID)
    np.testing.assert_allclose(res.trials, 1.0, atol=1e-10)


def test_bright_input_varies_across_trials(small_lattice):
    spec = PerturbationSpec(relative_amplitude=0.1, n_trials=5, seed=2)
    res = run_ensemble(small_lattice, TwoModeNState(1, np.array([1.0, 0.0])), spec, Z_GRID)
    assert float(res.std[-1]) > 1e-6


def test_ensemble_rejects_kick_targets(small_lattice):
    spec = PerturbationSpec(target="system_phase_kick")
    with pytest.raises(ValueError):
        run_ensemble(small_lattice, attractor_state(1), spec, Z_GRID)


def test_dfs_check_flags_dark_and_bright(small_lattice):
    dark = dfs_check(small_lattice, attractor_state(1))
    assert isinstance(dark, DfsCheckResult)
    assert abs(dark.interaction_norm) < 1e-12
    assert abs(dark.expectation) < 1e-12

    bright = dfs_check(small_lattice, TwoModeNState(1, np.array([1.0, 1.0]) / np.sqrt(2.0)))
    assert bright.interaction_norm > 0.5
    # the coupling term moves all weight off the ports, so its expectation
    # in a port-only state vanishes even for bright input
    assert abs(bright.expectation) < 1e-12


def test_dfs_check_asymmetric_device():
    chain = design_chain(gamma=0.25, half_bandwidth=4.0, k_levels=60, n_sites=11)
    asym = AptLattice(
        CouplingChain(chain.detunings[1:], chain.couplings[1:]), j_left=2.0, j_right=1.0
    )
    # the device's dark state carries the swapped coupling labels
    dark = dfs_check(asym, steady_state_asymmetric(1.0, 2.0, 1))
    assert abs(dark.interaction_norm) < 1e-12
    not_dark = dfs_check(asym, steady_state_asymmetric(2.0, 1.0, 1))
    assert not_dark.interaction_norm > 1.0


def test_self_heal_dips_then_recovers(small_lattice):
    kick = PerturbationSpec(relative_amplitude=0.3, n_trials=1, seed=5, target="system_amplitude_kick")
    trace = self_heal(small_lattice, kick, 2.0, Z_GRID)
    assert trace.shape == Z_GRID.shape
    np.testing.assert_allclose(trace[Z_GRID <= 2.0], 1.0, atol=1e-10)
    after = trace[Z_GRID > 2.0]
    dip = float(after.min())
    assert dip < 1.0 - 1e-4
    # filtering pushes the fidelity back up after the dip
    assert float(after[3]) > dip + 1e-4
    assert np.all(trace <= 1.0 + 1e-12)


def test_self_heal_phase_kick(small_lattice):
    kick = PerturbationSpec(relative_amplitude=0.3, n_trials=1, seed=5, target="system_phase_kick")
    trace = self_heal(small_lattice, kick, 2.0, Z_GRID)
    assert float(trace[3]) < 1.0 - 1e-4


def test_self_heal_validation(small_lattice):
    disorder = PerturbationSpec(target="chain_couplings")
    kick = PerturbationSpec(target="system_amplitude_kick")
    with pytest.raises(ValueError):
        self_heal(small_lattice, disorder, 2.0, Z_GRID)
    with pytest.raises(ValueError):
        self_heal(small_lattice, kick, -1.0, Z_GRID)
    with pytest.raises(ValueError):
        self_heal(small_lattice, kick, 2.0, Z_GRID, input_state=attractor_state(2))
