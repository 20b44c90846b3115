"""Disorder ensembles, dark-subspace diagnostics, and recovery dynamics.

The filter's protection is topological in the weak sense that the attractor
couples to the reservoir only through the symmetric port combination, so
static or piecewise-static disorder on the chain leaves it dark.  This
module quantifies that: Monte Carlo ensembles over fabrication disorder,
an explicit check that a state decouples from the port-chain bonds, and
recovery traces after a deliberate kick to the port amplitudes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .fock import TwoModeNState, attractor_state, fidelity_to
from .lattice import AptLattice, CouplingChain, build_apt_lattice
from .propagate import ModeUnitary, SpectralPropagator, postselect_state

__all__ = [
    "PerturbationSpec",
    "EnsembleResult",
    "DfsCheckResult",
    "run_ensemble",
    "dfs_check",
    "self_heal",
]

_TARGETS = ("chain_couplings", "system_amplitude_kick", "system_phase_kick")
_DISTRIBUTIONS = ("uniform", "gaussian")


@dataclass(frozen=True)
class PerturbationSpec:
    """What to perturb and how hard.

    relative_amplitude : disorder strength r; multiplicative for couplings
        (each bond scaled by 1 + u with u drawn in [-r, r]), an amplitude
        factor or phase angle (radians) for the kick targets.
    segment_length : length (cm) over which one disorder draw stays frozen.
    n_trials : ensemble size, including the unperturbed control trial 0.
    seed : base entropy for the per-trial Philox streams.
    target : "chain_couplings" for ensembles, "system_amplitude_kick" or
        "system_phase_kick" for self-healing runs.
    distribution : "uniform" on [-r, r] or "gaussian" with standard
        deviation r.
    """

    relative_amplitude: float = 0.10
    segment_length: float = 0.5
    n_trials: int = 100
    seed: int = 0
    target: str = "chain_couplings"
    distribution: str = "uniform"

    def __post_init__(self):
        if self.relative_amplitude < 0:
            raise ValueError(
                f"relative_amplitude must be nonnegative, got {self.relative_amplitude}"
            )
        if self.segment_length <= 0:
            raise ValueError(
                f"segment_length must be positive, got {self.segment_length}"
            )
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials}")
        if self.target not in _TARGETS:
            raise ValueError(f"target must be one of {_TARGETS}, got {self.target!r}")
        if self.distribution not in _DISTRIBUTIONS:
            raise ValueError(
                f"distribution must be one of {_DISTRIBUTIONS}, got {self.distribution!r}"
            )


@dataclass(frozen=True)
class EnsembleResult:
    """Fidelity-to-attractor traces of a disorder ensemble.

    trials has shape (n_trials, len(z_grid)); row 0 is the unperturbed
    control.  mean/std/minimum/maximum are taken across trials at fixed z.
    ``generator`` records the RNG construction so runs can be reproduced
    exactly from (seed, trial index) alone.
    """

    z_grid: np.ndarray
    trials: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray
    spec: PerturbationSpec
    generator: str

    def __post_init__(self):
        for name in ("z_grid", "trials", "mean", "std", "minimum", "maximum"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _trial_rng(seed: int, trial: int) -> Generator:
    return Generator(Philox(SeedSequence(entropy=seed, spawn_key=(trial,))))


def _draw(rng: Generator, spec: PerturbationSpec, size: int) -> np.ndarray:
    if spec.distribution == "uniform":
        return rng.uniform(-spec.relative_amplitude, spec.relative_amplitude, size=size)
    return rng.normal(0.0, spec.relative_amplitude, size=size)


def run_ensemble(
    lattice: AptLattice,
    input_state: TwoModeNState,
    spec: PerturbationSpec,
    z_grid,
) -> EnsembleResult:
    """Monte Carlo over piecewise-constant chain-coupling disorder.

    Every chain bond is multiplied by an independent factor 1 + u, redrawn
    each segment_length of propagation; the port couplings and all
    detunings stay fixed.  Each trial reports the post-selected fidelity to
    the attractor along z_grid.  Trial 0 draws nothing and serves as the
    control.
    """
    if spec.target != "chain_couplings":
        raise ValueError(
            f"run_ensemble perturbs chain couplings; target {spec.target!r} "
            "belongs to self_heal"
        )
    z = np.asarray(z_grid, dtype=float)
    if z.ndim != 1 or len(z) < 1:
        raise ValueError("z_grid must be a nonempty 1-d array")
    if np.any(np.diff(z) <= 0) or z[0] < 0:
        raise ValueError("z_grid must be strictly increasing and nonnegative")

    n = input_state.n_photons
    target_state = attractor_state(n)
    base = lattice.chain.couplings
    n_modes = lattice.n_modes
    trials = np.empty((spec.n_trials, len(z)))
    for trial in range(spec.n_trials):
        rng = _trial_rng(spec.seed, trial)
        u_total = np.eye(n_modes, dtype=complex)
        z_done = 0.0
        seg_index = -1
        seg_prop = None
        for iz, z_target in enumerate(z):
            while True:
                seg_needed = int(z_done / spec.segment_length + 1e-12)
                if seg_index < seg_needed:
                    seg_index = seg_needed
                    if trial == 0 or spec.relative_amplitude == 0.0:
                        couplings = base
                    else:
                        couplings = base * (1.0 + _draw(rng, spec, len(base)))
                    chain = CouplingChain(lattice.chain.detunings, couplings)
                    seg_prop = SpectralPropagator(
                        build_apt_lattice(
                            chain, lattice.j_left, lattice.j_right, lattice.port_detuning
                        )
                    )
                seg_end = (seg_index + 1) * spec.segment_length
                if z_target <= seg_end + 1e-12:
                    break
                u_total = seg_prop.matrix(seg_end - z_done) @ u_total
                z_done = seg_end
            u_here = seg_prop.matrix(z_target - z_done) @ u_total
            result = postselect_state(ModeUnitary(u_here, z=z_target), input_state)
            trials[trial, iz] = fidelity_to(result.state, target_state)
            # Advance the accumulated product so later grid points reuse it.
            u_total = u_here
            z_done = z_target
    return EnsembleResult(
        z_grid=z,
        trials=trials,
        mean=trials.mean(axis=0),
        std=trials.std(axis=0),
        minimum=trials.min(axis=0),
        maximum=trials.max(axis=0),
        spec=spec,
        generator="numpy Philox, SeedSequence(entropy=seed, spawn_key=(trial,))",
    )


class DfsCheckResult(NamedTuple):
    expectation: float
    interaction_norm: float


def dfs_check(lattice: AptLattice, state: TwoModeNState) -> DfsCheckResult:
    """How strongly a port state talks to the chain.

    Embeds the state in the three relevant modes (L, R, first chain site)
    and applies the port-chain interaction
    H_int = J_L (a_L^dag a_c + h.c.) + J_R (a_R^dag a_c + h.c.).  Returns
    the energy expectation <psi|H_int|psi> (identically zero for any state
    with no chain occupation, reported as a diagnostic of the numerics) and
    the norm ||H_int psi||, which vanishes exactly on dark states and
    measures the leak rate of bright ones.
    """
    n = state.n_photons
    basis = []
    index = {}
    for n_l in range(n + 1):
        for n_r in range(n + 1 - n_l):
            occ = (n_l, n_r, n - n_l - n_r)
            index[occ] = len(basis)
            basis.append(occ)
    dim = len(basis)
    h = np.zeros((dim, dim))
    for (n_l, n_r, n_c), row in index.items():
        # a_c^dag a_L and a_c^dag a_R move one photon onto the chain site.
        if n_l > 0:
            col = index[(n_l - 1, n_r, n_c + 1)]
            amp = lattice.j_left * math.sqrt(n_l * (n_c + 1))
            h[col, row] += amp
            h[row, col] += amp
        if n_r > 0:
            col = index[(n_l, n_r - 1, n_c + 1)]
            amp = lattice.j_right * math.sqrt(n_r * (n_c + 1))
            h[col, row] += amp
            h[row, col] += amp
    psi = np.zeros(dim, dtype=complex)
    amps = state.amplitudes / state.norm
    for k, a in enumerate(amps):
        psi[index[(n - k, k, 0)]] = a
    w = h @ psi
    return DfsCheckResult(
        expectation=float((psi.conj() @ w).real),
        interaction_norm=float(np.linalg.norm(w)),
    )


def self_heal(
    lattice: AptLattice,
    kick: PerturbationSpec,
    z_kick: float,
    z_grid,
    input_state: TwoModeNState | None = None,
) -> np.ndarray:
    """Fidelity trace of a single photon kicked off the attractor mid-flight.

    Propagates through the unperturbed device, applies a sudden port
    distortion at z_kick (amplitude factor 1 + r on L, or phase exp(i r) on
    R, according to the kick target), then lets the filter continue.  The
    returned array holds the post-selected attractor fidelity at each grid
    point.  Single-photon only: the kick acts on the one-photon mode vector.
    """
    if kick.target == "chain_couplings":
        raise ValueError("self_heal applies port kicks; use run_ensemble for disorder")
    if z_kick < 0:
        raise ValueError(f"z_kick must be nonnegative, got {z_kick}")
    state = attractor_state(1) if input_state is None else input_state
    if state.n_photons != 1:
        raise ValueError("self_heal is defined for single-photon inputs")
    z = np.asarray(z_grid, dtype=float)
    if np.any(z < 0):
        raise ValueError("z_grid must be nonnegative")

    prop = SpectralPropagator(lattice.hamiltonian())
    target = attractor_state(1)
    psi0 = np.zeros(lattice.n_modes, dtype=complex)
    psi0[:2] = state.amplitudes / state.norm

    psi_kicked = prop.matrix(z_kick) @ psi0
    if kick.target == "system_amplitude_kick":
        psi_kicked[0] *= 1.0 + kick.relative_amplitude
    else:
        psi_kicked[1] *= np.exp(1j * kick.relative_amplitude)
    psi_kicked /= np.linalg.norm(psi_kicked)

    fidelities = np.empty(len(z))
    for i, zi in enumerate(z):
        if zi <= z_kick:
            psi = prop.matrix(zi) @ psi0
        else:
            psi = prop.matrix(zi - z_kick) @ psi_kicked
        ports = TwoModeNState(1, psi[:2])
        fidelities[i] = fidelity_to(ports, target)
    return fidelities
