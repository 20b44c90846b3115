"""Reservoir-eliminated dynamics of the two filter ports.

Adiabatic elimination of a broadband shared reservoir leaves the ports with
the anti-Hermitian effective generator

    H_eff = -i Gamma (a_L^dag a_R + a_R^dag a_L + n_L + n_R),

whose N-photon matrix is -i Gamma (T_N + N I) with T_N the tridiagonal
hopping matrix with entries sqrt((N-k)(k+1)).  The Hermitian part vanishes:
the ports exchange no coherent amplitude, all coupling is dissipative.
T_N + N I is positive semidefinite with spectrum {0, 2, 4, ..., 2N}, so
under c(z) = exp(-i H_eff z) c(0) every component decays except the kernel,
which is exactly the attractor state.
"""
from __future__ import annotations

import numpy as np

from ._matfun import expm_checked
from .fock import TwoModeNState, kernel_steady_state
from .propagate import PostSelectedResult, _wrap_postselection

__all__ = [
    "EffectiveAptHamiltonian",
    "build_effective",
    "evolve_effective",
    "ww_decay_reference",
]


class EffectiveAptHamiltonian:
    """N-photon effective generator of the port pair.

    Attributes
    ----------
    gamma : float
        Reservoir-induced rate, cm^-1.
    n_photons : int
    matrix : ndarray
        The (N+1) x (N+1) generator -i Gamma (T_N + N I), entry [m, k]
        acting on amplitudes indexed by right-port occupancy.
    """

    def __init__(self, gamma: float, n_photons: int):
        if gamma <= 0:
            raise ValueError(f"gamma must be positive, got {gamma}")
        n = int(n_photons)
        if n < 1:
            raise ValueError(f"n_photons must be >= 1, got {n}")
        self.gamma = float(gamma)
        self.n_photons = n
        k = np.arange(n + 1)
        decay = np.zeros((n + 1, n + 1))
        decay[k, k] = n
        off = np.sqrt((k[:-1] + 1) * (n - k[:-1]))
        decay[k[:-1], k[:-1] + 1] = off
        decay[k[:-1] + 1, k[:-1]] = off
        self._decay_generator = decay
        matrix = -1j * self.gamma * decay
        matrix.setflags(write=False)
        self.matrix = matrix

    def decay_rates(self) -> np.ndarray:
        """Intensity decay rates 2 Gamma k of the N+1 collective modes."""
        return 2.0 * self.gamma * np.arange(0, self.n_photons + 1)

    def attractor(self) -> TwoModeNState:
        """Kernel of the generator, extracted numerically."""
        return kernel_steady_state(self._decay_generator)


def build_effective(gamma: float, n_photons: int) -> EffectiveAptHamiltonian:
    """Effective N-photon generator for reservoir-induced rate gamma."""
    return EffectiveAptHamiltonian(gamma, n_photons)


def evolve_effective(
    hamiltonian: EffectiveAptHamiltonian, state: TwoModeNState, z: float
) -> PostSelectedResult:
    """Conditional evolution exp(-i H_eff z) applied to a port state.

    The output is renormalized; the lost norm is the success probability of
    post-selecting on no photon having leaked to the reservoir.
    """
    if state.n_photons != hamiltonian.n_photons:
        raise ValueError(
            f"state has {state.n_photons} photons, generator expects "
            f"{hamiltonian.n_photons}"
        )
    if z < 0:
        raise ValueError(f"z must be nonnegative, got {z}")
    amps = expm_checked(-1j * hamiltonian.matrix * float(z)) @ state.amplitudes
    return _wrap_postselection(state.n_photons, amps)


def ww_decay_reference(gamma: float, z) -> np.ndarray:
    """Amplitude survival exp(-gamma z) of a single mode in a flat reservoir.

    Golden-rule benchmark used to check the synthesized chain: a single
    excitation coupled at the designed rate decays exponentially until the
    finite chain causes a revival.  Returns the amplitude (not intensity)
    envelope.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    return np.exp(-gamma * np.asarray(z, dtype=float))
