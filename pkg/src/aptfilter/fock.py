"""Two-mode Fock-space bookkeeping for the filter ports.

The device has two system ports, labeled L and R.  An N-photon state of the
port pair lives in the (N+1)-dimensional symmetric subspace spanned by the
number kets |N, 0>, |N-1, 1>, ..., |0, N>.  Throughout this package the
amplitude vector is indexed by the right-port occupancy k, so entry k
multiplies |N-k, k>.

The filter's attractor (the entangled state every input relaxes onto under
post-selection) is the two-mode analogue of a spin coherent state,

    |A_N> = 2**(-N/2) * sum_k (-1)**k * sqrt(C(N, k)) / sqrt(...) |N-k, k>,

with amplitudes c_k = (-1)**k * sqrt(C(N, k) / 2**N).  Equivalently it is
the normalized N-th power of (a_L^dag - a_R^dag) acting on vacuum.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DegenerateKernelError",
    "TwoModeNState",
    "PhotonConfig",
    "attractor_state",
    "fidelity_to",
    "kernel_steady_state",
    "state_to_csv",
    "state_from_csv",
]

_PHASE_TOL = 1e-12


class DegenerateKernelError(ValueError):
    """Raised when a matrix kernel is empty or more than one-dimensional."""


@dataclass(frozen=True)
class TwoModeNState:
    """Pure N-photon state of the two filter ports.

    Parameters
    ----------
    n_photons : int
        Total photon number N, at least 1.
    amplitudes : array_like
        Complex vector of length N+1; entry k multiplies |N-k, k> where k is
        the right-port occupancy.  The vector need not be normalized (states
        produced by lossy evolution carry their survival amplitude), but it
        must not be the zero vector.
    """

    n_photons: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.n_photons < 1:
            raise ValueError(f"n_photons must be >= 1, got {self.n_photons}")
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.n_photons + 1,):
            raise ValueError(
                f"expected {self.n_photons + 1} amplitudes for N={self.n_photons}, "
                f"got shape {amps.shape}"
            )
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        nrm = float(np.linalg.norm(amps))
        if nrm == 0.0:
            raise ValueError("amplitude vector must be nonzero")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        """Euclidean norm of the amplitude vector."""
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = 1e-10) -> bool:
        return abs(self.norm - 1.0) <= tol

    def normalized(self) -> "TwoModeNState":
        """Return the unit-norm state with the same direction."""
        return TwoModeNState(self.n_photons, self.amplitudes / self.norm)

    def canonical(self) -> "TwoModeNState":
        """Fix the global phase: first non-negligible amplitude real positive."""
        amps = self.amplitudes
        scale = float(np.max(np.abs(amps)))
        for a in amps:
            if abs(a) > _PHASE_TOL * scale:
                return TwoModeNState(self.n_photons, amps * (abs(a) / a))
        return self

    def probabilities(self) -> np.ndarray:
        """Occupation probabilities |c_k|^2 normalized to sum to one."""
        p = np.abs(self.amplitudes) ** 2
        return p / p.sum()


@dataclass(frozen=True)
class PhotonConfig:
    """Photon occupation pattern over the modes of a lattice.

    occupations[i] is the photon count in mode i; the mode ordering is that
    of whatever unitary the configuration is fed to (for the full device:
    L, R, then the chain sites).
    """

    occupations: tuple

    def __post_init__(self):
        occ = tuple(int(n) for n in self.occupations)
        if len(occ) < 2:
            raise ValueError("need at least the two port modes")
        if any(n < 0 for n in occ):
            raise ValueError(f"occupations must be nonnegative, got {occ}")
        if sum(occ) < 1:
            raise ValueError("total photon number must be at least 1")
        object.__setattr__(self, "occupations", occ)

    @property
    def n_total(self) -> int:
        return sum(self.occupations)

    @classmethod
    def two_port(cls, n_left: int, n_right: int, n_modes: int) -> "PhotonConfig":
        """Photons on the two ports only, vacuum on the remaining modes."""
        if n_modes < 2:
            raise ValueError("need at least two modes")
        return cls((n_left, n_right) + (0,) * (n_modes - 2))


def attractor_state(n_photons: int) -> TwoModeNState:
    """The N-photon attractor of the filter.

    Built by the recurrence c_0 = 2**(-N/2),
    c_k = -c_{k-1} * sqrt((N-k+1)/k), which yields
    c_k = (-1)**k sqrt(C(N,k)/2**N).  The state is exactly normalized and
    is annihilated by the symmetric combination a_L + a_R, which is what
    makes it dark to the shared reservoir.
    """
    n = int(n_photons)
    if n < 1:
        raise ValueError(f"n_photons must be >= 1, got {n}")
    amps = np.empty(n + 1, dtype=complex)
    amps[0] = 2.0 ** (-n / 2.0)
    for k in range(1, n + 1):
        amps[k] = -amps[k - 1] * math.sqrt((n - k + 1) / k)
    return TwoModeNState(n, amps)


def fidelity_to(state_a: TwoModeNState, state_b: TwoModeNState) -> float:
    """Squared overlap |<a|b>|^2 between normalized versions of two states."""
    if state_a.n_photons != state_b.n_photons:
        raise ValueError(
            f"photon numbers differ: {state_a.n_photons} vs {state_b.n_photons}"
        )
    a = state_a.amplitudes / state_a.norm
    b = state_b.amplitudes / state_b.norm
    return float(abs(np.vdot(a, b)) ** 2)


def kernel_steady_state(matrix: np.ndarray, rel_tol: float = 1e-10) -> TwoModeNState:
    """Extract the unique kernel vector of a square matrix as a state.

    Uses the SVD: the kernel is accepted as one-dimensional when the smallest
    singular value is below rel_tol times the largest while the second
    smallest stays above.  Raises DegenerateKernelError otherwise.  The
    returned state is normalized and phase-canonical.
    """
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    if m.shape[0] < 2:
        raise ValueError("matrix must be at least 2x2")
    _, s, vh = np.linalg.svd(m)
    cutoff = rel_tol * s[0]
    if s[-1] >= cutoff:
        raise DegenerateKernelError(
            f"no kernel: smallest singular value {s[-1]:.3e} "
            f"not below {cutoff:.3e}"
        )
    if s[-2] < cutoff:
        raise DegenerateKernelError(
            f"kernel is degenerate: second singular value {s[-2]:.3e} "
            f"also below {cutoff:.3e}"
        )
    vec = vh[-1].conj()
    return TwoModeNState(m.shape[0] - 1, vec).canonical()


def state_to_csv(state: TwoModeNState, path) -> None:
    """Write a state as rows (N, k, Re c_k, Im c_k)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_photons", "k", "re", "im"])
        for k, a in enumerate(state.amplitudes):
            writer.writerow(
                [state.n_photons, k, format(a.real, ".15g"), format(a.imag, ".15g")]
            )


def state_from_csv(path) -> TwoModeNState:
    """Read a state written by :func:`state_to_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty state file")
    n = int(rows[0]["n_photons"])
    amps = np.zeros(n + 1, dtype=complex)
    seen = set()
    for row in rows:
        if int(row["n_photons"]) != n:
            raise ValueError(f"{path}: mixed photon numbers")
        k = int(row["k"])
        if k in seen or not 0 <= k <= n:
            raise ValueError(f"{path}: bad amplitude index {k}")
        seen.add(k)
        amps[k] = float(row["re"]) + 1j * float(row["im"])
    if len(seen) != n + 1:
        raise ValueError(f"{path}: missing amplitude rows")
    return TwoModeNState(n, amps)
