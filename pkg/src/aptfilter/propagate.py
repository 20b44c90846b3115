"""Multi-photon propagation through mode unitaries and post-selection.

A lattice Hamiltonian H generates the single-photon transfer matrix
U = exp(+i H z).  Photons are noninteracting, so an N-photon transition
amplitude is a matrix permanent: with the single-photon map
a_i^dag -> sum_j U_ji a_j^dag,

    amp(in -> out) = per(U[rows(out), cols(in)]) / sqrt(prod_i in_i! prod_j out_j!)

where cols(in) repeats column i `in_i` times and rows(out) repeats row j
`out_j` times.  Post-selection onto the two ports keeps only outcomes with
every photon on L or R; for port-only inputs this reduces to the boson lift
of the 2x2 port block of U, which is how the filter's conditional dynamics
is computed efficiently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._matfun import expm_checked
from .fock import PhotonConfig, TwoModeNState, kernel_steady_state

__all__ = [
    "FullyDissipatedError",
    "ModeUnitary",
    "PostSelectedResult",
    "propagator",
    "SpectralPropagator",
    "permanent",
    "n_photon_amplitude",
    "lift_two_mode",
    "postselect_two_ports",
    "postselect_state",
    "apply_coupler",
    "apply_phase",
    "steady_state_asymmetric",
    "noon_state",
    "noon_convert",
    "pt_coupler_reference",
    "BALANCED_COUPLER",
    "NOON_PHASE_GATE",
    "NOON_COUPLER",
    "NOON_COUPLER_SINGLE",
]

_UNITARY_TOL = 1e-10
_DISSIPATED_TOL = 1e-300
_MAX_PHOTONS = 6


class FullyDissipatedError(RuntimeError):
    """Raised when post-selection is attempted on a fully decayed state."""


@dataclass(frozen=True)
class ModeUnitary:
    """Unitary single-photon transfer matrix over the lattice modes.

    Unitarity is enforced at construction (max deviation of U^dag U from
    the identity at most 1e-10).  ``z`` optionally records the propagation
    length that produced the matrix.
    """

    matrix: np.ndarray
    z: float | None = None

    def __post_init__(self):
        u = np.array(self.matrix, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise ValueError(f"matrix must be square, got shape {u.shape}")
        dev = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
        if dev > _UNITARY_TOL:
            raise ValueError(f"matrix is not unitary (deviation {dev:.3e})")
        u.setflags(write=False)
        object.__setattr__(self, "matrix", u)

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0]


def propagator(hamiltonian: np.ndarray, z: float) -> ModeUnitary:
    """Transfer matrix exp(+i H z) of a Hermitian mode Hamiltonian."""
    return SpectralPropagator(hamiltonian).unitary(z)


class SpectralPropagator:
    """Eigendecomposition of a Hermitian lattice, reused across many z.

    Diagonalizing once and exponentiating eigenvalues makes z sweeps cheap;
    the propagation itself is exactly unitary for every z.
    """

    def __init__(self, hamiltonian: np.ndarray):
        h = np.asarray(hamiltonian, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError(f"hamiltonian must be square, got shape {h.shape}")
        dev = float(np.max(np.abs(h - h.conj().T)))
        if dev > 1e-10 * max(1.0, float(np.max(np.abs(h)))):
            raise ValueError(f"hamiltonian is not Hermitian (deviation {dev:.3e})")
        self._eigenvalues, self._vectors = np.linalg.eigh(h)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eigenvalues.copy()

    @property
    def n_modes(self) -> int:
        return len(self._eigenvalues)

    def matrix(self, z: float) -> np.ndarray:
        phases = np.exp(1j * self._eigenvalues * float(z))
        return (self._vectors * phases) @ self._vectors.conj().T

    def unitary(self, z: float) -> ModeUnitary:
        return ModeUnitary(self.matrix(z), z=float(z))


def permanent(matrix: np.ndarray) -> complex:
    """Matrix permanent by Ryser's formula with Gray-code subset updates.

    Cost is O(2^n * n); intended for the small matrices that arise in
    few-photon amplitudes.
    """
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    row_sums = np.zeros(n, dtype=complex)
    total = 0.0 + 0.0j
    gray = 0
    for k in range(1, 2**n):
        g = k ^ (k >> 1)
        changed = g ^ gray
        j = changed.bit_length() - 1
        if g & changed:
            row_sums += a[:, j]
        else:
            row_sums -= a[:, j]
        gray = g
        if g.bit_count() % 2:
            total -= np.prod(row_sums)
        else:
            total += np.prod(row_sums)
    if n % 2:
        total = -total
    return complex(total)


def _config_indices(config: PhotonConfig) -> list:
    idx = []
    for mode, count in enumerate(config.occupations):
        idx.extend([mode] * count)
    return idx


def _factorial_product(config: PhotonConfig) -> float:
    out = 1.0
    for count in config.occupations:
        out *= math.factorial(count)
    return out


def n_photon_amplitude(
    unitary,
    input_config: PhotonConfig,
    output_config: PhotonConfig,
    *,
    allow_large: bool = False,
) -> complex:
    """Transition amplitude between two photon configurations.

    ``unitary`` may be a ModeUnitary or a plain matrix (the permanent
    formula is polynomial in the entries, so formal lifts of non-unitary
    matrices are permitted; probabilities are only meaningful for unitary
    input).  Photon numbers above 6 are refused unless ``allow_large`` is
    set, since the permanent cost doubles with every added photon.
    """
    u = unitary.matrix if isinstance(unitary, ModeUnitary) else np.asarray(unitary, dtype=complex)
    n_modes = u.shape[0]
    if len(input_config.occupations) != n_modes or len(output_config.occupations) != n_modes:
        raise ValueError(
            f"configs must cover {n_modes} modes, got "
            f"{len(input_config.occupations)} and {len(output_config.occupations)}"
        )
    n = input_config.n_total
    if output_config.n_total != n:
        raise ValueError(
            f"photon number mismatch: {n} in, {output_config.n_total} out"
        )
    if n > _MAX_PHOTONS and not allow_large:
        raise ValueError(
            f"{n} photons exceeds the default limit of {_MAX_PHOTONS}; "
            "pass allow_large=True to force the exponential-cost evaluation"
        )
    rows = _config_indices(output_config)
    cols = _config_indices(input_config)
    sub = u[np.ix_(rows, cols)]
    norm = math.sqrt(_factorial_product(input_config) * _factorial_product(output_config))
    return permanent(sub) / norm


def lift_two_mode(matrix: np.ndarray, n_photons: int, *, allow_large: bool = False) -> np.ndarray:
    """Boson lift of a 2x2 single-photon matrix to the N-photon sector.

    Returns the (N+1) x (N+1) matrix L with L[m, k] the amplitude from
    |N-k, k> to |N-m, m>.  The lift of a unitary is unitary; sub-unitary
    blocks (such as the port block of a lossy device) lift to contractions.
    """
    u = matrix.matrix if isinstance(matrix, ModeUnitary) else np.asarray(matrix, dtype=complex)
    if u.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {u.shape}")
    n = int(n_photons)
    if n < 1:
        raise ValueError(f"n_photons must be >= 1, got {n}")
    if n > _MAX_PHOTONS and not allow_large:
        raise ValueError(
            f"{n} photons exceeds the default limit of {_MAX_PHOTONS}; "
            "pass allow_large=True to force the exponential-cost evaluation"
        )
    if n == 1:
        return u.copy()
    lifted = np.empty((n + 1, n + 1), dtype=complex)
    for k in range(n + 1):
        col_in = PhotonConfig((n - k, k))
        for m in range(n + 1):
            lifted[m, k] = n_photon_amplitude(
                u, col_in, PhotonConfig((n - m, m)), allow_large=True
            )
    return lifted


@dataclass(frozen=True)
class PostSelectedResult:
    """Outcome of projecting onto all photons in the two ports.

    ``state`` is the normalized conditional state; ``success_probability``
    is the probability of the post-selection succeeding.
    """

    state: TwoModeNState
    success_probability: float


def postselect_two_ports(
    unitary: ModeUnitary,
    input_config: PhotonConfig,
    *,
    allow_large: bool = False,
) -> PostSelectedResult:
    """Propagate a photon configuration and keep only all-in-port outcomes.

    The input photons may start on any modes.  Raises FullyDissipatedError
    if the success probability falls below 1e-300.
    """
    if not isinstance(unitary, ModeUnitary):
        raise TypeError("unitary must be a ModeUnitary")
    n = input_config.n_total
    n_modes = unitary.n_modes
    amps = np.empty(n + 1, dtype=complex)
    for m in range(n + 1):
        out = PhotonConfig.two_port(n - m, m, n_modes)
        amps[m] = n_photon_amplitude(unitary, input_config, out, allow_large=allow_large)
    return _wrap_postselection(n, amps)


def postselect_state(
    unitary: ModeUnitary,
    state: TwoModeNState,
    *,
    allow_large: bool = False,
) -> PostSelectedResult:
    """Post-selected propagation of a port-superposition input.

    The input is an arbitrary N-photon state of the two ports (vacuum
    elsewhere).  Only the 2x2 port block of the transfer matrix enters: its
    boson lift maps input to conditional output amplitudes directly.
    """
    if not isinstance(unitary, ModeUnitary):
        raise TypeError("unitary must be a ModeUnitary")
    block = unitary.matrix[:2, :2]
    lifted = lift_two_mode(block, state.n_photons, allow_large=allow_large)
    amps = lifted @ state.amplitudes
    return _wrap_postselection(state.n_photons, amps)


def _wrap_postselection(n_photons: int, amplitudes: np.ndarray) -> PostSelectedResult:
    success = float(np.sum(np.abs(amplitudes) ** 2))
    if success < _DISSIPATED_TOL:
        raise FullyDissipatedError(
            f"success probability {success:.3e} below {_DISSIPATED_TOL:g}; "
            "all photons have left the ports"
        )
    state = TwoModeNState(n_photons, amplitudes / math.sqrt(success))
    return PostSelectedResult(state=state, success_probability=success)


# Balanced directional coupler; the i convention puts the pi/2 phase on the
# cross path, which is what integrated couplers realize.
BALANCED_COUPLER = np.array([[1.0, 1.0j], [1.0j, 1.0]]) / math.sqrt(2.0)
BALANCED_COUPLER.setflags(write=False)


def apply_coupler(state: TwoModeNState, coupler: np.ndarray | None = None) -> TwoModeNState:
    """Send both ports through a 2x2 coupler (balanced by default)."""
    u = BALANCED_COUPLER if coupler is None else np.asarray(coupler, dtype=complex)
    lifted = lift_two_mode(u, state.n_photons)
    return TwoModeNState(state.n_photons, lifted @ state.amplitudes)


def apply_phase(state: TwoModeNState, phase: float, port: str = "right") -> TwoModeNState:
    """Apply a phase shifter to one port: c_k -> exp(i k phase) c_k for R."""
    k = np.arange(state.n_photons + 1)
    if port == "right":
        factors = np.exp(1j * float(phase) * k)
    elif port == "left":
        factors = np.exp(1j * float(phase) * (state.n_photons - k))
    else:
        raise ValueError(f"port must be 'left' or 'right', got {port!r}")
    return TwoModeNState(state.n_photons, factors * state.amplitudes)


def steady_state_asymmetric(j_left: float, j_right: float, n_photons: int) -> TwoModeNState:
    """Post-selected steady state when the port couplings differ.

    The reservoir absorbs the collective mode weighted by the couplings, so
    the surviving state is the kernel of the corresponding collective
    lowering operator.  For one photon this is the closed form
    (-j_left/j_right, 1) up to normalization; higher sectors are obtained
    numerically from the kernel of the lowering operator's normal matrix and
    returned phase-canonical (leading amplitude positive).
    """
    if j_left <= 0 or j_right <= 0:
        raise ValueError(f"couplings must be positive, got {j_left}, {j_right}")
    n = int(n_photons)
    if n < 1:
        raise ValueError(f"n_photons must be >= 1, got {n}")
    if n == 1:
        vec = np.array([-j_left / j_right, 1.0], dtype=complex)
        return TwoModeNState(1, vec / np.linalg.norm(vec))
    lower = np.zeros((n, n + 1), dtype=complex)
    for k in range(n):
        lower[k, k] = j_right * math.sqrt(n - k)
        lower[k, k + 1] = j_left * math.sqrt(k + 1)
    return kernel_steady_state(lower.conj().T @ lower)


def noon_state(n_photons: int) -> TwoModeNState:
    """(|N,0> + |0,N>)/sqrt(2)."""
    n = int(n_photons)
    amps = np.zeros(n + 1, dtype=complex)
    amps[0] = amps[n] = 1.0 / math.sqrt(2.0)
    return TwoModeNState(n, amps)


# Two-photon NOON conversion stage: a phase gate on the |11> component
# followed by a calibrated three-channel coupler.  The coupler entries are
# calibrated to four significant digits, so it is unitary only to ~1e-2;
# outputs are renormalized.  Basis order (|20>, |11>, |02>).
NOON_PHASE_GATE = np.diag([1.0, 1.0j, 1.0]).astype(complex)
NOON_PHASE_GATE.setflags(write=False)
NOON_COUPLER = np.array(
    [
        [0.8556, 0.5j, -0.1463],
        [0.5j, 0.707, 0.5j],
        [-0.1463, 0.5j, 0.8556],
    ]
)
NOON_COUPLER.setflags(write=False)
# Single-photon element whose two-photon boson lift reproduces NOON_COUPLER
# to the printed precision.
NOON_COUPLER_SINGLE = np.array([[0.928, 0.385j], [0.385j, 0.928]])
NOON_COUPLER_SINGLE.setflags(write=False)


def noon_convert(state: TwoModeNState) -> TwoModeNState:
    """Convert a two-photon state through the NOON stage and renormalize."""
    if state.n_photons != 2:
        raise ValueError("the NOON conversion stage is calibrated for two photons")
    out = NOON_COUPLER @ (NOON_PHASE_GATE @ state.amplitudes)
    return TwoModeNState(2, out).normalized()


def pt_coupler_reference(
    gamma: float, kappa: float, z: float, state: TwoModeNState
) -> np.ndarray:
    """Renormalized occupation probabilities of a PT gain-loss coupler.

    Reference dynamics for contrast with the dissipative filter: two modes
    coupled at rate kappa with balanced gain +gamma on L and loss -gamma on
    R.  The N-photon generator is the boson lift of
    [[+i*gamma, kappa], [kappa, -i*gamma]], evolved in the convention
    i dc/dz = H c, i.e. c(z) = exp(-i H z) c(0).  Below the symmetry
    breaking point (kappa > gamma) the probabilities oscillate in z instead
    of settling.
    """
    if kappa < 0 or gamma < 0:
        raise ValueError("gamma and kappa must be nonnegative")
    n = state.n_photons
    k = np.arange(n + 1)
    h = np.zeros((n + 1, n + 1), dtype=complex)
    h[k, k] = 1j * gamma * (n - 2 * k)
    off = kappa * np.sqrt((k[:-1] + 1) * (n - k[:-1]))
    h[k[:-1], k[:-1] + 1] = off
    h[k[:-1] + 1, k[:-1]] = off
    amps = expm_checked(-1j * h * float(z)) @ state.amplitudes
    p = np.abs(amps) ** 2
    total = p.sum()
    if total < _DISSIPATED_TOL:
        raise FullyDissipatedError("state fully decayed in the PT reference")
    return p / total
