"""Reservoir synthesis and waveguide-chain design.

The filter couples its two ports to a shared one-dimensional photonic
reservoir.  The reservoir starts life as a star: a single anchor mode
coupled with uniform strength w to 2K+1 equally spaced levels spanning
[-B, +B].  An anchored Lanczos pass rewrites the star as a nearest-neighbor
chain whose couplings converge to the flat-band value B/2, which is what a
waveguide array can realize directly.

Units: couplings and detunings in cm^-1, propagation lengths in cm,
waveguide spacings in um.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BathSpec",
    "CouplingChain",
    "AptLattice",
    "build_ww_star",
    "lanczos_tridiagonalize",
    "chain_hamiltonian",
    "build_apt_lattice",
    "design_chain",
    "standard_lattice",
    "coupling_to_spacing",
    "spacing_to_coupling",
    "SPACING_CALIBRATION",
]


@dataclass(frozen=True)
class BathSpec:
    """Flat reservoir discretization.

    Parameters
    ----------
    half_bandwidth : float
        Half width B of the flat spectral band, cm^-1.
    n_levels : int
        Number of discrete levels, odd so the comb is symmetric about zero.
    gamma : float
        Target decay rate of a single anchored mode, cm^-1.  Zero is allowed
        (decoupled anchor), useful for testing.
    """

    half_bandwidth: float
    n_levels: int
    gamma: float

    def __post_init__(self):
        if self.half_bandwidth <= 0:
            raise ValueError(f"half_bandwidth must be positive, got {self.half_bandwidth}")
        if self.n_levels < 3 or self.n_levels % 2 == 0:
            raise ValueError(f"n_levels must be odd and >= 3, got {self.n_levels}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")

    @property
    def k_max(self) -> int:
        """Levels run over k = -k_max ... +k_max."""
        return (self.n_levels - 1) // 2

    @property
    def level_spacing(self) -> float:
        """Comb spacing Delta = B / k_max."""
        return self.half_bandwidth / self.k_max

    @property
    def coupling(self) -> float:
        """Uniform anchor-level coupling w = sqrt(gamma * Delta / pi).

        Chosen so the golden-rule decay rate of the anchor, pi * w^2 / Delta,
        equals gamma.
        """
        return math.sqrt(self.gamma * self.level_spacing / math.pi)


def build_ww_star(spec: BathSpec) -> np.ndarray:
    """Star Hamiltonian of the discretized reservoir plus anchor.

    Mode 0 is the anchor at zero detuning; modes 1 .. n_levels sit at
    epsilon_k = k * Delta for k = -k_max .. +k_max, each coupled to the
    anchor with strength w.  Returns a real symmetric matrix of size
    n_levels + 1.
    """
    k = np.arange(-spec.k_max, spec.k_max + 1)
    dim = spec.n_levels + 1
    h = np.zeros((dim, dim))
    h[1:, 1:][np.diag_indices(spec.n_levels)] = k * spec.level_spacing
    h[0, 1:] = spec.coupling
    h[1:, 0] = spec.coupling
    return h


def lanczos_tridiagonalize(
    matrix: np.ndarray,
    start: np.ndarray,
    n_steps: int,
    reorthogonalize: bool = True,
    breakdown_tol: float | None = None,
    return_basis: bool = False,
):
    """Anchored Lanczos tridiagonalization of a Hermitian matrix.

    Starting from the unit vector ``start`` = v_1, each step computes

        p'_i = H v_i
        eps_i = v_i^dag (H v_i)
        p_i = p'_i - eps_i v_i - C_{i-1} v_{i-1}
        C_i = ||p_i||,   v_{i+1} = p_i / C_i

    so that in the basis (v_1 ... v_m) the matrix is tridiagonal with
    diagonal eps and off-diagonal C.  With ``reorthogonalize`` every residual
    is re-projected against the full basis twice (classical Gram-Schmidt,
    applied twice), which keeps the basis orthonormal to near machine
    precision even for thousands of steps; without it the basis drifts and
    spurious coupling copies appear.

    On breakdown (C_i below tolerance before m steps) the next basis vector
    is replaced by an arbitrary unit vector orthogonal to the ones found so
    far and the off-diagonal entry is recorded as zero, so the returned
    chain splits into decoupled segments.

    Parameters
    ----------
    matrix : array_like
        Hermitian matrix.
    start : array_like
        Starting vector; normalized internally, must be nonzero.
    n_steps : int
        Number of Lanczos vectors m, between 1 and dim(matrix).
    breakdown_tol : float, optional
        Absolute threshold on C_i; defaults to 1e-12 times the Frobenius
        norm of the matrix.
    return_basis : bool
        Also return the (dim x m) matrix of Lanczos vectors.

    Returns
    -------
    detunings : ndarray, shape (m,)
    couplings : ndarray, shape (m-1,)
    basis : ndarray, optional
    """
    h = np.asarray(matrix, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"matrix must be square, got shape {h.shape}")
    dim = h.shape[0]
    herm_err = float(np.max(np.abs(h - h.conj().T)))
    if herm_err > 1e-10 * max(1.0, float(np.max(np.abs(h)))):
        raise ValueError(f"matrix is not Hermitian (deviation {herm_err:.3e})")
    if not 1 <= n_steps <= dim:
        raise ValueError(f"n_steps must be in [1, {dim}], got {n_steps}")
    if breakdown_tol is None:
        breakdown_tol = 1e-12 * float(np.linalg.norm(h))

    v = np.asarray(start, dtype=complex).reshape(dim)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("start vector must be nonzero")
    basis = np.zeros((dim, n_steps), dtype=complex)
    basis[:, 0] = v / nrm

    eps = np.zeros(n_steps)
    offdiag = np.zeros(max(n_steps - 1, 0))
    for i in range(n_steps):
        vi = basis[:, i]
        hv = h @ vi
        eps[i] = (vi.conj() @ hv).real
        if i == n_steps - 1:
            break
        p = hv - eps[i] * vi
        if i > 0:
            p = p - offdiag[i - 1] * basis[:, i - 1]
        if reorthogonalize:
            # Two classical Gram-Schmidt sweeps against every earlier vector.
            for _ in range(2):
                p = p - basis[:, : i + 1] @ (basis[:, : i + 1].conj().T @ p)
        c = float(np.linalg.norm(p))
        if c <= breakdown_tol:
            offdiag[i] = 0.0
            basis[:, i + 1] = _orthogonal_unit_vector(basis[:, : i + 1])
        else:
            offdiag[i] = c
            basis[:, i + 1] = p / c

    if return_basis:
        return eps, offdiag, basis
    return eps, offdiag


def _orthogonal_unit_vector(existing: np.ndarray) -> np.ndarray:
    """Deterministic unit vector orthogonal to the columns of ``existing``."""
    dim = existing.shape[0]
    for j in range(dim):
        e = np.zeros(dim, dtype=complex)
        e[j] = 1.0
        for _ in range(2):
            e = e - existing @ (existing.conj().T @ e)
        nrm = np.linalg.norm(e)
        if nrm > 1e-6:
            return e / nrm
    raise np.linalg.LinAlgError("no orthogonal complement found")


@dataclass(frozen=True)
class CouplingChain:
    """Nearest-neighbor chain: site detunings and bond couplings (cm^-1)."""

    detunings: np.ndarray
    couplings: np.ndarray

    def __post_init__(self):
        det = np.array(self.detunings, dtype=float)
        cpl = np.array(self.couplings, dtype=float)
        if det.ndim != 1 or cpl.ndim != 1:
            raise ValueError("detunings and couplings must be 1-d")
        if len(det) < 1 or len(cpl) != len(det) - 1:
            raise ValueError(
                f"need len(couplings) == len(detunings) - 1, "
                f"got {len(cpl)} and {len(det)}"
            )
        if np.any(cpl < 0):
            raise ValueError("couplings must be nonnegative")
        det.setflags(write=False)
        cpl.setflags(write=False)
        object.__setattr__(self, "detunings", det)
        object.__setattr__(self, "couplings", cpl)

    @property
    def n_sites(self) -> int:
        return len(self.detunings)


def chain_hamiltonian(chain: CouplingChain) -> np.ndarray:
    """Tridiagonal single-photon Hamiltonian of a chain."""
    h = np.diag(chain.detunings)
    n = chain.n_sites
    idx = np.arange(n - 1)
    h[idx, idx + 1] = chain.couplings
    h[idx + 1, idx] = chain.couplings
    return h


@dataclass(frozen=True)
class AptLattice:
    """The full device: ports L and R side-coupled to one chain.

    Both ports attach to the first chain site; they never couple to each
    other directly.  The anti-parity-time structure of the port dynamics is
    entirely reservoir-induced.
    """

    chain: CouplingChain
    j_left: float
    j_right: float
    port_detuning: float = 0.0

    def __post_init__(self):
        if self.j_left <= 0 or self.j_right <= 0:
            raise ValueError(
                f"port couplings must be positive, got {self.j_left}, {self.j_right}"
            )

    @property
    def n_modes(self) -> int:
        return 2 + self.chain.n_sites

    def hamiltonian(self) -> np.ndarray:
        return build_apt_lattice(
            self.chain, self.j_left, self.j_right, self.port_detuning
        )


def build_apt_lattice(
    chain: CouplingChain,
    j_left: float,
    j_right: float,
    port_detuning: float = 0.0,
) -> np.ndarray:
    """Single-photon Hamiltonian of ports plus chain.

    Mode ordering: 0 = L, 1 = R, then the chain sites in order.  The L-R
    direct coupling is identically zero.
    """
    if j_left <= 0 or j_right <= 0:
        raise ValueError(f"port couplings must be positive, got {j_left}, {j_right}")
    n = chain.n_sites
    h = np.zeros((2 + n, 2 + n))
    h[0, 0] = port_detuning
    h[1, 1] = port_detuning
    h[2:, 2:] = chain_hamiltonian(chain)
    h[0, 2] = h[2, 0] = j_left
    h[1, 2] = h[2, 1] = j_right
    return h


def design_chain(
    gamma: float = 0.25,
    half_bandwidth: float = 4.0,
    k_levels: int = 500,
    n_sites: int = 51,
) -> CouplingChain:
    """Synthesize the reservoir chain for given decay rate and bandwidth.

    Builds the discretized star with 2*k_levels + 1 levels, then runs the
    anchored Lanczos pass for n_sites steps starting from the anchor.  The
    first returned coupling is the anchor-chain bond (this becomes the
    port-chain coupling of the device); the rest converge rapidly to B/2.

    The continuum limit of the first coupling is sqrt(2 * gamma * B / pi).
    """
    spec = BathSpec(half_bandwidth=half_bandwidth, n_levels=2 * k_levels + 1, gamma=gamma)
    star = build_ww_star(spec)
    start = np.zeros(star.shape[0])
    start[0] = 1.0
    if not 1 <= n_sites <= star.shape[0]:
        raise ValueError(
            f"n_sites must be in [1, {star.shape[0]}], got {n_sites}"
        )
    eps, cpl = lanczos_tridiagonalize(star, start, n_sites)
    return CouplingChain(eps, cpl)


def standard_lattice(
    n_env: int = 50,
    gamma: float = 0.25,
    half_bandwidth: float = 4.0,
    k_levels: int = 500,
) -> AptLattice:
    """Device with both ports attached to an n_env-site synthesized chain.

    The anchored Lanczos chain has the anchor as its first site; the anchor
    slot is where the ports themselves sit, so the device keeps the
    anchor-chain bond as the (equal) port coupling and the remaining n_env
    sites as the environment.
    """
    full = design_chain(
        gamma=gamma,
        half_bandwidth=half_bandwidth,
        k_levels=k_levels,
        n_sites=n_env + 1,
    )
    j_port = float(full.couplings[0])
    env = CouplingChain(full.detunings[1:], full.couplings[1:])
    return AptLattice(env, j_port, j_port)


# Exponential fit J(d) = amp * exp(-d / decay) through two measured points:
# J = 0.8 cm^-1 at d = 20.0 um and J = 2.3 cm^-1 at d = 14.3 um.
SPACING_CALIBRATION = ((0.8, 20.0), (2.3, 14.3))
_DECAY_UM = (SPACING_CALIBRATION[0][1] - SPACING_CALIBRATION[1][1]) / math.log(
    SPACING_CALIBRATION[1][0] / SPACING_CALIBRATION[0][0]
)
_AMP = SPACING_CALIBRATION[0][0] * math.exp(SPACING_CALIBRATION[0][1] / _DECAY_UM)
_J_RANGE = (0.1, 10.0)


def coupling_to_spacing(coupling: float) -> float:
    """Waveguide gap (um) realizing a coupling (cm^-1).

    Inverts the exponential calibration d = decay * ln(amp / J).  Couplings
    outside [0.1, 10] cm^-1 extrapolate beyond the calibrated regime and
    trigger a warning.
    """
    j = float(coupling)
    if j <= 0:
        raise ValueError(f"coupling must be positive, got {j}")
    if not _J_RANGE[0] <= j <= _J_RANGE[1]:
        warnings.warn(
            f"coupling {j:.3g} cm^-1 outside calibrated range "
            f"[{_J_RANGE[0]}, {_J_RANGE[1]}], spacing extrapolated",
            stacklevel=2,
        )
    return _DECAY_UM * math.log(_AMP / j)


def spacing_to_coupling(spacing: float) -> float:
    """Coupling (cm^-1) produced by a waveguide gap (um)."""
    d = float(spacing)
    if d <= 0:
        raise ValueError(f"spacing must be positive, got {d}")
    j = _AMP * math.exp(-d / _DECAY_UM)
    if not _J_RANGE[0] <= j <= _J_RANGE[1]:
        warnings.warn(
            f"spacing {d:.3g} um maps to coupling {j:.3g} cm^-1 outside the "
            f"calibrated range [{_J_RANGE[0]}, {_J_RANGE[1]}]",
            stacklevel=2,
        )
    return j
