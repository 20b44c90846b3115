"""Open-system dynamics of the two ports with photon recycling.

Beyond post-selection, photons lost to the reservoir reappear in lower
photon-number sectors.  The two-mode master equation used here is

    drho/dz = -i (H_eff rho - rho H_eff^dag)
              + 2 Gamma (a_L rho a_L^dag + a_R rho a_R^dag),

with H_eff = -i Gamma (a_L^dag a_R + a_R^dag a_L + n_L + n_R).  The
generator is completely positive (each piece is), and it leaves every
fixed-photon-number diagonal block evolving autonomously, which is what the
post-selected observables condition on.  Note that with this jump
normalization the recycling terms overcount the anti-damping for
reservoir-dark coherences, so the TOTAL trace is not conserved and can grow
(linearly, for an attractor input).  Sector-conditioned quantities are
unaffected; anything reported here is normalized within a sector via
postselect_block.

Density matrices are stored over the product basis |n_L, n_R> with both
occupancies truncated at n_max and index n_L * (n_max + 1) + n_R.
Superoperators act on column-stacked matrices: vec(A rho B) =
kron(B.T, A) vec(rho) with Fortran-order flattening.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from ._matfun import expm_checked
from .fock import TwoModeNState
from .propagate import FullyDissipatedError

__all__ = [
    "DensityMatrix",
    "fock_index",
    "second_quantized_effective",
    "build_liouvillian",
    "evolve_density",
    "postselect_block",
    "purity",
    "partial_trace",
    "participation_ratio",
    "renyi_entropy",
    "choi_matrix",
    "dephased_pair",
    "sampled_phase_mixture",
]

_HERM_TOL = 1e-10
_PSD_TOL = 1e-10
_TRACE_TOL = 1e-10


def fock_index(n_left: int, n_right: int, n_max: int) -> int:
    """Flat index of |n_left, n_right> in the truncated product basis."""
    if not (0 <= n_left <= n_max and 0 <= n_right <= n_max):
        raise ValueError(
            f"occupancies ({n_left}, {n_right}) outside truncation {n_max}"
        )
    return n_left * (n_max + 1) + n_right


class DensityMatrix:
    """Two-mode density operator on the truncated Fock basis.

    Construction validates hermiticity (within 1e-10), positive
    semidefiniteness (eigenvalues above -1e-10, scaled by the trace), and,
    unless ``check_trace=False``, that the trace does not exceed 1 + 1e-10.
    The trace check has the escape hatch because the recycling generator in
    this module is not trace-preserving; evolved matrices legitimately carry
    trace above 1 and must still be representable.
    """

    def __init__(self, matrix: np.ndarray, *, check_trace: bool = True):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"matrix must be square, got shape {m.shape}")
        side = m.shape[0]
        n_max = int(round(math.sqrt(side))) - 1
        if (n_max + 1) ** 2 != side:
            raise ValueError(
                f"matrix side {side} is not a squared mode dimension"
            )
        scale = max(1.0, float(np.max(np.abs(m))))
        herm = float(np.max(np.abs(m - m.conj().T)))
        if herm > _HERM_TOL * scale:
            raise ValueError(f"matrix is not Hermitian (deviation {herm:.3e})")
        eigs = np.linalg.eigvalsh((m + m.conj().T) / 2.0)
        if eigs[0] < -_PSD_TOL * scale:
            raise ValueError(
                f"matrix is not positive semidefinite (min eigenvalue {eigs[0]:.3e})"
            )
        tr = float(np.trace(m).real)
        if check_trace and tr > 1.0 + _TRACE_TOL:
            raise ValueError(f"trace {tr} exceeds 1")
        if tr <= 0.0:
            raise ValueError(f"trace must be positive, got {tr}")
        m.setflags(write=False)
        self.matrix = m
        self.n_max = n_max

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @classmethod
    def from_pure(cls, state: TwoModeNState, n_max: int | None = None) -> "DensityMatrix":
        """Projector onto a normalized port state, embedded at truncation n_max."""
        n = state.n_photons
        cap = n if n_max is None else int(n_max)
        if cap < n:
            raise ValueError(f"truncation {cap} cannot hold {n} photons")
        dim = (cap + 1) ** 2
        vec = np.zeros(dim, dtype=complex)
        amps = state.amplitudes / state.norm
        for k, a in enumerate(amps):
            vec[fock_index(n - k, k, cap)] = a
        return cls(np.outer(vec, vec.conj()))

    @classmethod
    def from_sector_block(
        cls, block: np.ndarray, n_photons: int, n_max: int | None = None
    ) -> "DensityMatrix":
        """Embed an (N+1) x (N+1) fixed-photon-number block as a full matrix."""
        n = int(n_photons)
        b = np.asarray(block, dtype=complex)
        if b.shape != (n + 1, n + 1):
            raise ValueError(f"expected shape {(n + 1, n + 1)}, got {b.shape}")
        cap = n if n_max is None else int(n_max)
        if cap < n:
            raise ValueError(f"truncation {cap} cannot hold {n} photons")
        dim = (cap + 1) ** 2
        full = np.zeros((dim, dim), dtype=complex)
        idx = [fock_index(n - k, k, cap) for k in range(n + 1)]
        full[np.ix_(idx, idx)] = b
        return cls(full)

    @classmethod
    def vacuum(cls, n_max: int) -> "DensityMatrix":
        dim = (int(n_max) + 1) ** 2
        m = np.zeros((dim, dim), dtype=complex)
        m[0, 0] = 1.0
        return cls(m)


def _lowering(n_max: int) -> np.ndarray:
    a = np.zeros((n_max + 1, n_max + 1))
    n = np.arange(1, n_max + 1)
    a[n - 1, n] = np.sqrt(n)
    return a


def _port_lowering(n_max: int):
    a = _lowering(n_max)
    eye = np.eye(n_max + 1)
    return np.kron(a, eye), np.kron(eye, a)


def second_quantized_effective(gamma: float, n_max: int) -> np.ndarray:
    """H_eff = -i gamma (a_L^dag a_R + a_R^dag a_L + n_L + n_R), truncated."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    a_l, a_r = _port_lowering(int(n_max))
    hop = a_l.conj().T @ a_r + a_r.conj().T @ a_l
    number = a_l.conj().T @ a_l + a_r.conj().T @ a_r
    return -1j * gamma * (hop + number)


def build_liouvillian(gamma: float, n_max: int) -> np.ndarray:
    """Column-stacked superoperator of the recycling master equation.

    Returns the dense matrix L with d vec(rho)/dz = L vec(rho), where
    vec flattens in Fortran (column) order.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    cap = int(n_max)
    if cap < 0:
        raise ValueError(f"n_max must be nonnegative, got {cap}")
    h = second_quantized_effective(gamma, cap)
    a_l, a_r = _port_lowering(cap)
    eye = np.eye((cap + 1) ** 2)
    liou = -1j * np.kron(eye, h) + 1j * np.kron(h.conj(), eye)
    liou += 2.0 * gamma * (np.kron(a_l, a_l) + np.kron(a_r, a_r))
    return liou


def _vec(matrix: np.ndarray) -> np.ndarray:
    return np.asarray(matrix).reshape(-1, order="F")


def _unvec(vector: np.ndarray) -> np.ndarray:
    side = int(round(math.sqrt(vector.size)))
    return vector.reshape((side, side), order="F")


def evolve_density(
    liouvillian: np.ndarray, rho: DensityMatrix, z: float, method: str = "expm"
) -> DensityMatrix:
    """Evolve a density matrix by exp(L z).

    ``method`` selects the exponential: "expm" uses the Pade approximant,
    "eig" diagonalizes the superoperator (falling back to Pade when the
    eigenbasis is ill-conditioned, which happens here because the sector
    cascade makes L defective), and "both" runs the two and raises
    ArithmeticError if they disagree beyond 1e-6.
    """
    liou = np.asarray(liouvillian, dtype=complex)
    dim = rho.dim
    if liou.shape != (dim * dim, dim * dim):
        raise ValueError(
            f"liouvillian shape {liou.shape} does not match state dimension {dim}"
        )
    if z < 0:
        raise ValueError(f"z must be nonnegative, got {z}")
    v0 = _vec(rho.matrix)
    results = {}
    if method in ("expm", "both"):
        results["expm"] = scipy.linalg.expm(liou * float(z)) @ v0
    if method in ("eig", "both"):
        results["eig"] = expm_checked(liou * float(z)) @ v0
    if not results:
        raise ValueError(f"method must be 'expm', 'eig' or 'both', got {method!r}")
    if method == "both":
        gap = float(np.max(np.abs(results["expm"] - results["eig"])))
        if gap > 1e-6:
            raise ArithmeticError(
                f"matrix exponential paths disagree by {gap:.3e} (limit 1e-6)"
            )
    out = _unvec(results.get("expm", results.get("eig")))
    out = (out + out.conj().T) / 2.0
    return DensityMatrix(out, check_trace=False)


def postselect_block(rho: DensityMatrix, n_photons: int) -> np.ndarray:
    """Trace-1 block of the N-photon sector, indexed by right occupancy.

    Raises FullyDissipatedError when the sector carries no weight.
    """
    n = int(n_photons)
    if n > rho.n_max:
        raise ValueError(f"sector {n} outside truncation {rho.n_max}")
    idx = [fock_index(n - k, k, rho.n_max) for k in range(n + 1)]
    block = rho.matrix[np.ix_(idx, idx)]
    weight = float(np.trace(block).real)
    if weight < 1e-300:
        raise FullyDissipatedError(
            f"sector {n} weight {weight:.3e} too small to condition on"
        )
    return block / weight


def purity(rho) -> float:
    """Tr(rho^2) of a density matrix or raw block (normalized input assumed)."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    return float(np.trace(m @ m).real)


def partial_trace(rho: DensityMatrix, keep: str = "right") -> np.ndarray:
    """Reduced single-mode state, tracing out the other port."""
    d = rho.n_max + 1
    m4 = rho.matrix.reshape(d, d, d, d)
    if keep == "right":
        return np.einsum("abad->bd", m4)
    if keep == "left":
        return np.einsum("abcb->ac", m4)
    raise ValueError(f"keep must be 'left' or 'right', got {keep!r}")


def participation_ratio(reduced: np.ndarray) -> float:
    """Schmidt participation 1 / sum_k lambda_k^2 of a reduced state."""
    return 1.0 / purity(reduced)


def renyi_entropy(reduced: np.ndarray, alpha: float = 2.0) -> float:
    """Renyi entropy in bits; alpha = 2 gives log2 of the participation."""
    if alpha <= 0 or alpha == 1.0:
        raise ValueError(f"alpha must be positive and not 1, got {alpha}")
    m = reduced.matrix if isinstance(reduced, DensityMatrix) else np.asarray(reduced)
    eigs = np.clip(np.linalg.eigvalsh(m), 0.0, None)
    eigs = eigs / eigs.sum()
    return float(math.log2(np.sum(eigs**alpha)) / (1.0 - alpha))


def choi_matrix(superop: np.ndarray) -> np.ndarray:
    """Choi matrix of a column-stacked superoperator.

    The map is completely positive exactly when the returned matrix is
    positive semidefinite.
    """
    s = np.asarray(superop, dtype=complex)
    dim2 = s.shape[0]
    d = int(round(math.sqrt(dim2)))
    if s.shape != (dim2, dim2) or d * d != dim2:
        raise ValueError(f"superoperator shape {s.shape} is not a squared square")
    choi = np.zeros((dim2, dim2), dtype=complex)
    for k in range(d):
        for l in range(d):
            basis = np.zeros((d, d), dtype=complex)
            basis[k, l] = 1.0
            mapped = _unvec(s @ _vec(basis))
            choi += np.kron(basis, mapped)
    return choi


def dephased_pair(
    state_a: TwoModeNState, state_b: TwoModeNState, n_max: int | None = None
) -> DensityMatrix:
    """Equal incoherent mixture of two pure port states."""
    if state_a.n_photons != state_b.n_photons:
        raise ValueError("mixture components must share the photon number")
    rho_a = DensityMatrix.from_pure(state_a, n_max=n_max)
    rho_b = DensityMatrix.from_pure(state_b, n_max=n_max)
    return DensityMatrix((rho_a.matrix + rho_b.matrix) / 2.0)


def sampled_phase_mixture(
    state_a: TwoModeNState,
    state_b: TwoModeNState,
    n_samples: int,
    seed: int,
    n_max: int | None = None,
) -> DensityMatrix:
    """Monte Carlo dephasing: average projectors over a random relative phase.

    Draws theta uniformly and averages the projectors of
    (a + e^{i theta} b) / norm.  For orthogonal equal-norm components this
    converges to dephased_pair at the usual 1/sqrt(n_samples) rate.
    """
    if state_a.n_photons != state_b.n_photons:
        raise ValueError("mixture components must share the photon number")
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    rng = np.random.default_rng(seed)
    n = state_a.n_photons
    total = None
    for theta in rng.uniform(0.0, 2.0 * math.pi, size=n_samples):
        combo = state_a.amplitudes + np.exp(1j * theta) * state_b.amplitudes
        psi = TwoModeNState(n, combo)
        rho = DensityMatrix.from_pure(psi, n_max=n_max)
        total = rho.matrix if total is None else total + rho.matrix
    return DensityMatrix(total / n_samples)
