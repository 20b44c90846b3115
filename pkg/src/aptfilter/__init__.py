"""Anti-parity-time photonic entanglement filter: design and simulation.

Two waveguide ports share a synthesized one-dimensional reservoir.  The
reservoir-induced dynamics is purely dissipative coupling, which relaxes
any N-photon input onto a single entangled dark state under post-selection.
This package designs the waveguide chain realizing that reservoir,
propagates multi-photon states through the full lattice, and provides the
effective and open-system reductions plus tomography and robustness tools.
"""

__version__ = "0.1.0"

from .fock import (
    DegenerateKernelError,
    PhotonConfig,
    TwoModeNState,
    attractor_state,
    fidelity_to,
    kernel_steady_state,
    state_from_csv,
    state_to_csv,
)
from .lattice import (
    AptLattice,
    BathSpec,
    CouplingChain,
    build_apt_lattice,
    build_ww_star,
    chain_hamiltonian,
    coupling_to_spacing,
    design_chain,
    lanczos_tridiagonalize,
    spacing_to_coupling,
    standard_lattice,
)
from .propagate import (
    BALANCED_COUPLER,
    NOON_COUPLER,
    NOON_COUPLER_SINGLE,
    NOON_PHASE_GATE,
    FullyDissipatedError,
    ModeUnitary,
    PostSelectedResult,
    SpectralPropagator,
    apply_coupler,
    apply_phase,
    lift_two_mode,
    n_photon_amplitude,
    noon_convert,
    noon_state,
    permanent,
    postselect_state,
    postselect_two_ports,
    propagator,
    pt_coupler_reference,
    steady_state_asymmetric,
)
from .effective import (
    EffectiveAptHamiltonian,
    build_effective,
    evolve_effective,
    ww_decay_reference,
)
from .lindblad import (
    DensityMatrix,
    build_liouvillian,
    choi_matrix,
    dephased_pair,
    evolve_density,
    fock_index,
    partial_trace,
    participation_ratio,
    postselect_block,
    purity,
    renyi_entropy,
    sampled_phase_mixture,
    second_quantized_effective,
)
from .tomography import (
    AmbiguousPhaseError,
    PhaseEstimate,
    QUARTER_PHASE,
    TomographyDataset,
    UnconstrainedPhaseEstimate,
    alternate_phase_convention,
    fidelity_diag,
    fit_phases,
    fit_phases_unconstrained,
    fit_single_photon_phase,
    forward_probs,
    reconstruct_density,
    reconstruct_state,
)
from .robustness import (
    DfsCheckResult,
    EnsembleResult,
    PerturbationSpec,
    dfs_check,
    run_ensemble,
    self_heal,
)

__all__ = [
    "__version__",
    # fock
    "DegenerateKernelError",
    "PhotonConfig",
    "TwoModeNState",
    "attractor_state",
    "fidelity_to",
    "kernel_steady_state",
    "state_from_csv",
    "state_to_csv",
    # lattice
    "AptLattice",
    "BathSpec",
    "CouplingChain",
    "build_apt_lattice",
    "build_ww_star",
    "chain_hamiltonian",
    "coupling_to_spacing",
    "design_chain",
    "lanczos_tridiagonalize",
    "spacing_to_coupling",
    "standard_lattice",
    # propagate
    "BALANCED_COUPLER",
    "NOON_COUPLER",
    "NOON_COUPLER_SINGLE",
    "NOON_PHASE_GATE",
    "FullyDissipatedError",
    "ModeUnitary",
    "PostSelectedResult",
    "SpectralPropagator",
    "apply_coupler",
    "apply_phase",
    "lift_two_mode",
    "n_photon_amplitude",
    "noon_convert",
    "noon_state",
    "permanent",
    "postselect_state",
    "postselect_two_ports",
    "propagator",
    "pt_coupler_reference",
    "steady_state_asymmetric",
    # effective
    "EffectiveAptHamiltonian",
    "build_effective",
    "evolve_effective",
    "ww_decay_reference",
    # lindblad
    "DensityMatrix",
    "build_liouvillian",
    "choi_matrix",
    "dephased_pair",
    "evolve_density",
    "fock_index",
    "partial_trace",
    "participation_ratio",
    "postselect_block",
    "purity",
    "renyi_entropy",
    "sampled_phase_mixture",
    "second_quantized_effective",
    # tomography
    "AmbiguousPhaseError",
    "PhaseEstimate",
    "UnconstrainedPhaseEstimate",
    "QUARTER_PHASE",
    "TomographyDataset",
    "alternate_phase_convention",
    "fidelity_diag",
    "fit_phases",
    "fit_phases_unconstrained",
    "fit_single_photon_phase",
    "forward_probs",
    "reconstruct_density",
    "reconstruct_state",
    # robustness
    "DfsCheckResult",
    "EnsembleResult",
    "PerturbationSpec",
    "dfs_check",
    "run_ensemble",
    "self_heal",
]
