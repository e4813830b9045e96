"""Hill-operator spectra, KdV action variables and Birkhoff-coordinate flows."""
from .actions import action, action_gap_ratio, action_sequence, gap_actions, modulus_map
from .birkhoff import BirkhoffVector, actions_of, from_polar, seq_norm
from .deformation import (
    DampingReport,
    damping_sequence,
    flow_exact,
    flow_numeric,
    verify_norm_bound,
)
from .floquet import FloquetResult, GapSequence, Spectrum, gap_lengths, monodromy, periodic_spectrum
from .potentials import (
    Potential,
    evaluate,
    from_fourier,
    gardner_bracket,
    kdv_hamiltonian,
    l2_gradient_fd,
    l2_gradients_fd,
    random_potential,
    sobolev_norm,
)
from .regularity import decay_exponent_fit, theorem2_experiment

__version__ = "0.1.0"
