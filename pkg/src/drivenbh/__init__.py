"""Driven-dissipative Bose-Hubbard cavity array: steady states, collective
modes and pump-and-probe response within a site-factorized density-matrix
ansatz."""

__version__ = "0.1.0"

from .basis import (
    GutzwillerState,
    LocalBasis,
    ModelParams,
    flat_index,
    maximally_mixed_state,
    pure_state,
    seeded_mixed_state,
    unflatten_index,
    vacuum_state,
    validate_state,
)
from .meanfield import (
    NessResult,
    ObservableSet,
    PropagateOpts,
    analytic_ip_ness,
    build_superoperator,
    critical_hopping_estimate,
    equilibrium_frequency,
    extract_limit_cycle_frequency,
    observables,
    onset_from_sweep,
    order_parameter,
    phase_scan,
    propagate_to_ness,
    rotating_frame_transform,
)

__all__ = [name for name in dir() if not name.startswith("_")]
