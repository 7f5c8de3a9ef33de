//! Protocol parameters, the three-photon signal-idler state, backgrounds and
//! the two hypotheses.

mod builders;
mod params;

pub use builders::{
    background_state, classical_trace_distance, evolve_exact, evolve_exact_with_tol,
    hypothesis_h0, hypothesis_h1, idler_rotation, mean_photon_number, thermal_state,
    three_photon_state, Background, EvolvedState, HypothesisPair, ThermalState, DEFAULT_LEAK_TOL,
};
pub use params::{
    flat_levels, parse_f64, parse_usize, thermal_cutoff, BackgroundVariant, IdlerVariant,
    ProtocolParams, RegimeFlags, DEFAULT_DOMINANCE, DEFAULT_TAIL_BOUND, MAX_AUTO_CUTOFF,
};
