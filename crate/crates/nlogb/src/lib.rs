//! Deterministic simulator of the nonlinear optical Galton board: a coined
//! walk on the integer lattice where every site applies an
//! intensity-dependent (Kerr-type) phase to the amplitudes passing through
//! it, plus analysis of what the nonlinearity produces — self-trapped
//! soliton-like walkers, their head-on collisions, and the transitions
//! between ballistic escape, recollapse, and chaotic or localized motion
//! as the nonlinearity strength grows.
//!
//! Everything is pure f64 arithmetic with a fixed operation order, so a
//! configuration always reproduces the same amplitudes bit for bit.

pub mod analysis;
pub mod io;
pub mod observables;
pub mod walk;

pub use analysis::{
    analyze_run, analyze_run_with, classify_phase, contact_episodes, detect_collision,
    detect_turning_point, fit_hyperbola, mean_velocity, plateau_onset, resolution_time,
    tail_stats, AnalysisError, ChaoticBehavior, Classification, CollisionEvent, ContactEpisode,
    FitResult, PhaseLabel, RunAnalysis, TailStats,
};
pub use io::{
    read_manifest_json, read_summary_json, read_sweep_index, write_density_grid,
    write_distribution_csv, write_fit_report, write_manifest_json, write_summary_json,
    write_sweep_index, IoError, RunManifest, RunSummary, SweepIndexRow,
};
pub use observables::{
    center_of_mass, peak_position, probability, sigma, soliton_intensity, track_solitons,
    ObservablesError, ProbabilityDist, Side, SolitonTrack, SolitonTracker, TrackPoint,
};
pub use walk::{
    evolve, evolve_with, make_initial, step, Amplitude, CoinOp, InitialCondition, PhaseInput,
    PhaseRule, SimConfig, SiteAmplitude, SpinorField, WalkError,
};
