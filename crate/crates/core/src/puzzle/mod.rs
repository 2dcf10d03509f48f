//! External rays, Yoccoz-style puzzles and first-return maps.

mod green;
mod pieces;
mod rays;
mod returns;

pub use green::{green, GreenEvaluation, GREEN_RADIUS};
pub use pieces::{
    build_puzzle, build_puzzle_with, markov_audit, nice_check, BoundarySegment, CriticalNest, LandingRecord,
    MarkovRecord, NiceReport, NiceViolation, Puzzle, PuzzleOptions, PuzzlePiece, SampleLabel, MARKOV_TOLERANCE,
    NICE_TOLERANCE,
};
pub use rays::{
    periodic_landing_point, trace_external_ray, Angle, ExternalRay, DEFAULT_G_MIN, LANDING_TOLERANCE,
    RAY_STEPS_PER_LEVEL,
};
pub use returns::{
    domain_moduli, first_return_sample, first_return_sample_with, rho_nice_estimate, ReturnDomain, ReturnMapSample,
    ReturnOptions, ReturnSample,
};
