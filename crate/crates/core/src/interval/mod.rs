//! Multimodal interval maps: complete monotone-branch pullbacks, exact
//! backward contraction and large derivative checks on the line, and a
//! probe of the real Schwarz ratio.

mod checks;
mod map;
mod schwarz;
mod tree;

pub use checks::{
    check_bc_interval, check_bc_interval_with, check_ld_interval, check_ld_interval_with, selected_critical,
    tilde_interval, CriticalSelection, IntervalBcOptions,
};
pub use map::{IntervalMap, MapSpec, RealCritical};
pub use schwarz::{
    real_schwarz_probe, real_schwarz_probe_with, sample_branch, HistogramBin, SchwarzBranch, SchwarzOptions,
    SchwarzProbe,
};
pub use tree::{
    interval_pullback, interval_pullback_capped, solve_on_branch, IntervalComponent, IntervalNode,
    IntervalPullbackTree, COLLAPSE_WIDTH, ENDPOINT_TOLERANCE,
};
