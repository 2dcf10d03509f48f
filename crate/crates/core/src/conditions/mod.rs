//! Finite-budget verifiers for backward contraction, large derivatives and
//! the univalent pullback condition, plus the quantitative scale structure
//! they are built on.

mod bc;
mod koebe;
mod ld;
mod scale;

pub use bc::{check_bc, check_bc_with, check_univalent_pullback, check_univalent_pullback_with, confirm_bc_witness, BcOptions};
pub use koebe::{koebe_variation_probe, KoebeOptions, KoebeProbe};
pub use ld::{check_ld, check_ld_with};
pub use scale::{
    estimate_kappa0, return_decomposition, scaling_exponent, Block, Kappa0Estimate, ReturnDecomposition,
    ScaleStructure,
};

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Surrogate for the BC-to-LD constant; configurable, never asserted.
pub const R0_ESTIMATE: f64 = 8.0;
/// Surrogate for the LD-to-BC constant; configurable, never asserted.
pub const K0_ESTIMATE: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "BC")]
    BackwardContraction,
    #[serde(rename = "LD")]
    LargeDerivative,
    #[serde(rename = "UPB")]
    UnivalentPullback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NoViolationWithinBudget,
    Violated,
    BudgetExhausted,
}

impl Verdict {
    pub fn describe(self) -> &'static str {
        match self {
            Verdict::NoViolationWithinBudget => "no violation within budget",
            Verdict::Violated => "violated",
            Verdict::BudgetExhausted => "budget exhausted",
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::NoViolationWithinBudget
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub branch_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta_levels: Option<usize>,
    /// Iterations used to decide which critical points lie in the Julia set.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub classification: Option<usize>,
}

/// A violation record. Which fields are present depends on the condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// The critical point whose neighbourhood is being pulled back (BC, UPB)
    /// or whose orbit returns (LD).
    #[serde(with = "crate::cser::one")]
    pub critical_point: Complex64,
    /// Pullback depth or return time.
    pub depth: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default, with = "crate::cser::opt")]
    pub point: Option<Complex64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diameter: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dist_to_critical_values: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub total_degree: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub derivative: Option<f64>,
    /// Real checks: the offending component as an interval.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub interval: Option<[f64; 2]>,
}

impl Witness {
    pub(crate) fn bare(critical_point: Complex64, depth: usize) -> Self {
        Self {
            critical_point,
            depth,
            delta: None,
            point: None,
            diameter: None,
            dist_to_critical_values: None,
            total_degree: None,
            derivative: None,
            interval: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub schema_version: u32,
    pub condition: Condition,
    pub parameters: BTreeMap<String, f64>,
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    pub budget: Budget,
    /// False when an enumeration was truncated.
    pub complete: bool,
    /// The critical points the condition was checked at.
    #[serde(with = "crate::cser::vec")]
    pub critical_points: Vec<Complex64>,
    /// BC/UPB: largest `diam W / δ` among components within `δ` of a critical
    /// value. LD: smallest `|Df^n(f(c))| / K` over returns. Absent when the
    /// check was vacuous.
    pub margin: Option<f64>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_hash: Option<String>,
}

impl ConditionReport {
    pub(crate) fn new(condition: Condition, parameters: &[(&str, f64)], budget: Budget) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            condition,
            parameters: parameters.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            verdict: Verdict::NoViolationWithinBudget,
            witnesses: Vec::new(),
            budget,
            complete: true,
            critical_points: Vec::new(),
            margin: None,
            notes: Vec::new(),
            config_hash: None,
        }
    }

    pub(crate) fn finish(mut self) -> Self {
        self.verdict = if !self.witnesses.is_empty() {
            Verdict::Violated
        } else if !self.complete {
            Verdict::BudgetExhausted
        } else {
            Verdict::NoViolationWithinBudget
        };
        self
    }

    pub(crate) fn merge_margin(&mut self, value: f64, larger_is_worse: bool) {
        self.margin = Some(match self.margin {
            None => value,
            Some(m) if larger_is_worse => m.max(value),
            Some(m) => m.min(value),
        });
    }
}
