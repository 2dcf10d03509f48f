use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{DynError, Result};
use crate::interval::IntervalMap;
use crate::poly::Polynomial;
use crate::puzzle::Angle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `z^2 + c` with `c = c_re + i c_im`.
    Quadratic,
    /// Complex polynomial from `coefficients` (+ `coefficients_im`).
    Polynomial,
    /// `a x (1 - x)` on `[0, 1]`.
    Logistic,
    /// `x^2 + c_re` on its invariant interval.
    RealQuadratic,
    /// Real polynomial from `coefficients` on `domain`.
    RealPolynomial,
}

impl Family {
    pub fn is_real(self) -> bool {
        matches!(self, Family::Logistic | Family::RealQuadratic | Family::RealPolynomial)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Orbit,
    Classify,
    Pullback,
    Bc,
    Ld,
    Upb,
    Kappa0,
    Decompose,
    Ray,
    Puzzle,
    Nice,
    Schwarz,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Orbit => "orbit",
            CheckKind::Classify => "classify",
            CheckKind::Pullback => "pullback",
            CheckKind::Bc => "bc",
            CheckKind::Ld => "ld",
            CheckKind::Upb => "upb",
            CheckKind::Kappa0 => "kappa0",
            CheckKind::Decompose => "decompose",
            CheckKind::Ray => "ray",
            CheckKind::Puzzle => "puzzle",
            CheckKind::Nice => "nice",
            CheckKind::Schwarz => "schwarz",
        }
    }

    fn supports(self, family: Family) -> bool {
        match self {
            CheckKind::Orbit | CheckKind::Pullback | CheckKind::Bc | CheckKind::Ld => true,
            CheckKind::Schwarz => family.is_real(),
            _ => !family.is_real(),
        }
    }
}

/// A flat key-value experiment description, read from TOML. Every key has a
/// default; unknown keys are rejected. `workers` and `out` only steer the run
/// and are left out of the serialized form, so they never change a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub family: Family,
    pub c_re: f64,
    pub c_im: f64,
    pub a: f64,
    /// Constant coefficient first.
    pub coefficients: Vec<f64>,
    pub coefficients_im: Vec<f64>,
    pub domain: Vec<f64>,
    pub checks: Vec<CheckKind>,
    pub seed: u64,
    #[serde(skip_serializing)]
    pub workers: usize,
    #[serde(skip_serializing)]
    pub out: Option<String>,

    pub orbit_start_re: f64,
    pub orbit_start_im: f64,
    pub orbit_iterations: usize,
    pub classify_budget: usize,
    pub pullback_center_re: f64,
    pub pullback_center_im: f64,
    pub pullback_radius: f64,
    pub pullback_depth: usize,
    pub branch_cap: usize,
    pub bc_r: f64,
    pub bc_delta0: f64,
    pub bc_levels: usize,
    pub bc_depth: usize,
    pub ld_k: f64,
    pub ld_radius: f64,
    pub ld_iterations: usize,
    pub upb_delta: f64,
    pub upb_delta_prime: f64,
    pub upb_depth: usize,
    pub kappa0_delta0: f64,
    pub kappa0_levels: usize,
    pub kappa0_samples: usize,
    pub decompose_s: usize,
    pub ray_angle: String,
    pub ray_g_start: f64,
    pub ray_g_min: f64,
    pub puzzle_angles: Vec<String>,
    pub puzzle_epsilon: f64,
    pub puzzle_depth: usize,
    pub nice_horizon: usize,
    pub schwarz_eta: f64,
    pub schwarz_trials: usize,
    pub schwarz_depth: usize,
    /// Real maps: drop critical points attracted to cycles.
    pub exclude_attracted: bool,
    pub scan_parameter: Option<String>,
    pub scan_values: Vec<f64>,
}

/// Config keys a scan can sweep.
pub const SCAN_PARAMETERS: [&str; 4] = ["c_re", "c_im", "a", "bc_r"];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            family: Family::Quadratic,
            c_re: 0.0,
            c_im: 0.0,
            a: 4.0,
            coefficients: Vec::new(),
            coefficients_im: Vec::new(),
            domain: Vec::new(),
            checks: Vec::new(),
            seed: 0,
            workers: 0,
            out: None,
            orbit_start_re: 0.0,
            orbit_start_im: 0.0,
            orbit_iterations: 100,
            classify_budget: 4000,
            pullback_center_re: 0.0,
            pullback_center_im: 0.0,
            pullback_radius: 0.5,
            pullback_depth: 3,
            branch_cap: 100_000,
            bc_r: 2.0,
            bc_delta0: 0.05,
            bc_levels: 4,
            bc_depth: 12,
            ld_k: 10.0,
            ld_radius: 0.1,
            ld_iterations: 1000,
            upb_delta: 0.02,
            upb_delta_prime: 0.05,
            upb_depth: 8,
            kappa0_delta0: 0.1,
            kappa0_levels: 6,
            kappa0_samples: 200,
            decompose_s: 50,
            ray_angle: "0".into(),
            ray_g_start: 1.0,
            ray_g_min: 1e-6,
            puzzle_angles: Vec::new(),
            puzzle_epsilon: 1.0,
            puzzle_depth: 3,
            nice_horizon: 100,
            schwarz_eta: 0.05,
            schwarz_trials: 200,
            schwarz_depth: 12,
            exclude_attracted: false,
            scan_parameter: None,
            scan_values: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| DynError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DynError::Config(msg));
        let positive = [
            ("pullback_radius", self.pullback_radius),
            ("bc_r", self.bc_r),
            ("bc_delta0", self.bc_delta0),
            ("ld_k", self.ld_k),
            ("ld_radius", self.ld_radius),
            ("upb_delta", self.upb_delta),
            ("upb_delta_prime", self.upb_delta_prime),
            ("kappa0_delta0", self.kappa0_delta0),
            ("ray_g_start", self.ray_g_start),
            ("ray_g_min", self.ray_g_min),
            ("puzzle_epsilon", self.puzzle_epsilon),
            ("schwarz_eta", self.schwarz_eta),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{key} must be a positive number, got {v}"));
            }
        }
        let counts = [
            ("orbit_iterations", self.orbit_iterations),
            ("classify_budget", self.classify_budget),
            ("pullback_depth", self.pullback_depth),
            ("branch_cap", self.branch_cap),
            ("bc_levels", self.bc_levels),
            ("bc_depth", self.bc_depth),
            ("ld_iterations", self.ld_iterations),
            ("upb_depth", self.upb_depth),
            ("kappa0_levels", self.kappa0_levels),
            ("kappa0_samples", self.kappa0_samples),
            ("decompose_s", self.decompose_s),
            ("puzzle_depth", self.puzzle_depth),
            ("nice_horizon", self.nice_horizon),
            ("schwarz_trials", self.schwarz_trials),
            ("schwarz_depth", self.schwarz_depth),
        ];
        for (key, v) in counts {
            if v == 0 {
                return bad(format!("{key} must be at least 1"));
            }
        }
        if !(self.bc_r > 1.0) {
            return bad(format!("bc_r must exceed 1, got {}", self.bc_r));
        }
        if !(self.upb_delta_prime > self.upb_delta) {
            return bad("upb_delta_prime must exceed upb_delta".into());
        }
        if !(self.ray_g_start > self.ray_g_min) {
            return bad("ray_g_start must exceed ray_g_min".into());
        }
        match self.family {
            Family::Polynomial | Family::RealPolynomial if self.coefficients.len() < 3 => {
                return bad("polynomial families need at least 3 coefficients".into());
            }
            Family::RealPolynomial if self.domain.len() != 2 => {
                return bad("real-polynomial needs domain = [lo, hi]".into());
            }
            _ => {}
        }
        if !self.coefficients_im.is_empty() && self.coefficients_im.len() != self.coefficients.len() {
            return bad("coefficients_im must match coefficients in length".into());
        }
        for check in &self.checks {
            if !check.supports(self.family) {
                return bad(format!("check {} does not apply to the {:?} family", check.name(), self.family));
            }
        }
        self.ray_angle
            .parse::<Angle>()
            .map_err(|e| DynError::Config(format!("ray_angle: {e}")))?;
        for a in &self.puzzle_angles {
            a.parse::<Angle>()
                .map_err(|e| DynError::Config(format!("puzzle_angles: {e}")))?;
        }
        if let Some(p) = &self.scan_parameter {
            if !SCAN_PARAMETERS.contains(&p.as_str()) {
                return bad(format!("scan_parameter must be c_re, c_im, a or bc_r, got {p}"));
            }
            if self.scan_values.is_empty() {
                return bad("scan_values must be nonempty".into());
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form (which omits `workers` and `out`).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// The config with one scan parameter replaced.
    pub fn with_parameter(&self, parameter: &str, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        match parameter {
            "c_re" => cfg.c_re = value,
            "c_im" => cfg.c_im = value,
            "a" => cfg.a = value,
            "bc_r" => cfg.bc_r = value,
            other => return Err(DynError::Config(format!("unknown scan parameter {other}"))),
        }
        cfg.scan_parameter = None;
        cfg.scan_values.clear();
        Ok(cfg)
    }

    pub fn polynomial(&self) -> Result<Polynomial> {
        match self.family {
            Family::Quadratic => Ok(Polynomial::quadratic(Complex64::new(self.c_re, self.c_im))),
            Family::Polynomial => {
                let coefficients = self
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(i, &re)| Complex64::new(re, self.coefficients_im.get(i).copied().unwrap_or(0.0)))
                    .collect();
                Polynomial::new(coefficients)
            }
            _ => Err(DynError::Config(format!("{:?} is a real family", self.family))),
        }
    }

    pub fn interval_map(&self) -> Result<IntervalMap> {
        match self.family {
            Family::Logistic => IntervalMap::logistic(self.a),
            Family::RealQuadratic => IntervalMap::quadratic(self.c_re),
            Family::RealPolynomial => IntervalMap::polynomial(&self.coefficients, [self.domain[0], self.domain[1]]),
            _ => Err(DynError::Config(format!("{:?} is a complex family", self.family))),
        }
    }
}
