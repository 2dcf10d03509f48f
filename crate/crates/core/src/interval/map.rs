use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::critical::{critical_points, ClassifyOptions};
use crate::error::{DynError, Result};
use crate::poly::Polynomial;

/// Samples per branch cell for the sign and invariance checks.
const CHECK_SAMPLES: usize = 1000;

type Evaluator = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// How the map was specified; this is what reports record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum MapSpec {
    /// `x^2 + c` on `[-β, β]`, `β = (1 + sqrt(1 - 4c)) / 2`.
    Quadratic { c: f64 },
    /// `a x (1 - x)` on `[0, 1]`.
    Logistic { a: f64 },
    /// Real polynomial, constant coefficient first.
    Polynomial { coefficients: Vec<f64>, domain: [f64; 2] },
    Custom { name: String, domain: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealCritical {
    pub point: f64,
    /// Order `ℓ_c` of the critical point.
    pub order: usize,
}

/// A multimodal map of a compact interval into itself, given by `f` and `Df`.
#[derive(Clone)]
pub struct IntervalMap {
    spec: MapSpec,
    domain: [f64; 2],
    eval: Evaluator,
    critical: Vec<RealCritical>,
    /// Maximal monotone cells; consecutive cells share endpoints.
    branches: Vec<[f64; 2]>,
}

impl fmt::Debug for IntervalMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntervalMap")
            .field("spec", &self.spec)
            .field("critical", &self.critical)
            .finish()
    }
}

fn horner(coefficients: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &a in coefficients.iter().rev() {
        dp = dp * x + p;
        p = p * x + a;
    }
    (p, dp)
}

impl IntervalMap {
    pub fn quadratic(c: f64) -> Result<Self> {
        if !(-2.0..=0.25).contains(&c) {
            return Err(DynError::Precondition(format!(
                "x^2 + c maps an interval into itself only for -2 <= c <= 1/4, got {c}"
            )));
        }
        let beta = (1.0 + (1.0 - 4.0 * c).sqrt()) / 2.0;
        let mut map = Self::polynomial(&[c, 0.0, 1.0], [-beta, beta])?;
        map.spec = MapSpec::Quadratic { c };
        Ok(map)
    }

    pub fn logistic(a: f64) -> Result<Self> {
        if !(a > 0.0 && a <= 4.0) {
            return Err(DynError::Precondition(format!(
                "a x (1 - x) maps [0, 1] into itself only for 0 < a <= 4, got {a}"
            )));
        }
        let mut map = Self::polynomial(&[0.0, a, -a], [0.0, 1.0])?;
        map.spec = MapSpec::Logistic { a };
        Ok(map)
    }

    /// Real polynomial on `domain`. Critical points are the real roots of
    /// `Df` inside the domain, with `ℓ_c` one more than the root multiplicity.
    pub fn polynomial(coefficients: &[f64], domain: [f64; 2]) -> Result<Self> {
        let poly = Polynomial::from_real(coefficients)?;
        let roots = critical_points(&poly, &ClassifyOptions::default())?;
        let scale = domain[0].abs().max(domain[1].abs()).max(1.0);
        let critical = roots
            .iter()
            .filter(|c| c.point.im.abs() <= 1e-9 * scale && c.point.re > domain[0] && c.point.re < domain[1])
            .map(|c| RealCritical {
                point: c.point.re,
                order: c.order,
            })
            .collect();
        let coefficients = coefficients.to_vec();
        let eval_coeffs = coefficients.clone();
        Self::assemble(
            MapSpec::Polynomial { coefficients, domain },
            domain,
            Arc::new(move |x| horner(&eval_coeffs, x)),
            critical,
        )
    }

    /// A user-supplied map. `Df` is cross-checked against central differences
    /// at 1000 points; the declared critical points must be exactly the zeros
    /// of `Df` in the interior (checked through the sign of `Df` on each cell).
    pub fn custom<F, D>(name: &str, domain: [f64; 2], f: F, df: D, critical: Vec<RealCritical>) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let h = 1e-6 * (domain[1] - domain[0]);
        for i in 1..CHECK_SAMPLES {
            let x = domain[0] + (domain[1] - domain[0]) * i as f64 / CHECK_SAMPLES as f64;
            let central = (f(x + h) - f(x - h)) / (2.0 * h);
            let declared = df(x);
            if (central - declared).abs() > 1e-6 * declared.abs().max(1.0) {
                return Err(DynError::Precondition(format!(
                    "Df({x}) = {declared} disagrees with the central difference {central}"
                )));
            }
        }
        Self::assemble(
            MapSpec::Custom {
                name: name.to_string(),
                domain,
            },
            domain,
            Arc::new(move |x| (f(x), df(x))),
            critical,
        )
    }

    fn assemble(spec: MapSpec, domain: [f64; 2], eval: Evaluator, mut critical: Vec<RealCritical>) -> Result<Self> {
        if !(domain[0] < domain[1]) {
            return Err(DynError::Precondition(format!("empty domain {domain:?}")));
        }
        critical.sort_by(|a, b| a.point.total_cmp(&b.point));
        let mut cuts = vec![domain[0]];
        cuts.extend(critical.iter().map(|c| c.point));
        cuts.push(domain[1]);
        let branches: Vec<[f64; 2]> = cuts.windows(2).map(|w| [w[0], w[1]]).collect();
        let map = Self {
            spec,
            domain,
            eval,
            critical,
            branches,
        };
        let width = domain[1] - domain[0];
        let slack = 1e-12 * width.max(1.0);
        for (i, b) in map.branches.iter().enumerate() {
            if !(b[1] > b[0]) {
                return Err(DynError::Precondition(format!("critical points coincide near {}", b[0])));
            }
            let sign = map.branch_sign(i);
            for k in 0..=CHECK_SAMPLES {
                let x = b[0] + (b[1] - b[0]) * k as f64 / CHECK_SAMPLES as f64;
                let (y, dy) = map.evaluate(x);
                if y < domain[0] - slack || y > domain[1] + slack {
                    return Err(DynError::Precondition(format!(
                        "f({x}) = {y} leaves the domain {domain:?}"
                    )));
                }
                if k > 0 && k < CHECK_SAMPLES && dy * sign <= 0.0 {
                    return Err(DynError::Precondition(format!(
                        "Df changes sign inside branch {i} at {x}; a critical point is missing"
                    )));
                }
            }
        }
        Ok(map)
    }

    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    pub fn domain(&self) -> [f64; 2] {
        self.domain
    }

    pub fn critical(&self) -> &[RealCritical] {
        &self.critical
    }

    pub fn branches(&self) -> &[[f64; 2]] {
        &self.branches
    }

    pub fn evaluate(&self, x: f64) -> (f64, f64) {
        (self.eval)(x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.evaluate(x).0
    }

    pub fn critical_values(&self) -> Vec<f64> {
        self.critical.iter().map(|c| self.eval(c.point)).collect()
    }

    /// `+1` if `f` increases on branch `i`, `-1` otherwise, judged by the
    /// endpoint values.
    pub fn branch_sign(&self, i: usize) -> f64 {
        let [u, v] = self.branches[i];
        if self.eval(v) >= self.eval(u) {
            1.0
        } else {
            -1.0
        }
    }

    /// The complex polynomial behind a polynomial family, if any.
    pub fn as_polynomial(&self) -> Option<Polynomial> {
        let coefficients: Vec<f64> = match &self.spec {
            MapSpec::Quadratic { c } => vec![*c, 0.0, 1.0],
            MapSpec::Logistic { a } => vec![0.0, *a, -*a],
            MapSpec::Polynomial { coefficients, .. } => coefficients.clone(),
            MapSpec::Custom { .. } => return None,
        };
        Polynomial::new(coefficients.into_iter().map(|a| Complex64::new(a, 0.0)).collect()).ok()
    }
}
