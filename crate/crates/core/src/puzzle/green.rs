use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DynError, Result};
use crate::poly::Polynomial;

/// Orbits are followed until `|f^N(z)|` passes this radius (or the escape
/// radius, if larger), which makes the truncation error negligible in double
/// precision.
pub const GREEN_RADIUS: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenEvaluation {
    pub value: f64,
    /// `∂G/∂x + i ∂G/∂y`.
    #[serde(with = "crate::cser::one")]
    pub gradient: Complex64,
    pub depth_used: usize,
    /// False when the orbit stayed bounded for the whole budget; `value` is
    /// then 0 as an interior estimate.
    pub escaped: bool,
}

/// `G(z) = lim d^{-N} log|f^N(z)|`, with the leading-coefficient correction
/// `log|a_d| / (d - 1)` added before scaling.
pub fn green(poly: &Polynomial, z: Complex64, depth: usize) -> Result<GreenEvaluation> {
    if depth == 0 {
        return Err(DynError::Precondition("green needs depth >= 1".into()));
    }
    let d = poly.degree() as f64;
    let radius = GREEN_RADIUS.max(poly.escape_radius());
    let offset = poly.leading().norm().ln() / (d - 1.0);
    let mut w = z;
    // q_k = d^{-k} (f^k)'(z) / f^k(z), kept scaled so it cannot overflow
    let mut q = Complex64::new(1.0, 0.0) / z;
    let mut scale = 1.0;
    for n in 0..=depth {
        if w.norm() > radius {
            return Ok(GreenEvaluation {
                value: scale * (w.norm().ln() + offset),
                gradient: q.conj(),
                depth_used: n,
                escaped: true,
            });
        }
        if n == depth {
            break;
        }
        let (v, dv) = poly.evaluate(w);
        q *= w * dv / (v * d);
        w = v;
        scale /= d;
    }
    Ok(GreenEvaluation {
        value: 0.0,
        gradient: Complex64::new(0.0, 0.0),
        depth_used: depth,
        escaped: false,
    })
}
