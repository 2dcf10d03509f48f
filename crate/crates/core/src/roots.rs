//! Simultaneous polynomial root finding (Aberth–Ehrlich iteration).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DynError, Result};

const MAX_ITERATIONS: usize = 500;
const MAX_RESTARTS: usize = 6;

/// Horner evaluation of `p` and `p'` together. Coefficients are constant-first.
pub(crate) fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut value = Complex64::new(0.0, 0.0);
    let mut deriv = Complex64::new(0.0, 0.0);
    for a in coeffs.iter().rev() {
        deriv = deriv * z + value;
        value = value * z + a;
    }
    (value, deriv)
}

/// Magnitude of the rounding error Horner's scheme makes at `z`.
pub(crate) fn rounding_level(coeffs: &[Complex64], z: Complex64) -> f64 {
    let r = z.norm();
    let mut acc = 0.0;
    for a in coeffs.iter().rev() {
        acc = acc * r + a.norm();
    }
    acc * 16.0 * f64::EPSILON
}

fn root_radius(coeffs: &[Complex64]) -> f64 {
    let n = coeffs.len() - 1;
    let lead = coeffs[n].norm();
    let mut bound: f64 = 0.0;
    for (k, a) in coeffs.iter().enumerate().take(n) {
        let q = a.norm() / lead;
        if q > 0.0 {
            bound = bound.max(q.powf(1.0 / (n - k) as f64));
        }
    }
    if bound == 0.0 {
        1.0
    } else {
        bound
    }
}

/// All roots of the polynomial with constant-first coefficients `coeffs`.
///
/// Converged when every Aberth correction is below `tol` relative to the root,
/// or the residual has reached Horner's rounding level. Non-convergence is
/// retried from randomly perturbed starting circles; the perturbations come
/// from a fixed seed so results are reproducible.
pub fn find_roots(coeffs: &[Complex64], tol: f64) -> Result<Vec<Complex64>> {
    let mut coeffs = coeffs.to_vec();
    while coeffs.len() > 1 && coeffs.last().map_or(false, |a| a.norm() == 0.0) {
        coeffs.pop();
    }
    let n = coeffs.len().saturating_sub(1);
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![-coeffs[0] / coeffs[1]]);
    }

    let radius = root_radius(&coeffs);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut last_residuals = Vec::new();

    for restart in 0..=MAX_RESTARTS {
        let (scale, offset) = if restart == 0 {
            (1.0, 0.4)
        } else {
            (rng.gen_range(0.5..1.5), rng.gen_range(0.0..std::f64::consts::TAU))
        };
        let mut z: Vec<Complex64> = (0..n)
            .map(|k| {
                let theta = offset + std::f64::consts::TAU * k as f64 / n as f64;
                Complex64::from_polar(radius * scale, theta)
            })
            .collect();

        if iterate(&coeffs, &mut z, tol) {
            return Ok(z);
        }
        last_residuals = z.iter().map(|&r| horner(&coeffs, r).0.norm()).collect();
    }

    Err(DynError::RootFinding {
        restarts: MAX_RESTARTS,
        residuals: last_residuals,
    })
}

fn iterate(coeffs: &[Complex64], z: &mut [Complex64], tol: f64) -> bool {
    let n = z.len();
    for _ in 0..MAX_ITERATIONS {
        let mut done = true;
        for i in 0..n {
            let (p, dp) = horner(coeffs, z[i]);
            if p.norm() <= rounding_level(coeffs, z[i]) {
                continue;
            }
            let ratio = p / dp;
            let mut repulsion = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    repulsion += (z[i] - z[j]).inv();
                }
            }
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !step.re.is_finite() || !step.im.is_finite() {
                return false;
            }
            z[i] -= step;
            if step.norm() > tol * z[i].norm().max(1.0) {
                done = false;
            }
        }
        if done {
            return true;
        }
    }
    false
}
