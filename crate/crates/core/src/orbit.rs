//! Forward orbits with the derivative cocycle, and periodic-tail detection.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::poly::Polynomial;

/// Default return tolerance used to recognise a periodic tail.
pub const CYCLE_TOLERANCE: f64 = 1e-9;
/// Cycles with `| |multiplier| - 1 |` below this margin count as indifferent.
pub const MULTIPLIER_MARGIN: f64 = 1e-6;
pub const MAX_PERIOD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleKind {
    Attracting,
    Indifferent,
    Repelling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleInfo {
    pub period: usize,
    #[serde(with = "crate::cser::one")]
    pub point: Complex64,
    #[serde(with = "crate::cser::one")]
    pub multiplier: Complex64,
    pub kind: CycleKind,
}

impl CycleInfo {
    fn classify(period: usize, point: Complex64, multiplier: Complex64) -> Self {
        let m = multiplier.norm();
        let kind = if m < 1.0 - MULTIPLIER_MARGIN {
            CycleKind::Attracting
        } else if m > 1.0 + MULTIPLIER_MARGIN {
            CycleKind::Repelling
        } else {
            CycleKind::Indifferent
        };
        Self {
            period,
            point,
            multiplier,
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    #[serde(with = "crate::cser::one")]
    pub start: Complex64,
    /// `f^0(start), f^1(start), ...`
    #[serde(with = "crate::cser::vec")]
    pub points: Vec<Complex64>,
    /// `log_derivatives[k] = log |Df^k(start)|`.
    pub log_derivatives: Vec<f64>,
    pub escaped_at: Option<usize>,
    /// Periodic tail the orbit settled on, of any stability.
    pub periodic_tail: Option<CycleInfo>,
    /// Same as `periodic_tail` when that cycle is attracting.
    pub attracted_to: Option<CycleInfo>,
}

impl OrbitRecord {
    /// `log |Df^n(f^k(start))|` for the orbit segment `k..k+n`.
    pub fn log_derivative_between(&self, k: usize, n: usize) -> f64 {
        self.log_derivatives[k + n] - self.log_derivatives[k]
    }
}

/// Iterates `z` up to `n` times, stopping at the first point with modulus
/// above `escape_radius`.
pub fn orbit(poly: &Polynomial, z: Complex64, n: usize, escape_radius: f64) -> OrbitRecord {
    let mut points = Vec::with_capacity(n + 1);
    let mut logs = Vec::with_capacity(n + 1);
    points.push(z);
    logs.push(0.0);
    let mut escaped_at = None;
    let mut current = z;
    for k in 1..=n {
        let (value, deriv) = match poly.evaluate_guarded(current) {
            Some(vd) => vd,
            None => {
                escaped_at = Some(k - 1);
                break;
            }
        };
        let acc = logs[k - 1] + deriv.norm().ln();
        points.push(value);
        logs.push(acc);
        current = value;
        if value.norm() > escape_radius || !value.re.is_finite() || !value.im.is_finite() {
            escaped_at = Some(k);
            break;
        }
    }
    let periodic_tail = if escaped_at.is_none() {
        detect_tail_cycle(poly, &points, CYCLE_TOLERANCE)
    } else {
        None
    };
    let attracted_to = periodic_tail
        .clone()
        .filter(|c| c.kind == CycleKind::Attracting);
    OrbitRecord {
        start: z,
        points,
        log_derivatives: logs,
        escaped_at,
        periodic_tail,
        attracted_to,
    }
}

/// Smallest period `p` with the last point within `tol` of the point `p`
/// steps earlier; multiplier is the product of `Df` along that stretch.
pub fn detect_tail_cycle(poly: &Polynomial, points: &[Complex64], tol: f64) -> Option<CycleInfo> {
    let n = points.len().checked_sub(1)?;
    let last = points[n];
    let scale = last.norm().max(1.0);
    for p in 1..=MAX_PERIOD.min(n) {
        if (points[n - p] - last).norm() < tol * scale {
            let point = refine_cycle(poly, last, p);
            return Some(CycleInfo::classify(p, point, cycle_multiplier(poly, point, p)));
        }
    }
    None
}

fn cycle_multiplier(poly: &Polynomial, z: Complex64, period: usize) -> Complex64 {
    let mut w = z;
    let mut m = Complex64::new(1.0, 0.0);
    for _ in 0..period {
        let (v, dv) = poly.evaluate(w);
        m *= dv;
        w = v;
    }
    m
}

/// Newton on `f^p(z) - z`. Near a parabolic cycle the orbit creeps in like
/// `1/k`, so the multiplier at the last orbit point is misleading; the
/// refined point is not. Newton still converges (linearly) at a multiple root.
fn refine_cycle(poly: &Polynomial, start: Complex64, period: usize) -> Complex64 {
    let residual = |z: Complex64| {
        let mut w = z;
        for _ in 0..period {
            w = poly.eval(w);
        }
        w - z
    };
    let mut z = start;
    let mut best = residual(z).norm();
    for _ in 0..80 {
        let mut w = z;
        let mut m = Complex64::new(1.0, 0.0);
        for _ in 0..period {
            let (v, dv) = poly.evaluate(w);
            m *= dv;
            w = v;
        }
        let g = w - z;
        let dg = m - 1.0;
        if g.norm() == 0.0 || dg.norm() == 0.0 {
            break;
        }
        let next = z - g / dg;
        if !next.re.is_finite() || !next.im.is_finite() || (next - z).norm() > 1e-3 * z.norm().max(1.0) {
            break;
        }
        let r = residual(next).norm();
        if r > 10.0 * best.max(1e-300) && r > 1e-15 {
            break;
        }
        best = best.min(r);
        z = next;
    }
    z
}
