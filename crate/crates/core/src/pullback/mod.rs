//! Component-tracked preimages of Jordan disks.
//!
//! A component of `f^{-1}(D)` is found by lifting `∂D` through `f` with
//! branch-following Newton steps, starting from a lift of a path that joins
//! `f(seed)` to `∂D` inside `D`. The lift closes up after as many laps as the
//! local degree of `f` on the component.

mod enumerate;

pub use enumerate::{enumerate_pullbacks, EnumerateOptions, KeepDisks, PullbackNode, PullbackTree};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::critical::{critical_points, ClassifyOptions, CriticalPoint};
use crate::error::{DynError, Result};
use crate::geometry::{segments_intersect, JordanDisk};
use crate::poly::Polynomial;

const MAX_NEWTON: usize = 8;
/// Critical values closer than this to the boundary being lifted are refused.
pub const CRITICAL_VALUE_CLEARANCE: f64 = 1e-12;
/// Factor applied to a radius when a disk boundary meets a critical value.
pub const DEGENERACY_SHRINK: f64 = 1.0 - 1e-6;
const MAX_GAP: f64 = 0.01;
const MIN_GAP: f64 = 0.004;

/// Result of one pullback step.
#[derive(Debug, Clone, PartialEq)]
pub struct Pullback {
    pub component: JordanDisk,
    pub local_degree: usize,
    pub critical_inside: Vec<CriticalPoint>,
}

impl Pullback {
    /// Riemann–Hurwitz for a disk mapped properly onto a disk.
    pub fn degree_is_consistent(&self) -> bool {
        let expected = 1 + self.critical_inside.iter().map(|c| c.order - 1).sum::<usize>();
        expected == self.local_degree
    }
}

/// Everything the lifting needs about `f`, computed once.
#[derive(Debug, Clone)]
pub struct PullbackEngine {
    poly: Polynomial,
    critical: Vec<CriticalPoint>,
    critical_values: Vec<Complex64>,
    /// `|a_k|`, for the rounding level of Horner evaluation.
    abs_coefficients: Vec<f64>,
}

impl PullbackEngine {
    pub fn new(poly: &Polynomial) -> Result<Self> {
        let critical = critical_points(poly, &ClassifyOptions::default())?;
        Ok(Self::with_critical(poly, critical))
    }

    pub fn with_critical(poly: &Polynomial, critical: Vec<CriticalPoint>) -> Self {
        let critical_values = critical.iter().map(|c| poly.eval(c.point)).collect();
        Self {
            poly: poly.clone(),
            critical,
            critical_values,
            abs_coefficients: poly.coefficients().iter().map(|a| a.norm_sqr().sqrt()).collect(),
        }
    }

    pub fn poly(&self) -> &Polynomial {
        &self.poly
    }

    pub fn critical(&self) -> &[CriticalPoint] {
        &self.critical
    }

    pub fn critical_values(&self) -> &[Complex64] {
        &self.critical_values
    }

    /// Distance between the lift through `z` and the nearest other local
    /// branch, estimated from the local model at each critical point.
    fn branch_separation(&self, z: Complex64) -> f64 {
        self.critical
            .iter()
            .map(|c| (z - c.point).norm_sqr().sqrt() * 2.0 * (PI / c.order as f64).sin())
            .fold(f64::INFINITY, f64::min)
    }

    fn rounding_level(&self, z: Complex64) -> f64 {
        let r = z.norm_sqr().sqrt();
        let acc = self.abs_coefficients.iter().rev().fold(0.0, |acc, a| acc * r + a);
        acc * 16.0 * f64::EPSILON
    }

    /// Solves `f(z) = w` from `start`. Also returns the first iterate, which
    /// is the Euler predictor when `f(start)` is on the path.
    fn newton(&self, start: Complex64, w: Complex64) -> Option<(Complex64, Complex64)> {
        let mut z = start;
        let mut first = None;
        for _ in 0..MAX_NEWTON {
            let (v, dv) = self.poly.evaluate(z);
            let residual = v - w;
            if first.is_some() && residual.norm_sqr().sqrt() <= self.rounding_level(z) {
                return first.map(|f| (z, f));
            }
            if dv == Complex64::new(0.0, 0.0) {
                return None;
            }
            let dz = residual / dv;
            z -= dz;
            if !z.re.is_finite() || !z.im.is_finite() {
                return None;
            }
            let f = *first.get_or_insert(z);
            let tol = 4.0 * f64::EPSILON * z.norm_sqr().sqrt().max(1.0);
            if dz.norm_sqr() <= tol * tol {
                return Some((z, f));
            }
        }
        None
    }

    /// Lifts the straight segment `wa -> wb` starting at `z` with `f(z) = wa`.
    /// Intermediate lifted points are appended to `record` when given.
    fn lift_segment(
        &self,
        mut z: Complex64,
        wa: Complex64,
        wb: Complex64,
        max_dz: f64,
        mut record: Option<&mut Vec<Complex64>>,
    ) -> Result<Complex64> {
        let dw = wb - wa;
        if dw.norm_sqr().sqrt() == 0.0 {
            return Ok(z);
        }
        let floor = 1e-13 * wa.norm_sqr().sqrt().max(wb.norm_sqr().sqrt()).max(1e-300);
        let mut s = 0.0f64;
        let mut h = 1.0f64;
        while s < 1.0 {
            h = h.min(1.0 - s);
            let target = if s + h >= 1.0 { wb } else { wa + dw * (s + h) };
            let accepted = self.newton(z, target).and_then(|(z_new, euler)| {
                let jump = (z_new - z).norm_sqr().sqrt();
                let separation = 0.5 * self.branch_separation(z);
                // the Euler predictor must agree with where Newton went
                let agrees = (z_new - euler).norm_sqr().sqrt() <= 0.3 * jump + 1e-14 * z.norm_sqr().sqrt().max(1.0);
                (jump <= separation && jump <= max_dz && agrees).then_some(z_new)
            });
            match accepted {
                Some(z_new) => {
                    z = z_new;
                    s += h;
                    if s < 1.0 {
                        if let Some(rec) = record.as_deref_mut() {
                            rec.push(z);
                        }
                    }
                    h *= 2.0;
                }
                None => {
                    h /= 2.0;
                    if h * dw.norm_sqr().sqrt() < floor {
                        return Err(DynError::BranchTracking {
                            from: wa + dw * s,
                            to: wb,
                            reason: format!("step rejected below floor near z = {z}"),
                        });
                    }
                }
            }
        }
        Ok(z)
    }

    fn critical_near(&self, z: Complex64) -> Option<&CriticalPoint> {
        self.critical
            .iter()
            .find(|c| (z - c.point).norm_sqr().sqrt() <= 1e-9 * c.point.norm_sqr().sqrt().max(1.0))
    }

    /// A path `f(seed) -> q` inside the disk ending on its boundary, with `q`
    /// on edge `edge`. Returns `(q, edge)`.
    fn exit_path(&self, disk: &JordanDisk, w0: Complex64) -> Result<(Complex64, usize)> {
        let pts = disk.boundary();
        let m = pts.len();
        let clearance = 1e-7 * disk.diameter();
        let clear = |a: Complex64, b: Complex64| {
            self.critical_values.iter().all(|&v| {
                (v - w0).norm_sqr().sqrt() <= 1e-12 * w0.norm_sqr().sqrt().max(1.0)
                    || crate::geometry::segment_distance(v, a, b) > clearance
            })
        };
        // closest boundary point: the open segment to it lies in the disk
        let mut best = (f64::INFINITY, 0usize, Complex64::new(0.0, 0.0));
        for i in 0..m {
            let (a, b) = (pts[i], pts[(i + 1) % m]);
            let ab = b - a;
            let t = (crate::geometry::dot(w0 - a, ab) / ab.norm_sqr()).clamp(0.0, 1.0);
            let p = a + ab * t;
            let dist = (p - w0).norm_sqr().sqrt();
            if dist < best.0 {
                best = (dist, i, p);
            }
        }
        if clear(w0, best.2) {
            return Ok((best.2, best.1));
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| {
            (pts[i] - w0)
                .norm_sqr().sqrt()
                .partial_cmp(&(pts[j] - w0).norm_sqr().sqrt())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for &v in &order {
            let target = pts[v];
            if !clear(w0, target) {
                continue;
            }
            let crosses = (0..m).any(|i| {
                let j = (i + 1) % m;
                i != v && j != v && segments_intersect(w0, target, pts[i], pts[j])
            });
            if !crosses {
                return Ok((target, v));
            }
        }
        Err(DynError::BranchTracking {
            from: w0,
            to: best.2,
            reason: "no clear path to the boundary".into(),
        })
    }

    /// The component of `f^{-1}(disk)` containing `seed`.
    pub fn step(&self, disk: &JordanDisk, seed: Complex64) -> Result<Pullback> {
        let w0 = self.poly.eval(seed);
        if !disk.contains(w0) {
            return Err(DynError::NotInside(w0));
        }
        for &v in &self.critical_values {
            if disk.polyline_distance(v) < CRITICAL_VALUE_CLEARANCE {
                return Err(DynError::NearCriticalValue {
                    value: v,
                    distance: disk.polyline_distance(v),
                });
            }
        }

        let (q, edge) = self.exit_path(disk, w0)?;

        // lift of the exit path
        let (mut z, w_start) = match self.critical_near(seed) {
            Some(cp) => {
                let c = cp.point;
                let wc = self.poly.eval(c);
                let w1 = wc + (q - wc) * 1e-6;
                let a = self.poly.taylor_coefficient(c, cp.order);
                let guess = c + ((w1 - wc) / a).powf(1.0 / cp.order as f64);
                let z1 = self.newton(guess, w1).map(|(z1, _)| z1).ok_or_else(|| DynError::BranchTracking {
                    from: wc,
                    to: w1,
                    reason: "local model start failed".into(),
                })?;
                (z1, w1)
            }
            None => (seed, w0),
        };
        z = self.lift_segment(z, w_start, q, f64::INFINITY, None)?;
        let z_q = z;

        let first = self.lift_laps(disk, q, edge, z_q, f64::INFINITY)?;
        let mut lifted = first.0;
        let laps = first.1;
        let diam = crate::geometry::point_set_diameter(&lifted);
        let gap = max_gap(&lifted);
        if gap > MAX_GAP * diam {
            lifted = self.lift_laps(disk, q, edge, z_q, 0.5 * MAX_GAP * diam)?.0;
        }
        let lifted = decimate(lifted, diam);

        let component = JordanDisk::from_polyline(lifted, seed).map_err(|e| DynError::BranchTracking {
            from: q,
            to: q,
            reason: format!("lifted boundary is not a Jordan curve: {e}"),
        })?;
        let critical_inside = self
            .critical
            .iter()
            .filter(|c| component.contains(c.point))
            .copied()
            .collect();
        Ok(Pullback {
            component,
            local_degree: laps,
            critical_inside,
        })
    }

    /// Lifts `∂disk` lap after lap from `z_q` until the lift returns to `z_q`.
    fn lift_laps(
        &self,
        disk: &JordanDisk,
        q: Complex64,
        edge: usize,
        z_q: Complex64,
        max_dz: f64,
    ) -> Result<(Vec<Complex64>, usize)> {
        let pts = disk.boundary();
        let m = pts.len();
        let record_inner = max_dz.is_finite();
        let preimages = self.poly.preimages(q)?;
        let nearest = |z: Complex64| {
            preimages
                .iter()
                .enumerate()
                .map(|(i, p)| (i, (p - z).norm_sqr().sqrt()))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
        };
        let start_idx = nearest(z_q).0;

        let mut out = vec![z_q];
        let mut z = z_q;
        for lap in 1..=self.poly.degree() {
            let mut w = q;
            for k in 1..=m {
                let v = pts[(edge + k) % m];
                let rec = if record_inner { Some(&mut out) } else { None };
                z = self.lift_segment(z, w, v, max_dz, rec)?;
                out.push(z);
                w = v;
            }
            let rec = if record_inner { Some(&mut out) } else { None };
            z = self.lift_segment(z, w, q, max_dz, rec)?;
            let (idx, dist) = nearest(z);
            if dist > 1e-6 * self.branch_separation(z).min(1.0).max(1e-300) && dist > 1e-9 {
                return Err(DynError::BranchTracking {
                    from: q,
                    to: q,
                    reason: format!("lap {lap} ended {dist:e} away from every preimage"),
                });
            }
            if idx == start_idx {
                return Ok((out, lap));
            }
            out.push(z);
        }
        Err(DynError::BranchTracking {
            from: q,
            to: q,
            reason: "lift did not close after deg f laps".into(),
        })
    }
}

fn max_gap(pts: &[Complex64]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| (pts[(i + 1) % n] - pts[i]).norm_sqr().sqrt())
        .fold(0.0, f64::max)
}

/// Drops samples closer than the minimum gap to the last kept one, as long as
/// no gap grows past the maximum. `diam` is the diameter of the curve.
fn decimate(pts: Vec<Complex64>, diam: f64) -> Vec<Complex64> {
    let (lo, hi) = (MIN_GAP * diam, MAX_GAP * diam);
    let n = pts.len();
    let mut kept = Vec::with_capacity(n);
    kept.push(pts[0]);
    for i in 1..n {
        let last = *kept.last().unwrap();
        let next = pts[(i + 1) % n];
        if (pts[i] - last).norm_sqr().sqrt() >= lo || (next - last).norm_sqr().sqrt() > hi {
            kept.push(pts[i]);
        }
    }
    kept
}

/// `B̃(c, δ)`: the component of `f^{-1}(B(f(c), δ))` containing `c`.
pub fn tilde_ball(poly: &Polynomial, c: Complex64, delta: f64) -> Result<JordanDisk> {
    let engine = PullbackEngine::new(poly)?;
    Ok(engine.tilde_ball(c, delta)?.component)
}

impl PullbackEngine {
    /// `B̃(c, δ)` with its degree. A critical value on the circle triggers one
    /// retry with `δ` shrunk by [`DEGENERACY_SHRINK`].
    pub fn tilde_ball(&self, c: Complex64, delta: f64) -> Result<Pullback> {
        if !(delta > 0.0) {
            return Err(DynError::Precondition(format!("delta must be positive, got {delta}")));
        }
        let center = self.poly.eval(c);
        let attempt = |d: f64| -> Result<Pullback> {
            let disk = JordanDisk::circle(center, d)?;
            self.step(&disk, c)
        };
        match attempt(delta) {
            Err(DynError::NearCriticalValue { .. }) => attempt(delta * DEGENERACY_SHRINK),
            other => other,
        }
    }

    /// Other critical values within `1e-3·δ` of the circle `∂B(f(c), δ)`:
    /// the preimage component may then fail to be a disk numerically.
    pub fn tilde_ball_warnings(&self, c: Complex64, delta: f64) -> Vec<String> {
        let center = self.poly.eval(c);
        self.critical_values
            .iter()
            .filter(|&&v| (v - center).norm_sqr().sqrt() > 1e-12 && ((v - center).norm_sqr().sqrt() - delta).abs() < 1e-3 * delta)
            .map(|v| format!("critical value {v} lies within 1e-3·δ of ∂B(f(c), δ)"))
            .collect()
    }
}

/// Convenience wrapper around [`PullbackEngine::step`].
pub fn pull_back_step(poly: &Polynomial, disk: &JordanDisk, seed: Complex64) -> Result<(JordanDisk, usize)> {
    let p = PullbackEngine::new(poly)?.step(disk, seed)?;
    Ok((p.component, p.local_degree))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub component: JordanDisk,
    pub local_degree: usize,
    #[serde(with = "crate::cser::vec")]
    pub contains_critical: Vec<Complex64>,
    pub diameter: f64,
    pub dist_to_critical_values: f64,
}

/// `W_0 ← W_1 ← … ← W_n` with `f(W_{k+1}) = W_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackChain {
    pub target: JordanDisk,
    pub steps: Vec<ChainStep>,
    pub total_degree: usize,
}

/// Distance from a disk to a set of points: 0 when one of them is inside,
/// otherwise the least boundary distance.
pub fn dist_to_points(disk: &JordanDisk, points: &[Complex64]) -> f64 {
    points
        .iter()
        .map(|&v| disk.distance_to(v))
        .fold(f64::INFINITY, f64::min)
}

impl PullbackEngine {
    pub fn chain(&self, disk: &JordanDisk, backward_orbit: &[Complex64]) -> Result<PullbackChain> {
        let Some(&first) = backward_orbit.first() else {
            return Err(DynError::Precondition("empty backward orbit".into()));
        };
        if !disk.contains(first) {
            return Err(DynError::NotInside(first));
        }
        let mut steps = Vec::with_capacity(backward_orbit.len().saturating_sub(1));
        let mut current = disk.clone();
        let mut total = 1usize;
        for k in 1..backward_orbit.len() {
            let (prev, z) = (backward_orbit[k - 1], backward_orbit[k]);
            let residual = (self.poly.eval(z) - prev).norm_sqr().sqrt();
            if residual >= 1e-9 * prev.norm_sqr().sqrt().max(1.0) {
                return Err(DynError::Precondition(format!(
                    "backward orbit entry {k} is not a preimage (residual {residual:e})"
                )));
            }
            let pb = self.step(&current, z)?;
            total *= pb.local_degree;
            steps.push(ChainStep {
                diameter: pb.component.diameter(),
                dist_to_critical_values: dist_to_points(&pb.component, &self.critical_values),
                contains_critical: pb.critical_inside.iter().map(|c| c.point).collect(),
                local_degree: pb.local_degree,
                component: pb.component.clone(),
            });
            current = pb.component;
        }
        Ok(PullbackChain {
            target: disk.clone(),
            steps,
            total_degree: total,
        })
    }
}

pub fn pull_back_chain(poly: &Polynomial, disk: &JordanDisk, backward_orbit: &[Complex64]) -> Result<PullbackChain> {
    PullbackEngine::new(poly)?.chain(disk, backward_orbit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shape_stats;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn forward_consistent(poly: &Polynomial, child: &JordanDisk, parent: &JordanDisk) -> bool {
        child
            .boundary()
            .iter()
            .all(|&z| parent.polyline_distance(poly.eval(z)) < 1e-6 * parent.diameter())
    }

    #[test]
    fn tilde_balls_of_quadratics_are_round() {
        for cst in [0.0, -2.0] {
            let f = Polynomial::quadratic(c(cst, 0.0));
            let b = tilde_ball(&f, c(0.0, 0.0), 0.04).unwrap();
            let s = shape_stats(&b, c(0.0, 0.0)).unwrap();
            assert!((s.outer_radius - 0.2).abs() < 1e-9);
            assert!(s.shape < 1.001);
            assert!((b.diameter() - 0.4).abs() < 1e-6);
        }
    }

    #[test]
    fn cubic_tilde_ball_follows_local_model() {
        let f = Polynomial::from_real(&[0.0, -3.0, 0.0, 1.0]).unwrap();
        let engine = PullbackEngine::new(&f).unwrap();
        let pb = engine.tilde_ball(c(1.0, 0.0), 0.01).unwrap();
        assert_eq!(pb.local_degree, 2);
        let s = shape_stats(&pb.component, c(1.0, 0.0)).unwrap();
        assert!(s.shape <= 1.1, "shape {}", s.shape);
        let model = 2.0 * (0.01f64 / 3.0).sqrt();
        assert!((pb.component.diameter() - model).abs() < 0.02 * model);
    }

    #[test]
    fn step_examples_for_squaring() {
        let f = Polynomial::quadratic(c(0.0, 0.0));
        let engine = PullbackEngine::new(&f).unwrap();

        let disk = JordanDisk::circle(c(4.0, 0.0), 0.4).unwrap();
        let pb = engine.step(&disk, c(2.0, 0.0)).unwrap();
        assert_eq!(pb.local_degree, 1);
        // oracle: sqrt maps [3.6, 4.4] onto [1.8974, 2.0976]
        let exact = 4.4f64.sqrt() - 3.6f64.sqrt();
        assert!((pb.component.diameter() - exact).abs() < 0.05 * exact);
        assert!(forward_consistent(&f, &pb.component, &disk));

        let small = JordanDisk::circle(c(0.01, 0.0), 0.005).unwrap();
        let pb = engine.step(&small, c(0.1, 0.0)).unwrap();
        assert_eq!(pb.local_degree, 1);
        assert!(pb.component.contains(c(0.1, 0.0)));
        assert!(!pb.component.contains(c(-0.1, 0.0)));

        let central = JordanDisk::circle(c(0.0, 0.0), 0.04).unwrap();
        let pb = engine.step(&central, c(0.0, 0.0)).unwrap();
        assert_eq!(pb.local_degree, 2);
        assert!(pb.degree_is_consistent());
        assert!((pb.component.diameter() - 0.4).abs() < 1e-6);
    }

    #[test]
    fn critical_value_on_boundary_is_refused() {
        let f = Polynomial::quadratic(c(0.0, 0.0));
        let engine = PullbackEngine::new(&f).unwrap();
        let disk = JordanDisk::circle(c(1.0, 0.0), 1.0).unwrap();
        assert!(matches!(
            engine.step(&disk, c(1.0, 0.0)),
            Err(DynError::NearCriticalValue { .. })
        ));
        // the tilde ball retry shrinks the radius past the critical value
        // z^3 - 3z: the circle about f(1) = -2 of radius 4 passes through f(-1) = 2
        let g = Polynomial::from_real(&[0.0, -3.0, 0.0, 1.0]).unwrap();
        let engine = PullbackEngine::new(&g).unwrap();
        assert_eq!(engine.tilde_ball_warnings(c(1.0, 0.0), 4.0).len(), 1);
        let pb = engine.tilde_ball(c(1.0, 0.0), 4.0);
        assert!(pb.is_ok(), "{pb:?}");
        assert!(pb.unwrap().degree_is_consistent());
    }

    #[test]
    fn fixed_point_chains_shrink_by_multiplier() {
        for (cst, fixed, mult) in [(0.0, 1.0, 2.0), (-2.0, 2.0, 4.0)] {
            let f = Polynomial::quadratic(c(cst, 0.0));
            let disk = JordanDisk::circle(c(fixed, 0.0), 0.1).unwrap();
            let orbit = vec![c(fixed, 0.0); 6];
            let chain = pull_back_chain(&f, &disk, &orbit).unwrap();
            assert_eq!(chain.total_degree, 1);
            let mut prev = disk.diameter();
            for step in &chain.steps {
                let ratio = prev / step.diameter;
                assert!((ratio - mult).abs() < 0.15 * mult, "ratio {ratio}");
                prev = step.diameter;
            }
        }
    }

    #[test]
    fn chain_through_critical_point_multiplies_degree() {
        let f = Polynomial::quadratic(c(-2.0, 0.0));
        let disk = JordanDisk::circle(c(2.0, 0.0), 0.1).unwrap();
        // 2 <- -2 <- 0 <- ±sqrt 2
        let orbit = vec![c(2.0, 0.0), c(-2.0, 0.0), c(0.0, 0.0), c(2f64.sqrt(), 0.0)];
        let chain = pull_back_chain(&f, &disk, &orbit).unwrap();
        let degrees: Vec<_> = chain.steps.iter().map(|s| s.local_degree).collect();
        assert_eq!(degrees, vec![1, 2, 1]);
        assert_eq!(chain.total_degree, 2);
        assert_eq!(chain.steps[1].contains_critical, vec![c(0.0, 0.0)]);
        assert!(pull_back_chain(&f, &disk, &[c(2.0, 0.0), c(1.0, 0.0)]).is_err());
    }
}
