use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::critical::CriticalPoint;
use crate::error::{DynError, Result};
use crate::geometry::JordanDisk;
use crate::orbit::orbit;
use crate::pullback::PullbackEngine;

/// Dyadic radii `δ_n = 2^{-n} δ0` and the disks `V_n^c = B̃(c, δ_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleStructure {
    pub delta0: f64,
    pub levels: usize,
    pub critical: Vec<CriticalPoint>,
    /// `disks[i][n]` is `V_n` for `critical[i]`, `n = 0..=levels`.
    pub disks: Vec<Vec<JordanDisk>>,
    /// Whether `V_{n+1}^c ⊂ V_n^c` held for every `c` and `n`.
    pub nested: bool,
}

impl ScaleStructure {
    pub fn build(engine: &PullbackEngine, critical: &[CriticalPoint], delta0: f64, levels: usize) -> Result<Self> {
        if !(delta0 > 0.0) {
            return Err(DynError::Precondition(format!("delta0 must be positive, got {delta0}")));
        }
        let mut disks = Vec::with_capacity(critical.len());
        let mut nested = true;
        for cp in critical {
            let mut per = Vec::with_capacity(levels + 1);
            for n in 0..=levels {
                let d = engine.tilde_ball(cp.point, scale_delta(delta0, n))?.component;
                if let Some(prev) = per.last() {
                    nested &= JordanDisk::contains_disk(prev, &d);
                }
                per.push(d);
            }
            disks.push(per);
        }
        Ok(Self {
            delta0,
            levels,
            critical: critical.to_vec(),
            disks,
            nested,
        })
    }

    pub fn delta(&self, n: usize) -> f64 {
        scale_delta(self.delta0, n)
    }

    /// Largest `n <= levels` with `z ∈ V_n`, if `z ∈ V_0`.
    pub fn level_of(&self, z: Complex64) -> Option<usize> {
        let mut best = None;
        for per in &self.disks {
            for (n, d) in per.iter().enumerate() {
                if d.contains(z) {
                    best = Some(best.map_or(n, |b: usize| b.max(n)));
                } else {
                    break;
                }
            }
        }
        best
    }
}

fn scale_delta(delta0: f64, n: usize) -> f64 {
    // exact: multiplying by a power of two only shifts the exponent
    delta0 * 0.5f64.powi(n as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa0Estimate {
    /// Largest constant compatible with both sampled inequalities.
    pub kappa0: f64,
    /// From `κ0⁻¹ diam f(V_n) ≥ diam(V_n)|Df(x)| ≥ κ0 diam f(V_n)` on `V_n \ V_{n+2}`.
    pub derivative_kappa: f64,
    /// From the power law `diam B̃(c,δ')/diam B̃(c,δ) ≈ (δ'/δ)^{1/ℓ}`.
    pub scaling_kappa: f64,
    pub derivative_samples: usize,
    pub scaling_pairs: usize,
}

/// Samples both distortion inequalities over the scale structure. Points in
/// `V_n \ V_{n+2}` are drawn by rejection from the bounding box of `V_n`;
/// `samples` is the number of points per critical point and level.
pub fn estimate_kappa0(engine: &PullbackEngine, scale: &ScaleStructure, samples: usize, seed: u64) -> Result<Kappa0Estimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poly = engine.poly();
    let mut derivative_kappa = 1.0f64;
    let mut derivative_samples = 0;
    let mut scaling_kappa = 1.0f64;
    let mut scaling_pairs = 0;

    for (cp, per) in scale.critical.iter().zip(&scale.disks) {
        for d in per {
            if !(d.diameter() > 0.0) {
                return Err(DynError::DegenerateDisk("zero-diameter scale disk".into()));
            }
        }
        for n in 0..scale.levels.saturating_sub(1) {
            let (outer, hole) = (&per[n], &per[n + 2]);
            let image_diam = 2.0 * scale.delta(n);
            let [x0, y0, x1, y1] = outer.bounding_box();
            let mut got = 0;
            let mut tries = 0;
            while got < samples && tries < 1000 * samples.max(1) {
                tries += 1;
                let x = Complex64::new(rng.gen_range(x0..x1), rng.gen_range(y0..y1));
                if !outer.contains(x) || hole.contains(x) {
                    continue;
                }
                got += 1;
                let q = outer.diameter() * poly.evaluate(x).1.norm() / image_diam;
                derivative_kappa = derivative_kappa.min(q).min(1.0 / q);
            }
            derivative_samples += got;
        }

        let ell = cp.order as f64;
        let mut pair = |small: f64, d_small: f64, big: f64, d_big: f64| {
            let r = (d_big / d_small) / (big / small).powf(1.0 / ell);
            scaling_kappa = scaling_kappa.min(r).min(1.0 / r);
            scaling_pairs += 1;
        };
        for n in 0..=scale.levels {
            for m in 0..n {
                pair(scale.delta(n), per[n].diameter(), scale.delta(m), per[m].diameter());
            }
        }
        let lo = scale.delta(scale.levels).ln();
        let hi = scale.delta0.ln();
        for _ in 0..samples.min(32) {
            let a = rng.gen_range(lo..hi).exp();
            let b = rng.gen_range(lo..hi).exp();
            let (small, big) = if a < b { (a, b) } else { (b, a) };
            if big / small < 1.0 + 1e-6 {
                continue;
            }
            let ds = engine.tilde_ball(cp.point, small)?.component.diameter();
            let db = engine.tilde_ball(cp.point, big)?.component.diameter();
            pair(small, ds, big, db);
        }
    }
    Ok(Kappa0Estimate {
        kappa0: derivative_kappa.min(scaling_kappa),
        derivative_kappa,
        scaling_kappa,
        derivative_samples,
        scaling_pairs,
    })
}

/// Least-squares slope of `log diam B̃(c, δ)` against `log δ`.
pub fn scaling_exponent(engine: &PullbackEngine, c: Complex64, deltas: &[f64]) -> Result<f64> {
    if deltas.len() < 2 {
        return Err(DynError::Precondition("need at least two radii".into()));
    }
    let mut pts = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let diam = engine.tilde_ball(c, d)?.component.diameter();
        pts.push((d.ln(), diam.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    /// Scale level `n_i`.
    pub level: usize,
    /// End time `S_i`.
    pub end: usize,
    /// `log |Df^{S_i - S_{i-1}}(f^{S_{i-1}+1}(c))|`, with `S_0 = 0`.
    pub log_derivative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnDecomposition {
    #[serde(with = "crate::cser::one")]
    pub critical_point: Complex64,
    pub s: usize,
    pub blocks: Vec<Block>,
    /// `log |Df^S(f(c))|` from the orbit cocycle.
    pub log_total: f64,
    /// `|exp(Σ block logs − log_total) − 1|`.
    pub product_relative_error: f64,
    /// The first level hit the deepest computed scale, so the true `n_1` may
    /// be larger.
    pub capped: bool,
}

/// Splits the orbit `f(c), …, f^S(c)` into return blocks: `n_1` is the deepest
/// level visited, `S_1` the last visit to `V_{n_1}`, and the construction
/// repeats on `(S_1, S]`.
pub fn return_decomposition(
    engine: &PullbackEngine,
    c: Complex64,
    s: usize,
    scale: &ScaleStructure,
) -> Result<ReturnDecomposition> {
    if s == 0 {
        return Err(DynError::Precondition("S must be at least 1".into()));
    }
    let poly = engine.poly();
    let rec = orbit(poly, c, s, poly.escape_radius());
    if rec.escaped_at.is_some() {
        return Err(DynError::Precondition("critical orbit escapes before S".into()));
    }
    let levels: Vec<Option<usize>> = rec.points.iter().map(|&z| scale.level_of(z)).collect();
    if levels[s].is_none() {
        return Err(DynError::Precondition(format!("f^S(c) = {} is not in V_0", rec.points[s])));
    }
    let step_logs: Vec<f64> = rec.points.iter().map(|&z| poly.evaluate(z).1.norm().ln()).collect();
    let cocycle = orbit(poly, poly.eval(c), s, f64::INFINITY);
    let log_total = cocycle.log_derivatives[s];

    let mut blocks = Vec::new();
    let mut start = 0;
    while start < s {
        let level = (start + 1..=s).filter_map(|j| levels[j]).max().expect("f^S(c) is in V_0");
        let end = (start + 1..=s)
            .filter(|&j| levels[j].map_or(false, |l| l >= level))
            .max()
            .expect("level attained");
        // |Df^{end-start}(f^{start+1}(c))| = Π_{j=start+1}^{end} |Df(f^j(c))|
        let log_derivative = step_logs[start + 1..=end].iter().sum();
        blocks.push(Block {
            level,
            end,
            log_derivative,
        });
        start = end;
    }
    let sum: f64 = blocks.iter().map(|b| b.log_derivative).sum();
    let capped = blocks[0].level == scale.levels;
    Ok(ReturnDecomposition {
        critical_point: c,
        s,
        product_relative_error: ((sum - log_total).exp() - 1.0).abs(),
        log_total,
        blocks,
        capped,
    })
}
