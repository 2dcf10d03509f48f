use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DynError, Result};
use crate::geometry::{point_set_diameter, JordanDisk};
use crate::julia::{inverse_orbit, sample_julia};
use crate::pullback::PullbackEngine;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KoebeOptions {
    pub trials: usize,
    /// Modulus of the annulus `V \ D`.
    pub rho: f64,
    pub max_depth: usize,
    /// Trials where `f^s: U -> V` has larger degree are skipped.
    pub degree_cap: usize,
    /// Radius of `V`.
    pub outer_radius: f64,
    pub seed: u64,
}

impl Default for KoebeOptions {
    fn default() -> Self {
        Self {
            trials: 100,
            rho: 0.5,
            max_depth: 8,
            degree_cap: 2,
            outer_radius: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KoebeProbe {
    pub options: KoebeOptions,
    /// `|Df^s(f(x))| · diam f(E) / diam f(D)` for each accepted trial.
    pub ratios: Vec<f64>,
    pub depths: Vec<usize>,
    /// Empirical `A0`: the largest ratio seen.
    pub max: Option<f64>,
    pub skipped_degree: usize,
    /// Trials lost to tracking failures or boundaries through critical values.
    pub failed: usize,
}

enum Trial {
    Ratio(usize, f64),
    OverCap,
    Failed,
}

/// Measures the distortion constant of the Koebe variation on random
/// configurations: `V = B(v, R)` with `v` on the Julia set, the concentric
/// `D = B(v, R e^{-2πρ})` so that `mod(V; D) = ρ`, and a random backward
/// orbit of `v` of length `s <= max_depth`. `x` is the preimage of `v`, so
/// `f^s(x)` is the common centre. Trial `i` uses its own seeded stream, which
/// pairs trials across different `rho`.
pub fn koebe_variation_probe(engine: &PullbackEngine, opts: &KoebeOptions) -> Result<KoebeProbe> {
    if !(opts.rho > 0.0) {
        return Err(DynError::Precondition(format!("rho must be positive, got {}", opts.rho)));
    }
    if !(opts.outer_radius > 0.0) {
        return Err(DynError::Precondition("outer radius must be positive".into()));
    }
    let inner_radius = opts.outer_radius * (-2.0 * PI * opts.rho).exp();
    let outcomes: Vec<Trial> = (0..opts.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            run_trial(engine, opts, inner_radius, &mut rng).unwrap_or(Trial::Failed)
        })
        .collect();

    let mut probe = KoebeProbe {
        options: *opts,
        ratios: Vec::new(),
        depths: Vec::new(),
        max: None,
        skipped_degree: 0,
        failed: 0,
    };
    for t in outcomes {
        match t {
            Trial::Ratio(s, r) => {
                probe.depths.push(s);
                probe.ratios.push(r);
                probe.max = Some(probe.max.map_or(r, |m: f64| m.max(r)));
            }
            Trial::OverCap => probe.skipped_degree += 1,
            Trial::Failed => probe.failed += 1,
        }
    }
    Ok(probe)
}

fn run_trial(engine: &PullbackEngine, opts: &KoebeOptions, inner_radius: f64, rng: &mut ChaCha8Rng) -> Result<Trial> {
    let poly = engine.poly();
    let s = rng.gen_range(0..=opts.max_depth);
    let v = sample_julia(poly, 1, 40, rng)?[0];
    if s == 0 {
        // f^0 is the identity and E = D
        return Ok(Trial::Ratio(0, 1.0));
    }
    let orbit = inverse_orbit(poly, v, s, rng)?;

    let outer = JordanDisk::circle(v, opts.outer_radius)?;
    let outer_chain = engine.chain(&outer, &orbit)?;
    if outer_chain.total_degree > opts.degree_cap {
        return Ok(Trial::OverCap);
    }
    let inner = JordanDisk::circle(v, inner_radius)?;
    let inner_chain = engine.chain(&inner, &orbit)?;

    // f(E) is the depth s-1 pullback of D
    let image_of_e = if s == 1 {
        inner.diameter()
    } else {
        inner_chain.steps[s - 2].diameter
    };
    let mapped: Vec<Complex64> = inner.boundary().iter().map(|&z| poly.eval(z)).collect();
    let image_of_d = point_set_diameter(&mapped);
    // Df^s(f(x)) = Π_{j=1}^{s} Df(f^j(x)), and f^j(x) = orbit[s - j]
    let log_derivative: f64 = orbit[..s].iter().map(|&z| poly.evaluate(z).1.norm().ln()).sum();
    Ok(Trial::Ratio(s, log_derivative.exp() * image_of_e / image_of_d))
}
