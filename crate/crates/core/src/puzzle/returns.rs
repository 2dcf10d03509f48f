use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DynError, Result};
use crate::geometry::{modulus_lower_bound, JordanDisk};
use crate::julia::sample_julia;
use crate::poly::Polynomial;
use crate::pullback::PullbackEngine;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnOptions {
    pub sample_count: usize,
    pub max_time: usize,
    /// Julia samples drawn per accepted sample before giving up.
    pub attempts_per_sample: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for ReturnOptions {
    fn default() -> Self {
        Self {
            sample_count: 200,
            max_time: 20,
            attempts_per_sample: 200,
            burn_in: 40,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnSample {
    #[serde(with = "crate::cser::one")]
    pub point: Complex64,
    /// First `k >= 1` with `f^k(point) ∈ V`, if any within the budget.
    pub return_time: Option<usize>,
    /// Index into [`ReturnMapSample::domains`].
    pub domain: Option<usize>,
}

/// A component of `f^{-k}(V)` inside `V` on which the first return time is `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnDomain {
    pub time: usize,
    #[serde(with = "crate::cser::one")]
    pub representative: Complex64,
    pub disk: JordanDisk,
    /// Degree of `f^k` from the domain onto `V`.
    pub degree: usize,
    /// `f^k(representative)` was recomputed and lies in `V`.
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnMapSample {
    pub domain_disk: JordanDisk,
    pub options: ReturnOptions,
    pub samples: Vec<ReturnSample>,
    pub domains: Vec<ReturnDomain>,
    /// Samples without a return within `max_time`.
    pub no_return: usize,
    /// Samples whose return domain could not be pulled back.
    pub failed: usize,
    pub notes: Vec<String>,
}

pub fn first_return_sample(
    poly: &Polynomial,
    v: &JordanDisk,
    sample_count: usize,
    max_time: usize,
) -> Result<ReturnMapSample> {
    let engine = PullbackEngine::new(poly)?;
    first_return_sample_with(
        &engine,
        v,
        &ReturnOptions {
            sample_count,
            max_time,
            ..ReturnOptions::default()
        },
    )
}

/// Samples `J ∩ V` by inverse iteration, follows each point to its first
/// return and clusters the returns into domains. A sample inside an already
/// found domain of the same time joins it; otherwise the component of
/// `f^{-k}(V)` around it is pulled back along its own orbit.
pub fn first_return_sample_with(engine: &PullbackEngine, v: &JordanDisk, opts: &ReturnOptions) -> Result<ReturnMapSample> {
    let poly = engine.poly();
    let mut out = ReturnMapSample {
        domain_disk: v.clone(),
        options: *opts,
        samples: Vec::new(),
        domains: Vec::new(),
        no_return: 0,
        failed: 0,
        notes: vec![format!(
            "Julia points from inverse iteration (burn-in {}); their density on J is heuristic",
            opts.burn_in
        )],
    };
    if opts.max_time == 0 || opts.sample_count == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let budget = opts.sample_count * opts.attempts_per_sample;
    let mut points = Vec::new();
    let mut drawn = 0;
    while points.len() < opts.sample_count && drawn < budget {
        let batch = sample_julia(poly, 1000, opts.burn_in, &mut rng)?;
        drawn += batch.len();
        points.extend(batch.into_iter().filter(|&z| v.contains(z)));
    }
    points.truncate(opts.sample_count);
    if points.len() < opts.sample_count {
        out.notes.push(format!(
            "only {} of {} Julia samples fell in V",
            points.len(),
            opts.sample_count
        ));
    }

    let escape = poly.escape_radius();
    for x in points {
        let mut orbit = vec![x];
        let mut time = None;
        for k in 1..=opts.max_time {
            let z = poly.eval(orbit[k - 1]);
            orbit.push(z);
            if z.norm() > escape {
                break;
            }
            if v.contains(z) {
                time = Some(k);
                break;
            }
        }
        let Some(k) = time else {
            out.no_return += 1;
            out.samples.push(ReturnSample {
                point: x,
                return_time: None,
                domain: None,
            });
            continue;
        };
        let known = out
            .domains
            .iter()
            .position(|d| d.time == k && d.disk.contains(x));
        let domain = match known {
            Some(i) => Some(i),
            None => {
                orbit.reverse();
                match engine.chain(v, &orbit) {
                    Ok(chain) => {
                        let last = chain.steps.last().expect("k >= 1");
                        let image = (0..k).fold(x, |z, _| poly.eval(z));
                        out.domains.push(ReturnDomain {
                            time: k,
                            representative: x,
                            disk: last.component.with_basepoint(x).unwrap_or_else(|_| last.component.clone()),
                            degree: chain.total_degree,
                            verified: v.contains(image),
                        });
                        Some(out.domains.len() - 1)
                    }
                    Err(e) => {
                        out.failed += 1;
                        out.notes.push(format!("return domain at {x} (time {k}) not pulled back: {e}"));
                        None
                    }
                }
            }
        };
        out.samples.push(ReturnSample {
            point: x,
            return_time: Some(k),
            domain,
        });
    }
    Ok(out)
}

/// `mod(V; hull U)` lower bounds for every detected domain. A hull that
/// escapes `V` gives 0.
pub fn domain_moduli(v: &JordanDisk, sample: &ReturnMapSample) -> Vec<f64> {
    sample
        .domains
        .iter()
        .map(|d| {
            JordanDisk::convex_hull(d.disk.boundary(), d.disk.basepoint())
                .and_then(|hull| modulus_lower_bound(v, &hull))
                .map_or(0.0, |m| m.lower)
        })
        .collect()
}

/// Smallest modulus over the detected return domains: a lower bound for
/// `ρ` restricted to what was sampled.
pub fn rho_nice_estimate(v: &JordanDisk, sample: &ReturnMapSample) -> Result<f64> {
    if sample.domains.is_empty() {
        return Err(DynError::Precondition("no return domains were detected".into()));
    }
    Ok(domain_moduli(v, sample).into_iter().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn synthetic(v: &JordanDisk, inner: &[JordanDisk]) -> ReturnMapSample {
        ReturnMapSample {
            domain_disk: v.clone(),
            options: ReturnOptions::default(),
            samples: Vec::new(),
            domains: inner
                .iter()
                .map(|d| ReturnDomain {
                    time: 1,
                    representative: d.basepoint(),
                    disk: d.clone(),
                    degree: 1,
                    verified: true,
                })
                .collect(),
            no_return: 0,
            failed: 0,
            notes: Vec::new(),
        }
    }

    #[test]
    fn chebyshev_returns_verify_forward() {
        let f = Polynomial::quadratic(c(-2.0, 0.0));
        let engine = PullbackEngine::new(&f).unwrap();
        let v = engine.tilde_ball(c(0.0, 0.0), 0.2).unwrap().component;
        let opts = ReturnOptions {
            sample_count: 60,
            max_time: 8,
            ..ReturnOptions::default()
        };
        let s = first_return_sample_with(&engine, &v, &opts).unwrap();
        assert!(!s.domains.is_empty());
        for d in &s.domains {
            assert!(d.verified);
            assert!(v.contains(d.representative));
        }
        for sample in &s.samples {
            if let Some(i) = sample.domain {
                assert_eq!(sample.return_time, Some(s.domains[i].time));
            }
        }
        let rho = rho_nice_estimate(&v, &s).unwrap();
        assert!(rho >= 0.0 && rho.is_finite());
    }

    #[test]
    fn zero_time_gives_an_empty_sample() {
        let f = Polynomial::quadratic(c(-2.0, 0.0));
        let v = JordanDisk::circle(c(0.0, 0.0), 0.3).unwrap();
        let s = first_return_sample(&f, &v, 50, 0).unwrap();
        assert!(s.samples.is_empty() && s.domains.is_empty());
        assert!(rho_nice_estimate(&v, &s).is_err());
    }

    #[test]
    fn tiny_central_domain_gives_large_modulus() {
        let v = JordanDisk::circle(c(0.0, 0.0), 1.0).unwrap();
        let u = JordanDisk::circle(c(0.0, 0.0), 0.01).unwrap();
        let rho = rho_nice_estimate(&v, &synthetic(&v, &[u])).unwrap();
        // the hull of the polygonal circle is inscribed in it, so the bound
        // can only be slightly larger than (1/2π) log 100
        let exact = 100f64.ln() / TAU;
        assert!(rho >= exact - 1e-12 && rho < exact + 1e-3, "{rho} vs {exact}");
    }

    #[test]
    fn filling_domain_gives_zero() {
        let v = JordanDisk::circle(c(0.0, 0.0), 1.0).unwrap();
        let u = JordanDisk::circle(c(0.0, 0.0), 0.999_999).unwrap();
        let rho = rho_nice_estimate(&v, &synthetic(&v, &[u])).unwrap();
        assert!(rho < 1e-5);
    }

    #[test]
    fn removing_a_domain_never_lowers_the_minimum() {
        let v = JordanDisk::circle(c(0.0, 0.0), 1.0).unwrap();
        let domains = [
            JordanDisk::circle(c(0.3, 0.0), 0.1).unwrap(),
            JordanDisk::circle(c(-0.5, 0.2), 0.05).unwrap(),
            JordanDisk::circle(c(0.0, -0.6), 0.2).unwrap(),
        ];
        let all = rho_nice_estimate(&v, &synthetic(&v, &domains)).unwrap();
        for skip in 0..3 {
            let rest: Vec<JordanDisk> = (0..3).filter(|&i| i != skip).map(|i| domains[i].clone()).collect();
            assert!(rho_nice_estimate(&v, &synthetic(&v, &rest)).unwrap() >= all);
        }
    }
}
