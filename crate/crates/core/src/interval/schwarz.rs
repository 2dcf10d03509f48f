use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checks::tilde_interval;
use super::map::IntervalMap;
use super::tree::solve_on_branch;
use crate::error::{DynError, Result};

const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchwarzOptions {
    pub eta: f64,
    pub trials: usize,
    pub max_depth: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchwarzProbe {
    pub options: SchwarzOptions,
    /// `|Df^n(x)| |U| / |V|` per admissible trial.
    pub ratios: Vec<f64>,
    pub depths: Vec<usize>,
    pub min: Option<f64>,
    pub histogram: Vec<HistogramBin>,
    /// Trials where some backward step had no branch covering the interval.
    pub no_branch: usize,
}

/// One sampled diffeomorphic branch `f^n: U -> V` and its ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchwarzBranch {
    pub domain: [f64; 2],
    pub target: [f64; 2],
    pub point: f64,
    pub depth: usize,
    pub ratio: f64,
}

/// Pulls `target` back `depth` times, each time through a uniformly chosen
/// branch of `f` whose image covers the current interval, and measures the
/// ratio at the preimage of the midpoint. `None` when no branch covers.
pub fn sample_branch<R: Rng>(map: &IntervalMap, target: [f64; 2], depth: usize, rng: &mut R) -> Result<Option<SchwarzBranch>> {
    let mid = 0.5 * (target[0] + target[1]);
    let mut interval = target;
    let mut point = mid;
    for _ in 0..depth {
        let covering: Vec<usize> = (0..map.branches().len())
            .filter(|&i| {
                let [u, v] = map.branches()[i];
                let (fu, fv) = (map.eval(u), map.eval(v));
                fu.min(fv) <= interval[0] && fu.max(fv) >= interval[1]
            })
            .collect();
        let u: f64 = rng.gen();
        if covering.is_empty() {
            return Ok(None);
        }
        let b = covering[((u * covering.len() as f64) as usize).min(covering.len() - 1)];
        let a = solve_on_branch(map, b, interval[0])?;
        let c = solve_on_branch(map, b, interval[1])?;
        interval = [a.min(c), a.max(c)];
        point = solve_on_branch(map, b, point)?;
    }
    let mut derivative = 1.0;
    let mut x = point;
    for _ in 0..depth {
        let (next, dx) = map.evaluate(x);
        derivative *= dx.abs();
        x = next;
    }
    let ratio = derivative * (interval[1] - interval[0]) / (target[1] - target[0]);
    Ok(Some(SchwarzBranch {
        domain: interval,
        target,
        point,
        depth,
        ratio,
    }))
}

pub fn real_schwarz_probe(map: &IntervalMap, eta: f64, trials: usize, max_depth: usize) -> Result<SchwarzProbe> {
    real_schwarz_probe_with(
        map,
        &SchwarzOptions {
            eta,
            trials,
            max_depth,
            seed: 0,
        },
    )
}

/// Monte-Carlo probe of the real Schwarz ratio. Each trial picks a critical
/// point, a depth `n` in `0..=max_depth` and a chain of branches, with `V`
/// the whole `B̃(c, η)`. Trial `t` draws from its own ChaCha stream, so runs
/// with equal seeds and different `η` make the same choices wherever both
/// have them available.
pub fn real_schwarz_probe_with(map: &IntervalMap, opts: &SchwarzOptions) -> Result<SchwarzProbe> {
    if !(opts.eta > 0.0) {
        return Err(DynError::Precondition(format!("eta must be positive, got {}", opts.eta)));
    }
    let mut probe = SchwarzProbe {
        options: *opts,
        ratios: Vec::new(),
        depths: Vec::new(),
        min: None,
        histogram: Vec::new(),
        no_branch: 0,
    };
    let count = map.critical().len();
    if count == 0 {
        return Ok(probe);
    }
    let targets: Vec<[f64; 2]> = (0..count)
        .map(|ci| tilde_interval(map, ci, opts.eta))
        .collect::<Result<_>>()?;
    for t in 0..opts.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(t as u64);
        let ci = rng.gen_range(0..count);
        let depth = rng.gen_range(0..=opts.max_depth);
        match sample_branch(map, targets[ci], depth, &mut rng)? {
            Some(branch) => {
                probe.ratios.push(branch.ratio);
                probe.depths.push(depth);
            }
            None => probe.no_branch += 1,
        }
    }
    probe.min = probe.ratios.iter().copied().reduce(f64::min);
    if let Some(lo) = probe.min {
        let hi = probe.ratios.iter().copied().fold(lo, f64::max);
        let width = (hi - lo) / HISTOGRAM_BINS as f64;
        let mut counts = [0usize; HISTOGRAM_BINS];
        for &r in &probe.ratios {
            let k = if width > 0.0 { ((r - lo) / width) as usize } else { 0 };
            counts[k.min(HISTOGRAM_BINS - 1)] += 1;
        }
        probe.histogram = counts
            .iter()
            .enumerate()
            .map(|(k, &count)| HistogramBin {
                lower: lo + width * k as f64,
                upper: lo + width * (k + 1) as f64,
                count,
            })
            .collect();
    }
    Ok(probe)
}
