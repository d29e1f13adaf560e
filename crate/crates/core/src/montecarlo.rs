//! Seeded simulation of pack filling.
//!
//! Every trial draws from its own ChaCha20 stream, selected by the trial
//! index under a generator seeded from the user seed. Trials can therefore
//! run in any order or in parallel and still produce identical reports.
//! Aggregation only adds integers, so results do not depend on scheduling.

use std::collections::{BTreeMap, HashSet};

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::coincidence::{
    coincidence_probability, distinct_pack_count, endpoint_probability, Composition, PackSpec,
};
use crate::error::{Error, Result};
use crate::highprec;

/// Identifier stored in every report.
pub const RNG_ALGORITHM: &str =
    "chacha20 (rand_chacha 0.3), seed_from_u64(seed), stream = trial index";

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959963984540054;

/// Generator for trial `index` under `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One filled pack: the color of each candy in order, colors numbered
/// `0..d`, and the resulting per-color counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkSample {
    pub steps: Vec<u32>,
    pub endpoint: Composition,
}

pub fn sample_pack<R: Rng + ?Sized>(spec: PackSpec, rng: &mut R) -> WalkSample {
    let steps: Vec<u32> = (0..spec.n()).map(|_| rng.gen_range(0..spec.d())).collect();
    let mut counts = vec![0u32; spec.d() as usize];
    for &s in &steps {
        counts[s as usize] += 1;
    }
    WalkSample {
        steps,
        endpoint: Composition::new(counts),
    }
}

/// Fills `counts` with the endpoint of a fresh walk without keeping the
/// steps. Consumes the generator exactly as [`sample_pack`] does.
pub fn sample_endpoint<R: Rng + ?Sized>(spec: PackSpec, rng: &mut R, counts: &mut Vec<u32>) {
    counts.clear();
    counts.resize(spec.d() as usize, 0);
    for _ in 0..spec.n() {
        counts[rng.gen_range(0..spec.d()) as usize] += 1;
    }
}

/// Aggregate of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub seed: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `wilson` for proportions, `normal` for means.
    pub ci_method: &'static str,
    pub analytic_reference: Option<f64>,
    pub rng: &'static str,
}

/// 95% Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = (center - half).max(0.0).min(p);
    let high = (center + half).min(1.0).max(p);
    (low, high)
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    Ok(())
}

/// Fraction of trials in which two independently filled packs coincide.
pub fn pair_match_rate(spec: PackSpec, trials: u64, seed: u64) -> Result<TrialReport> {
    check_trials(trials)?;
    let matches: u64 = (0..trials)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(a, b), i| {
                let mut rng = trial_rng(seed, i);
                sample_endpoint(spec, &mut rng, a);
                sample_endpoint(spec, &mut rng, b);
                u64::from(a == b)
            },
        )
        .sum();
    let (ci_low, ci_high) = wilson_interval(matches, trials);
    let reference = highprec::from_ratio(&coincidence_probability(spec), 64);
    Ok(TrialReport {
        seed,
        trials,
        estimate: matches as f64 / trials as f64,
        ci_low,
        ci_high,
        ci_method: "wilson",
        analytic_reference: Some(highprec::to_f64(&reference)),
        rng: RNG_ALGORITHM,
    })
}

/// Number of packs bought up to and including the first one identical to
/// an earlier pack.
pub fn first_match_trial<R: Rng + ?Sized>(spec: PackSpec, rng: &mut R) -> u64 {
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    let mut counts = Vec::new();
    let mut drawn = 0u64;
    loop {
        sample_endpoint(spec, rng, &mut counts);
        drawn += 1;
        if !seen.insert(counts.clone()) {
            return drawn;
        }
    }
}

/// Outcome of repeated first-match trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstMatchReport {
    #[serde(flatten)]
    pub report: TrialReport,
    pub standard_error: f64,
    /// Trials that ended after exactly `l` packs.
    pub histogram: BTreeMap<u64, u64>,
}

impl FirstMatchReport {
    pub fn mean(&self) -> f64 {
        self.report.estimate
    }

    pub fn empirical_pmf(&self) -> Vec<(u64, f64)> {
        let t = self.report.trials as f64;
        self.histogram
            .iter()
            .map(|(&l, &c)| (l, c as f64 / t))
            .collect()
    }
}

fn merge(mut a: BTreeMap<u64, u64>, b: BTreeMap<u64, u64>) -> BTreeMap<u64, u64> {
    for (k, v) in b {
        *a.entry(k).or_insert(0) += v;
    }
    a
}

/// Runs `trials` first-match trials. The interval is `mean +- 1.96 SE`.
pub fn first_match_experiment(spec: PackSpec, trials: u64, seed: u64) -> Result<FirstMatchReport> {
    check_trials(trials)?;
    let histogram = (0..trials)
        .into_par_iter()
        .fold(BTreeMap::new, |mut h, i| {
            let mut rng = trial_rng(seed, i);
            *h.entry(first_match_trial(spec, &mut rng)).or_insert(0u64) += 1;
            h
        })
        .reduce(BTreeMap::new, merge);

    let (sum, sum_sq) = histogram.iter().fold((0u128, 0u128), |(s, q), (&l, &c)| {
        let (l, c) = (l as u128, c as u128);
        (s + l * c, q + l * l * c)
    });
    let t = trials as f64;
    let mean = sum as f64 / t;
    let variance = if trials > 1 {
        let t = trials as u128;
        // exact integer numerator of the sample variance
        let num = (sum_sq * t - sum * sum) as f64;
        num / (trials as f64 * (trials - 1) as f64)
    } else {
        0.0
    };
    let standard_error = (variance / t).sqrt();
    Ok(FirstMatchReport {
        report: TrialReport {
            seed,
            trials,
            estimate: mean,
            ci_low: mean - Z_95 * standard_error,
            ci_high: mean + Z_95 * standard_error,
            ci_method: "normal",
            analytic_reference: None,
            rng: RNG_ALGORITHM,
        },
        standard_error,
        histogram,
    })
}

/// Counts of sampled endpoints, keyed by composition.
pub fn endpoint_histogram(spec: PackSpec, samples: u64, seed: u64) -> BTreeMap<Vec<u32>, u64> {
    (0..samples)
        .into_par_iter()
        .fold(BTreeMap::new, |mut h, i| {
            let mut rng = trial_rng(seed, i);
            let mut counts = Vec::new();
            sample_endpoint(spec, &mut rng, &mut counts);
            *h.entry(counts).or_insert(0u64) += 1;
            h
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        })
}

/// Pearson statistic of a histogram against the exact endpoint law and its
/// degrees of freedom (number of compositions minus one).
pub fn chi_square_statistic(
    spec: PackSpec,
    histogram: &BTreeMap<Vec<u32>, u64>,
    samples: u64,
) -> Result<(f64, u64)> {
    let cells = distinct_pack_count(spec)
        .to_u64()
        .filter(|&c| c <= 1_000_000)
        .ok_or_else(|| Error::ResourceLimit {
            what: "chi-square cells",
            size: distinct_pack_count(spec).to_string(),
            ceiling: "1000000".into(),
        })?;
    let mut stat = 0.0;
    for c in crate::coincidence::compositions(spec) {
        let p = endpoint_probability(spec, &c)?;
        let expected = highprec::to_f64(&highprec::from_ratio(&p, 64)) * samples as f64;
        let observed = histogram.get(c.counts()).copied().unwrap_or(0) as f64;
        stat += (observed - expected).powi(2) / expected;
    }
    Ok((stat, cells - 1))
}
