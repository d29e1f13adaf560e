//! Endpoint probabilities of one pack and the Newton-identity survival
//! function built on their power sums.

use std::collections::HashMap;

use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use super::Value;
use crate::coincidence::{distinct_pack_count, for_each_weighted, PackSpec};
use crate::error::{Error, Result};
use crate::exactmath::{ExactInt, ExactRatio};
use crate::highprec::{self, Float};

/// Classes folded into one parallel work unit. Fixed so float sums do not
/// depend on the thread count.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeChoice {
    /// Exact when the spectrum is small enough, decimal otherwise.
    Auto,
    Exact,
    Decimal,
}

#[derive(Debug, Clone)]
pub struct SpectrumOptions {
    pub mode: ModeChoice,
    /// Significant decimal digits carried in decimal mode.
    pub precision_digits: u32,
    /// Refuse spectra with more distinct packs than this.
    pub endpoint_ceiling: u64,
    /// `Auto` picks exact arithmetic only up to this many distinct packs...
    pub exact_endpoint_limit: u64,
    /// ...and only up to this many power sums.
    pub exact_power_limit: u32,
    /// Absolute error estimate above which a decimal survival value is
    /// refused instead of returned.
    pub alarm_threshold: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            mode: ModeChoice::Auto,
            precision_digits: highprec::DEFAULT_DIGITS,
            endpoint_ceiling: 10_000_000,
            exact_endpoint_limit: 10_000,
            exact_power_limit: 200,
            alarm_threshold: 1e-30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMode {
    Exact,
    Decimal { digits: u32 },
}

#[derive(Debug, Clone)]
enum PowerSums {
    /// `sums[j] = S_j`.
    Exact(Vec<ExactRatio>),
    /// `sums[j] ~ S_j` with relative error at most `rel_error[j]`.
    Decimal {
        bits: usize,
        sums: Vec<Float>,
        rel_error: Vec<f64>,
    },
}

/// Multiset of endpoint probabilities `q_v = multinomial(n; v) / d^n`,
/// grouped by coefficient, with cached power sums `S_j = sum_v q_v^j`.
#[derive(Debug, Clone)]
pub struct EndpointSpectrum {
    spec: PackSpec,
    /// `(multinomial coefficient, number of packs sharing it)`, largest first.
    classes: Vec<(ExactInt, u64)>,
    endpoints: u64,
    max_power: u32,
    sums: PowerSums,
    alarm_threshold: f64,
}

/// Spectrum with default options.
pub fn endpoint_spectrum(spec: PackSpec, max_power: u32) -> Result<EndpointSpectrum> {
    endpoint_spectrum_with(spec, max_power, &SpectrumOptions::default())
}

pub fn endpoint_spectrum_with(
    spec: PackSpec,
    max_power: u32,
    options: &SpectrumOptions,
) -> Result<EndpointSpectrum> {
    if max_power < 1 {
        return Err(Error::InvalidArgument(
            "max_power must be at least 1".into(),
        ));
    }
    let distinct = distinct_pack_count(spec);
    if distinct > ExactInt::from(options.endpoint_ceiling) {
        return Err(Error::ResourceLimit {
            what: "distinct packs in spectrum",
            size: distinct.to_string(),
            ceiling: options.endpoint_ceiling.to_string(),
        });
    }
    let endpoints = distinct.to_u64().expect("bounded by the ceiling");

    let mut tally: HashMap<ExactInt, u64> = HashMap::new();
    for_each_weighted(spec, |_, coef| *tally.entry(coef.clone()).or_insert(0) += 1);
    let mut classes: Vec<(ExactInt, u64)> = tally.into_iter().collect();
    classes.sort_unstable_by(|a, b| b.0.cmp(&a.0));

    // S_j for j > endpoints never feeds a non-zero survival value.
    let stored = (max_power as u64).min(endpoints) as u32;
    let exact = match options.mode {
        ModeChoice::Exact => true,
        ModeChoice::Decimal => false,
        ModeChoice::Auto => {
            endpoints <= options.exact_endpoint_limit && stored <= options.exact_power_limit
        }
    };
    let sums = if exact {
        exact_power_sums(spec, &classes, stored)
    } else {
        decimal_power_sums(spec, &classes, stored, options.precision_digits)
    };
    Ok(EndpointSpectrum {
        spec,
        classes,
        endpoints,
        max_power,
        sums,
        alarm_threshold: options.alarm_threshold,
    })
}

fn exact_power_sums(spec: PackSpec, classes: &[(ExactInt, u64)], stored: u32) -> PowerSums {
    let walks = spec.walk_count();
    let mut sums = Vec::with_capacity(stored as usize + 1);
    sums.push(ExactRatio::from_integer(
        classes.iter().map(|(_, m)| ExactInt::from(*m)).sum(),
    ));
    let mut powers: Vec<ExactInt> = classes.iter().map(|_| ExactInt::one()).collect();
    let mut denom = ExactInt::one();
    for _ in 1..=stored {
        let mut numer = ExactInt::zero();
        for (power, (coef, mult)) in powers.iter_mut().zip(classes) {
            *power *= coef;
            numer += &*power * *mult;
        }
        denom *= &walks;
        sums.push(ExactRatio::new(numer, denom.clone()));
    }
    PowerSums::Exact(sums)
}

fn decimal_power_sums(
    spec: PackSpec,
    classes: &[(ExactInt, u64)],
    stored: u32,
    digits: u32,
) -> PowerSums {
    let bits = highprec::bits_for_digits(digits);
    let walks = spec.walk_count();
    let len = stored as usize + 1;
    let partials: Vec<Vec<Float>> = classes
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![highprec::zero(bits); len];
            for (coef, mult) in chunk {
                let q = highprec::from_ratio(&ExactRatio::new(coef.clone(), walks.clone()), bits);
                let mult = highprec::from_u64(*mult, bits);
                acc[0] = &acc[0] + &mult;
                let mut power = q.clone();
                for slot in acc.iter_mut().skip(1) {
                    *slot = &*slot + &(&mult * &power);
                    power = &power * &q;
                }
            }
            acc
        })
        .collect();
    let mut sums = vec![highprec::zero(bits); len];
    for partial in partials {
        for (s, p) in sums.iter_mut().zip(partial) {
            *s = &*s + &p;
        }
    }
    let u = highprec::unit_roundoff(bits);
    let adds = (CHUNK + classes.len() / CHUNK + 1) as f64;
    let rel_error = (0..len)
        .map(|j| (2.0 * j as f64 + 4.0 + adds) * u)
        .collect();
    PowerSums::Decimal {
        bits,
        sums,
        rel_error,
    }
}

impl EndpointSpectrum {
    pub fn spec(&self) -> PackSpec {
        self.spec
    }

    /// Number of distinct packs.
    pub fn endpoints(&self) -> u64 {
        self.endpoints
    }

    pub fn max_power(&self) -> u32 {
        self.max_power
    }

    pub fn mode(&self) -> SpectrumMode {
        match &self.sums {
            PowerSums::Exact(_) => SpectrumMode::Exact,
            PowerSums::Decimal { bits, .. } => SpectrumMode::Decimal {
                digits: ((*bits - 4) as f64 / std::f64::consts::LOG2_10).floor() as u32,
            },
        }
    }

    /// Distinct endpoint probabilities with how many packs take each value.
    pub fn probabilities(&self) -> impl Iterator<Item = (ExactRatio, u64)> + '_ {
        let walks = self.spec.walk_count();
        self.classes
            .iter()
            .map(move |(coef, mult)| (ExactRatio::new(coef.clone(), walks.clone()), *mult))
    }

    /// `S_j` for `0 <= j <= min(max_power, endpoints)`.
    pub fn power_sum(&self, j: u32) -> Option<Value> {
        match &self.sums {
            PowerSums::Exact(sums) => sums.get(j as usize).cloned().map(Value::Exact),
            PowerSums::Decimal {
                sums, rel_error, ..
            } => sums.get(j as usize).map(|s| Value::Approx {
                value: s.clone(),
                error_bound: rel_error[j as usize] * highprec::to_f64(s).abs(),
            }),
        }
    }

    fn stored_powers(&self) -> u32 {
        match &self.sums {
            PowerSums::Exact(s) => s.len() as u32 - 1,
            PowerSums::Decimal { sums, .. } => sums.len() as u32 - 1,
        }
    }

    /// `P[X > m]` for `m = 0 ..= upto`.
    ///
    /// Uses `s_m = sum_{j=1..m} (-1)^(j-1) (m-1)!/(m-j)! s_{m-j} S_j`, the
    /// Newton recurrence for `e_m` rescaled by `m!`. Values past the number of
    /// distinct packs are exactly 0.
    pub fn survival_sequence(&self, upto: u32) -> Result<Vec<Value>> {
        let beyond = self.endpoints.saturating_add(1);
        if upto > self.max_power && (upto as u64) < beyond {
            return Err(Error::PowerOutOfRange {
                m: upto as u64,
                max_power: self.max_power as u64,
            });
        }
        let computed = (upto as u64)
            .min(self.endpoints)
            .min(self.stored_powers() as u64) as u32;
        let mut out = match &self.sums {
            PowerSums::Exact(sums) => exact_newton(sums, computed),
            PowerSums::Decimal {
                bits,
                sums,
                rel_error,
            } => decimal_newton(sums, rel_error, *bits, computed, self.alarm_threshold)?,
        };
        out.resize(upto as usize + 1, Value::zero());
        Ok(out)
    }
}

fn exact_newton(sums: &[ExactRatio], upto: u32) -> Vec<Value> {
    let mut s: Vec<ExactRatio> = vec![ExactRatio::one()];
    for m in 1..=upto as usize {
        if m == 1 {
            s.push(ExactRatio::one());
            continue;
        }
        let mut total = ExactRatio::zero();
        let mut falling = ExactInt::one();
        for j in 1..=m {
            if j > 1 {
                falling *= m - j + 1;
            }
            let term = ExactRatio::from_integer(falling.clone()) * &s[m - j] * &sums[j];
            if j % 2 == 1 {
                total += term;
            } else {
                total -= term;
            }
        }
        s.push(total);
    }
    s.into_iter().map(Value::Exact).collect()
}

/// Float version of the recurrence with a running absolute error bound.
///
/// With `c_j = (m-1)!/(m-j)! S_j`, the error in `s_m` is at most
/// `sum_j |c_j| err(s_{m-j}) + sum_j |c_j s_{m-j}| (rel(S_j) + (m + j + 3) u)`.
fn decimal_newton(
    sums: &[Float],
    rel_error: &[f64],
    bits: usize,
    upto: u32,
    threshold: f64,
) -> Result<Vec<Value>> {
    let u = highprec::unit_roundoff(bits);
    let mut s: Vec<Float> = vec![highprec::one(bits)];
    let mut err: Vec<f64> = vec![0.0];
    for m in 1..=upto as usize {
        if m == 1 {
            s.push(highprec::one(bits));
            err.push(0.0);
            continue;
        }
        let mut total = highprec::zero(bits);
        let mut bound = 0.0f64;
        let mut falling = highprec::one(bits);
        for j in 1..=m {
            if j > 1 {
                falling = &falling * highprec::from_u64((m - j + 1) as u64, bits);
            }
            let c = &falling * &sums[j];
            let term = &c * &s[m - j];
            let c_abs = highprec::to_f64(&c).abs();
            let term_abs = highprec::to_f64(&term).abs();
            bound += c_abs * err[m - j] + term_abs * (rel_error[j] + (m + j + 3) as f64 * u);
            if j % 2 == 1 {
                total = &total + &term;
            } else {
                total = &total - &term;
            }
        }
        if bound.is_nan() || bound > threshold {
            return Err(Error::PrecisionAlarm {
                m: m as u64,
                estimate: bound,
                threshold,
            });
        }
        s.push(total);
        err.push(bound);
    }
    Ok(s.into_iter()
        .zip(err)
        .map(|(value, error_bound)| Value::Approx { value, error_bound })
        .collect())
}

/// `P[X > m]`: probability that the first `m` packs are pairwise different.
pub fn exact_survival(spectrum: &EndpointSpectrum, m: u32) -> Result<Value> {
    if m as u64 > spectrum.endpoints {
        return Ok(Value::zero());
    }
    let seq = spectrum.survival_sequence(m)?;
    Ok(seq.into_iter().nth(m as usize).expect("sequence covers m"))
}
