use num_traits::{ToPrimitive, Zero};

use super::spectrum::{endpoint_spectrum_with, EndpointSpectrum, SpectrumOptions};
use super::{FirstMatchLaw, Model, Value};
use crate::coincidence::{coincidence_probability, distinct_pack_count, PackSpec};
use crate::error::{Error, Result};
use crate::exactmath::ExactRatio;
use crate::highprec::{self, Float};

/// Exact law of the first repeat from a precomputed spectrum.
///
/// `P[X = l] = s_{l-1} - s_l` and `E[X] = sum_m s_m` with `s_m = P[X > m]`.
/// The sum stops at the first `M` where `s_M < tol` and the bound on
/// `sum_{m > M} s_m` is below `tol` too. The bound uses that
/// `s_{m+1} / s_m` never increases in `m` (Newton's inequalities), so the
/// tail is at most `s_{M+1} / (1 - s_{M+1}/s_M)`.
pub fn exact_pmf_and_expectation(spectrum: &EndpointSpectrum, tol: f64) -> Result<FirstMatchLaw> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let endpoints = spectrum.endpoints();
    let upto = (spectrum.max_power() as u64).min(endpoints + 1) as u32;
    let seq = spectrum.survival_sequence(upto)?;

    let upper = |v: &Value| v.to_f64() + v.error_bound();
    let lower = |v: &Value| v.to_f64() - v.error_bound();

    let mut stop = None;
    for m in 1..=upto as usize {
        if upper(&seq[m]) >= tol {
            continue;
        }
        let tail = if m as u64 >= endpoints {
            0.0
        } else if m < upto as usize {
            let next = upper(&seq[m + 1]);
            let current = lower(&seq[m]);
            if next <= 0.0 {
                0.0
            } else if current > 0.0 && next < current {
                let ratio = next / current;
                next / (1.0 - ratio) * (1.0 + 1e-9)
            } else {
                f64::INFINITY
            }
        } else {
            f64::INFINITY
        };
        if tail < tol {
            stop = Some((m, tail));
            break;
        }
    }
    let Some((last, tail_bound)) = stop else {
        return Err(Error::NotConverged {
            tol,
            terms: upto as u64,
        });
    };

    let seq = &seq[..=last];
    let (pmf, expectation) = if seq.iter().all(Value::is_exact) {
        let s: Vec<ExactRatio> = seq.iter().map(Value::to_ratio).collect();
        let pmf = (2..=last)
            .map(|l| (l as u64, Value::Exact(&s[l - 1] - &s[l])))
            .collect();
        let total: ExactRatio = s.iter().sum();
        (pmf, Value::Exact(total))
    } else {
        let bits = highprec::bits_for_digits(spectrum_digits(spectrum));
        let u = highprec::unit_roundoff(bits);
        let floats: Vec<Float> = seq
            .iter()
            .map(|v| match v {
                Value::Approx { value, .. } => value.clone(),
                Value::Exact(r) => highprec::from_ratio(r, bits),
            })
            .collect();
        let pmf = (2..=last)
            .map(|l| {
                let value = &floats[l - 1] - &floats[l];
                let error_bound = seq[l - 1].error_bound()
                    + seq[l].error_bound()
                    + u * highprec::to_f64(&value).abs();
                (l as u64, Value::Approx { value, error_bound })
            })
            .collect();
        let mut total = highprec::zero(bits);
        for f in &floats {
            total = &total + f;
        }
        let error_bound = seq.iter().map(Value::error_bound).sum::<f64>()
            + (last + 1) as f64 * u * highprec::to_f64(&total).abs();
        (
            pmf,
            Value::Approx {
                value: total,
                error_bound,
            },
        )
    };
    Ok(FirstMatchLaw {
        model: Model::ExactOracle,
        pmf,
        expectation,
        last_index: last as u64,
        tail_bound,
    })
}

fn spectrum_digits(spectrum: &EndpointSpectrum) -> u32 {
    match spectrum.mode() {
        super::SpectrumMode::Decimal { digits } => digits,
        super::SpectrumMode::Exact => highprec::DEFAULT_DIGITS,
    }
}

/// First guess for how many power sums the oracle needs.
///
/// `P[X > m]` falls roughly like `exp(-m^2 p / 2)`; a quarter extra covers
/// the spread between that and the true decay. Never more than one past the
/// number of distinct packs, where the survival is exactly 0.
pub fn initial_power_guess(spec: PackSpec, tol: f64) -> u32 {
    let endpoints = distinct_pack_count(spec)
        .to_u64()
        .unwrap_or(u64::MAX)
        .saturating_add(1);
    let p = coincidence_probability(spec);
    let p = highprec::to_f64(&highprec::from_ratio(&p, 64));
    let guess = if p <= 0.0 || p.is_zero() {
        u32::MAX as f64
    } else {
        ((2.0 * (1.0 / tol).ln() / p).sqrt() * 1.25 + 8.0).ceil()
    };
    guess.min(endpoints as f64).min(u32::MAX as f64) as u32
}

/// Exact first-repeat law for `spec`, growing the spectrum until the
/// truncation criterion is met.
pub fn first_match_law(
    spec: PackSpec,
    tol: f64,
    options: &SpectrumOptions,
) -> Result<FirstMatchLaw> {
    let endpoints = distinct_pack_count(spec).to_u64().unwrap_or(u64::MAX);
    let ceiling = endpoints.saturating_add(1).min(u32::MAX as u64) as u32;
    let mut power = initial_power_guess(spec, tol).max(2);
    loop {
        let spectrum = endpoint_spectrum_with(spec, power, options)?;
        match exact_pmf_and_expectation(&spectrum, tol) {
            Err(Error::NotConverged { .. }) if power < ceiling => {
                power = power.saturating_mul(2).min(ceiling);
            }
            other => return other,
        }
    }
}
