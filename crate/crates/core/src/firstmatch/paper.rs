use num_traits::{One, Pow, Zero};

use super::{FirstMatchLaw, MatchProbability, Model, Value};
use crate::error::{Error, Result};
use crate::exactmath::ExactRatio;
use crate::highprec::{self, Float};

/// Hard cap on evaluated terms; reached only for match probabilities far
/// below anything a real pack produces.
const MAX_TERMS: u64 = 10_000_000;

/// `(1-p)^C(l-1, 2) * (l-1) * p`, exactly. `l = 1` gives 0.
pub fn paper_pmf(p: &MatchProbability, l: i64) -> Result<ExactRatio> {
    if l < 1 {
        return Err(Error::InvalidArgument(format!(
            "purchase index must be at least 1, got {l}"
        )));
    }
    if l == 1 {
        return Ok(ExactRatio::zero());
    }
    let l = l as u64;
    let pairs = (l - 1) * (l - 2) / 2;
    let miss = ExactRatio::one() - p.value();
    Ok(Pow::pow(miss, pairs) * ExactRatio::from_integer((l - 1).into()) * p.value())
}

/// Truncated series together with what was left out.
#[derive(Debug, Clone)]
pub struct SeriesSum {
    pub value: Value,
    /// Last index whose term was added.
    pub last_index: u64,
    /// Bound on the sum of every omitted term.
    pub tail_bound: f64,
}

/// Walks `l = 2, 3, ...` producing `P[X = l]` under the pairwise formula.
///
/// Keeps `(1-p)^C(l-1, 2)` and `(1-p)^(l-1)` as running products so each
/// step costs two multiplications.
struct PairwiseTerms {
    p: Float,
    miss: Float,
    miss_f64: f64,
    /// (1-p)^C(l-1, 2)
    pair_power: Float,
    /// (1-p)^(l-1)
    step_power: Float,
    l: u64,
    bits: usize,
}

impl PairwiseTerms {
    fn new(p: &MatchProbability, bits: usize) -> Self {
        let p_float = highprec::from_ratio(p.value(), bits);
        let miss = highprec::from_ratio(&(ExactRatio::one() - p.value()), bits);
        Self {
            miss_f64: highprec::to_f64(&miss),
            step_power: miss.clone(),
            miss,
            p: p_float,
            pair_power: highprec::one(bits),
            l: 2,
            bits,
        }
    }

    /// `(l, P[X = l], l * P[X = l])` for the current `l`.
    fn current(&self) -> (u64, Float, Float) {
        let pmf = &self.pair_power * highprec::from_u64(self.l - 1, self.bits) * &self.p;
        let term = &pmf * highprec::from_u64(self.l, self.bits);
        (self.l, pmf, term)
    }

    /// Bound on `sum_{k > l} k * P[X = k]` given the current term.
    ///
    /// Consecutive terms have ratio `(k+1)/(k-1) * (1-p)^(k-1)`, which only
    /// shrinks as `k` grows, so the tail is dominated by a geometric series
    /// started at the next term.
    fn tail_bound(&self, term: f64) -> f64 {
        let l = self.l as f64;
        let q_pow = highprec::to_f64(&self.step_power); // (1-p)^(l-1)
        let next = term * (l + 1.0) / (l - 1.0) * q_pow;
        let ratio = (l + 2.0) / l * q_pow * self.miss_f64;
        if ratio < 1.0 {
            next / (1.0 - ratio) * (1.0 + 1e-9)
        } else {
            f64::INFINITY
        }
    }

    fn advance(&mut self) {
        self.pair_power = &self.pair_power * &self.step_power;
        self.step_power = &self.step_power * &self.miss;
        self.l += 1;
    }
}

fn run_series(
    p: &MatchProbability,
    tol: f64,
    digits: u32,
    mut on_term: impl FnMut(u64, &Float),
) -> Result<SeriesSum> {
    if p.is_zero() {
        return Err(Error::ZeroMatchProbability);
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let bits = highprec::bits_for_digits(digits);
    let mut terms = PairwiseTerms::new(p, bits);
    let mut sum = highprec::zero(bits);
    loop {
        let (l, pmf, term) = terms.current();
        on_term(l, &pmf);
        sum = &sum + &term;
        let term_f64 = highprec::to_f64(&term);
        if term_f64 < tol {
            let tail = terms.tail_bound(term_f64);
            if tail < tol {
                let rounding = (3 * l + 8) as f64
                    * highprec::unit_roundoff(bits)
                    * highprec::to_f64(&sum).abs();
                return Ok(SeriesSum {
                    value: Value::Approx {
                        value: sum,
                        error_bound: rounding,
                    },
                    last_index: l,
                    tail_bound: tail,
                });
            }
        }
        if l >= MAX_TERMS {
            return Err(Error::NotConverged { tol, terms: l });
        }
        terms.advance();
    }
}

/// `E[X] = sum_l l (l-1) p (1-p)^C(l-1, 2)`, truncated once both the current
/// term and the bound on everything after it fall below `tol`.
pub fn paper_expectation(p: &MatchProbability, tol: f64) -> Result<SeriesSum> {
    run_series(p, tol, highprec::DEFAULT_DIGITS, |_, _| {})
}

/// Pairwise-formula masses for `l = 2 ..= last_index` plus the expectation.
pub fn paper_law(p: &MatchProbability, tol: f64) -> Result<FirstMatchLaw> {
    let mut pmf = Vec::new();
    let series = run_series(p, tol, highprec::DEFAULT_DIGITS, |l, mass| {
        pmf.push((l, mass.clone()));
    })?;
    let bits = highprec::bits_for_digits(highprec::DEFAULT_DIGITS);
    let u = highprec::unit_roundoff(bits);
    let pmf = pmf
        .into_iter()
        .map(|(l, value)| {
            let error_bound = (2 * l + 4) as f64 * u * highprec::to_f64(&value).abs();
            (l, Value::Approx { value, error_bound })
        })
        .collect();
    Ok(FirstMatchLaw {
        model: Model::PaperFormula,
        pmf,
        expectation: series.value,
        last_index: series.last_index,
        tail_bound: series.tail_bound,
    })
}
