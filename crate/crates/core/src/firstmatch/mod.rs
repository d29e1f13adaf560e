//! How many packs are bought until one repeats an earlier pack.
//!
//! Two models are provided side by side:
//!
//! * the pairwise-independence formula `P[X = l] = (1-p)^C(l-1, 2) (l-1) p`
//!   ([`paper_pmf`], [`paper_expectation`]), which treats every pair of
//!   purchases as an independent coin with match probability `p`;
//! * an exact oracle built from the endpoint probabilities `q_v`
//!   ([`endpoint_spectrum`], [`exact_survival`], [`exact_pmf_and_expectation`]),
//!   using `P[X > m] = m! e_m(q)` with `e_m` obtained from power sums by
//!   Newton's identities.
//!
//! The formula is not a probability distribution in general: for one candy
//! and three colors its masses add up to 29/27. Both are reported so the gap
//! is visible.

mod mixture;
mod oracle;
mod paper;
mod spectrum;

use std::fmt;

use num_traits::{One, Signed, Zero};

pub use mixture::{mixture_match_probability, PackSizeDistribution, DECIMAL_SUM_TOLERANCE};
pub use oracle::{exact_pmf_and_expectation, first_match_law, initial_power_guess};
pub use paper::{paper_expectation, paper_law, paper_pmf, SeriesSum};
pub use spectrum::{
    endpoint_spectrum, endpoint_spectrum_with, exact_survival, EndpointSpectrum, ModeChoice,
    SpectrumMode, SpectrumOptions,
};

use crate::error::{Error, Result};
use crate::exactmath::{self, ExactRatio};
use crate::highprec::{self, Float};

/// Default truncation tolerance for every series in this module.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Probability that two given purchases are identical packs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchProbability(ExactRatio);

impl MatchProbability {
    pub fn new(p: ExactRatio) -> Result<Self> {
        if p.is_negative() || p > ExactRatio::one() {
            return Err(Error::ProbabilityOutOfRange(p.to_string()));
        }
        Ok(Self(p))
    }

    pub fn value(&self) -> &ExactRatio {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

/// A probability or moment, either exact or a high-precision float with an
/// absolute error bound.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Exact(ExactRatio),
    Approx { value: Float, error_bound: f64 },
}

impl Value {
    pub fn zero() -> Self {
        Value::Exact(ExactRatio::zero())
    }

    pub fn one() -> Self {
        Value::Exact(ExactRatio::one())
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Value::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&ExactRatio> {
        match self {
            Value::Exact(r) => Some(r),
            Value::Approx { .. } => None,
        }
    }

    pub fn error_bound(&self) -> f64 {
        match self {
            Value::Exact(_) => 0.0,
            Value::Approx { error_bound, .. } => *error_bound,
        }
    }

    /// Exact rational value of whatever is stored (the float itself, for
    /// approximations).
    pub fn to_ratio(&self) -> ExactRatio {
        match self {
            Value::Exact(r) => r.clone(),
            Value::Approx { value, .. } => highprec::to_ratio(value),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => highprec::to_f64(&highprec::from_ratio(r, 64)),
            Value::Approx { value, .. } => highprec::to_f64(value),
        }
    }

    /// Positional rendering with `digits` significant digits.
    pub fn render(&self, digits: u32) -> String {
        exactmath::significant(&self.to_ratio(), digits)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Exact(r) => write!(f, "{r}"),
            Value::Approx { error_bound, .. } => {
                write!(f, "{} (+/- {:e})", self.render(20), error_bound)
            }
        }
    }
}

/// Which description of the first-match variable produced a law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    PaperFormula,
    ExactOracle,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::PaperFormula => f.write_str("paper-formula"),
            Model::ExactOracle => f.write_str("exact-oracle"),
        }
    }
}

/// Truncated law of the number of purchases until the first repeat.
#[derive(Debug, Clone)]
pub struct FirstMatchLaw {
    pub model: Model,
    /// `(l, P[X = l])` for `l = 2, 3, ..., last_index`.
    pub pmf: Vec<(u64, Value)>,
    pub expectation: Value,
    /// Largest index folded into the expectation.
    pub last_index: u64,
    /// Upper bound on the expectation mass beyond `last_index`.
    pub tail_bound: f64,
}

impl FirstMatchLaw {
    pub fn pmf_at(&self, l: u64) -> Option<&Value> {
        self.pmf.iter().find(|(i, _)| *i == l).map(|(_, v)| v)
    }

    /// Sum of the recorded masses as a rational (exact in exact mode).
    pub fn pmf_total(&self) -> ExactRatio {
        self.pmf.iter().map(|(_, v)| v.to_ratio()).sum()
    }
}
