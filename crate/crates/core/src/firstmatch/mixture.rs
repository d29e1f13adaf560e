use std::collections::BTreeMap;
use std::path::Path;

use num_traits::{One, Signed, Zero};

use crate::coincidence::{coincidence_probability_with, CoincidenceTable, PackSpec};
use crate::error::{Error, Result};
use crate::exactmath::{parse_ratio, ExactRatio};

/// Accepted distance from 1 for weights written as decimals.
pub const DECIMAL_SUM_TOLERANCE: f64 = 1e-9;

/// Finitely supported distribution of the number of candies per pack.
///
/// Text form: one `n weight` pair per line, `#` starts a comment. Weights
/// are integers, fractions (`3/10`) or decimals (`0.3`, `2.5e-1`). When every
/// weight is an integer or fraction they must add up to exactly 1. If any
/// weight is a decimal the total may be off by at most 1e-9 and the weights
/// are rescaled to add up to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PackSizeDistribution {
    support: Vec<(u32, ExactRatio)>,
    renormalized: bool,
}

impl PackSizeDistribution {
    /// Builds from `(n, f(n))` pairs that must add up to exactly 1.
    pub fn new(pairs: Vec<(u32, ExactRatio)>) -> Result<Self> {
        Self::build(pairs.into_iter().map(|(n, w)| (n, w, 0)).collect(), false)
    }

    /// Distribution concentrated on a single pack size.
    pub fn degenerate(n: u32) -> Self {
        Self {
            support: vec![(n, ExactRatio::one())],
            renormalized: false,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut any_decimal = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Distribution(format!(
                    "line {line_no}: expected `n weight`, found {} field(s)",
                    fields.len()
                )));
            }
            let n: u32 = fields[0].parse().map_err(|_| {
                Error::Distribution(format!(
                    "line {line_no}: pack size `{}` is not a non-negative integer",
                    fields[0]
                ))
            })?;
            let weight = parse_ratio(fields[1]).ok_or_else(|| {
                Error::Distribution(format!(
                    "line {line_no}: weight `{}` is not a number",
                    fields[1]
                ))
            })?;
            if fields[1].contains(['.', 'e', 'E']) {
                any_decimal = true;
            }
            entries.push((n, weight, line_no));
        }
        Self::build(entries, any_decimal)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Distribution(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn build(entries: Vec<(u32, ExactRatio, usize)>, decimal: bool) -> Result<Self> {
        let at = |line: usize| {
            if line == 0 {
                String::new()
            } else {
                format!("line {line}: ")
            }
        };
        let mut seen: BTreeMap<u32, usize> = BTreeMap::new();
        let mut support = Vec::new();
        for (n, weight, line) in entries {
            if weight.is_negative() {
                return Err(Error::Distribution(format!(
                    "{}negative weight {weight} for n = {n}",
                    at(line)
                )));
            }
            if let Some(first) = seen.insert(n, line) {
                return Err(Error::Distribution(format!(
                    "{}pack size {n} listed twice (first on line {first})",
                    at(line)
                )));
            }
            if !weight.is_zero() {
                support.push((n, weight));
            }
        }
        if support.is_empty() {
            return Err(Error::Distribution(
                "no pack size has positive weight".into(),
            ));
        }
        let total: ExactRatio = support.iter().map(|(_, w)| w.clone()).sum();
        let mut renormalized = false;
        if total != ExactRatio::one() {
            let off = (&total - ExactRatio::one()).abs();
            let limit = ExactRatio::new(1.into(), 1_000_000_000.into());
            if !decimal || off > limit {
                return Err(Error::Distribution(format!(
                    "weights sum to {}, not 1",
                    crate::exactmath::significant(&total, 12)
                )));
            }
            for (_, w) in support.iter_mut() {
                *w = &*w / &total;
            }
            renormalized = true;
        }
        support.sort_by_key(|(n, _)| *n);
        Ok(Self {
            support,
            renormalized,
        })
    }

    pub fn support(&self) -> &[(u32, ExactRatio)] {
        &self.support
    }

    /// Whether decimal weights were rescaled to add up to 1.
    pub fn renormalized(&self) -> bool {
        self.renormalized
    }
}

/// Probability that two packs with independently drawn sizes are identical:
/// `sum_n f(n)^2 P[match | n, d]`.
pub fn mixture_match_probability(f: &PackSizeDistribution, d: u32) -> Result<ExactRatio> {
    let mut table = CoincidenceTable::new();
    let mut total = ExactRatio::zero();
    for (n, weight) in f.support() {
        let spec = PackSpec::new(*n, d)?;
        total += weight * weight * coincidence_probability_with(spec, &mut table);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coincidence::coincidence_probability;
    use crate::exactmath::ratio;

    #[test]
    fn degenerate_reduces_to_single_term() {
        let f = PackSizeDistribution::degenerate(60);
        let p = mixture_match_probability(&f, 5).unwrap();
        assert_eq!(p, coincidence_probability(PackSpec::new(60, 5).unwrap()));
        for n in 0..6 {
            for d in 1..4 {
                let f = PackSizeDistribution::degenerate(n);
                assert_eq!(
                    mixture_match_probability(&f, d).unwrap(),
                    coincidence_probability(PackSpec::new(n, d).unwrap())
                );
            }
        }
    }

    #[test]
    fn uniform_two_sizes() {
        let f = PackSizeDistribution::parse("1 1/2\n2 1/2\n").unwrap();
        assert_eq!(mixture_match_probability(&f, 2).unwrap(), ratio(7, 32));
        let f = PackSizeDistribution::parse("# sizes\n1 1\n").unwrap();
        assert_eq!(mixture_match_probability(&f, 3).unwrap(), ratio(1, 3));
    }

    #[test]
    fn decimals_are_renormalized() {
        let f = PackSizeDistribution::parse("1 0.3333333333\n2 0.6666666666 # close\n").unwrap();
        assert!(f.renormalized());
        let total: ExactRatio = f.support().iter().map(|(_, w)| w.clone()).sum();
        assert_eq!(total, ratio(1, 1));

        let f = PackSizeDistribution::parse("1 0.5\n2 0.5\n").unwrap();
        assert!(!f.renormalized());
    }

    #[test]
    fn rejects_bad_input() {
        let cases = [
            ("1 0.5\n2 0.4\n", "sum"),
            ("1 1/2\n2 1/3\n", "sum"),
            ("1 -0.5\n2 1.5\n", "line 1"),
            ("1 1/2\n1 1/2\n", "line 2"),
            ("x 1\n", "line 1"),
            ("1 abc\n", "line 1"),
            ("1 1 1\n", "line 1"),
            ("# nothing\n", "positive"),
            ("3 0\n", "positive"),
        ];
        for (text, needle) in cases {
            let err = PackSizeDistribution::parse(text).unwrap_err().to_string();
            assert!(err.contains(needle), "{text:?}: {err}");
        }
    }

    #[test]
    fn zero_weights_dropped() {
        let f = PackSizeDistribution::parse("1 0\n2 1\n").unwrap();
        assert_eq!(f.support(), &[(2, ratio(1, 1))]);
    }

    #[test]
    fn zero_colors_rejected() {
        let f = PackSizeDistribution::degenerate(3);
        assert_eq!(mixture_match_probability(&f, 0), Err(Error::NoColors));
    }

    #[test]
    fn constructor_requires_exact_total() {
        assert!(PackSizeDistribution::new(vec![(1, ratio(1, 2))]).is_err());
        assert!(PackSizeDistribution::new(vec![(1, ratio(1, 2)), (5, ratio(1, 2))]).is_ok());
    }
}
