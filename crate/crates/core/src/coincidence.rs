//! Count and probability that two independent `n`-step, `d`-color fillings
//! end at the same pack.
//!
//! `|E|` for a [`PackSpec`] is the number of ordered walk pairs sharing an
//! endpoint. Three independent routes compute it:
//!
//! * [`count_closed`] sums squared multinomial coefficients over every
//!   weak composition of `n` into `d` parts.
//! * [`count_recursive`] peels off one color at a time,
//!   `|E(n, d)| = sum_k C(n, k)^2 |E(n - k, d - 1)|`, memoized in a
//!   [`CoincidenceTable`].
//! * [`count_gf`] reads the coefficient of `x^(2n)` in
//!   `(sum_k x^(2k) / (k!)^2)^d` and scales by `(n!)^2`.
//!
//! `n = 0` and `d = 1` are both valid and give count 1. `d > n` is allowed.

use std::collections::HashMap;
use std::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exactmath::{
    binomial, factorial, factorials, integer_pow, multinomial, ExactInt, ExactRatio,
};

/// Pack size `n` (candies) and number of colors `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PackSpec {
    n: u32,
    d: u32,
}

impl PackSpec {
    pub fn new(n: u32, d: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::NoColors);
        }
        Ok(Self { n, d })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    /// Walks per pack, `d^n`.
    pub fn walk_count(&self) -> ExactInt {
        integer_pow(self.d as u64, self.n)
    }
}

impl fmt::Display for PackSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={}, d={}", self.n, self.d)
    }
}

/// Per-color counts of one pack; the endpoint of a filling walk.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Composition {
    counts: Vec<u32>,
}

impl Composition {
    pub fn new(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn validate_for(&self, spec: PackSpec) -> Result<()> {
        if self.counts.len() != spec.d as usize {
            return Err(Error::CompositionLength {
                colors: spec.d,
                len: self.counts.len(),
            });
        }
        let total = self.total();
        if total != spec.n as u64 {
            return Err(Error::PartsSumMismatch {
                expected: spec.n as u64,
                actual: total,
            });
        }
        Ok(())
    }
}

impl From<Vec<u32>> for Composition {
    fn from(counts: Vec<u32>) -> Self {
        Self::new(counts)
    }
}

/// Advances `counts` to its lexicographic successor among weak compositions
/// with the same total. Returns `(a, v)`, the prior contents of the slot that
/// grew and of the slot that was drained, or `None` after the last one.
///
/// The successor of `c` moves one unit from the last non-zero slot `z`
/// (with `z > 0`) into slot `z - 1` and parks the rest of slot `z` in the
/// final slot.
fn advance(counts: &mut [u32]) -> Option<(u32, u32)> {
    let z = counts.iter().rposition(|&c| c > 0)?;
    if z == 0 {
        return None;
    }
    let v = counts[z];
    let a = counts[z - 1];
    counts[z] = 0;
    counts[z - 1] += 1;
    let last = counts.len() - 1;
    counts[last] += v - 1;
    Some((a, v))
}

/// Every weak composition of `n` into `d` parts, in lexicographic order:
/// `(0, .., 0, n)` first and `(n, 0, .., 0)` last.
#[derive(Debug, Clone)]
pub struct Compositions {
    current: Vec<u32>,
    started: bool,
    done: bool,
}

impl Compositions {
    fn new(spec: PackSpec) -> Self {
        let mut current = vec![0; spec.d as usize];
        current[spec.d as usize - 1] = spec.n;
        Self {
            current,
            started: false,
            done: false,
        }
    }
}

impl Iterator for Compositions {
    type Item = Composition;

    fn next(&mut self) -> Option<Composition> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
        } else if advance(&mut self.current).is_none() {
            self.done = true;
            return None;
        }
        Some(Composition::new(self.current.clone()))
    }
}

/// Stream of the `C(n + d - 1, d - 1)` possible pack contents.
pub fn compositions(spec: PackSpec) -> Compositions {
    Compositions::new(spec)
}

/// Visits every composition together with its multinomial coefficient.
///
/// The coefficient is updated in place between neighbours: moving one unit
/// from a slot holding `v` into a slot holding `a` multiplies it by
/// `v / (a + 1)`, which always divides exactly.
pub fn for_each_weighted(spec: PackSpec, mut visit: impl FnMut(&[u32], &ExactInt)) {
    let mut counts = vec![0u32; spec.d as usize];
    counts[spec.d as usize - 1] = spec.n;
    let mut coef = ExactInt::one();
    loop {
        visit(&counts, &coef);
        let Some((a, v)) = advance(&mut counts) else {
            return;
        };
        coef = coef * v / (a + 1);
    }
}

/// Probability that one filling ends at `c`: `multinomial(n; c) / d^n`.
pub fn endpoint_probability(spec: PackSpec, c: &Composition) -> Result<ExactRatio> {
    c.validate_for(spec)?;
    let coef = multinomial(spec.n, c.counts())?;
    Ok(ExactRatio::new(coef, spec.walk_count()))
}

/// `|E|` as the sum of squared multinomial coefficients.
pub fn count_closed(spec: PackSpec) -> ExactInt {
    let mut total = ExactInt::zero();
    for_each_weighted(spec, |_, coef| total += coef * coef);
    total
}

/// Memo of `|E(n, d)|` keyed on `(n, d)`.
///
/// Entries are filled bottom-up so every stored value already satisfies the
/// one-color-at-a-time recursion against its neighbours.
#[derive(Debug, Clone, Default)]
pub struct CoincidenceTable {
    memo: HashMap<(u32, u32), ExactInt>,
}

impl CoincidenceTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, n: u32, d: u32) -> Option<&ExactInt> {
        self.memo.get(&(n, d))
    }

    pub fn len(&self) -> usize {
        self.memo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memo.is_empty()
    }

    pub fn count(&mut self, spec: PackSpec) -> ExactInt {
        if let Some(hit) = self.memo.get(&(spec.n, spec.d)) {
            return hit.clone();
        }
        factorials().ensure((2 * spec.n).max(spec.n + spec.d));
        for m in 0..=spec.n {
            self.memo.entry((m, 1)).or_insert_with(ExactInt::one);
        }
        for colors in 2..=spec.d {
            for m in 0..=spec.n {
                if self.memo.contains_key(&(m, colors)) {
                    continue;
                }
                let mut total = ExactInt::zero();
                for k in 0..=m {
                    let b = binomial(m, k as i64);
                    total += &b * &b * &self.memo[&(m - k, colors - 1)];
                }
                self.memo.insert((m, colors), total);
            }
        }
        self.memo[&(spec.n, spec.d)].clone()
    }
}

/// `|E|` through the color-peeling recursion, memoizing into `table`.
pub fn count_recursive(spec: PackSpec, table: &mut CoincidenceTable) -> ExactInt {
    table.count(spec)
}

/// Power series with exact coefficients, truncated at a fixed degree.
#[derive(Debug, Clone, PartialEq)]
pub struct GfPolynomial {
    coefficients: Vec<ExactRatio>,
}

impl GfPolynomial {
    /// `sum_k x^(2k) / (k!)^2` through degree `2n`.
    pub fn squared_exponential_series(n: u32) -> Self {
        let degree = 2 * n as usize;
        let mut coefficients = vec![ExactRatio::zero(); degree + 1];
        for k in 0..=n {
            let f = factorial(k);
            coefficients[2 * k as usize] = ExactRatio::new(ExactInt::one(), &f * &f);
        }
        Self { coefficients }
    }

    pub fn one(degree: usize) -> Self {
        let mut coefficients = vec![ExactRatio::zero(); degree + 1];
        coefficients[0] = ExactRatio::one();
        Self { coefficients }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficient(&self, j: usize) -> &ExactRatio {
        &self.coefficients[j]
    }

    pub fn coefficients(&self) -> &[ExactRatio] {
        &self.coefficients
    }

    /// Schoolbook product, truncated at the smaller of the two degrees.
    pub fn mul_truncated(&self, other: &Self) -> Self {
        let degree = self.degree().min(other.degree());
        let mut out = vec![ExactRatio::zero(); degree + 1];
        for (i, a) in self.coefficients.iter().enumerate().take(degree + 1) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coefficients.iter().enumerate().take(degree + 1 - i) {
                if b.is_zero() {
                    continue;
                }
                out[i + j] += a * b;
            }
        }
        Self { coefficients: out }
    }

    pub fn pow_truncated(&self, exp: u32) -> Self {
        let mut acc = Self::one(self.degree());
        let mut base = self.clone();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_truncated(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_truncated(&base);
            }
        }
        acc
    }
}

/// `|E|` as `(n!)^2 [x^(2n)] (sum_k x^(2k)/(k!)^2)^d`.
pub fn count_gf(spec: PackSpec) -> ExactInt {
    let series = GfPolynomial::squared_exponential_series(spec.n);
    let power = series.pow_truncated(spec.d);
    let f = factorial(spec.n);
    let scaled = power.coefficient(2 * spec.n as usize) * ExactRatio::from_integer(&f * &f);
    assert!(
        scaled.is_integer(),
        "generating-function coefficient is not integral for {spec}"
    );
    scaled.to_integer()
}

/// `|E| / d^(2n)` from a precomputed count.
pub fn probability_from_count(spec: PackSpec, count: ExactInt) -> ExactRatio {
    ExactRatio::new(count, integer_pow(spec.d as u64, 2 * spec.n))
}

/// Probability that two random packs of `spec` are identical.
pub fn coincidence_probability(spec: PackSpec) -> ExactRatio {
    let mut table = CoincidenceTable::new();
    coincidence_probability_with(spec, &mut table)
}

pub fn coincidence_probability_with(spec: PackSpec, table: &mut CoincidenceTable) -> ExactRatio {
    probability_from_count(spec, table.count(spec))
}

/// Two-color shortcut `C(2n, n) / 4^n`.
pub fn two_color_probability(n: u32) -> ExactRatio {
    ExactRatio::new(binomial(2 * n, n as i64), integer_pow(4, n))
}

/// Number of distinct packs, `C(n + d - 1, d - 1)`.
pub fn distinct_pack_count(spec: PackSpec) -> ExactInt {
    binomial(spec.n + spec.d - 1, spec.d as i64 - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactmath::{fixed, ratio};
    use num_traits::Pow;

    fn spec(n: u32, d: u32) -> PackSpec {
        PackSpec::new(n, d).unwrap()
    }

    fn int(v: u64) -> ExactInt {
        ExactInt::from(v)
    }

    const TABLE_COUNTS: [[u64; 5]; 5] = [
        [1, 2, 3, 4, 5],
        [1, 6, 15, 28, 45],
        [1, 20, 93, 256, 545],
        [1, 70, 639, 2716, 7885],
        [1, 252, 4653, 31504, 127905],
    ];

    #[test]
    fn zero_colors_rejected() {
        assert_eq!(PackSpec::new(3, 0), Err(Error::NoColors));
    }

    #[test]
    fn composition_stream_order() {
        let got: Vec<Vec<u32>> = compositions(spec(2, 2))
            .map(|c| c.counts().to_vec())
            .collect();
        assert_eq!(got, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);

        let got: Vec<Vec<u32>> = compositions(spec(0, 3))
            .map(|c| c.counts().to_vec())
            .collect();
        assert_eq!(got, vec![vec![0, 0, 0]]);

        let got: Vec<Vec<u32>> = compositions(spec(4, 1))
            .map(|c| c.counts().to_vec())
            .collect();
        assert_eq!(got, vec![vec![4]]);
    }

    #[test]
    fn composition_stream_is_sorted_and_complete() {
        for n in 0..=7 {
            for d in 1..=4 {
                let s = spec(n, d);
                let all: Vec<Composition> = compositions(s).collect();
                assert_eq!(int(all.len() as u64), distinct_pack_count(s));
                assert!(all.windows(2).all(|w| w[0] < w[1]), "{s}");
                assert!(all.iter().all(|c| c.validate_for(s).is_ok()));
            }
        }
    }

    #[test]
    fn headline_stream_length() {
        assert_eq!(compositions(spec(60, 5)).count(), 635_376);
    }

    #[test]
    fn weighted_walk_matches_direct_multinomial() {
        for n in 0..=6 {
            for d in 1..=4 {
                let s = spec(n, d);
                let mut seen = Vec::new();
                for_each_weighted(s, |c, coef| {
                    assert_eq!(*coef, multinomial(n, c).unwrap());
                    seen.push(c.to_vec());
                });
                let streamed: Vec<Vec<u32>> =
                    compositions(s).map(|c| c.counts().to_vec()).collect();
                assert_eq!(seen, streamed);
            }
        }
    }

    #[test]
    fn endpoint_probability_values() {
        assert_eq!(
            endpoint_probability(spec(1, 2), &vec![1, 0].into()).unwrap(),
            ratio(1, 2)
        );
        assert_eq!(
            endpoint_probability(spec(2, 2), &vec![1, 1].into()).unwrap(),
            ratio(2, 4)
        );
        assert_eq!(
            endpoint_probability(spec(3, 3), &vec![1, 1, 1].into()).unwrap(),
            ratio(6, 27)
        );
    }

    #[test]
    fn endpoint_probability_by_walk_enumeration() {
        // every one of the d^n step sequences, histogrammed
        let s = spec(2, 2);
        let mut hits = 0u32;
        for a in 0..2 {
            for b in 0..2 {
                let mut counts = [0u32; 2];
                counts[a] += 1;
                counts[b] += 1;
                if counts == [1, 1] {
                    hits += 1;
                }
            }
        }
        assert_eq!(
            endpoint_probability(s, &vec![1, 1].into()).unwrap(),
            ratio(hits, 4)
        );
    }

    #[test]
    fn endpoint_probability_rejects_invalid() {
        assert!(endpoint_probability(spec(3, 2), &vec![1, 1].into()).is_err());
        assert!(endpoint_probability(spec(2, 3), &vec![1, 1].into()).is_err());
    }

    #[test]
    fn closed_route_examples() {
        assert_eq!(count_closed(spec(2, 2)), int(6));
        assert_eq!(count_closed(spec(3, 3)), int(93));
        assert_eq!(count_closed(spec(5, 5)), int(127_905));
        assert_eq!(count_closed(spec(0, 4)), int(1));
    }

    #[test]
    fn recursive_route_examples() {
        let mut table = CoincidenceTable::new();
        assert_eq!(count_recursive(spec(4, 3), &mut table), int(639));
        assert_eq!(count_recursive(spec(5, 4), &mut table), int(31_504));
        for n in 0..10 {
            assert_eq!(count_recursive(spec(n, 1), &mut table), int(1));
        }
        assert!(table.get(3, 2).is_some());
    }

    #[test]
    fn memo_entries_satisfy_recursion() {
        let mut table = CoincidenceTable::new();
        table.count(spec(8, 5));
        for (&(n, d), value) in &table.memo {
            if d == 1 {
                assert_eq!(*value, int(1));
                continue;
            }
            let expected: ExactInt = (0..=n)
                .map(|k| Pow::pow(binomial(n, k as i64), 2u32) * table.get(n - k, d - 1).unwrap())
                .sum();
            assert_eq!(*value, expected, "n={n} d={d}");
        }
    }

    #[test]
    fn gf_route_examples() {
        assert_eq!(count_gf(spec(3, 3)), int(93));
        for d in 1..=6 {
            assert_eq!(count_gf(spec(1, d)), int(d as u64));
        }
        assert_eq!(count_gf(spec(4, 2)), int(70));
        assert_eq!(count_gf(spec(4, 2)), binomial(8, 4));
        assert_eq!(count_gf(spec(0, 3)), int(1));
    }

    #[test]
    fn gf_series_shape() {
        let s = GfPolynomial::squared_exponential_series(3);
        assert_eq!(s.degree(), 6);
        assert_eq!(*s.coefficient(4), ratio(1, 4));
        assert!(s.coefficient(3).is_zero());
        let sq = s.mul_truncated(&s);
        assert_eq!(sq.degree(), 6);
        // (1 + x^2 + x^4/4 + ...)^2 -> x^2 coefficient 2
        assert_eq!(*sq.coefficient(2), ratio(2, 1));
    }

    #[test]
    fn routes_agree_on_grid() {
        let mut table = CoincidenceTable::new();
        for n in 0..=8 {
            for d in 1..=5 {
                let s = spec(n, d);
                let closed = count_closed(s);
                assert_eq!(closed, count_recursive(s, &mut table), "{s}");
                assert_eq!(closed, count_gf(s), "{s}");
            }
        }
    }

    #[test]
    fn table_one_golden() {
        let mut table = CoincidenceTable::new();
        for n in 1..=5u32 {
            for d in 1..=5u32 {
                assert_eq!(
                    table.count(spec(n, d)),
                    int(TABLE_COUNTS[n as usize - 1][d as usize - 1]),
                    "n={n} d={d}"
                );
            }
        }
    }

    #[test]
    fn table_two_golden() {
        // 15/81 = 0.185185..., so the (2, 3) cell rounds to 0.1852
        let expected = [
            ["1.0000", "0.5000", "0.3333", "0.2500", "0.2000"],
            ["1.0000", "0.3750", "0.1852", "0.1094", "0.0720"],
            ["1.0000", "0.3125", "0.1276", "0.0625", "0.0349"],
            ["1.0000", "0.2734", "0.0974", "0.0414", "0.0202"],
            ["1.0000", "0.2461", "0.0788", "0.0300", "0.0131"],
        ];
        for n in 1..=5u32 {
            for d in 1..=5u32 {
                let p = coincidence_probability(spec(n, d));
                assert_eq!(fixed(&p, 4), expected[n as usize - 1][d as usize - 1]);
            }
        }
    }

    #[test]
    fn probability_examples() {
        assert_eq!(coincidence_probability(spec(2, 2)), ratio(6, 16));
        for n in 0..8 {
            assert_eq!(coincidence_probability(spec(n, 1)), ExactRatio::one());
        }
        let p = coincidence_probability(spec(60, 5));
        assert_eq!(crate::exactmath::truncated(&p, 4), "0.00009752...");
        assert_eq!(crate::exactmath::significant(&p, 4), "0.00009753");
    }

    #[test]
    fn normalization_and_sum_of_squares() {
        for n in 0..=8 {
            for d in 1..=4 {
                let s = spec(n, d);
                let mut total = ExactRatio::zero();
                let mut squares = ExactRatio::zero();
                for c in compositions(s) {
                    let q = endpoint_probability(s, &c).unwrap();
                    squares += &q * &q;
                    total += q;
                }
                assert_eq!(total, ExactRatio::one(), "{s}");
                assert_eq!(squares, probability_from_count(s, count_closed(s)), "{s}");
            }
        }
    }

    #[test]
    fn two_color_identity() {
        for n in 0..=30 {
            assert_eq!(
                two_color_probability(n),
                coincidence_probability(spec(n, 2))
            );
        }
        assert_eq!(two_color_probability(0), ExactRatio::one());
        assert_eq!(two_color_probability(2), ratio(6, 16));
        assert_eq!(two_color_probability(5), ratio(252, 1024));
    }

    #[test]
    fn monotone_over_grid() {
        let mut table = CoincidenceTable::new();
        let mut grid = vec![vec![ExactRatio::zero(); 9]; 9];
        for n in 1..=8u32 {
            for d in 1..=8u32 {
                grid[n as usize][d as usize] = coincidence_probability_with(spec(n, d), &mut table);
            }
        }
        for n in 1..=8usize {
            for d in 1..=8usize {
                if d >= 2 && n < 8 {
                    assert!(grid[n + 1][d] < grid[n][d], "n={n} d={d}");
                }
                if d < 8 {
                    assert!(grid[n][d + 1] < grid[n][d], "n={n} d={d}");
                }
            }
        }
    }

    #[test]
    fn distinct_counts() {
        assert_eq!(distinct_pack_count(spec(60, 5)), int(635_376));
        assert_eq!(distinct_pack_count(spec(9, 1)), int(1));
        assert_eq!(distinct_pack_count(spec(2, 2)), int(3));
    }

    #[test]
    fn packs_are_not_equiprobable() {
        let s = spec(60, 5);
        let p = coincidence_probability(s);
        let naive = ExactRatio::new(ExactInt::one(), distinct_pack_count(s));
        assert_ne!(p, naive);
        assert!(p > naive);
        assert_eq!(crate::exactmath::scientific(&naive, 4), "1.574e-6");
    }
}
