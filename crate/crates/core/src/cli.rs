//! Command-line front end.
//!
//! [`run`] parses arguments and returns everything the process would print
//! together with its exit status, so the binary is a thin wrapper and tests
//! can drive the CLI in-process.
//!
//! Exit status: 0 on success, 2 on invalid input, 3 when a numerical
//! computation cannot certify its result, 4 when independent computations
//! disagree.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::coincidence::{
    count_closed, count_gf, count_recursive, distinct_pack_count, probability_from_count,
    CoincidenceTable, PackSpec,
};
use crate::error::Error;
use crate::exactmath::{self, ExactInt, ExactRatio};
use crate::firstmatch::{
    first_match_law, mixture_match_probability, paper_expectation, MatchProbability,
    PackSizeDistribution, SpectrumOptions, Value, DEFAULT_TOL,
};
use crate::montecarlo::{first_match_experiment, pair_match_rate, TrialReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_PRECISION: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

const MAX_TABLE_N: u32 = 200;
const MAX_TABLE_D: u32 = 50;
const MAX_CLOSED_COMPOSITIONS: u64 = 50_000_000;
const MAX_RECURSIVE_WORK: u128 = 500_000_000;
const MAX_GF_N: u32 = 2_000;
const MAX_TRIALS: u64 = 10_000_000_000;
const MAX_SIM_N: u32 = 100_000_000;
const REFERENCE_PACK_LIMIT: u64 = 1_000_000;
const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(
    name = "packmatch",
    version,
    about = "Exact and simulated probabilities that two randomly filled candy packs are identical"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Plain)]
    format: Format,

    /// Digits in decimal renderings (decimals for `table`, significant
    /// digits elsewhere).
    #[arg(long, global = true)]
    digits: Option<u32>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Grid of coincidence counts or probabilities for 1 <= n <= MAX_N, 1 <= d <= MAX_D.
    Table {
        #[arg(default_value_t = 5)]
        max_n: u32,
        #[arg(default_value_t = 5)]
        max_d: u32,
        #[arg(value_enum, default_value_t = Which::Counts)]
        which: Which,
    },
    /// Probability that two packs of n candies in d colors are identical.
    Prob {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        d: u32,
        #[arg(long, value_enum, default_value_t = Route::All)]
        route: Route,
    },
    /// Expected number of packs bought until the first repeat.
    Expect {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        d: u32,
        #[arg(long, value_enum, default_value_t = ModelArg::Both)]
        model: ModelArg,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Match probability when pack sizes follow the distribution in FILE.
    Mixture {
        file: PathBuf,
        #[arg(long)]
        d: u32,
    },
    /// Seeded Monte Carlo estimates.
    Simulate {
        #[arg(value_enum)]
        kind: SimKind,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        d: u32,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        /// Defaults to 0 when omitted; the seed used is always reported.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Plain,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Which {
    Counts,
    Probabilities,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Route {
    Closed,
    Recursive,
    Gf,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Paper,
    Exact,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimKind {
    Pair,
    Firstmatch,
}

/// Numerator and denominator as decimal strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactJson {
    pub numerator: String,
    pub denominator: String,
}

impl ExactJson {
    pub fn from_ratio(r: &ExactRatio) -> Self {
        Self {
            numerator: r.numer().to_string(),
            denominator: r.denom().to_string(),
        }
    }

    pub fn to_ratio(&self) -> Option<ExactRatio> {
        let n: ExactInt = self.numerator.parse().ok()?;
        let d: ExactInt = self.denominator.parse().ok()?;
        (!d.is_zero()).then(|| ExactRatio::new(n, d))
    }
}

/// One reported quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueRecord {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    /// Present when the value is known exactly.
    pub exact: Option<ExactJson>,
    pub decimal: String,
    pub digits: u32,
    /// `fixed` (digits after the point), `significant` (rounded) or
    /// `truncated` (cut, `...` marks dropped digits).
    pub rendering: String,
    /// Absolute bound on rounding error in `exact`-less values.
    pub error_bound: Option<f64>,
    /// Bound on the omitted part of a truncated series.
    pub tail_bound: Option<f64>,
    pub last_index: Option<u64>,
}

impl ValueRecord {
    fn exact(
        name: impl Into<String>,
        value: &ExactRatio,
        digits: u32,
        rendering: Rendering,
    ) -> Self {
        Self {
            name: name.into(),
            n: None,
            d: None,
            exact: Some(ExactJson::from_ratio(value)),
            decimal: rendering.render(value, digits),
            digits,
            rendering: rendering.name().into(),
            error_bound: None,
            tail_bound: None,
            last_index: None,
        }
    }

    fn approx(name: impl Into<String>, value: f64, digits: u32) -> Self {
        let decimal = ExactRatio::from_float(value)
            .map(|r| exactmath::significant(&r, digits))
            .unwrap_or_else(|| value.to_string());
        Self {
            name: name.into(),
            n: None,
            d: None,
            exact: None,
            decimal,
            digits,
            rendering: Rendering::Significant.name().into(),
            error_bound: None,
            tail_bound: None,
            last_index: None,
        }
    }

    fn from_value(name: impl Into<String>, value: &Value, digits: u32) -> Self {
        match value {
            Value::Exact(r) => Self::exact(name, r, digits, Rendering::Significant),
            Value::Approx { error_bound, .. } => Self {
                exact: None,
                decimal: value.render(digits),
                error_bound: Some(*error_bound),
                ..Self::exact(name, &ExactRatio::zero(), digits, Rendering::Significant)
            },
        }
    }

    fn at(mut self, n: u32, d: u32) -> Self {
        self.n = Some(n);
        self.d = Some(d);
        self
    }
}

#[derive(Debug, Clone, Copy)]
enum Rendering {
    Fixed,
    Significant,
    Truncated,
}

impl Rendering {
    fn name(self) -> &'static str {
        match self {
            Rendering::Fixed => "fixed",
            Rendering::Significant => "significant",
            Rendering::Truncated => "truncated",
        }
    }

    fn render(self, value: &ExactRatio, digits: u32) -> String {
        match self {
            Rendering::Fixed => exactmath::fixed(value, digits),
            Rendering::Significant => trim_exact(exactmath::significant(value, digits)),
            Rendering::Truncated => trim_exact(exactmath::truncated(value, digits)),
        }
    }
}

/// Drops trailing zeros of a terminating rendering: `2.000` becomes `2`.
/// Rounded or cut renderings keep their digits.
fn trim_exact(s: String) -> String {
    if s.ends_with("...") || !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Everything a command reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub command: String,
    /// Arguments after the program name, space separated.
    pub invocation: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub values: Vec<ValueRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// What a run prints and its exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::PrecisionAlarm { .. } | Error::NotConverged { .. } => EXIT_PRECISION,
            _ => EXIT_INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INVALID,
        message: message.into(),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome {
                    stdout: String::new(),
                    stderr: text,
                    code: EXIT_INVALID,
                }
            } else {
                Outcome {
                    stdout: text,
                    stderr: String::new(),
                    code: EXIT_OK,
                }
            };
        }
    };
    let invocation = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let mut stderr = String::new();
    match execute(&cli, invocation, &mut stderr) {
        Ok((record, plain)) => {
            let stdout = match cli.format {
                Format::Plain => plain,
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&record).expect("record serializes");
                    s.push('\n');
                    s
                }
                Format::Csv => to_csv(&record),
            };
            Outcome {
                stdout,
                stderr,
                code: EXIT_OK,
            }
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            Outcome {
                stdout: String::new(),
                stderr,
                code: f.code,
            }
        }
    }
}

fn execute(
    cli: &Cli,
    invocation: String,
    stderr: &mut String,
) -> Result<(OutputRecord, String), Failure> {
    match &cli.command {
        Command::Table {
            max_n,
            max_d,
            which,
        } => cmd_table(*max_n, *max_d, *which, cli.digits.unwrap_or(4), invocation),
        Command::Prob { n, d, route } => {
            cmd_prob(*n, *d, *route, cli.digits.unwrap_or(4), invocation)
        }
        Command::Expect { n, d, model, tol } => {
            cmd_expect(*n, *d, *model, *tol, cli.digits.unwrap_or(12), invocation)
        }
        Command::Mixture { file, d } => cmd_mixture(file, *d, cli.digits.unwrap_or(6), invocation),
        Command::Simulate {
            kind,
            n,
            d,
            trials,
            seed,
        } => {
            let seed = seed.unwrap_or_else(|| {
                let _ = writeln!(stderr, "note: no --seed given, using {DEFAULT_SEED}");
                DEFAULT_SEED
            });
            cmd_simulate(
                *kind,
                *n,
                *d,
                *trials,
                seed,
                cli.digits.unwrap_or(6),
                invocation,
            )
        }
    }
}

fn spec(n: u32, d: u32) -> Result<PackSpec, Failure> {
    Ok(PackSpec::new(n, d)?)
}

fn guard_recursive(spec: PackSpec) -> Result<(), Failure> {
    let work = (spec.n() as u128 + 1).pow(2) * spec.d() as u128;
    if work > MAX_RECURSIVE_WORK {
        return Err(Error::ResourceLimit {
            what: "recursive table work (n+1)^2 d",
            size: work.to_string(),
            ceiling: MAX_RECURSIVE_WORK.to_string(),
        }
        .into());
    }
    Ok(())
}

fn guard_closed(spec: PackSpec) -> Result<(), Failure> {
    let count = distinct_pack_count(spec);
    if count > ExactInt::from(MAX_CLOSED_COMPOSITIONS) {
        return Err(Error::ResourceLimit {
            what: "compositions to enumerate",
            size: count.to_string(),
            ceiling: MAX_CLOSED_COMPOSITIONS.to_string(),
        }
        .into());
    }
    Ok(())
}

fn guard_gf(spec: PackSpec) -> Result<(), Failure> {
    if spec.n() > MAX_GF_N {
        return Err(Error::ResourceLimit {
            what: "generating-function degree n",
            size: spec.n().to_string(),
            ceiling: MAX_GF_N.to_string(),
        }
        .into());
    }
    Ok(())
}

fn params(pairs: &[(&str, serde_json::Value)]) -> BTreeMap<String, serde_json::Value> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn cmd_table(
    max_n: u32,
    max_d: u32,
    which: Which,
    digits: u32,
    invocation: String,
) -> Result<(OutputRecord, String), Failure> {
    if max_n < 1 || max_d < 1 {
        return Err(invalid("table bounds must be at least 1"));
    }
    if max_n > MAX_TABLE_N || max_d > MAX_TABLE_D {
        return Err(Error::ResourceLimit {
            what: "table size",
            size: format!("{max_n} x {max_d}"),
            ceiling: format!("{MAX_TABLE_N} x {MAX_TABLE_D}"),
        }
        .into());
    }
    let mut table = CoincidenceTable::new();
    let mut values = Vec::new();
    let mut grid = Vec::new();
    for n in 1..=max_n {
        let mut row = Vec::new();
        for d in 1..=max_d {
            let s = spec(n, d)?;
            let count = count_recursive(s, &mut table);
            let record = match which {
                Which::Counts => ValueRecord::exact(
                    format!("E({n},{d})"),
                    &ExactRatio::from_integer(count),
                    0,
                    Rendering::Fixed,
                ),
                Which::Probabilities => ValueRecord::exact(
                    format!("P({n},{d})"),
                    &probability_from_count(s, count),
                    digits,
                    Rendering::Fixed,
                ),
            }
            .at(n, d);
            row.push(record.decimal.clone());
            values.push(record);
        }
        grid.push(row);
    }
    let title = match which {
        Which::Counts => {
            "|E(n,d)|: ordered pairs of fillings that end in the same pack".to_string()
        }
        Which::Probabilities => format!("P(n,d): two packs identical, {digits} decimals"),
    };
    let plain = render_grid(&title, &grid);
    let record = OutputRecord {
        command: "table".into(),
        invocation,
        parameters: params(&[
            ("max_n", json!(max_n)),
            ("max_d", json!(max_d)),
            (
                "which",
                json!(match which {
                    Which::Counts => "counts",
                    Which::Probabilities => "probabilities",
                }),
            ),
        ]),
        values,
        simulation: None,
        notes: Vec::new(),
    };
    Ok((record, plain))
}

fn render_grid(title: &str, grid: &[Vec<String>]) -> String {
    let width = grid
        .iter()
        .flatten()
        .map(String::len)
        .max()
        .unwrap_or(1)
        .max(grid.len().to_string().len())
        .max(3);
    let mut out = format!("{title}\n");
    let _ = write!(out, "{:>width$}", "n\\d");
    for d in 1..=grid.first().map_or(0, Vec::len) {
        let _ = write!(out, "  {d:>width$}");
    }
    out.push('\n');
    for (i, row) in grid.iter().enumerate() {
        let _ = write!(out, "{:>width$}", i + 1);
        for cell in row {
            let _ = write!(out, "  {cell:>width$}");
        }
        out.push('\n');
    }
    out
}

fn plain_values(header: &str, values: &[ValueRecord], notes: &[String]) -> String {
    let width = values.iter().map(|v| v.name.len()).max().unwrap_or(0);
    let mut out = format!("{header}\n");
    for v in values {
        let _ = write!(out, "{:<width$}  {}", v.name, v.decimal);
        if let Some(e) = &v.exact {
            if e.denominator == "1" {
                if v.decimal != e.numerator {
                    let _ = write!(out, "  = {}", e.numerator);
                }
            } else {
                let _ = write!(out, "  = {}/{}", e.numerator, e.denominator);
            }
        }
        if let Some(b) = v.error_bound {
            let _ = write!(out, "  (rounding error <= {b:.3e})");
        }
        if let Some(b) = v.tail_bound {
            let _ = write!(out, "  (tail <= {b:.3e}");
            if let Some(l) = v.last_index {
                let _ = write!(out, " after l = {l}");
            }
            out.push(')');
        }
        out.push('\n');
    }
    for note in notes {
        let _ = writeln!(out, "note: {note}");
    }
    out
}

fn cmd_prob(
    n: u32,
    d: u32,
    route: Route,
    digits: u32,
    invocation: String,
) -> Result<(OutputRecord, String), Failure> {
    let s = spec(n, d)?;
    let routes: &[Route] = match route {
        Route::All => &[Route::Closed, Route::Recursive, Route::Gf],
        other => std::slice::from_ref(match other {
            Route::Closed => &Route::Closed,
            Route::Recursive => &Route::Recursive,
            _ => &Route::Gf,
        }),
    };
    let mut counts = Vec::new();
    for r in routes {
        let (name, count) = match r {
            Route::Closed => {
                guard_closed(s)?;
                ("closed", count_closed(s))
            }
            Route::Recursive => {
                guard_recursive(s)?;
                (
                    "recursive",
                    count_recursive(s, &mut CoincidenceTable::new()),
                )
            }
            _ => {
                guard_gf(s)?;
                ("gf", count_gf(s))
            }
        };
        counts.push((name, count));
    }
    if counts.windows(2).any(|w| w[0].1 != w[1].1) {
        let detail = counts
            .iter()
            .map(|(name, c)| format!("{name}={c}"))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Failure {
            code: EXIT_INVARIANT,
            message: format!("routes disagree for {s}: {detail}"),
        });
    }
    let mut values = Vec::new();
    for (name, count) in &counts {
        values.push(ValueRecord::exact(
            format!("count ({name})"),
            &ExactRatio::from_integer(count.clone()),
            0,
            Rendering::Fixed,
        ));
    }
    for (name, count) in counts {
        let p = probability_from_count(s, count);
        values.push(ValueRecord::exact(
            format!("probability ({name})"),
            &p,
            digits,
            Rendering::Truncated,
        ));
    }
    let notes = if routes.len() > 1 {
        vec!["all routes agree exactly".to_string()]
    } else {
        Vec::new()
    };
    let plain = plain_values(&format!("prob {s}"), &values, &notes);
    let record = OutputRecord {
        command: "prob".into(),
        invocation,
        parameters: params(&[
            ("n", json!(n)),
            ("d", json!(d)),
            ("route", json!(route_name(route))),
        ]),
        values,
        simulation: None,
        notes,
    };
    Ok((record, plain))
}

fn route_name(route: Route) -> &'static str {
    match route {
        Route::Closed => "closed",
        Route::Recursive => "recursive",
        Route::Gf => "gf",
        Route::All => "all",
    }
}

fn cmd_expect(
    n: u32,
    d: u32,
    model: ModelArg,
    tol: f64,
    digits: u32,
    invocation: String,
) -> Result<(OutputRecord, String), Failure> {
    let s = spec(n, d)?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(invalid(format!("--tol must lie in (0, 1), got {tol}")));
    }
    let mut values = Vec::new();
    let mut paper_value = None;
    let mut exact_value = None;
    if matches!(model, ModelArg::Paper | ModelArg::Both) {
        guard_recursive(s)?;
        let p = crate::coincidence::coincidence_probability_with(s, &mut CoincidenceTable::new());
        let sum = paper_expectation(&MatchProbability::new(p)?, tol)?;
        let mut record = ValueRecord::from_value("paper-formula", &sum.value, digits);
        record.tail_bound = Some(sum.tail_bound);
        record.last_index = Some(sum.last_index);
        paper_value = Some(sum.value.to_f64());
        values.push(record);
    }
    if matches!(model, ModelArg::Exact | ModelArg::Both) {
        let law = first_match_law(s, tol, &SpectrumOptions::default())?;
        let mut record = ValueRecord::from_value("exact-oracle", &law.expectation, digits);
        record.tail_bound = Some(law.tail_bound);
        record.last_index = Some(law.last_index);
        exact_value = Some(law.expectation.to_f64());
        values.push(record);
    }
    if let (Some(paper), Some(exact)) = (paper_value, exact_value) {
        values.push(ValueRecord::approx(
            "paper - exact",
            paper - exact,
            digits.min(6),
        ));
        values.push(ValueRecord::approx(
            "relative difference",
            (paper - exact) / exact,
            digits.min(6),
        ));
    }
    let plain = plain_values(&format!("expect {s} tol={tol:e}"), &values, &[]);
    let record = OutputRecord {
        command: "expect".into(),
        invocation,
        parameters: params(&[
            ("n", json!(n)),
            ("d", json!(d)),
            (
                "model",
                json!(match model {
                    ModelArg::Paper => "paper",
                    ModelArg::Exact => "exact",
                    ModelArg::Both => "both",
                }),
            ),
            ("tol", json!(tol)),
        ]),
        values,
        simulation: None,
        notes: Vec::new(),
    };
    Ok((record, plain))
}

fn cmd_mixture(
    file: &PathBuf,
    d: u32,
    digits: u32,
    invocation: String,
) -> Result<(OutputRecord, String), Failure> {
    let f = PackSizeDistribution::from_file(file)?;
    for (n, _) in f.support() {
        guard_recursive(spec(*n, d)?)?;
    }
    let p = mixture_match_probability(&f, d)?;
    let values = vec![ValueRecord::exact(
        "mixture probability",
        &p,
        digits,
        Rendering::Truncated,
    )];
    let mut notes = Vec::new();
    if f.renormalized() {
        notes.push("decimal weights were rescaled to sum to exactly 1".to_string());
    }
    let plain = plain_values(
        &format!("mixture d={d} sizes={}", f.support().len()),
        &values,
        &notes,
    );
    let record = OutputRecord {
        command: "mixture".into(),
        invocation,
        parameters: params(&[
            ("file", json!(file.display().to_string())),
            ("d", json!(d)),
            ("support", json!(f.support().len())),
        ]),
        values,
        simulation: None,
        notes,
    };
    Ok((record, plain))
}

fn report_values(report: &TrialReport, digits: u32) -> Vec<ValueRecord> {
    let mut values = vec![
        ValueRecord::approx("estimate", report.estimate, digits),
        ValueRecord::approx("ci_low", report.ci_low, digits),
        ValueRecord::approx("ci_high", report.ci_high, digits),
    ];
    if let Some(r) = report.analytic_reference {
        values.push(ValueRecord::approx("analytic_reference", r, digits));
    }
    values
}

fn cmd_simulate(
    kind: SimKind,
    n: u32,
    d: u32,
    trials: u64,
    seed: u64,
    digits: u32,
    invocation: String,
) -> Result<(OutputRecord, String), Failure> {
    let s = spec(n, d)?;
    if trials == 0 {
        return Err(invalid("--trials must be at least 1"));
    }
    if trials > MAX_TRIALS || n > MAX_SIM_N {
        return Err(Error::ResourceLimit {
            what: "simulation size",
            size: format!("trials={trials}, n={n}"),
            ceiling: format!("trials={MAX_TRIALS}, n={MAX_SIM_N}"),
        }
        .into());
    }
    let (values, simulation, kind_name) = match kind {
        SimKind::Pair => {
            let report = pair_match_rate(s, trials, seed)?;
            (report_values(&report, digits), json!(report), "pair")
        }
        SimKind::Firstmatch => {
            let mut result = first_match_experiment(s, trials, seed)?;
            let packs = distinct_pack_count(s).to_u64();
            if packs.is_some_and(|p| p <= REFERENCE_PACK_LIMIT) {
                let law = first_match_law(s, DEFAULT_TOL, &SpectrumOptions::default())?;
                result.report.analytic_reference = Some(law.expectation.to_f64());
            }
            let mut values = report_values(&result.report, digits);
            values.push(ValueRecord::approx(
                "standard_error",
                result.standard_error,
                digits,
            ));
            (values, json!(result), "firstmatch")
        }
    };
    let header = format!("simulate {kind_name} {s} trials={trials} seed={seed}");
    let plain = plain_values(&header, &values, &[]);
    let record = OutputRecord {
        command: "simulate".into(),
        invocation,
        parameters: params(&[
            ("kind", json!(kind_name)),
            ("n", json!(n)),
            ("d", json!(d)),
            ("trials", json!(trials)),
            ("seed", json!(seed)),
        ]),
        values,
        simulation: Some(simulation),
        notes: Vec::new(),
    };
    Ok((record, plain))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn to_csv(record: &OutputRecord) -> String {
    let mut out = String::new();
    let params = record
        .parameters
        .iter()
        .map(|(k, v)| format!("{k}={}", v.to_string().trim_matches('"')))
        .collect::<Vec<_>>()
        .join(" ");
    let _ = writeln!(out, "# {} {}", record.command, params);
    out.push_str("name,n,d,numerator,denominator,decimal,digits,rendering,error_bound,tail_bound,last_index\n");
    let opt = |v: Option<String>| v.unwrap_or_default();
    for v in &record.values {
        let row = [
            csv_field(&v.name),
            opt(v.n.map(|x| x.to_string())),
            opt(v.d.map(|x| x.to_string())),
            opt(v.exact.as_ref().map(|e| e.numerator.clone())),
            opt(v.exact.as_ref().map(|e| e.denominator.clone())),
            csv_field(&v.decimal),
            v.digits.to_string(),
            v.rendering.clone(),
            opt(v.error_bound.map(|x| format!("{x:e}"))),
            opt(v.tail_bound.map(|x| format!("{x:e}"))),
            opt(v.last_index.map(|x| x.to_string())),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    for note in &record.notes {
        let _ = writeln!(out, "# note: {note}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coincidence::coincidence_probability;

    fn run_ok(args: &[&str]) -> String {
        let mut full = vec!["packmatch"];
        full.extend_from_slice(args);
        let out = run(full);
        assert_eq!(out.code, 0, "{args:?}: {}", out.stderr);
        out.stdout
    }

    fn run_json(args: &[&str]) -> OutputRecord {
        let mut a = args.to_vec();
        a.extend_from_slice(&["--format", "json"]);
        serde_json::from_str(&run_ok(&a)).unwrap()
    }

    fn code(args: &[&str]) -> i32 {
        let mut full = vec!["packmatch"];
        full.extend_from_slice(args);
        run(full).code
    }

    #[test]
    fn single_cell_table() {
        let r = run_json(&["table", "1", "1", "counts"]);
        assert_eq!(r.values.len(), 1);
        assert_eq!(r.values[0].decimal, "1");
        assert_eq!(r.values[0].exact.as_ref().unwrap().numerator, "1");
    }

    #[test]
    fn table_plain_layout() {
        let out = run_ok(&["table"]);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 7);
        let last: Vec<&str> = lines[6].split_whitespace().collect();
        assert_eq!(last, ["5", "1", "252", "4653", "31504", "127905"]);
        let out = run_ok(&["table", "5", "5", "probabilities"]);
        let row2: Vec<&str> = out.lines().nth(3).unwrap().split_whitespace().collect();
        assert_eq!(
            row2,
            ["2", "1.0000", "0.3750", "0.1852", "0.1094", "0.0720"]
        );
    }

    #[test]
    fn prob_examples() {
        let r = run_json(&["prob", "--n", "60", "--d", "5"]);
        let probs: Vec<&ValueRecord> = r
            .values
            .iter()
            .filter(|v| v.name.starts_with("probability"))
            .collect();
        assert_eq!(probs.len(), 3);
        let expected = coincidence_probability(PackSpec::new(60, 5).unwrap());
        for v in &probs {
            assert_eq!(v.decimal, "0.00009752...");
            assert_eq!(v.exact.as_ref().unwrap().to_ratio().unwrap(), expected);
        }

        let r = run_json(&["prob", "--n", "3", "--d", "3", "--route", "closed"]);
        assert_eq!(r.values[0].exact.as_ref().unwrap().numerator, "93");
        let p = r.values[1].exact.as_ref().unwrap().to_ratio().unwrap();
        assert_eq!(p, ExactRatio::new(93.into(), 729.into()));

        let r = run_json(&["prob", "--n", "0", "--d", "4"]);
        assert!(r.values.iter().all(|v| v.decimal == "1"));
    }

    #[test]
    fn json_round_trip_is_exact_and_consistent() {
        for args in [
            vec!["prob", "--n", "60", "--d", "5"],
            vec!["table", "5", "5", "probabilities"],
            vec!["expect", "--n", "1", "--d", "3", "--model", "exact"],
        ] {
            let text = run_ok(&[args.clone(), vec!["--format", "json"]].concat());
            let record: OutputRecord = serde_json::from_str(&text).unwrap();
            let again = serde_json::to_string_pretty(&record).unwrap() + "\n";
            assert_eq!(again, text);
            for v in &record.values {
                if let Some(e) = &v.exact {
                    let r = e.to_ratio().unwrap();
                    let rendering = match v.rendering.as_str() {
                        "fixed" => Rendering::Fixed,
                        "truncated" => Rendering::Truncated,
                        _ => Rendering::Significant,
                    };
                    assert_eq!(rendering.render(&r, v.digits), v.decimal, "{}", v.name);
                }
            }
        }
    }

    #[test]
    fn expect_examples() {
        let r = run_json(&["expect", "--n", "1", "--d", "3", "--model", "both"]);
        let exact = &r.values[1];
        assert_eq!(exact.name, "exact-oracle");
        assert_eq!(
            exact.exact.as_ref().unwrap().to_ratio().unwrap(),
            ExactRatio::new(26.into(), 9.into())
        );
        assert!(r.values[0].decimal.starts_with("3.9798865"));
        assert_eq!(r.values.len(), 4);

        let r = run_json(&["expect", "--n", "0", "--d", "2", "--model", "exact"]);
        assert_eq!(r.values[0].decimal, "2");
    }

    #[test]
    fn mixture_examples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.txt");
        std::fs::write(&path, "1 0.5\n2 0.5\n").unwrap();
        let r = run_json(&["mixture", path.to_str().unwrap(), "--d", "2"]);
        assert_eq!(r.values[0].decimal, "0.21875");
        std::fs::write(&path, "1 0.5\n2 0.4\n").unwrap();
        assert_eq!(
            code(&["mixture", path.to_str().unwrap(), "--d", "2"]),
            EXIT_INVALID
        );
        assert_eq!(
            code(&["mixture", "/nonexistent/f.txt", "--d", "2"]),
            EXIT_INVALID
        );
    }

    #[test]
    fn simulate_examples() {
        let r = run_json(&[
            "simulate", "pair", "--n", "0", "--d", "3", "--trials", "100", "--seed", "1",
        ]);
        assert_eq!(r.values[0].decimal, "1.00000");
        assert_eq!(r.parameters["seed"], json!(1));
        let sim = r.simulation.unwrap();
        assert_eq!(sim["estimate"], json!(1.0));

        let r = run_json(&[
            "simulate",
            "firstmatch",
            "--n",
            "1",
            "--d",
            "2",
            "--trials",
            "100000",
            "--seed",
            "7",
        ]);
        let sim = r.simulation.unwrap();
        let mean = sim["estimate"].as_f64().unwrap();
        assert!((mean - 2.5).abs() < 0.01);
        assert_eq!(sim["analytic_reference"], json!(2.5));
    }

    #[test]
    fn default_seed_is_announced() {
        let out = run([
            "packmatch",
            "simulate",
            "pair",
            "--n",
            "1",
            "--d",
            "2",
            "--trials",
            "10",
        ]);
        assert_eq!(out.code, 0);
        assert!(out.stderr.contains("using 0"));
        assert!(out.stdout.contains("seed=0"));
    }

    #[test]
    fn repeat_runs_are_byte_identical() {
        let args = [
            "simulate",
            "firstmatch",
            "--n",
            "3",
            "--d",
            "3",
            "--trials",
            "2000",
            "--seed",
            "9",
            "--format",
            "json",
        ];
        assert_eq!(run_ok(&args), run_ok(&args));
        let args = ["table", "6", "4", "probabilities", "--format", "csv"];
        assert_eq!(run_ok(&args), run_ok(&args));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(code(&["prob", "--n", "2", "--d", "0"]), EXIT_INVALID);
        assert_eq!(code(&["prob", "--n", "2"]), EXIT_INVALID);
        assert_eq!(code(&["table", "0", "5"]), EXIT_INVALID);
        assert_eq!(code(&["table", "1000", "5"]), EXIT_INVALID);
        assert_eq!(
            code(&["prob", "--n", "5000", "--d", "5", "--route", "gf"]),
            EXIT_INVALID
        );
        assert_eq!(
            code(&["expect", "--n", "2", "--d", "2", "--tol", "0"]),
            EXIT_INVALID
        );
        assert_eq!(
            code(&["simulate", "pair", "--n", "2", "--d", "2", "--trials", "0", "--seed", "1"]),
            EXIT_INVALID
        );
        assert_eq!(code(&["--help"]), EXIT_OK);
    }

    #[test]
    fn csv_layout() {
        let out = run_ok(&["table", "2", "2", "counts", "--format", "csv"]);
        let lines: Vec<&str> = out.lines().collect();
        assert!(lines[0].starts_with("# table"));
        assert_eq!(lines[1].split(',').count(), 11);
        assert_eq!(lines[2], "\"E(1,1)\",1,1,1,1,1,0,fixed,,,");
        assert_eq!(lines.len(), 6);
    }
}
