//! Command-line front end: every operation becomes a CSV or JSON table.
//!
//! Rows are produced in a fixed order (ascending `n`, then `t`) and numbers
//! are printed with 15 significant digits, so identical invocations give
//! byte-identical output.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::fractional_ops::{fnhpp_residual, kf_residual, ResidualReport, RhsSupport, TimeGrid};
use crate::intensity::IntensityModel;
use crate::marginals::{marginal, MarginalQuery, TOL_RANGE};
use crate::scaling::{corollary_curve, poisson_degenerate, scaling_curve, ScalingCurve};
use crate::special_fn::{mwright_series, OrderParam, SeriesEvalConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const TOL_ENV: &str = "FRACPOISSON_TOL";
pub const DEFAULT_TOL: f64 = 1e-8;

/// Points produced by `a..b` for time and argument ranges.
pub const RANGE_POINTS: usize = 9;

#[derive(Debug, Parser)]
#[command(
    name = "fracpoisson",
    version,
    about = "Marginals and scaling checks for fractional non-homogeneous Poisson processes"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Absolute tolerance for every computed value [default: $FRACPOISSON_TOL, else 1e-8].
    #[arg(long, global = true, value_parser = parse_tol)]
    pub tol: Option<f64>,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,

    /// Write the table here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    /// `--tol`, else the environment variable, else the default.
    pub fn tolerance(&self) -> Result<f64, RunError> {
        if let Some(t) = self.tol {
            return Ok(t);
        }
        match std::env::var(TOL_ENV) {
            Ok(s) => parse_tol(&s)
                .map_err(|e| RunError::Validation(format!("--tol (from {TOL_ENV}='{s}'): {e}"))),
            Err(std::env::VarError::NotPresent) => Ok(DEFAULT_TOL),
            Err(e) => Err(RunError::Validation(format!("--tol (from {TOL_ENV}): {e}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// M-Wright function values.
    Mwright(MwrightArgs),
    /// Marginal probabilities P(n, t).
    Marginals(MarginalsArgs),
    /// n·P(n,t) along n = Λ(z0 t^β) against its limit.
    Scaling(ScalingArgs),
    /// t^{rβ}·P(n,t) for Λ(x) = x^r against its limit.
    Corollary(CorollaryArgs),
    /// Residuals of the fractional Kolmogorov-Feller equations.
    Residual(ResidualArgs),
    /// t^{1/2}·P(n, n/z0) for the ordinary Poisson process.
    Poisson(PoissonArgs),
}

#[derive(Debug, Args)]
pub struct MwrightArgs {
    #[arg(long, value_parser = parse_fractional_beta)]
    pub beta: OrderParam,
    /// Arguments: `a,b,c` or `a..b` (9 equally spaced points).
    #[arg(long, value_parser = parse_z_list)]
    pub z: RealList,
}

#[derive(Debug, Args)]
pub struct MarginalsArgs {
    #[arg(long, value_parser = parse_fractional_beta)]
    pub beta: OrderParam,
    #[arg(long, default_value = "linear:lambda=1", value_parser = parse_model)]
    pub model: IntensityModel,
    /// Counts: `a,b,c` or `a..b` (doubling from a up to b).
    #[arg(long, value_parser = parse_count_list)]
    pub n: CountList,
    /// Times: `a,b,c` or `a..b` (9 log-spaced points).
    #[arg(long, value_parser = parse_time_list)]
    pub t: RealList,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[arg(long, value_parser = parse_fractional_beta)]
    pub beta: OrderParam,
    #[arg(long, default_value = "linear:lambda=1", value_parser = parse_model)]
    pub model: IntensityModel,
    #[arg(long, value_parser = parse_positive)]
    pub z0: f64,
    /// Counts: `a,b,c` or `a..b` (doubling from a up to b).
    #[arg(long, value_parser = parse_count_list, default_value = "16..4096")]
    pub n: CountList,
}

#[derive(Debug, Args)]
pub struct CorollaryArgs {
    #[arg(long, value_parser = parse_fractional_beta)]
    pub beta: OrderParam,
    #[arg(long, value_parser = parse_positive)]
    pub r: f64,
    #[arg(long, value_parser = parse_positive)]
    pub z0: f64,
    /// Times: `a,b,c` or `a..b` (9 log-spaced points).
    #[arg(long, value_parser = parse_time_list)]
    pub t: RealList,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Equation {
    /// D^β P(n) = P(n−1) − P(n), standard process only.
    Kf,
    /// The memory-integral system for a general intensity.
    Fnhpp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SupportArg {
    Full,
    UpToT,
}

#[derive(Debug, Args)]
pub struct ResidualArgs {
    #[arg(long, value_parser = parse_fractional_beta)]
    pub beta: OrderParam,
    #[arg(long, default_value = "linear:lambda=1", value_parser = parse_model)]
    pub model: IntensityModel,
    #[arg(long)]
    pub n: u64,
    #[arg(long, value_enum, default_value_t = Equation::Kf)]
    pub equation: Equation,
    #[arg(long, value_enum, default_value_t = SupportArg::Full)]
    pub support: SupportArg,
    /// End of the time grid.
    #[arg(long, default_value = "2", value_parser = parse_positive)]
    pub t_end: f64,
    /// Number of grid points (at least 16).
    #[arg(long, default_value = "512")]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct PoissonArgs {
    #[arg(long, value_parser = parse_positive)]
    pub z0: f64,
    /// Counts: `a,b,c` or `a..b` (doubling from a up to b).
    #[arg(long, value_parser = parse_count_list)]
    pub n: CountList,
}

/// Parsed list of reals, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct RealList(pub Vec<f64>);

/// Parsed list of counts, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountList(pub Vec<u64>);

fn parse_tol(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("'{s}' is not a number"))?;
    if v > TOL_RANGE.0 && v < TOL_RANGE.1 {
        Ok(v)
    } else {
        Err(format!(
            "must lie in ({:e}, {:e})",
            TOL_RANGE.0, TOL_RANGE.1
        ))
    }
}

fn parse_fractional_beta(s: &str) -> Result<OrderParam, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("'{s}' is not a number"))?;
    OrderParam::fractional(v).map_err(|e| e.to_string())
}

fn parse_model(s: &str) -> Result<IntensityModel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive and finite, got {v}"))
    }
}

fn parse_real(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

fn check_ascending<T: PartialOrd + Copy + std::fmt::Display>(v: &[T]) -> Result<(), String> {
    if v.is_empty() {
        return Err("list is empty".into());
    }
    match v.windows(2).find(|w| !(w[1] > w[0])) {
        Some(w) => Err(format!(
            "values must be strictly increasing ({} then {})",
            w[0], w[1]
        )),
        None => Ok(()),
    }
}

fn parse_real_range(s: &str, log_spaced: bool) -> Result<Vec<f64>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (parse_real(a)?, parse_real(b)?);
        if !(b > a) {
            return Err(format!("range '{s}' must have start < end"));
        }
        if log_spaced && !(a > 0.0) {
            return Err(format!("log-spaced range '{s}' needs a positive start"));
        }
        let k = (RANGE_POINTS - 1) as f64;
        return Ok((0..RANGE_POINTS)
            .map(|i| {
                let f = i as f64 / k;
                if i == 0 {
                    a
                } else if i == RANGE_POINTS - 1 {
                    b
                } else if log_spaced {
                    (a.ln() + f * (b.ln() - a.ln())).exp()
                } else {
                    a + f * (b - a)
                }
            })
            .collect());
    }
    let v = s
        .split(',')
        .map(parse_real)
        .collect::<Result<Vec<_>, _>>()?;
    check_ascending(&v)?;
    Ok(v)
}

fn parse_time_list(s: &str) -> Result<RealList, String> {
    let v = parse_real_range(s, true)?;
    if v.iter().any(|&t| t < 0.0) {
        return Err("times must be >= 0".into());
    }
    Ok(RealList(v))
}

fn parse_z_list(s: &str) -> Result<RealList, String> {
    let v = parse_real_range(s, false)?;
    if v.iter().any(|&z| z < 0.0) {
        return Err("arguments must be >= 0".into());
    }
    Ok(RealList(v))
}

fn parse_count(s: &str) -> Result<u64, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("'{s}' is not a nonnegative integer"))
}

fn parse_count_list(s: &str) -> Result<CountList, String> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (parse_count(a)?, parse_count(b)?);
        if a == 0 || b < a {
            return Err(format!("range '{s}' needs 1 <= start <= end"));
        }
        let mut v = Vec::new();
        let mut n = a;
        while n <= b {
            v.push(n);
            n = match n.checked_mul(2) {
                Some(m) => m,
                None => break,
            };
        }
        return Ok(CountList(v));
    }
    let v = s
        .split(',')
        .map(parse_count)
        .collect::<Result<Vec<_>, _>>()?;
    check_ascending(&v)?;
    Ok(CountList(v))
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format_real(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Cell::Int(v) => serde_json::Value::from(*v),
            Cell::Real(v) => format_real(*v)
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Cell::Text(s) => serde_json::Value::from(s.as_str()),
        }
    }
}

/// Scientific notation with 15 significant digits.
pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.14e}")
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> io::Result<()> {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: serde_json::Map<String, serde_json::Value> = self
                    .header
                    .iter()
                    .zip(row)
                    .map(|(k, c)| (k.to_string(), c.to_json()))
                    .collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::to_writer_pretty(&mut out, &rows)?;
        writeln!(out)
    }
}

/// Why a run stopped.
#[derive(Debug)]
pub enum RunError {
    /// Bad input; the message names the offending flag.
    Validation(String),
    /// A computation could not reach its accuracy target.
    Numerical {
        query: String,
        source: Error,
    },
    Io(io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => EXIT_VALIDATION,
            RunError::Numerical { .. } => EXIT_NUMERICAL,
            RunError::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Validation(m) => write!(f, "invalid input: {m}"),
            RunError::Numerical { query, source } => {
                write!(f, "numerical failure for query [{query}]: {source}")
            }
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

fn classify(query: impl FnOnce() -> String, e: Error) -> RunError {
    if e.is_numerical() {
        RunError::Numerical {
            query: query(),
            source: e,
        }
    } else {
        RunError::Validation(format!("{} ({})", e, query()))
    }
}

/// Computes the table for a parsed configuration.
pub fn build_table(cfg: &RunConfig) -> Result<Table, RunError> {
    let tol = cfg.tolerance()?;
    match &cfg.command {
        Command::Mwright(a) => {
            let series_cfg = SeriesEvalConfig::new(10_000, tol, 1e13)
                .map_err(|e| RunError::Validation(format!("--tol: {e}")))?;
            let mut t = Table::new(vec!["beta", "z", "value", "abs_err"]);
            for &z in &a.z.0 {
                let sv = mwright_series(a.beta, z, &series_cfg)
                    .map_err(|e| classify(|| format!("beta={} z={z}", a.beta), e))?;
                t.rows.push(vec![
                    Cell::Real(a.beta.value()),
                    Cell::Real(z),
                    Cell::Real(sv.value),
                    Cell::Real(sv.abs_err),
                ]);
            }
            Ok(t)
        }
        Command::Marginals(a) => {
            let mut t = Table::new(vec![
                "beta",
                "model",
                "n",
                "t",
                "value",
                "abs_err_est",
                "z_max",
                "n_evals",
            ]);
            for &n in &a.n.0 {
                for &time in &a.t.0 {
                    let query = || format!("n={n} t={time} beta={} model={}", a.beta, a.model);
                    let q = MarginalQuery::new(n, time, a.beta, a.model)
                        .map_err(|e| classify(query, e))?;
                    let r = marginal(&q, tol).map_err(|e| classify(query, e))?;
                    t.rows.push(vec![
                        Cell::Real(a.beta.value()),
                        Cell::Text(a.model.to_string()),
                        Cell::Int(n),
                        Cell::Real(time),
                        Cell::Real(r.value),
                        Cell::Real(r.abs_err_est),
                        Cell::Real(r.z_max),
                        Cell::Int(r.n_evals as u64),
                    ]);
                }
            }
            Ok(t)
        }
        Command::Scaling(a) => {
            let curve = scaling_curve(a.beta, a.model, a.z0, &a.n.0, tol).map_err(|e| {
                classify(
                    || {
                        format!(
                            "beta={} model={} z0={} n={:?}",
                            a.beta, a.model, a.z0, a.n.0
                        )
                    },
                    e,
                )
            })?;
            Ok(curve_table(&curve))
        }
        Command::Corollary(a) => {
            let curve = corollary_curve(a.beta, a.r, a.z0, &a.t.0, tol).map_err(|e| {
                classify(
                    || format!("beta={} r={} z0={} t={:?}", a.beta, a.r, a.z0, a.t.0),
                    e,
                )
            })?;
            Ok(curve_table(&curve))
        }
        Command::Residual(a) => {
            let grid = TimeGrid::uniform(a.t_end, a.points)
                .map_err(|e| RunError::Validation(format!("--points/--t-end: {e}")))?;
            let query = || {
                format!(
                    "n={} beta={} model={} equation={:?} t_end={} points={}",
                    a.n, a.beta, a.model, a.equation, a.t_end, a.points
                )
            };
            let report = match a.equation {
                Equation::Kf => {
                    if a.model != IntensityModel::unit() {
                        return Err(RunError::Validation(
                            "--model: the kf equation needs linear:lambda=1; use --equation fnhpp"
                                .into(),
                        ));
                    }
                    kf_residual(a.n, a.beta, &grid, tol)
                }
                Equation::Fnhpp => {
                    let support = match a.support {
                        SupportArg::Full => RhsSupport::Full,
                        SupportArg::UpToT => RhsSupport::UpToT,
                    };
                    fnhpp_residual(a.n, a.beta, &a.model, &grid, tol, support)
                }
            }
            .map_err(|e| classify(query, e))?;
            Ok(residual_table(a, &report))
        }
        Command::Poisson(a) => {
            let pts = poisson_degenerate(&a.n.0, a.z0)
                .map_err(|e| classify(|| format!("z0={} n={:?}", a.z0, a.n.0), e))?;
            let mut t = Table::new(vec!["z0", "n", "t", "scaled_value"]);
            for p in pts {
                t.rows.push(vec![
                    Cell::Real(a.z0),
                    Cell::Int(p.n),
                    Cell::Real(p.t),
                    Cell::Real(p.scaled_value),
                ]);
            }
            Ok(t)
        }
    }
}

fn curve_table(curve: &ScalingCurve) -> Table {
    let mut t = Table::new(vec![
        "beta",
        "model",
        "z0",
        "n",
        "t",
        "scaled_value",
        "limit_value",
        "abs_gap",
    ]);
    for p in &curve.points {
        t.rows.push(vec![
            Cell::Real(curve.beta.value()),
            Cell::Text(curve.model.to_string()),
            Cell::Real(curve.z0),
            Cell::Int(p.n),
            Cell::Real(p.t),
            Cell::Real(p.scaled_value),
            Cell::Real(p.limit_value),
            Cell::Real(p.abs_gap),
        ]);
    }
    t
}

fn residual_table(a: &ResidualArgs, r: &ResidualReport) -> Table {
    let mut t = Table::new(vec![
        "beta",
        "model",
        "n",
        "t",
        "lhs",
        "rhs",
        "residual",
        "interior",
        "max_abs_residual",
        "expected_bound",
    ]);
    for i in 0..r.grid.len() {
        t.rows.push(vec![
            Cell::Real(a.beta.value()),
            Cell::Text(a.model.to_string()),
            Cell::Int(a.n),
            Cell::Real(r.grid.point(i)),
            Cell::Real(r.lhs[i]),
            Cell::Real(r.rhs[i]),
            Cell::Real(r.lhs[i] - r.rhs[i]),
            Cell::Int(u64::from(i >= r.interior_start)),
            Cell::Real(r.max_abs_residual),
            Cell::Real(r.expected_discretization_bound),
        ]);
    }
    t
}

/// Builds the table and writes it where the configuration says.
pub fn run(cfg: &RunConfig) -> Result<(), RunError> {
    let table = build_table(cfg)?;
    let write = |out: &mut dyn Write| -> io::Result<()> {
        match cfg.format {
            OutputFormat::Csv => table.write_csv(out),
            OutputFormat::Json => table.write_json(out),
        }
    };
    match &cfg.output {
        Some(path) => {
            let file = File::create(path).map_err(RunError::Io)?;
            let mut w = BufWriter::new(file);
            write(&mut w).map_err(RunError::Io)?;
            w.flush().map_err(RunError::Io)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).map_err(RunError::Io)
        }
    }
}

/// Parses arguments, runs, reports errors on stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    match run(&cfg) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_ranges_double() {
        assert_eq!(parse_count_list("16..4096").unwrap().0.len(), 9);
        assert_eq!(parse_count_list("3..20").unwrap().0, vec![3, 6, 12]);
        assert_eq!(parse_count_list("1,5,9").unwrap().0, vec![1, 5, 9]);
        assert!(parse_count_list("0..4").is_err());
        assert!(parse_count_list("5,3").is_err());
        assert!(parse_count_list("a").is_err());
    }

    #[test]
    fn time_ranges_are_log_spaced() {
        let v = parse_time_list("0.01..100").unwrap().0;
        assert_eq!(v.len(), RANGE_POINTS);
        assert_eq!(v[0], 0.01);
        assert_eq!(v[8], 100.0);
        assert!((v[4] - 1.0).abs() < 1e-12);
        assert!(parse_time_list("0..1").is_err());
        assert!(parse_time_list("2,1").is_err());
    }

    #[test]
    fn z_ranges_are_linear() {
        let v = parse_z_list("0..4").unwrap().0;
        assert_eq!(v.len(), RANGE_POINTS);
        assert_eq!(v[2], 1.0);
        assert_eq!(v[8], 4.0);
    }

    #[test]
    fn real_format_has_fifteen_digits() {
        assert_eq!(format_real(0.5), "5.00000000000000e-1");
        assert_eq!(format_real(1.0 / 3.0), "3.33333333333333e-1");
    }

    #[test]
    fn tolerance_validation() {
        assert!(parse_tol("1e-8").is_ok());
        assert!(parse_tol("1e-15").is_err());
        assert!(parse_tol("0.5").is_err());
    }

    #[test]
    fn bad_beta_is_a_validation_error() {
        assert_eq!(
            main_with_args(["fracpoisson", "mwright", "--beta", "1", "--z", "0"]),
            2
        );
        assert_eq!(
            main_with_args(["fracpoisson", "mwright", "--beta", "x", "--z", "0"]),
            2
        );
    }

    #[test]
    fn kf_rejects_other_models() {
        let cfg = RunConfig::try_parse_from([
            "fracpoisson",
            "residual",
            "--beta",
            "0.5",
            "--n",
            "0",
            "--model",
            "powerlaw:r=2",
            "--points",
            "16",
        ])
        .unwrap();
        assert!(matches!(build_table(&cfg), Err(RunError::Validation(_))));
    }

    #[test]
    fn mwright_table() {
        let cfg =
            RunConfig::try_parse_from(["fracpoisson", "mwright", "--beta", "0.5", "--z", "0"])
                .unwrap();
        let t = build_table(&cfg).unwrap();
        assert_eq!(t.rows[0][2].render(), "5.64189583547756e-1");
    }
}
