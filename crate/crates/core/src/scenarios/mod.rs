//! Versioned experiment reproductions: a config plus an expected-metrics
//! table, run through the simulation and analysis pipeline.
//!
//! `expected.txt` holds one `metric value tolerance provenance` row per
//! line; `-` for value and tolerance marks an informational row. Comment
//! lines `# mode exact` and `# resamples N` select infinite-statistics mode
//! and the Monte-Carlo resample count.

mod pipeline;
pub mod tune;

use std::fmt::Write as _;
use std::path::Path;

use crate::counts::parse_field;
use crate::error::{Error, Result};
use crate::mcstats::DEFAULT_RESAMPLES;
use crate::memsim::{Mode, ScenarioConfig};

pub use pipeline::{Measured, FRINGE_POINTS, METRICS, PULSE_BINS, PULSE_BIN_NS};

pub const FIXTURE_VERSION: &str = "v1";
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

macro_rules! builtin {
    ($($name:literal),* $(,)?) => {
        const BUILTIN: &[(&str, &str, &str)] = &[$(
            (
                $name,
                include_str!(concat!("../../scenarios/v1/", $name, "/config.toml")),
                include_str!(concat!("../../scenarios/v1/", $name, "/expected.txt")),
            ),
        )*];
    };
}

builtin!("ideal", "experiment-1", "experiment-2", "supplement-s1", "supplement-s2");

#[derive(Clone, Debug, PartialEq)]
pub struct Expectation {
    pub metric: String,
    /// `None` for informational rows.
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fixture {
    pub name: String,
    pub config: ScenarioConfig,
    pub expected: Vec<Expectation>,
    pub mode: Mode,
    pub resamples: usize,
}

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|b| b.0)
}

impl Fixture {
    pub fn builtin(name: &str) -> Result<Fixture> {
        let (_, cfg, exp) = BUILTIN
            .iter()
            .find(|b| b.0 == name)
            .ok_or_else(|| Error::Config(format!("no built-in scenario `{name}` (have: {})", builtin_names().collect::<Vec<_>>().join(", "))))?;
        Fixture::from_parts(name, cfg, exp)
    }

    /// Reads `config.toml` and `expected.txt` from a fixture directory.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Fixture> {
        let dir = dir.as_ref();
        let name = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "custom".into());
        let cfg = std::fs::read_to_string(dir.join("config.toml"))?;
        let exp = std::fs::read_to_string(dir.join("expected.txt"))?;
        Fixture::from_parts(&name, &cfg, &exp)
    }

    pub fn from_parts(name: &str, config_toml: &str, expected: &str) -> Result<Fixture> {
        let config = ScenarioConfig::from_toml_str(config_toml)?;
        let (expected, mode, resamples) = parse_expected(expected)?;
        Ok(Fixture { name: name.to_string(), config, expected, mode, resamples })
    }

    pub fn expected_text(&self) -> String {
        let mut out = String::new();
        if self.mode == Mode::Exact {
            out.push_str("# mode exact\n");
        }
        writeln!(out, "# resamples {}", self.resamples).unwrap();
        for e in &self.expected {
            let f = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_else(|| "-".into());
            writeln!(out, "{} {} {} {}", e.metric, f(e.value), f(e.tolerance), e.provenance).unwrap();
        }
        out
    }
}

fn parse_expected(text: &str) -> Result<(Vec<Expectation>, Mode, usize)> {
    let mut rows = Vec::new();
    let mut mode = Mode::Sampled;
    let mut resamples = DEFAULT_RESAMPLES;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let mut it = meta.split_whitespace();
            match (it.next(), it.next()) {
                (Some("mode"), Some("exact")) => mode = Mode::Exact,
                (Some("mode"), Some("sampled")) => mode = Mode::Sampled,
                (Some("resamples"), Some(n)) => resamples = parse_field(n, lineno)?,
                _ => {}
            }
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(Error::Parse { line: lineno, msg: "expected `metric value tolerance provenance`".into() });
        }
        if !METRICS.contains(&f[0]) {
            return Err(Error::Parse { line: lineno, msg: format!("unknown metric `{}`", f[0]) });
        }
        let opt = |s: &str| -> Result<Option<f64>> { if s == "-" { Ok(None) } else { parse_field(s, lineno).map(Some) } };
        let (value, tolerance) = (opt(f[1])?, opt(f[2])?);
        if value.is_some() != tolerance.is_some() || tolerance.is_some_and(|t| !(t >= 0.0)) {
            return Err(Error::Parse { line: lineno, msg: "value and a non-negative tolerance go together".into() });
        }
        rows.push(Expectation { metric: f[0].into(), value, tolerance, provenance: f[3].into() });
    }
    Ok((rows, mode, resamples))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Info,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub measured: Measured,
    pub expected: Option<f64>,
    pub tolerance: Option<f64>,
    pub provenance: String,
    pub status: Status,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub mode: Mode,
    pub resamples: usize,
    pub warnings: Vec<String>,
    pub rows: Vec<ReportRow>,
}

/// Overrides applied on top of a fixture.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub exact: bool,
    pub resamples: Option<usize>,
}

pub fn run_scenario(f: &Fixture) -> Result<Report> {
    run_scenario_with(f, RunOptions::default())
}

pub fn run_scenario_with(f: &Fixture, opts: RunOptions) -> Result<Report> {
    let mut cfg = f.config.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let warnings = cfg.validate()?;
    let mode = if opts.exact { Mode::Exact } else { f.mode };
    let resamples = opts.resamples.unwrap_or(f.resamples);
    let pipe = pipeline::Pipeline::new(&cfg, mode, resamples);
    let mut rows = Vec::with_capacity(f.expected.len());
    for e in &f.expected {
        let m = pipe.evaluate(&e.metric)?;
        let status = match (e.value, e.tolerance) {
            (Some(v), Some(t)) if (m.value - v).abs() <= t => Status::Pass,
            (Some(_), Some(_)) => Status::Fail,
            _ => Status::Info,
        };
        rows.push(ReportRow { measured: m, expected: e.value, tolerance: e.tolerance, provenance: e.provenance.clone(), status });
    }
    Ok(Report { scenario: f.name.clone(), config_hash: cfg.hash_hex(), seed: cfg.seed, mode, resamples, warnings, rows })
}

/// Evaluates arbitrary metrics on a config, outside any fixture.
pub fn evaluate_metrics(cfg: &ScenarioConfig, names: &[&str], mode: Mode, resamples: usize) -> Result<Vec<Measured>> {
    let pipe = pipeline::Pipeline::new(cfg, mode, resamples);
    names.iter().map(|n| pipe.evaluate(n)).collect()
}

fn num(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e5) { format!("{x:.4e}") } else { format!("{x:.6}") }
}

impl Report {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.status != Status::Fail)
    }

    pub fn row(&self, metric: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.measured.metric == metric)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "qmemsim {TOOLKIT_VERSION}  scenario {} ({FIXTURE_VERSION})", self.scenario).unwrap();
        writeln!(out, "config sha256 {}", self.config_hash).unwrap();
        let mode = match self.mode {
            Mode::Exact => "exact".to_string(),
            Mode::Sampled => format!("sampled, {} Poisson resamples", self.resamples),
        };
        writeln!(out, "seed {}  mode {mode}", self.seed).unwrap();
        for w in &self.warnings {
            writeln!(out, "warning: {w}").unwrap();
        }
        writeln!(out, "{:<26} {:>28} {:>28}  {:<10} status", "metric", "simulated", "expected", "source").unwrap();
        for r in &self.rows {
            let sim = match r.measured.sigma {
                Some(s) => format!("{} ± {}", num(r.measured.value), num(s)),
                None => format!("{} (exact)", num(r.measured.value)),
            };
            let exp = match (r.expected, r.tolerance) {
                (Some(v), Some(t)) => format!("{} ± {}", num(v), num(t)),
                _ => "-".into(),
            };
            writeln!(out, "{:<26} {:>28} {:>28}  {:<10} {}", r.measured.metric, sim, exp, r.provenance, r.status.as_str()).unwrap();
        }
        let fails = self.rows.iter().filter(|r| r.status == Status::Fail).count();
        writeln!(out, "{}", if fails == 0 { "result PASS".to_string() } else { format!("result FAIL ({fails} rows)") }).unwrap();
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value,sigma,expected,tolerance,provenance,status\n");
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.12e}")).unwrap_or_default();
        for r in &self.rows {
            let sigma = r.measured.sigma.map(|s| format!("{s:.12e}")).unwrap_or_else(|| "exact".into());
            writeln!(
                out,
                "{},{:.12e},{},{},{},{},{}",
                r.measured.metric,
                r.measured.value,
                sigma,
                opt(r.expected),
                opt(r.tolerance),
                r.provenance,
                r.status.as_str()
            )
            .unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtins_load() {
        for name in builtin_names() {
            let f = Fixture::builtin(name).unwrap();
            assert!(!f.expected.is_empty(), "{name}");
            let (again, mode, n) = parse_expected(&f.expected_text()).unwrap();
            assert_eq!((again, mode, n), (f.expected.clone(), f.mode, f.resamples));
        }
        assert!(Fixture::builtin("nope").is_err());
    }

    #[test]
    fn expected_table_errors() {
        assert!(parse_expected("S_before 2.4\n").is_err());
        assert!(parse_expected("bogus 1 1 derived\n").is_err());
        assert!(parse_expected("S_before 2.4 - derived\n").is_err());
        assert!(parse_expected("S_before 2.4 -1 derived\n").is_err());
        let (rows, mode, n) = parse_expected("# mode exact\n# resamples 50\nF_out_vs_in - - info\n").unwrap();
        assert_eq!((mode, n, rows[0].value), (Mode::Exact, 50, None));
    }

    #[test]
    fn ideal_fixture_saturates() {
        let r = run_scenario(&Fixture::builtin("ideal").unwrap()).unwrap();
        assert!(r.passed(), "{}", r.to_text());
        assert!(r.rows.iter().all(|row| row.measured.sigma.is_none()));
    }
}
