use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qmemsim::counts::CoincidenceTable;
use qmemsim::mcstats::{poisson_resample_metric, DEFAULT_RESAMPLES};
use qmemsim::memsim::{self, Mode, ScenarioConfig, Stage};
use qmemsim::metrics::{self, ChshSettings, FringeScan, PathNumberMatrix};
use qmemsim::qstate::{bell, DensityMatrix};
use qmemsim::scenarios::{self, tune, Fixture, RunOptions};
use qmemsim::timetags::{self, Histogram, TimeTagStream};
use qmemsim::tomography::{self, TomographyRecord};
use qmemsim::{Error, Result};

#[derive(Parser)]
#[command(name = "qmemsim", version, about = "Raman quantum-memory entanglement storage: simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate synthetic data from a scenario config.
    Simulate(SimulateArgs),
    /// Fit fringes and pulses, compute path-number concurrence.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// Two-qubit state tomography.
    #[command(subcommand)]
    Tomo(TomoCmd),
    /// CHSH parameter from a coincidence table.
    Chsh(ChshArgs),
    /// Time-tag correlations.
    #[command(subcommand)]
    Correlate(CorrelateCmd),
    /// Built-in experiment reproductions.
    #[command(subcommand)]
    Scenario(ScenarioCmd),
    /// Run every built-in scenario and summarize.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Data {
    Chsh,
    Tomo,
    Fringe,
    Path,
    Timetags,
    Pulse,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Input,
    Output,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Stage {
        match s {
            StageArg::Input => Stage::Input,
            StageArg::Output => Stage::Output,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Infinite-statistics mode: expectation values instead of samples.
    #[arg(long)]
    exact: bool,
    /// Output file (stdout when absent).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy)]
struct Angles([f64; 4]);

fn parse_angles(s: &str) -> std::result::Result<Angles, String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"))).collect::<std::result::Result<_, _>>()?;
    <[f64; 4]>::try_from(v).map(Angles).map_err(|v| format!("expected 4 comma-separated angles, got {}", v.len()))
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario config (TOML).
    config: PathBuf,
    #[arg(long, value_enum)]
    data: Data,
    #[arg(long, value_enum, default_value = "input")]
    stage: StageArg,
    /// CHSH angles a,b,a',b' in radians.
    #[arg(long, value_parser = parse_angles)]
    angles: Option<Angles>,
    /// Fringe points.
    #[arg(long, default_value_t = 16)]
    points: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Fit `C0(1 + V cos(θ − φ))` to a `phase_rad,count` CSV.
    Fringe {
        scan: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gaussian pulse fit of a `bin_center_ns,count` histogram.
    Pulse {
        histogram: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Path-number concurrence from per-trial probabilities and visibility.
    Concurrence {
        #[arg(long)]
        p00: Option<f64>,
        #[arg(long)]
        p10: f64,
        #[arg(long)]
        p01: f64,
        #[arg(long)]
        p11: f64,
        #[arg(long)]
        visibility: f64,
        /// Trials behind the probabilities, for a Poisson error bar.
        #[arg(long)]
        exposure: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    PsiPlus,
    Singlet,
    PhiPlus,
    PhiMinus,
}

#[derive(Subcommand)]
enum TomoCmd {
    /// Linear inversion plus physical projection of a 16-setting record.
    Reconstruct {
        counts: PathBuf,
        /// Reference state for the fidelity row.
        #[arg(long, value_enum, default_value = "psi-plus")]
        target: Target,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ChshArgs {
    /// Coincidence table with angle settings.
    counts: PathBuf,
    /// a,b,a',b' in radians.
    #[arg(long, value_parser = parse_angles)]
    angles: Angles,
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CorrelateCmd {
    /// Normalized cross-correlation g².
    G2 {
        tags: PathBuf,
        #[arg(long, default_value = "stokes")]
        a: String,
        #[arg(long, default_value = "antistokes")]
        b: String,
        #[arg(long)]
        window: f64,
        /// Acquisition time; defaults to the span of all tags.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Heralded anticorrelation α.
    Alpha {
        tags: PathBuf,
        #[arg(long, default_value = "trigger")]
        trigger: String,
        #[arg(long)]
        ch1: String,
        #[arg(long)]
        ch2: String,
        #[arg(long)]
        window: f64,
    },
    /// Raw coincidence count.
    Coinc {
        tags: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        window: f64,
    },
    /// Start-stop delay histogram as CSV.
    Histogram {
        tags: PathBuf,
        #[arg(long, default_value = "trigger")]
        start: String,
        #[arg(long, default_value = "antistokes")]
        stop: String,
        #[arg(long, default_value_t = 1.0)]
        bin: f64,
        #[arg(long, default_value_t = 100)]
        bins: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ScenarioCmd {
    /// List built-in scenarios.
    List,
    /// Run a built-in scenario or a fixture directory.
    Run {
        name: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        resamples: Option<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// CSV twin of the report.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Re-derive a fixture's nuisance parameters and print the tuned config.
    Tune {
        name: String,
        /// Start from this config instead of the built-in one.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ReportArgs {
    /// Scenarios to run (all built-ins when empty).
    names: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    exact: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Command outcome: text for stdout/--out, and whether the analysis passed.
struct Outcome {
    ok: bool,
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
}

fn load_config(p: &Path, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::from_toml_str(&read(p)?)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    for w in cfg.validate()? {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn deg(x: f64) -> f64 {
    x * 180.0 / PI
}

fn simulate(a: SimulateArgs) -> Result<Outcome> {
    let cfg = load_config(&a.config, a.common.seed)?;
    eprintln!("seed {}  config sha256 {}", cfg.seed, cfg.hash_hex());
    let mode = if a.common.exact { Mode::Exact } else { Mode::Sampled };
    let stage: Stage = a.stage.into();
    let text = match a.data {
        Data::Chsh => {
            let s = match a.angles {
                Some(Angles([x, y, xp, yp])) => ChshSettings::new(x, y, xp, yp)?,
                None => ChshSettings::STANDARD,
            };
            memsim::simulate_chsh(&cfg, stage, &s, mode)?.to_text()
        }
        Data::Tomo => memsim::simulate_tomography(&cfg, stage, mode)?.to_text(),
        Data::Fringe => memsim::simulate_fringe(&cfg, stage, a.points, mode)?.to_csv(),
        Data::Path => {
            let c = memsim::simulate_path_number(&cfg, stage, mode)?;
            let m = c.matrix()?;
            let mut t = format!("# trials {}\n# seed {}\nquantity,value\n", c.trials, cfg.seed);
            for (k, n) in ["n00", "n10", "n01", "n11", "fringe_max", "fringe_min"].iter().zip(c.as_vec()) {
                writeln!(t, "{k},{}", qmemsim::counts::format_count(n)).unwrap();
            }
            writeln!(t, "visibility,{:.9}", m.visibility).unwrap();
            writeln!(t, "concurrence,{:.9e}", metrics::path_concurrence(&m)?).unwrap();
            t
        }
        Data::Timetags => memsim::simulate_timetags(&cfg, stage)?.to_text(),
        Data::Pulse => memsim::simulate_pulse_histogram(&cfg, scenarios::PULSE_BINS, scenarios::PULSE_BIN_NS, mode)?.to_csv(),
    };
    emit(&a.common.out, &text)?;
    Ok(Outcome { ok: true })
}

fn analyze(cmd: AnalyzeCmd) -> Result<Outcome> {
    match cmd {
        AnalyzeCmd::Fringe { scan, out } => {
            let s = FringeScan::parse_csv(&read(&scan)?)?;
            let fit = metrics::fit_fringe(&s)?;
            let max = s.counts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = s.counts.iter().cloned().fold(f64::INFINITY, f64::min);
            let mut t = String::new();
            writeln!(t, "offset {:.6}", fit.offset).unwrap();
            writeln!(t, "visibility {:.6}", fit.visibility).unwrap();
            writeln!(t, "phase {:.6} rad ({:.3} deg)", fit.phase, deg(fit.phase)).unwrap();
            writeln!(t, "raw_visibility {:.6}", metrics::raw_visibility(max, min)?).unwrap();
            writeln!(t, "above_benchmark {}", fit.visibility > metrics::BELL_VISIBILITY_BENCHMARK).unwrap();
            if fit.degenerate {
                writeln!(t, "degenerate true").unwrap();
            }
            emit(&out, &t)?;
        }
        AnalyzeCmd::Pulse { histogram, out } => {
            let h = Histogram::parse_csv(&read(&histogram)?)?;
            let f = timetags::fit_gaussian_pulse(&h)?;
            let t = format!(
                "y0 {:.6}\nA {:.6}\ntc_ns {:.6}\nw_ns {:.6}\nfwhm_ns {:.6}\nbandwidth_mhz {:.3}\niterations {}\n",
                f.y0,
                f.amplitude,
                f.tc,
                f.w,
                f.fwhm,
                metrics::bandwidth_from_fwhm(f.fwhm)?,
                f.iterations
            );
            emit(&out, &t)?;
        }
        AnalyzeCmd::Concurrence { p00, p10, p01, p11, visibility, exposure, resamples, seed } => {
            let p00 = p00.unwrap_or(1.0 - p10 - p01 - p11);
            let m = PathNumberMatrix::new(p00, p10, p01, p11, visibility)?;
            let c = metrics::path_concurrence(&m)?;
            let line = match exposure {
                Some(n) => {
                    let counts = vec![p00 * n, p10 * n, p01 * n, p11 * n];
                    let r = poisson_resample_metric(
                        &counts,
                        |v: &Vec<f64>| {
                            let t: f64 = v.iter().sum();
                            metrics::path_concurrence(&PathNumberMatrix::new(v[0] / t, v[1] / t, v[2] / t, v[3] / t, visibility)?)
                        },
                        resamples,
                        seed,
                    )?;
                    format!("concurrence {:.6e} ± {:.2e}\n", r.value, r.sigma)
                }
                None => format!("concurrence {c:.6e} (exact)\n"),
            };
            print!("{line}");
        }
    }
    Ok(Outcome { ok: true })
}

fn target_state(t: Target) -> DensityMatrix {
    DensityMatrix::from_pure(&match t {
        Target::PsiPlus => bell::psi_plus(),
        Target::Singlet => bell::singlet(),
        Target::PhiPlus => bell::phi_plus(),
        Target::PhiMinus => bell::phi_minus(),
    })
}

fn tomo(cmd: TomoCmd) -> Result<Outcome> {
    let TomoCmd::Reconstruct { counts, target, out } = cmd;
    let rec = TomographyRecord::parse(&read(&counts)?)?;
    let rho = tomography::reconstruct(&rec)?;
    let f = metrics::fidelity(&rho, &target_state(target))?;
    let mut csv = String::from("quantity,row,col,re,im\n");
    for i in 0..4 {
        for j in 0..4 {
            let z = rho.get(i, j);
            writeln!(csv, "rho,{i},{j},{:.12},{:.12}", z.re, z.im).unwrap();
        }
    }
    let name = target.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    writeln!(csv, "fidelity_{},,,{:.12},", name.replace('-', "_"), f).unwrap();
    writeln!(csv, "purity,,,{:.12},", rho.purity()).unwrap();
    writeln!(csv, "concurrence,,,{:.12},", metrics::wootters_concurrence(&rho)?).unwrap();
    emit(&out, &csv)?;
    if out.is_some() {
        println!("fidelity {name} {f:.6}");
    }
    Ok(Outcome { ok: true })
}

fn chsh(a: ChshArgs) -> Result<Outcome> {
    let table = CoincidenceTable::parse(&read(&a.counts)?)?;
    let [x, y, xp, yp] = a.angles.0;
    let s = ChshSettings::new(x, y, xp, yp)?;
    let e = metrics::chsh_correlators(&table, &s)?;
    let r = poisson_resample_metric(&table, |t: &CoincidenceTable| metrics::chsh_s(t, &s), a.resamples, a.seed)?;
    let mut t = String::new();
    for (name, x) in [("a", s.a), ("b", s.b), ("a'", s.a_prime), ("b'", s.b_prime)] {
        writeln!(t, "{name:<2} {x:.6} rad  {:.3} deg", deg(x)).unwrap();
    }
    for (k, (x, y)) in s.pairs().iter().enumerate() {
        writeln!(t, "E({:.3}°, {:.3}°) = {:+.6}", deg(*x), deg(*y), e[k]).unwrap();
    }
    writeln!(t, "S {:+.6} ± {:.6}", r.value, r.sigma).unwrap();
    writeln!(t, "violates_chsh {}", r.value.abs() > 2.0).unwrap();
    emit(&a.out, &t)?;
    Ok(Outcome { ok: true })
}

fn load_tags(p: &Path) -> Result<TimeTagStream> {
    TimeTagStream::parse(&read(p)?)
}

fn correlate(cmd: CorrelateCmd) -> Result<Outcome> {
    match cmd {
        CorrelateCmd::G2 { tags, a, b, window, duration } => {
            let s = load_tags(&tags)?;
            let duration = match duration {
                Some(d) => d,
                None => {
                    let all: Vec<f64> = s.channel_names().flat_map(|c| s.channel(c).unwrap().iter().copied()).collect();
                    let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    (hi - lo).max(window)
                }
            };
            let g = timetags::g2_cross(&s, &a, &b, window, duration)?;
            println!("g2 {g:.6}");
            println!("nonclassical {}", g > timetags::G2_NONCLASSICAL_THRESHOLD);
        }
        CorrelateCmd::Alpha { tags, trigger, ch1, ch2, window } => {
            let s = load_tags(&tags)?;
            println!("alpha {:.6}", timetags::alpha_heralded(&s, &trigger, &ch1, &ch2, window)?);
        }
        CorrelateCmd::Coinc { tags, a, b, window } => {
            let s = load_tags(&tags)?;
            println!("coincidences {}", timetags::coincidences(&s, &a, &b, window)?);
        }
        CorrelateCmd::Histogram { tags, start, stop, bin, bins, out } => {
            let s = load_tags(&tags)?;
            emit(&out, &timetags::delay_histogram(&s, &start, &stop, bin, bins)?.to_csv())?;
        }
    }
    Ok(Outcome { ok: true })
}

fn load_fixture(name: &str) -> Result<Fixture> {
    let p = Path::new(name);
    if p.is_dir() { Fixture::from_dir(p) } else { Fixture::builtin(name) }
}

fn scenario(cmd: ScenarioCmd) -> Result<Outcome> {
    match cmd {
        ScenarioCmd::List => {
            for n in scenarios::builtin_names() {
                println!("{n}");
            }
            Ok(Outcome { ok: true })
        }
        ScenarioCmd::Run { name, seed, exact, resamples, out, csv } => {
            let f = load_fixture(&name)?;
            let r = scenarios::run_scenario_with(&f, RunOptions { seed, exact, resamples })?;
            eprintln!("seed {}", r.seed);
            emit(&out, &r.to_text())?;
            if let Some(p) = csv {
                std::fs::write(p, r.to_csv())?;
            }
            Ok(Outcome { ok: r.passed() })
        }
        ScenarioCmd::Tune { name, config, out } => {
            let cfg = match config {
                Some(p) => load_config(&p, None)?,
                None => Fixture::builtin(&name)?.config,
            };
            let (tuned, steps) = tune::tune(&name, &cfg)?;
            emit(&out, &tune::tuned_toml(&name, &tuned, &steps))?;
            Ok(Outcome { ok: true })
        }
    }
}

fn report(a: ReportArgs) -> Result<Outcome> {
    let names: Vec<String> =
        if a.names.is_empty() { scenarios::builtin_names().map(String::from).collect() } else { a.names.clone() };
    let mut text = String::new();
    let mut csv = String::new();
    let mut ok = true;
    for (k, n) in names.iter().enumerate() {
        let f = load_fixture(n)?;
        let r = scenarios::run_scenario_with(&f, RunOptions { seed: a.seed, exact: a.exact, resamples: None })?;
        ok &= r.passed();
        if k > 0 {
            text.push('\n');
        }
        text.push_str(&r.to_text());
        let body = r.to_csv();
        let mut lines = body.lines();
        let header = lines.next().unwrap_or_default();
        if k == 0 {
            writeln!(csv, "scenario,{header}").unwrap();
        }
        for l in lines {
            writeln!(csv, "{},{l}", r.scenario).unwrap();
        }
    }
    emit(&a.out, &text)?;
    if let Some(p) = &a.csv {
        std::fs::write(p, csv)?;
    }
    Ok(Outcome { ok })
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.cmd {
        Cmd::Simulate(a) => simulate(a),
        Cmd::Analyze(c) => analyze(c),
        Cmd::Tomo(c) => tomo(c),
        Cmd::Chsh(a) => chsh(a),
        Cmd::Correlate(c) => correlate(c),
        Cmd::Scenario(c) => scenario(c),
        Cmd::Report(a) => report(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(o) if o.ok => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("error: scenario expectations failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
