//! Nuisance-parameter tuning: each fixture parameter is solved by a
//! one-dimensional bisection so that the model's expected value of one
//! metric hits its published target.

use crate::error::{Error, Result};
use crate::memsim::{self, expected_g2, Mode, ScenarioConfig, Stage};
use crate::metrics::{chsh_s, ChshSettings};

/// Table values the hybrid fixture is tuned to.
pub mod targets {
    pub const P10_IN: f64 = 4.59e-3;
    pub const P01_IN: f64 = 5.04e-3;
    pub const P11_IN: f64 = 1.6e-6;
    pub const P10_OUT: f64 = 9.64e-4;
    pub const P01_OUT: f64 = 8.71e-4;
    pub const V_IN: f64 = 0.869;
    pub const V_OUT: f64 = 0.822;
    pub const S_BEFORE: f64 = 2.40;
    pub const S_AFTER: f64 = 2.26;
    pub const G2_S1: f64 = 13.6;
    pub const G2_S2: f64 = 5.6;
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneStep {
    pub parameter: &'static str,
    pub target_metric: &'static str,
    pub target: f64,
    pub solved: f64,
}

/// Root of `f(x) = target` on `[lo, hi]` for monotone `f`.
pub fn bisect(f: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, target: f64) -> Result<f64> {
    let (flo, fhi) = (f(lo)? - target, f(hi)? - target);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Degenerate(format!("target {target} not bracketed by [{lo}, {hi}]")));
    }
    let rising = fhi > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid)? - target > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

type Setter = fn(&mut ScenarioConfig, f64);

struct Goal {
    parameter: &'static str,
    metric: &'static str,
    target: f64,
    range: (f64, f64),
    set: Setter,
    eval: fn(&ScenarioConfig) -> Result<f64>,
}

fn path(cfg: &ScenarioConfig, stage: Stage) -> Result<[f64; 4]> {
    memsim::path_number_probabilities(cfg, stage)
}

fn exact_s(cfg: &ScenarioConfig, stage: Stage) -> Result<f64> {
    let t = memsim::simulate_chsh(cfg, stage, &ChshSettings::STANDARD, Mode::Exact)?;
    Ok(chsh_s(&t, &ChshSettings::STANDARD)?.abs())
}

fn goals(name: &str) -> Result<(Vec<Goal>, usize)> {
    use targets::*;
    let g = match name {
        "ideal" => (vec![], 0),
        "experiment-1" => (
            vec![
                Goal {
                    parameter: "detectors.efficiency",
                    metric: "p10_in + p01_in",
                    target: P10_IN + P01_IN,
                    range: (1e-6, 1.0),
                    set: |c, x| c.detectors.efficiency = x,
                    eval: |c| path(c, Stage::Input).map(|p| p[1] + p[2]),
                },
                Goal {
                    parameter: "source.path_split",
                    metric: "p10_in / (p10_in + p01_in)",
                    target: P10_IN / (P10_IN + P01_IN),
                    range: (0.0, 1.0),
                    set: |c, x| c.source.path_split = x,
                    eval: |c| path(c, Stage::Input).map(|p| p[1] / (p[1] + p[2])),
                },
                Goal {
                    parameter: "source.pair_rate",
                    metric: "p11_in",
                    target: P11_IN,
                    range: (0.0, 1e8),
                    set: |c, x| c.source.pair_rate = x,
                    eval: |c| path(c, Stage::Input).map(|p| p[3]),
                },
                Goal {
                    parameter: "source.white_noise",
                    metric: "V_in",
                    target: V_IN,
                    range: (0.0, 1.0),
                    set: |c, x| c.source.white_noise = x,
                    eval: |c| memsim::path_visibility(c, Stage::Input),
                },
                Goal {
                    parameter: "memory.efficiency",
                    metric: "p10_out + p01_out",
                    target: P10_OUT + P01_OUT,
                    range: (0.0, 1.0),
                    set: |c, x| c.memory.efficiency = x,
                    eval: |c| path(c, Stage::Output).map(|p| p[1] + p[2]),
                },
                Goal {
                    parameter: "memory.dephasing",
                    metric: "V_out",
                    target: V_OUT,
                    // coherence scales as |1 − 2γ|
                    range: (0.0, 0.5),
                    set: |c, x| c.memory.dephasing = x,
                    eval: |c| memsim::path_visibility(c, Stage::Output),
                },
            ],
            6,
        ),
        "experiment-2" => (
            vec![
                Goal {
                    parameter: "source.white_noise",
                    metric: "S_before",
                    target: S_BEFORE,
                    range: (0.0, 1.0),
                    set: |c, x| c.source.white_noise = x,
                    eval: |c| exact_s(c, Stage::Input),
                },
                Goal {
                    parameter: "memory.depolarizing",
                    metric: "S_after",
                    target: S_AFTER,
                    range: (0.0, 1.0),
                    set: |c, x| c.memory.depolarizing = x,
                    eval: |c| exact_s(c, Stage::Output),
                },
            ],
            2,
        ),
        "supplement-s1" | "supplement-s2" => (
            vec![Goal {
                parameter: "detectors.dark_rate",
                metric: "g2",
                target: if name == "supplement-s1" { G2_S1 } else { G2_S2 },
                range: (0.0, 1e8),
                set: |c, x| c.detectors.dark_rate = x,
                eval: |c| Ok(expected_g2(c, Stage::Output)),
            }],
            1,
        ),
        _ => return Err(Error::Config(format!("no tuning procedure for scenario `{name}`"))),
    };
    Ok(g)
}

/// Solves every nuisance parameter of a fixture in turn, repeating the
/// sequence until the coupled parameters settle.
pub fn tune(name: &str, cfg: &ScenarioConfig) -> Result<(ScenarioConfig, Vec<TuneStep>)> {
    let (goals, rounds) = goals(name)?;
    let mut cfg = cfg.clone();
    let mut steps = Vec::new();
    for round in 0..rounds {
        for g in &goals {
            let base = cfg.clone();
            let x = bisect(
                |x| {
                    let mut c = base.clone();
                    (g.set)(&mut c, x);
                    (g.eval)(&c)
                },
                g.range.0,
                g.range.1,
                g.target,
            )?;
            (g.set)(&mut cfg, x);
            if round + 1 == rounds {
                steps.push(TuneStep { parameter: g.parameter, target_metric: g.metric, target: g.target, solved: x });
            }
        }
    }
    cfg.validate()?;
    Ok((cfg, steps))
}

/// Tuned config as TOML, headed by a comment recording each solve.
pub fn tuned_toml(name: &str, cfg: &ScenarioConfig, steps: &[TuneStep]) -> String {
    let mut out = format!("# {name}: tuned by `qmemsim scenario tune {name}`\n");
    for s in steps {
        out.push_str(&format!("# {} solved for {} = {} -> {}\n", s.parameter, s.target_metric, s.target, s.solved));
    }
    out.push('\n');
    out.push_str(&cfg.to_toml_string());
    out
}
