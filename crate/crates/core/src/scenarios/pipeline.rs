//! Named scenario metrics, each computed from simulated counts with a
//! Poisson error bar (or exactly in infinite-statistics mode).

use std::cell::OnceCell;

use crate::counts::CoincidenceTable;
use crate::error::{Error, Result};
use crate::mcstats::{poisson_resample_metric, CountData};
use crate::memsim::{
    self, expected_g2, prepare_state, simulate_pulse_histogram, simulate_timetags, Mode, PathNumberCounts,
    ScenarioConfig, Stage, StateKind,
};
use crate::metrics::{
    bandwidth_from_fwhm, chsh_s, contrast_beta, far_detuning_ratio, fidelity, fit_fringe, path_concurrence,
    raw_visibility, transfer_efficiency, wootters_concurrence, ChshSettings, FringeScan, PathNumberMatrix,
    BELL_VISIBILITY_BENCHMARK,
};
use crate::rng::fingerprint;
use crate::timetags::{coincidences, fit_gaussian_pulse, Histogram, PulseFit, ANTISTOKES, G2_NONCLASSICAL_THRESHOLD, STOKES};
use crate::tomography::{self, TomographyRecord};

/// Fringe points recorded for two-photon visibility.
pub const FRINGE_POINTS: usize = 16;
/// Pulse histogram: 100 bins of 1 ns.
pub const PULSE_BINS: usize = 100;
pub const PULSE_BIN_NS: f64 = 1.0;

/// Every metric name the pipeline understands. Stage suffixes `_in`/`_before`
/// and `_out`/`_after` are interchangeable.
pub const METRICS: &[&str] = &[
    "p00_in", "p10_in", "p01_in", "p11_in", "V_in", "C_in", "p00_out", "p10_out", "p01_out", "p11_out", "V_out",
    "C_out", "V_in_above_benchmark", "V_out_above_benchmark", "eta", "beta", "S_before", "S_after", "V_before", "V_after", "V_before_above_benchmark",
    "V_after_above_benchmark", "F_before", "F_after", "F_out_vs_in", "C_before", "C_after", "g2",
    "g2_nonclassical", "efficiency", "pulse_y0", "pulse_A", "pulse_tc_ns", "pulse_w_ns", "pulse_fwhm_ns",
    "bandwidth_mhz", "far_detuning_ratio",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Measured {
    pub metric: String,
    pub value: f64,
    /// `None` when the value is exact (config-derived or infinite statistics).
    pub sigma: Option<f64>,
}

pub(crate) struct Pipeline<'a> {
    cfg: &'a ScenarioConfig,
    mode: Mode,
    resamples: usize,
    path: [OnceCell<PathNumberCounts>; 2],
    chsh: [OnceCell<CoincidenceTable>; 2],
    tomo: [OnceCell<TomographyRecord>; 2],
    fringe: [OnceCell<FringeScan>; 2],
    tags: OnceCell<Vec<f64>>,
    pulse: OnceCell<Histogram>,
}

fn cached<'c, T>(cell: &'c OnceCell<T>, f: impl FnOnce() -> Result<T>) -> Result<&'c T> {
    if let Some(v) = cell.get() {
        return Ok(v);
    }
    let v = f()?;
    Ok(cell.get_or_init(|| v))
}

fn split_stage(name: &str) -> Option<(&str, Stage)> {
    for (suffix, stage) in [("_in", Stage::Input), ("_before", Stage::Input), ("_out", Stage::Output), ("_after", Stage::Output)] {
        if let Some(base) = name.strip_suffix(suffix) {
            return Some((base, stage));
        }
    }
    None
}

fn idx(stage: Stage) -> usize {
    match stage {
        Stage::Input => 0,
        Stage::Output => 1,
    }
}

fn path_matrix(v: &[f64], trials: u64) -> Result<PathNumberMatrix> {
    PathNumberCounts { counts: [v[0], v[1], v[2], v[3]], fringe: [v[4], v[5]], trials }.matrix()
}

fn indicator(b: bool) -> f64 {
    if b { 1.0 } else { 0.0 }
}

impl<'a> Pipeline<'a> {
    pub(crate) fn new(cfg: &'a ScenarioConfig, mode: Mode, resamples: usize) -> Self {
        Pipeline {
            cfg,
            mode,
            resamples,
            path: Default::default(),
            chsh: Default::default(),
            tomo: Default::default(),
            fringe: Default::default(),
            tags: OnceCell::new(),
            pulse: OnceCell::new(),
        }
    }

    fn path(&self, stage: Stage) -> Result<&PathNumberCounts> {
        cached(&self.path[idx(stage)], || memsim::simulate_path_number(self.cfg, stage, self.mode))
    }

    fn chsh(&self, stage: Stage) -> Result<&CoincidenceTable> {
        cached(&self.chsh[idx(stage)], || memsim::simulate_chsh(self.cfg, stage, &ChshSettings::STANDARD, self.mode))
    }

    fn tomo(&self, stage: Stage) -> Result<&TomographyRecord> {
        cached(&self.tomo[idx(stage)], || memsim::simulate_tomography(self.cfg, stage, self.mode))
    }

    fn fringe(&self, stage: Stage) -> Result<&FringeScan> {
        cached(&self.fringe[idx(stage)], || memsim::simulate_fringe(self.cfg, stage, FRINGE_POINTS, self.mode))
    }

    /// `[coincidences, stokes singles, antistokes singles]` of the retrieved
    /// signal.
    fn tags(&self) -> Result<&Vec<f64>> {
        cached(&self.tags, || {
            let s = simulate_timetags(self.cfg, Stage::Output)?;
            let nc = coincidences(&s, STOKES, ANTISTOKES, self.cfg.detectors.coincidence_window_ns)?;
            Ok(vec![nc as f64, s.channel(STOKES)?.len() as f64, s.channel(ANTISTOKES)?.len() as f64])
        })
    }

    fn pulse(&self) -> Result<&Histogram> {
        cached(&self.pulse, || simulate_pulse_histogram(self.cfg, PULSE_BINS, PULSE_BIN_NS, self.mode))
    }

    /// Value and error bar of `f` over `data`.
    fn measure<D, F>(&self, name: &str, data: &D, f: F) -> Result<(f64, Option<f64>)>
    where
        D: CountData + Sync,
        F: Fn(&D) -> Result<f64> + Sync,
    {
        match self.mode {
            Mode::Exact => Ok((f(data)?, None)),
            Mode::Sampled => {
                let seed = fingerprint([self.cfg.seed].into_iter().chain(name.bytes().map(u64::from)));
                let r = poisson_resample_metric(data, f, self.resamples, seed)?;
                Ok((r.value, Some(r.sigma)))
            }
        }
    }

    pub(crate) fn evaluate(&self, name: &str) -> Result<Measured> {
        self.compute(name)
            .map(|(value, sigma)| Measured { metric: name.to_string(), value, sigma })
            .map_err(|e| Error::Metric { metric: name.to_string(), source: Box::new(e) })
    }

    fn compute(&self, name: &str) -> Result<(f64, Option<f64>)> {
        let cfg = self.cfg;
        let trials = cfg.trials;
        let hybrid = cfg.source.state_kind == StateKind::Hybrid;
        match name {
            "eta" | "beta" => {
                let mut v = self.path(Stage::Input)?.as_vec();
                v.extend(self.path(Stage::Output)?.as_vec());
                let beta = name == "beta";
                return self.measure(name, &v, |v: &Vec<f64>| {
                    let (a, b) = (path_matrix(&v[..6], trials)?, path_matrix(&v[6..], trials)?);
                    if beta {
                        contrast_beta(a.visibility, b.visibility)
                    } else {
                        transfer_efficiency(path_concurrence(&a)?, path_concurrence(&b)?)
                    }
                });
            }
            "F_out_vs_in" => {
                let mut v = self.tomo(Stage::Input)?.counts.to_vec();
                v.extend_from_slice(&self.tomo(Stage::Output)?.counts);
                return self.measure(name, &v, |v: &Vec<f64>| {
                    let rec = |c: &[f64]| -> Result<_> { tomography::reconstruct(&TomographyRecord::new(c.try_into().unwrap())?) };
                    fidelity(&rec(&v[16..])?, &rec(&v[..16])?)
                });
            }
            "g2" | "g2_nonclassical" => {
                let g = if self.mode == Mode::Exact {
                    (expected_g2(cfg, Stage::Output), None)
                } else {
                    let duration = trials as f64 * cfg.source.repetition_period_ns;
                    let tau = cfg.detectors.coincidence_window_ns;
                    let f = move |v: &Vec<f64>| {
                        if v[1] * v[2] <= 0.0 {
                            return Err(Error::Degenerate("empty channel".into()));
                        }
                        Ok(v[0] * duration / (v[1] * v[2] * tau))
                    };
                    if name == "g2" {
                        self.measure(name, self.tags()?, f)?
                    } else {
                        return self.measure(name, self.tags()?, move |v: &Vec<f64>| Ok(indicator(f(v)? > G2_NONCLASSICAL_THRESHOLD)));
                    }
                };
                return Ok(if name == "g2" { g } else { (indicator(g.0 > G2_NONCLASSICAL_THRESHOLD), None) });
            }
            "efficiency" => return Ok((cfg.memory.efficiency, None)),
            "far_detuning_ratio" => {
                let (d, bw) = cfg
                    .memory
                    .detuning_mhz
                    .zip(cfg.memory.absorption_bandwidth_mhz)
                    .ok_or_else(|| Error::Config("memory.detuning_mhz and memory.absorption_bandwidth_mhz are required".into()))?;
                return Ok((far_detuning_ratio(d, bw)?, None));
            }
            _ => {}
        }
        if let Some(v) = name.strip_suffix("_above_benchmark") {
            let above = |x: f64| indicator(x > BELL_VISIBILITY_BENCHMARK);
            return match (split_stage(v), self.mode) {
                (Some(("V", st)), Mode::Sampled) if hybrid => {
                    self.measure(name, &self.path(st)?.fringe.to_vec(), move |f: &Vec<f64>| Ok(above(raw_visibility(f[0], f[1])?)))
                }
                (Some(("V", st)), Mode::Sampled) => {
                    self.measure(name, self.fringe(st)?, move |s: &FringeScan| Ok(above(fit_fringe(s)?.visibility)))
                }
                (Some(("V", _)), Mode::Exact) => Ok((above(self.compute(v)?.0), None)),
                _ => Err(Error::Config(format!("unknown metric `{name}`"))),
            };
        }
        if let Some(field) = name.strip_prefix("pulse_").or(if name == "bandwidth_mhz" { Some("bw") } else { None }) {
            let pick: fn(&PulseFit) -> Result<f64> = match field {
                "y0" => |f| Ok(f.y0),
                "A" => |f| Ok(f.amplitude),
                "tc_ns" => |f| Ok(f.tc),
                "w_ns" => |f| Ok(f.w),
                "fwhm_ns" => |f| Ok(f.fwhm),
                "bw" => |f| bandwidth_from_fwhm(f.fwhm),
                _ => return Err(Error::Config(format!("unknown metric `{name}`"))),
            };
            return self.measure(name, self.pulse()?, move |h: &Histogram| pick(&fit_gaussian_pulse(h)?));
        }
        let (base, stage) = split_stage(name).ok_or_else(|| Error::Config(format!("unknown metric `{name}`")))?;
        match (base, hybrid) {
            ("p00" | "p10" | "p01" | "p11", true) => {
                let k = match base {
                    "p00" => 0,
                    "p10" => 1,
                    "p01" => 2,
                    _ => 3,
                };
                self.measure(name, &self.path(stage)?.counts.to_vec(), move |v: &Vec<f64>| Ok(v[k] / v.iter().sum::<f64>()))
            }
            ("V", true) => self.measure(name, &self.path(stage)?.fringe.to_vec(), |v: &Vec<f64>| raw_visibility(v[0], v[1])),
            ("C", true) => self.measure(name, &self.path(stage)?.as_vec(), |v: &Vec<f64>| path_concurrence(&path_matrix(v, trials)?)),
            ("S", false) => self.measure(name, self.chsh(stage)?, |t: &CoincidenceTable| Ok(chsh_s(t, &ChshSettings::STANDARD)?.abs())),
            ("V", false) => self.measure(name, self.fringe(stage)?, |s: &FringeScan| Ok(fit_fringe(s)?.visibility)),
            ("F", false) => {
                let ideal = prepare_state(cfg)?;
                self.measure(name, self.tomo(stage)?, move |r: &TomographyRecord| fidelity(&tomography::reconstruct(r)?, &ideal))
            }
            ("C", false) => self.measure(name, self.tomo(stage)?, |r: &TomographyRecord| wootters_concurrence(&tomography::reconstruct(r)?)),
            _ => {
                Err(Error::Config(format!("metric `{name}` does not apply to state_kind {:?}", cfg.source.state_kind)))
            }
        }
    }
}
