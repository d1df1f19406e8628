//! Time-tagged detection events from a pulsed pair source.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{sample_poisson, Mode, ScenarioConfig, Stage};
use crate::error::Result;
use crate::rng::{substream, Domain};
use crate::timetags::{Histogram, TimeTagStream, ANTISTOKES, STOKES, TRIGGER};

const CHUNK: u64 = 1 << 16;

struct Rates {
    period: f64,
    mean_pairs: f64,
    stokes: f64,
    antistokes: f64,
    /// dark clicks per ns, per detector
    dark: f64,
    sigma: f64,
}

fn rates(cfg: &ScenarioConfig, stage: Stage) -> Rates {
    let period = cfg.source.repetition_period_ns;
    let eta = cfg.detectors.efficiency;
    Rates {
        period,
        mean_pairs: cfg.source.pair_rate * period * 1e-9,
        stokes: cfg.survival(Stage::Input) * eta,
        antistokes: cfg.survival(stage) * eta,
        dark: cfg.detectors.dark_rate * 1e-9,
        sigma: cfg.source.pulse.w_ns / 2.0,
    }
}

/// `trials` trigger periods. Each trigger emits `Poisson(pair_rate·T)`
/// pairs at `tc` plus Gaussian jitter of the pulse shape; each photon is
/// detected with its arm's efficiency; both detectors add Poisson dark
/// counts.
pub fn simulate_timetags(cfg: &ScenarioConfig, stage: Stage) -> Result<TimeTagStream> {
    let r = rates(cfg, stage);
    let jitter = Normal::new(0.0, r.sigma).expect("positive width");
    let chunks = cfg.trials.div_ceil(CHUNK);
    let parts: Vec<[Vec<f64>; 3]> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = substream(cfg.seed, Domain::TimeTags, stage.tag(), ci);
            let first = ci * CHUNK;
            let last = (first + CHUNK).min(cfg.trials);
            let (mut trig, mut s, mut a) = (Vec::new(), Vec::new(), Vec::new());
            for k in first..last {
                let t0 = k as f64 * r.period;
                trig.push(t0);
                let pairs = sample_poisson(&mut rng, r.mean_pairs) as u64;
                for _ in 0..pairs {
                    let te = t0 + cfg.source.pulse.tc_ns + jitter.sample(&mut rng);
                    if rng.random::<f64>() < r.stokes {
                        s.push(te);
                    }
                    if rng.random::<f64>() < r.antistokes {
                        a.push(te);
                    }
                }
            }
            let (lo, span) = (first as f64 * r.period, (last - first) as f64 * r.period);
            for ch in [&mut s, &mut a] {
                let n = sample_poisson(&mut rng, r.dark * span) as u64;
                for _ in 0..n {
                    ch.push(lo + span * rng.random::<f64>());
                }
            }
            [trig, s, a]
        })
        .collect();
    let mut channels: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (name, idx) in [(TRIGGER, 0), (STOKES, 1), (ANTISTOKES, 2)] {
        channels.insert(name.to_string(), parts.iter().flat_map(|p| p[idx].iter().copied()).collect());
    }
    TimeTagStream::from_unsorted(channels)
}

/// Expected `g2_cross(stokes, antistokes)` of [`simulate_timetags`] output
/// at the configured coincidence window: true pairs, pairs from different
/// emissions in the same pulse, and dark-count accidentals.
pub fn expected_g2(cfg: &ScenarioConfig, stage: Stage) -> f64 {
    let r = rates(cfg, stage);
    let tau = cfg.detectors.coincidence_window_ns;
    let (mu, a, b, d) = (r.mean_pairs, r.stokes, r.antistokes, r.dark);
    // two independent emission times differ by N(0, √2σ)
    let overlap = erf(tau / (4.0 * r.sigma));
    let coinc = a * b * mu + a * b * mu * mu * overlap + d * tau * (a + b) * mu + d * d * tau * r.period;
    let ns = a * mu + d * r.period;
    let nas = b * mu + d * r.period;
    coinc * r.period / (ns * nas * tau)
}

/// Abramowitz–Stegun 7.1.26, |error| < 1.5e-7.
fn erf(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.3275911 * x.abs());
    let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let y = 1.0 - poly * (-x * x).exp();
    if x < 0.0 { -y } else { y }
}

/// Arrival-time histogram of the configured pulse shape, one Poisson draw
/// per bin around the curve.
pub fn simulate_pulse_histogram(cfg: &ScenarioConfig, bins: usize, bin_width_ns: f64, mode: Mode) -> Result<Histogram> {
    let centers: Vec<f64> = (0..bins).map(|k| (k as f64 + 0.5) * bin_width_ns).collect();
    let mut rng = substream(cfg.seed, Domain::Pulse, 0, 0);
    let counts = centers
        .iter()
        .map(|&t| {
            let m = cfg.source.pulse.eval(t);
            match mode {
                Mode::Exact => m,
                Mode::Sampled => sample_poisson(&mut rng, m),
            }
        })
        .collect();
    Histogram::new(centers, counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memsim::tests::two_photon_cfg;
    use crate::timetags::{fit_gaussian_pulse, g2_cross};

    fn pair_cfg(dark: f64) -> ScenarioConfig {
        let mut cfg = two_photon_cfg();
        cfg.trials = 2_000_000;
        cfg.source.pair_rate = 2e5;
        cfg.losses.filter_transmission = 0.3;
        cfg.losses.fiber_coupling = 0.5;
        cfg.memory.efficiency = 0.2;
        cfg.detectors.efficiency = 0.5;
        cfg.detectors.dark_rate = dark;
        cfg
    }

    #[test]
    fn erf_reference_values() {
        assert!((erf(0.5) - 0.520_499_877_8).abs() < 2e-7);
        assert!((erf(-1.0) + 0.842_700_792_9).abs() < 2e-7);
    }

    #[test]
    fn simulated_g2_matches_expectation() {
        let cfg = pair_cfg(2e4);
        let s = simulate_timetags(&cfg, Stage::Output).unwrap();
        let dur = cfg.trials as f64 * cfg.source.repetition_period_ns;
        let g = g2_cross(&s, STOKES, ANTISTOKES, cfg.detectors.coincidence_window_ns, dur).unwrap();
        let want = expected_g2(&cfg, Stage::Output);
        assert!((g / want - 1.0).abs() < 0.12, "{g} vs {want}");
        assert_eq!(s.channel(TRIGGER).unwrap().len() as u64, cfg.trials);
    }

    #[test]
    fn g2_falls_toward_one_with_accidentals() {
        let mut last = f64::INFINITY;
        for dark in [1e3, 1e4, 1e5, 1e6] {
            let cfg = pair_cfg(dark);
            let s = simulate_timetags(&cfg, Stage::Output).unwrap();
            let dur = cfg.trials as f64 * cfg.source.repetition_period_ns;
            let g = g2_cross(&s, STOKES, ANTISTOKES, 10.0, dur).unwrap();
            assert!(g < last && g > 0.8, "dark {dark}: {g}");
            last = g;
        }
        assert!(last < 2.0);
    }

    #[test]
    fn timetags_deterministic_under_parallelism() {
        let cfg = pair_cfg(1e5);
        let run = || simulate_timetags(&cfg, Stage::Input).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(run);
        assert_eq!(one, many);
    }

    #[test]
    fn pulse_histogram_fits_back() {
        let cfg = two_photon_cfg();
        let h = simulate_pulse_histogram(&cfg, 100, 1.0, Mode::Exact).unwrap();
        let fit = fit_gaussian_pulse(&h).unwrap();
        assert!((fit.w - 6.3).abs() < 1e-6);
        let noisy = simulate_pulse_histogram(&cfg, 100, 1.0, Mode::Sampled).unwrap();
        assert!((fit_gaussian_pulse(&noisy).unwrap().w - 6.3).abs() < 0.3);
    }
}
