//! Forward model of the storage experiment: entangled source, Raman memory
//! channel, loss chain and detectors.
//!
//! Qubit order: for `two_photon` states the first qubit is the anti-Stokes
//! photon (the one stored), the second the Stokes photon. For `hybrid`
//! states the basis is `[UH, UV, DH, DV]` and the memory acts on the
//! polarization qubit.
//!
//! Every stochastic routine takes a [`Mode`]; `Mode::Exact` replaces
//! sampling with expectation values.

pub mod config;
mod tags;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;

pub use config::{ScenarioConfig, Stage, StateKind};
pub use tags::{expected_g2, simulate_pulse_histogram, simulate_timetags};

use crate::counts::{CoincidenceTable, Setting};
use crate::error::{Error, Result};
use crate::metrics::{raw_visibility, ChshSettings, FringeScan, PathNumberMatrix};
use crate::qstate::{
    born_probability, c, joint_projector, path_polarization_labels, Analyzer, Complex, DensityMatrix, Matrix,
    StateVector,
};
use crate::rng::{fingerprint, substream, Domain};
use crate::tomography::{self, TomographyRecord};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    Sampled,
    /// Infinite statistics: counts are expectation values.
    Exact,
}

/// Pure prepared state.
pub fn prepare_state(cfg: &ScenarioConfig) -> Result<DensityMatrix> {
    let zero = Complex::default();
    let psi = match cfg.source.state_kind {
        StateKind::Hybrid => {
            let s = cfg.source.path_split;
            let (sn, cs) = cfg.source.theta1.sin_cos();
            let d = (1.0 - s).sqrt();
            StateVector::new(vec![c(s.sqrt(), 0.0), zero, zero, c(d * cs, d * sn)], path_polarization_labels())?
        }
        StateKind::TwoPhoton => {
            let (sn, cs) = cfg.source.theta2.sin_cos();
            let h = std::f64::consts::FRAC_1_SQRT_2;
            StateVector::with_default_labels(vec![zero, c(h, 0.0), c(h * cs, h * sn), zero])?
        }
    };
    Ok(DensityMatrix::from_pure(&psi))
}

/// Prepared state with the source's white-noise admixture.
pub fn source_state(cfg: &ScenarioConfig) -> Result<DensityMatrix> {
    prepare_state(cfg)?.werner_mix(1.0 - cfg.source.white_noise)
}

pub fn stored_qubit(kind: StateKind) -> usize {
    match kind {
        StateKind::Hybrid => 1,
        StateKind::TwoPhoton => 0,
    }
}

fn on_qubit(op: &Matrix, qubit: usize) -> Matrix {
    let id = Matrix::identity(2);
    if qubit == 0 { op.kron(&id) } else { id.kron(op) }.expect("4x4 operator")
}

fn pauli(k: usize) -> Matrix {
    let (o, i) = (c(0.0, 0.0), c(1.0, 0.0));
    match k {
        0 => Matrix::identity(2),
        1 => Matrix::from_rows(&[vec![o, i], vec![i, o]]).unwrap(),
        2 => crate::qstate::sigma_y(),
        _ => crate::qstate::sigma_z(),
    }
}

/// `(1−λ)ρ + (λ/4)·Σ σρσ` over `{I, X, Y, Z}` on one qubit.
pub fn depolarize(rho: &DensityMatrix, qubit: usize, lambda: f64) -> Result<DensityMatrix> {
    check_weight("depolarizing", lambda)?;
    let m = rho.matrix();
    let mut out = m.scale(1.0 - lambda);
    for k in 0..4 {
        let s = on_qubit(&pauli(k), qubit);
        out = out.add(&s.mul(m).mul(&s).scale(lambda / 4.0));
    }
    Ok(DensityMatrix::new_unchecked(out.hermitian_part()))
}

/// `(1−γ)ρ + γ·ZρZ` on one qubit.
pub fn dephase(rho: &DensityMatrix, qubit: usize, gamma: f64) -> Result<DensityMatrix> {
    check_weight("dephasing", gamma)?;
    let z = on_qubit(&pauli(3), qubit);
    let m = rho.matrix();
    let out = m.scale(1.0 - gamma).add(&z.mul(m).mul(&z).scale(gamma));
    Ok(DensityMatrix::new_unchecked(out.hermitian_part()))
}

fn check_weight(name: &str, w: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Config(format!("{name} weight {w} outside [0, 1]")));
    }
    Ok(())
}

/// Conditional state after storage and retrieval, and the probability that
/// the stored photon reaches the detector.
pub fn apply_memory(rho: &DensityMatrix, cfg: &ScenarioConfig) -> Result<(DensityMatrix, f64)> {
    if rho.dim() != 4 {
        return Err(Error::Dimension(format!("memory channel needs a 4-dim state, got {}", rho.dim())));
    }
    let q = stored_qubit(cfg.source.state_kind);
    let out = dephase(&depolarize(rho, q, cfg.memory.depolarizing)?, q, cfg.memory.dephasing)?;
    Ok((out, cfg.survival(Stage::Output)))
}

/// State and stored-arm survival at a measurement stage.
pub fn state_at(cfg: &ScenarioConfig, stage: Stage) -> Result<(DensityMatrix, f64)> {
    let rho = source_state(cfg)?;
    match stage {
        Stage::Input => Ok((rho, cfg.survival(Stage::Input))),
        Stage::Output => apply_memory(&rho, cfg),
    }
}

fn sample_binomial(rng: &mut impl Rng, n: u64, p: f64) -> f64 {
    if n == 0 || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return n as f64;
    }
    Binomial::new(n, p).expect("p in (0,1)").sample(rng) as f64
}

pub(crate) fn sample_poisson(rng: &mut impl Rng, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng)
}

fn setting_words(settings: &[Setting]) -> Vec<u64> {
    settings
        .iter()
        .flat_map(|s| match *s {
            Setting::Angles(a, b) => [a.to_bits(), b.to_bits()],
            Setting::Labels(a, b) => [0x100 + a as u64, 0x100 + b as u64],
        })
        .collect()
}

/// Coincidences per setting: `Binomial(trials, P·survival·η²)` plus
/// `Poisson(trials·δ²)` accidentals, with `δ` the per-window dark-click
/// probability. Angle settings are mapped through `analyzer_frame_sign`.
pub fn simulate_counts(
    rho: &DensityMatrix,
    settings: &[Setting],
    cfg: &ScenarioConfig,
    stage: Stage,
    mode: Mode,
) -> Result<CoincidenceTable> {
    let survival = cfg.survival(stage);
    let eta = cfg.detectors.efficiency;
    let dark = cfg.dark_probability();
    let accidental = cfg.trials as f64 * dark * dark;
    let probs = settings
        .iter()
        .map(|s| {
            let (a, b) = match *s {
                Setting::Angles(a, b) => {
                    let (a, b) = cfg.frame_angles(a, b);
                    (Analyzer::Linear(a), Analyzer::Linear(b))
                }
                Setting::Labels(..) => s.analyzers(),
            };
            Ok(born_probability(rho, &joint_projector(a, b))? * survival * eta * eta)
        })
        .collect::<Result<Vec<f64>>>()?;
    let sub = fingerprint(setting_words(settings)) ^ stage.tag();
    let trials = cfg.trials;
    let counts: Vec<f64> = probs
        .par_iter()
        .enumerate()
        .map(|(k, &p)| match mode {
            Mode::Exact => (trials as f64 * p + accidental).min(trials as f64),
            Mode::Sampled => {
                let mut rng = substream(cfg.seed, Domain::Counts, sub, k as u64);
                (sample_binomial(&mut rng, trials, p) + sample_poisson(&mut rng, accidental)).min(trials as f64)
            }
        })
        .collect();
    CoincidenceTable::new(settings.to_vec(), counts, trials, cfg.seed)
}

/// Counts for every setting a CHSH evaluation needs.
pub fn simulate_chsh(cfg: &ScenarioConfig, stage: Stage, settings: &ChshSettings, mode: Mode) -> Result<CoincidenceTable> {
    let (rho, _) = state_at(cfg, stage)?;
    let s: Vec<Setting> = settings.required_settings().into_iter().map(|(a, b)| Setting::Angles(a, b)).collect();
    simulate_counts(&rho, &s, cfg, stage, mode)
}

/// The 16 tomography counts at a stage; normalized by their own HH..VV sum.
pub fn simulate_tomography(cfg: &ScenarioConfig, stage: Stage, mode: Mode) -> Result<TomographyRecord> {
    require_kind(cfg, StateKind::TwoPhoton)?;
    let (rho, _) = state_at(cfg, stage)?;
    let s: Vec<Setting> = tomography::settings().into_iter().map(|(a, b)| Setting::Labels(a, b)).collect();
    let table = simulate_counts(&rho, &s, cfg, stage, mode)?;
    let mut counts = [0.0; tomography::NUM_SETTINGS];
    counts.copy_from_slice(&table.counts);
    TomographyRecord::new(counts)
}

fn require_kind(cfg: &ScenarioConfig, kind: StateKind) -> Result<()> {
    if cfg.source.state_kind != kind {
        return Err(Error::Config(format!("operation needs state_kind {kind:?}, config has {:?}", cfg.source.state_kind)));
    }
    Ok(())
}

/// Interference fringe with `points` phases over one period.
///
/// Hybrid: detector 1 behind the path-recombining interferometer, phase θ
/// over `[0, 2π)`. Two-photon: coincidences with the Stokes analyzer at 45°
/// while the anti-Stokes polarizer turns through `[0, π)`; the reported
/// phase is twice the polarizer angle.
pub fn simulate_fringe(cfg: &ScenarioConfig, stage: Stage, points: usize, mode: Mode) -> Result<FringeScan> {
    if points < 4 {
        return Err(Error::InvalidInput(format!("a fringe needs at least 4 points, got {points}")));
    }
    match cfg.source.state_kind {
        StateKind::TwoPhoton => {
            let (rho, _) = state_at(cfg, stage)?;
            let settings: Vec<Setting> = (0..points)
                .map(|k| Setting::Angles(std::f64::consts::PI * k as f64 / points as f64, std::f64::consts::FRAC_PI_4))
                .collect();
            let t = simulate_counts(&rho, &settings, cfg, stage, mode)?;
            let phases = settings.iter().map(|s| if let Setting::Angles(a, _) = s { 2.0 * a } else { 0.0 }).collect();
            FringeScan::new(phases, t.counts)
        }
        StateKind::Hybrid => {
            let phases: Vec<f64> = (0..points).map(|k| std::f64::consts::TAU * k as f64 / points as f64).collect();
            let probs = phases.iter().map(|&th| hybrid_click_probability(cfg, stage, th)).collect::<Result<Vec<_>>>()?;
            let counts = sample_each(cfg, Domain::Fringe, stage.tag(), &probs, mode);
            FringeScan::new(phases, counts)
        }
    }
}

fn sample_each(cfg: &ScenarioConfig, domain: Domain, sub: u64, probs: &[f64], mode: Mode) -> Vec<f64> {
    let n = cfg.trials;
    probs
        .par_iter()
        .enumerate()
        .map(|(k, &p)| match mode {
            Mode::Exact => n as f64 * p,
            Mode::Sampled => sample_binomial(&mut substream(cfg.seed, domain, sub, k as u64), n, p),
        })
        .collect()
}

/// Heralded-photon arrival probability per trial at one stage, before the
/// path split.
fn arrival(cfg: &ScenarioConfig, stage: Stage) -> f64 {
    cfg.survival(stage) * cfg.detectors.efficiency
}

/// Probability of an additional pair inside one coincidence window.
fn extra_pair(cfg: &ScenarioConfig) -> f64 {
    (cfg.source.pair_rate * cfg.detectors.coincidence_window_ns * 1e-9).min(1.0)
}

/// Trials are heralding events; a source with no pairs produces none.
fn herald(cfg: &ScenarioConfig) -> f64 {
    if cfg.source.pair_rate > 0.0 { 1.0 } else { 0.0 }
}

/// Interferometer signal terms `(B, A)` of the hybrid state: detector 1
/// sees `B + A·cos(θ − φ)`.
fn hybrid_fringe_terms(rho: &DensityMatrix) -> (f64, f64) {
    let b = 0.5 * (rho.get(0, 0).re + rho.get(3, 3).re);
    (b, rho.get(0, 3).norm())
}

fn hybrid_click_probability(cfg: &ScenarioConfig, stage: Stage, theta: f64) -> Result<f64> {
    require_kind(cfg, StateKind::Hybrid)?;
    let (rho, _) = state_at(cfg, stage)?;
    let chi = StateVector::new(
        vec![c(std::f64::consts::FRAC_1_SQRT_2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(theta.cos(), theta.sin()) * std::f64::consts::FRAC_1_SQRT_2],
        path_polarization_labels(),
    )?;
    let born = born_probability(&rho, &DensityMatrix::from_pure(&chi))?;
    let signal = herald(cfg) * arrival(cfg, stage) * (1.0 + extra_pair(cfg));
    Ok((signal * born + cfg.dark_probability()).min(1.0))
}

/// Expected `[p00, p10, p01, p11]`: heralded photon, a possible extra pair
/// photon and independent dark clicks on the U and D detectors.
pub fn path_number_probabilities(cfg: &ScenarioConfig, stage: Stage) -> Result<[f64; 4]> {
    require_kind(cfg, StateKind::Hybrid)?;
    let (rho, _) = state_at(cfg, stage)?;
    let p_up = rho.get(0, 0).re + rho.get(1, 1).re;
    let t = arrival(cfg, stage);
    let photon = [t * p_up, t * (1.0 - p_up), 1.0 - t];
    let h = herald(cfg);
    let q = extra_pair(cfg) * h;
    let delta = cfg.dark_probability();
    let mut p = [0.0; 4];
    // outcome index: 0 = U, 1 = D, 2 = lost, 3 = absent
    for x in 0..4 {
        let px = if x == 3 { 1.0 - h } else { h * photon[x] };
        for y in 0..4 {
            let py = if y == 3 { 1.0 - q } else { q * photon[y] };
            for du in [false, true] {
                for dd in [false, true] {
                    let pd = (if du { delta } else { 1.0 - delta }) * (if dd { delta } else { 1.0 - delta });
                    let u = x == 0 || y == 0 || du;
                    let d = x == 1 || y == 1 || dd;
                    p[u as usize + 2 * d as usize] += px * py * pd;
                }
            }
        }
    }
    // index 0 = none, 1 = U only, 2 = D only, 3 = both
    Ok(p)
}

/// Expected fringe visibility on the interferometer detector.
pub fn path_visibility(cfg: &ScenarioConfig, stage: Stage) -> Result<f64> {
    require_kind(cfg, StateKind::Hybrid)?;
    let (rho, _) = state_at(cfg, stage)?;
    let (b, a) = hybrid_fringe_terms(&rho);
    let signal = herald(cfg) * arrival(cfg, stage) * (1.0 + extra_pair(cfg));
    let den = signal * b + cfg.dark_probability();
    Ok(if den > 0.0 { signal * a / den } else { 0.0 })
}

/// Raw counts behind one path-number density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PathNumberCounts {
    /// `[n00, n10, n01, n11]`
    pub counts: [f64; 4],
    /// Interferometer counts at the fringe maximum and minimum.
    pub fringe: [f64; 2],
    pub trials: u64,
}

impl PathNumberCounts {
    pub fn matrix(&self) -> Result<PathNumberMatrix> {
        if self.trials == 0 {
            return Err(Error::Degenerate("no trials".into()));
        }
        let n = self.trials as f64;
        let v = raw_visibility(self.fringe[0], self.fringe[1])?;
        PathNumberMatrix::new(self.counts[0] / n, self.counts[1] / n, self.counts[2] / n, self.counts[3] / n, v)
    }

    pub fn as_vec(&self) -> Vec<f64> {
        self.counts.iter().chain(&self.fringe).copied().collect()
    }

    pub fn from_vec(&self, v: &[f64]) -> PathNumberCounts {
        PathNumberCounts { counts: [v[0], v[1], v[2], v[3]], fringe: [v[4], v[5]], trials: self.trials }
    }
}

/// Photon-number statistics of the two path modes plus the two fringe
/// extremes, at one stage.
pub fn simulate_path_number(cfg: &ScenarioConfig, stage: Stage, mode: Mode) -> Result<PathNumberCounts> {
    let p = path_number_probabilities(cfg, stage)?;
    let phase = cfg.source.theta1;
    let fr = [
        hybrid_click_probability(cfg, stage, phase)?,
        hybrid_click_probability(cfg, stage, phase + std::f64::consts::PI)?,
    ];
    let n = cfg.trials;
    let (counts, fringe) = match mode {
        Mode::Exact => (p.map(|x| x * n as f64), fr.map(|x| x * n as f64)),
        Mode::Sampled => {
            let mut rng = substream(cfg.seed, Domain::PathNumber, stage.tag(), 0);
            let mut counts = [0.0; 4];
            let (mut left, mut mass) = (n, 1.0);
            for k in 0..3 {
                let share = if mass > 0.0 { (p[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
                counts[k] = sample_binomial(&mut rng, left, share);
                left -= counts[k] as u64;
                mass -= p[k];
            }
            counts[3] = left as f64;
            let fringe = [sample_binomial(&mut rng, n, fr[0]), sample_binomial(&mut rng, n, fr[1])];
            (counts, fringe)
        }
    };
    Ok(PathNumberCounts { counts, fringe, trials: n })
}
