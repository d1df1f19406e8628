//! Scalar entanglement and quality metrics: path-number concurrence,
//! Wootters concurrence, Uhlmann fidelity, fringe visibility, CHSH, and the
//! efficiency/contrast/bandwidth ratios.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

use crate::counts::CoincidenceTable;
use crate::error::{Error, Result};
use crate::linalg;
use crate::qstate::{c, denoised, eig_hermitian, matrix_sqrt, sigma_y, DensityMatrix, Matrix};

/// Fringe visibility needed to violate a Bell inequality with a maximally
/// entangled state under white noise.
pub const BELL_VISIBILITY_BENCHMARK: f64 = FRAC_1_SQRT_2;

/// Tsirelson bound 2√2.
pub const TSIRELSON: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Photon-number density matrix of two modes U, D truncated to `{0,1}`
/// excitations, ordered `[00, 10, 01, 11]` (`n_U m_D`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathNumberMatrix {
    pub p00: f64,
    pub p10: f64,
    pub p01: f64,
    pub p11: f64,
    pub visibility: f64,
}

impl PathNumberMatrix {
    pub fn new(p00: f64, p10: f64, p01: f64, p11: f64, visibility: f64) -> Result<Self> {
        let m = PathNumberMatrix { p00, p10, p01, p11, visibility };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let ps = [self.p00, self.p10, self.p01, self.p11];
        if ps.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput(format!("probabilities must be non-negative, got {ps:?}")));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::InvalidInput(format!("visibility {} outside [0,1]", self.visibility)));
        }
        if !(self.total() > 0.0) {
            return Err(Error::InvalidInput("p00 + p10 + p01 + p11 must be positive".into()));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.p00 + self.p10 + self.p01 + self.p11
    }

    /// Coherence between `|1_U 0_D⟩` and `|0_U 1_D⟩`, `V·√(p10·p01)`.
    pub fn coherence(&self) -> f64 {
        self.visibility * (self.p10 * self.p01).sqrt()
    }

    /// The normalized 4×4 matrix.
    pub fn density_matrix(&self) -> Result<DensityMatrix> {
        self.validate()?;
        let p = self.total();
        let d = self.coherence();
        let mut m = Matrix::diag(&[self.p00 / p, self.p10 / p, self.p01 / p, self.p11 / p]);
        m.set(1, 2, c(d / p, 0.0));
        m.set(2, 1, c(d / p, 0.0));
        DensityMatrix::new(m)
    }
}

/// `C = max(0, 2|d| − 2√(p00·p11)) / P` with `d = V·√(p10·p01)`.
pub fn path_concurrence(m: &PathNumberMatrix) -> Result<f64> {
    m.validate()?;
    let raw = 2.0 * m.coherence().abs() - 2.0 * (m.p00 * m.p11).sqrt();
    Ok((raw.max(0.0) / m.total()).min(1.0))
}

/// Wootters concurrence of a two-qubit state.
///
/// Uses the Hermitian form: the square roots of the eigenvalues of
/// `ρ·ρ̃` equal the eigenvalues of `√(√ρ ρ̃ √ρ)`, with
/// `ρ̃ = (σy⊗σy) ρ* (σy⊗σy)`.
pub fn wootters_concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::Dimension(format!("concurrence needs a 4x4 state, got {}", rho.dim())));
    }
    let yy = sigma_y().kron(&sigma_y())?;
    let tilde = yy.mul(&rho.matrix().conj()).mul(&yy);
    let s = matrix_sqrt(rho.matrix())?;
    let inner = s.mul(&tilde).mul(&s).hermitian_part();
    let mut l: Vec<f64> = denoised(&eig_hermitian(&inner)?.values).iter().map(|v| v.sqrt()).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    Ok((l[0] - l[1] - l[2] - l[3]).clamp(0.0, 1.0))
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension(format!("fidelity of {}x{} and {}x{} states", rho.dim(), rho.dim(), sigma.dim(), sigma.dim())));
    }
    let s = matrix_sqrt(rho.matrix())?;
    let inner = s.mul(sigma.matrix()).mul(&s).hermitian_part();
    let tr: f64 = denoised(&eig_hermitian(&inner)?.values).iter().map(|v| v.sqrt()).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// Coincidence counts recorded while scanning an interferometer phase.
#[derive(Clone, Debug, PartialEq)]
pub struct FringeScan {
    pub phases: Vec<f64>,
    pub counts: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FringeFit {
    pub offset: f64,
    pub visibility: f64,
    pub phase: f64,
    /// Set when the counts carry no fringe (constant), in which case
    /// `phase` is reported as 0.
    pub degenerate: bool,
}

impl FringeScan {
    pub fn new(phases: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        if phases.len() != counts.len() {
            return Err(Error::Dimension(format!("{} phases, {} counts", phases.len(), counts.len())));
        }
        Ok(FringeScan { phases, counts })
    }

    /// `phase_rad,count` lines with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase_rad,count\n");
        for (p, n) in self.phases.iter().zip(&self.counts) {
            out.push_str(&format!("{p:.12},{}\n", crate::counts::format_count(*n)));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut phases = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("phase")) {
                continue;
            }
            let (p, n) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: "expected `phase,count`".into() })?;
            phases.push(crate::counts::parse_field(p.trim(), i + 1)?);
            counts.push(crate::counts::parse_field(n.trim(), i + 1)?);
        }
        FringeScan::new(phases, counts)
    }
}

/// Least-squares fit of `counts ≈ C0·(1 + V·cos(θ − φ))`, linearized on the
/// regressors `(1, cos θ, sin θ)`.
pub fn fit_fringe(scan: &FringeScan) -> Result<FringeFit> {
    let n = scan.phases.len();
    if n < 4 || scan.counts.len() != n {
        return Err(Error::InvalidInput(format!("fringe fit needs at least 4 points, got {n}")));
    }
    let lo = scan.phases.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scan.phases.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= PI {
        return Err(Error::InvalidInput(format!("phase span {:.3} rad must exceed π", hi - lo)));
    }
    let first = scan.counts[0];
    if scan.counts.iter().all(|&x| x == first) {
        return Ok(FringeFit { offset: first, visibility: 0.0, phase: 0.0, degenerate: true });
    }
    let design: Vec<Vec<f64>> = scan.phases.iter().map(|t| vec![1.0, t.cos(), t.sin()]).collect();
    let beta = linalg::least_squares(&design, &scan.counts)?;
    let (offset, a, b) = (beta[0], beta[1], beta[2]);
    if !(offset > 0.0) {
        return Err(Error::Degenerate(format!("fitted fringe offset {offset} is not positive")));
    }
    let amplitude = a.hypot(b);
    let phase = b.atan2(a).rem_euclid(2.0 * PI);
    Ok(FringeFit { offset, visibility: (amplitude / offset).clamp(0.0, 1.0), phase, degenerate: false })
}

/// Visibility `(Cmax − Cmin)/(Cmax + Cmin)` of raw extreme counts.
pub fn raw_visibility(cmax: f64, cmin: f64) -> Result<f64> {
    if !(cmax + cmin > 0.0) {
        return Err(Error::Degenerate("zero counts".into()));
    }
    Ok((cmax - cmin) / (cmax + cmin))
}

/// CHSH analyzer angles (radians).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChshSettings {
    pub a: f64,
    pub b: f64,
    pub a_prime: f64,
    pub b_prime: f64,
}

impl ChshSettings {
    /// (0, π/8, π/4, 3π/8)
    pub const STANDARD: ChshSettings = ChshSettings { a: 0.0, b: FRAC_PI_8, a_prime: FRAC_PI_4, b_prime: 3.0 * FRAC_PI_8 };

    pub fn new(a: f64, b: f64, a_prime: f64, b_prime: f64) -> Result<Self> {
        if ![a, b, a_prime, b_prime].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("CHSH angles must be finite".into()));
        }
        Ok(ChshSettings { a, b, a_prime, b_prime })
    }

    /// The four `(θA, θS)` pairs entering S, in order
    /// `(a,b), (a,b′), (a′,b), (a′,b′)`.
    pub fn pairs(&self) -> [(f64, f64); 4] {
        [(self.a, self.b), (self.a, self.b_prime), (self.a_prime, self.b), (self.a_prime, self.b_prime)]
    }

    /// All 16 analyzer settings a CHSH measurement needs.
    pub fn required_settings(&self) -> Vec<(f64, f64)> {
        self.pairs().iter().flat_map(|&(x, y)| correlator_settings(x, y)).collect()
    }
}

/// `[(a,b), (a+π/2, b+π/2), (a+π/2, b), (a, b+π/2)]`
pub fn correlator_settings(a: f64, b: f64) -> [(f64, f64); 4] {
    [(a, b), (a + FRAC_PI_2, b + FRAC_PI_2), (a + FRAC_PI_2, b), (a, b + FRAC_PI_2)]
}

/// `E = (C(a,b) + C(a⊥,b⊥) − C(a⊥,b) − C(a,b⊥)) / sum`, with the counts
/// given in the order of [`correlator_settings`].
pub fn e_correlator(counts: [f64; 4]) -> Result<f64> {
    if counts.iter().any(|c| !(*c >= 0.0)) {
        return Err(Error::InvalidInput(format!("negative count in {counts:?}")));
    }
    let total: f64 = counts.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("correlator denominator is zero".into()));
    }
    Ok(((counts[0] + counts[1] - counts[2] - counts[3]) / total).clamp(-1.0, 1.0))
}

/// The four correlators `E(a,b), E(a,b′), E(a′,b), E(a′,b′)`.
pub fn chsh_correlators(table: &CoincidenceTable, settings: &ChshSettings) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (slot, (x, y)) in out.iter_mut().zip(settings.pairs()) {
        let mut counts = [0.0; 4];
        for (cnt, (sa, sb)) in counts.iter_mut().zip(correlator_settings(x, y)) {
            *cnt = table.count_at_angles(sa, sb)?;
        }
        *slot = e_correlator(counts)?;
    }
    Ok(out)
}

/// `S = |E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)|`
pub fn chsh_s(table: &CoincidenceTable, settings: &ChshSettings) -> Result<f64> {
    let e = chsh_correlators(table, settings)?;
    Ok((e[0] - e[1] + e[2] + e[3]).abs())
}

/// `η = C_out / C_in`
pub fn transfer_efficiency(c_in: f64, c_out: f64) -> Result<f64> {
    if c_in == 0.0 {
        return Err(Error::InvalidInput("input concurrence is zero".into()));
    }
    Ok(c_out / c_in)
}

/// `β = V_out / V_in`
pub fn contrast_beta(v_in: f64, v_out: f64) -> Result<f64> {
    if v_in == 0.0 {
        return Err(Error::InvalidInput("input visibility is zero".into()));
    }
    Ok(v_out / v_in)
}

/// Detuning expressed in units of the atomic absorption bandwidth.
pub fn far_detuning_ratio(detuning_mhz: f64, absorption_bw_mhz: f64) -> Result<f64> {
    if absorption_bw_mhz == 0.0 {
        return Err(Error::InvalidInput("absorption bandwidth is zero".into()));
    }
    Ok(detuning_mhz / absorption_bw_mhz)
}

/// Bandwidth in MHz of a pulse of the given FWHM, using the reciprocal
/// convention `1/FWHM`.
pub fn bandwidth_from_fwhm(fwhm_ns: f64) -> Result<f64> {
    if fwhm_ns == 0.0 {
        return Err(Error::InvalidInput("pulse width is zero".into()));
    }
    Ok(1000.0 / fwhm_ns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::Setting;
    use crate::qstate::{bell, StateVector};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn werner_singlet(p: f64) -> DensityMatrix {
        DensityMatrix::from_pure(&bell::singlet()).werner_mix(p).unwrap()
    }

    fn random_pure(rng: &mut impl Rng) -> StateVector {
        StateVector::with_default_labels((0..4).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()).unwrap()
    }

    /// Born-rule counts from direct amplitude expansion, independent of the
    /// projector/trace machinery.
    fn brute_force_table(psi: &StateVector, settings: &ChshSettings, scale: f64) -> CoincidenceTable {
        let mut s = Vec::new();
        let mut n = Vec::new();
        for (a, b) in settings.required_settings() {
            let ka = [a.cos(), a.sin()];
            let kb = [b.cos(), b.sin()];
            let amp: num_complex::Complex64 = (0..4).map(|k| psi.amplitudes()[k] * (ka[k / 2] * kb[k % 2])).sum();
            s.push(Setting::Angles(a, b));
            n.push(amp.norm_sqr() * scale);
        }
        CoincidenceTable::new(s, n, 0, 0).unwrap()
    }

    #[test]
    fn table1_input_concurrence() {
        let m = PathNumberMatrix::new(0.990393, 4.59e-3, 5.04e-3, 1.6e-6, 0.869).unwrap();
        let cin = path_concurrence(&m).unwrap();
        assert!((cin - 5.8e-3).abs() <= 0.2e-3, "C_in = {cin}");
    }

    #[test]
    fn table1_output_concurrence_and_eta() {
        let input = PathNumberMatrix::new(0.990393, 4.59e-3, 5.04e-3, 1.6e-6, 0.869).unwrap();
        let output = PathNumberMatrix::new(0.998166, 9.64e-4, 8.71e-4, 5e-8, 0.822).unwrap();
        let cout = path_concurrence(&output).unwrap();
        assert!((cout - 1.2e-3).abs() <= 0.4e-3, "C_out = {cout}");
        let eta = transfer_efficiency(path_concurrence(&input).unwrap(), cout).unwrap();
        assert!((eta - 0.209).abs() <= 0.077, "eta = {eta}");
    }

    #[test]
    fn path_concurrence_limits() {
        let m = PathNumberMatrix::new(0.0, 0.5, 0.5, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(path_concurrence(&m).unwrap(), 1.0, epsilon = 1e-15);
        let m = PathNumberMatrix::new(0.5, 0.0, 0.5, 0.0, 1.0).unwrap();
        assert_eq!(path_concurrence(&m).unwrap(), 0.0);
        assert!(PathNumberMatrix::new(0.0, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(PathNumberMatrix::new(0.5, 0.5, 0.0, 0.0, 1.2).is_err());
    }

    #[test]
    fn path_concurrence_matches_wootters_of_path_matrix() {
        // The path-number matrix is an X state; its Wootters concurrence
        // reduces to the same closed form.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let ps: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
            let v = rng.random_range(0.0..1.0);
            let m = PathNumberMatrix::new(ps[0], ps[1], ps[2], ps[3], v).unwrap();
            let w = wootters_concurrence(&m.density_matrix().unwrap()).unwrap();
            assert_abs_diff_eq!(path_concurrence(&m).unwrap(), w, epsilon = 1e-7);
        }
    }

    #[test]
    fn path_concurrence_monotone_in_visibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let ps: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut prev = 0.0;
            for k in 0..=20 {
                let m = PathNumberMatrix::new(ps[0], ps[1], ps[2], ps[3], k as f64 / 20.0).unwrap();
                let cur = path_concurrence(&m).unwrap();
                assert!(cur >= prev - 1e-15);
                prev = cur;
            }
        }
    }

    #[test]
    fn wootters_examples() {
        assert_abs_diff_eq!(wootters_concurrence(&DensityMatrix::from_pure(&bell::psi_plus())).unwrap(), 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(wootters_concurrence(&DensityMatrix::maximally_mixed(4)).unwrap(), 0.0, epsilon = 1e-12);
        for k in 0..=20 {
            let p = k as f64 / 20.0;
            let cw = wootters_concurrence(&werner_singlet(p)).unwrap();
            assert_abs_diff_eq!(cw, ((3.0 * p - 1.0) / 2.0).max(0.0), epsilon = 1e-7);
        }
        assert!(wootters_concurrence(&DensityMatrix::maximally_mixed(2)).is_err());
    }

    #[test]
    fn wootters_product_state_is_zero() {
        let h = StateVector::single(crate::qstate::PolLabel::H.into());
        let d = StateVector::single(crate::qstate::PolLabel::D.into());
        let rho = DensityMatrix::from_pure(&h.kron(&d).unwrap());
        assert_abs_diff_eq!(wootters_concurrence(&rho).unwrap(), 0.0, epsilon = 1e-7);
    }

    #[test]
    fn fidelity_examples() {
        let w = werner_singlet(0.6);
        assert_abs_diff_eq!(fidelity(&w, &w).unwrap(), 1.0, epsilon = 1e-9);
        let hv = DensityMatrix::from_pure(&StateVector::with_default_labels(vec![c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]).unwrap());
        let vh = DensityMatrix::from_pure(&StateVector::with_default_labels(vec![c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.)]).unwrap());
        assert_abs_diff_eq!(fidelity(&hv, &vh).unwrap(), 0.0, epsilon = 1e-12);
        let ideal = DensityMatrix::from_pure(&bell::singlet());
        for k in 0..=10 {
            let p = k as f64 / 10.0;
            assert_abs_diff_eq!(fidelity(&werner_singlet(p), &ideal).unwrap(), (1.0 + 3.0 * p) / 4.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn fidelity_of_pure_states_is_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let a = random_pure(&mut rng);
            let b = random_pure(&mut rng);
            let f = fidelity(&DensityMatrix::from_pure(&a), &DensityMatrix::from_pure(&b)).unwrap();
            assert_abs_diff_eq!(f, a.inner(&b).norm_sqr(), epsilon = 1e-8);
        }
    }

    #[test]
    fn fidelity_symmetric_on_mixed_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let g = Matrix::from_fn(4, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let m = g.mul(&g.adjoint());
            let rho = DensityMatrix::new(m.scale(1.0 / m.trace().re)).unwrap();
            let sigma = werner_singlet(rng.random_range(0.0..1.0));
            let (f1, f2) = (fidelity(&rho, &sigma).unwrap(), fidelity(&sigma, &rho).unwrap());
            assert_abs_diff_eq!(f1, f2, epsilon = 1e-8);
        }
    }

    #[test]
    fn fringe_noiseless() {
        let phases: Vec<f64> = (0..8).map(|k| k as f64 * PI / 4.0).collect();
        let counts = phases.iter().map(|t| 50.0 * (1.0 + t.cos())).collect();
        let fit = fit_fringe(&FringeScan::new(phases, counts).unwrap()).unwrap();
        assert_abs_diff_eq!(fit.visibility, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.offset, 50.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.phase.min(2.0 * PI - fit.phase), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn fringe_recovers_any_visibility_and_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let phases: Vec<f64> = (0..12).map(|k| k as f64 * 2.0 * PI / 12.0).collect();
        for _ in 0..200 {
            let v = rng.random_range(0.0..1.0);
            let phi = rng.random_range(0.0..2.0 * PI);
            let counts = phases.iter().map(|t| 200.0 * (1.0 + v * (t - phi).cos())).collect();
            let fit = fit_fringe(&FringeScan::new(phases.clone(), counts).unwrap()).unwrap();
            assert_abs_diff_eq!(fit.visibility, v, epsilon = 1e-9);
            if v > 1e-3 {
                let d = (fit.phase - phi).rem_euclid(2.0 * PI);
                assert!(d.min(2.0 * PI - d) < 1e-6);
            }
        }
    }

    #[test]
    fn fringe_constant_is_degenerate() {
        let phases: Vec<f64> = (0..8).map(|k| k as f64 * PI / 4.0).collect();
        let fit = fit_fringe(&FringeScan::new(phases, vec![30.0; 8]).unwrap()).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.visibility, 0.0);
        assert_eq!(fit.phase, 0.0);
    }

    #[test]
    fn fringe_rejects_short_scans() {
        let scan = FringeScan::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert!(fit_fringe(&scan).is_err());
        let scan = FringeScan::new(vec![0.0, 0.5, 1.0, 1.5], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(fit_fringe(&scan).is_err());
    }

    #[test]
    fn e_correlator_examples() {
        assert_eq!(e_correlator([100.0, 100.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(e_correlator([0.0, 0.0, 100.0, 100.0]).unwrap(), -1.0);
        assert_eq!(e_correlator([50.0; 4]).unwrap(), 0.0);
        assert!(e_correlator([0.0; 4]).is_err());
    }

    #[test]
    fn chsh_singlet_reaches_tsirelson() {
        let t = brute_force_table(&bell::singlet(), &ChshSettings::STANDARD, 1.0);
        assert_abs_diff_eq!(chsh_s(&t, &ChshSettings::STANDARD).unwrap(), TSIRELSON, epsilon = 1e-12);
    }

    #[test]
    fn chsh_mixed_is_zero_and_werner_is_linear() {
        let settings = ChshSettings::STANDARD;
        let table_for = |rho: &DensityMatrix| {
            let mut s = Vec::new();
            let mut n = Vec::new();
            for (a, b) in settings.required_settings() {
                let pr = crate::qstate::born_probability(rho, &crate::qstate::joint_projector(crate::qstate::Analyzer::Linear(a), crate::qstate::Analyzer::Linear(b))).unwrap();
                s.push(Setting::Angles(a, b));
                n.push(pr);
            }
            CoincidenceTable::new(s, n, 0, 0).unwrap()
        };
        assert_abs_diff_eq!(chsh_s(&table_for(&DensityMatrix::maximally_mixed(4)), &settings).unwrap(), 0.0, epsilon = 1e-12);
        let s = chsh_s(&table_for(&werner_singlet(0.8485)), &settings).unwrap();
        assert!((s - 2.40).abs() <= 0.01, "S = {s}");
        for k in 0..=10 {
            let p = k as f64 / 10.0;
            assert_abs_diff_eq!(chsh_s(&table_for(&werner_singlet(p)), &settings).unwrap(), p * TSIRELSON, epsilon = 1e-12);
        }
    }

    #[test]
    fn chsh_missing_setting() {
        let t = CoincidenceTable::new(vec![Setting::Angles(0.0, 0.0)], vec![1.0], 0, 0).unwrap();
        assert!(matches!(chsh_s(&t, &ChshSettings::STANDARD), Err(Error::MissingSetting(_))));
    }

    #[test]
    fn ratios() {
        assert_abs_diff_eq!(transfer_efficiency(5.8e-3, 1.2e-3).unwrap(), 0.2069, epsilon = 1e-4);
        assert_eq!(transfer_efficiency(0.3, 0.3).unwrap(), 1.0);
        assert_eq!(transfer_efficiency(1.0, 0.0).unwrap(), 0.0);
        assert!(transfer_efficiency(0.0, 1.0).is_err());

        assert_abs_diff_eq!(contrast_beta(0.869, 0.822).unwrap(), 0.946, epsilon = 1e-3);
        assert_eq!(contrast_beta(0.5, 0.5).unwrap(), 1.0);
        assert_eq!(contrast_beta(0.707, 0.0).unwrap(), 0.0);
        assert!(contrast_beta(0.0, 0.5).is_err());

        assert_abs_diff_eq!(far_detuning_ratio(200.0, 5.8).unwrap(), 34.48, epsilon = 1e-2);
        assert_eq!(far_detuning_ratio(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(far_detuning_ratio(3500.0, 500.0).unwrap(), 7.0);
        assert!(far_detuning_ratio(1.0, 0.0).is_err());

        assert_abs_diff_eq!(bandwidth_from_fwhm(7.0).unwrap(), 142.857, epsilon = 1e-3);
        assert_eq!(bandwidth_from_fwhm(1.0).unwrap(), 1000.0);
        assert_eq!(bandwidth_from_fwhm(1000.0).unwrap(), 1.0);
        assert!(bandwidth_from_fwhm(0.0).is_err());
    }

    #[test]
    fn benchmark_constant() {
        assert!(0.859 >= BELL_VISIBILITY_BENCHMARK && 0.806 >= BELL_VISIBILITY_BENCHMARK);
        assert!(0.70 < BELL_VISIBILITY_BENCHMARK);
    }
}
