//! Two-qubit polarization tomography from the 16 settings
//! `{H, V, D, R} ⊗ {H, V, D, R}`: linear inversion followed by eigenvalue
//! clipping.

use std::fmt::Write as _;

use crate::counts::{format_count, parse_field};
use crate::error::{Error, Result};
use crate::linalg;
use crate::qstate::{c, joint_projector, DensityMatrix, Matrix, PolLabel};

pub const NUM_SETTINGS: usize = 16;

/// Setting `k` is `(ALL[k / 4], ALL[k % 4])`.
pub fn settings() -> [(PolLabel, PolLabel); NUM_SETTINGS] {
    let mut out = [(PolLabel::H, PolLabel::H); NUM_SETTINGS];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = (PolLabel::ALL[k / 4], PolLabel::ALL[k % 4]);
    }
    out
}

pub fn setting_index(a: PolLabel, b: PolLabel) -> usize {
    let idx = |l: PolLabel| PolLabel::ALL.iter().position(|&x| x == l).unwrap();
    idx(a) * 4 + idx(b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TomographyRecord {
    /// In [`settings`] order.
    pub counts: [f64; NUM_SETTINGS],
    /// Counts per setting corresponding to unit probability. When absent it
    /// is estimated from the complete `{H,V}⊗{H,V}` subset.
    pub exposure: Option<f64>,
}

impl TomographyRecord {
    pub fn new(counts: [f64; NUM_SETTINGS]) -> Result<Self> {
        if let Some(c) = counts.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidInput(format!("count {c} is not a non-negative number")));
        }
        Ok(TomographyRecord { counts, exposure: None })
    }

    pub fn with_exposure(mut self, exposure: f64) -> Result<Self> {
        if !(exposure > 0.0) {
            return Err(Error::InvalidInput(format!("exposure {exposure} must be positive")));
        }
        self.exposure = Some(exposure);
        Ok(self)
    }

    /// Exact expectation counts `exposure · Tr(ρ Π_ab)`.
    pub fn from_state(rho: &DensityMatrix, exposure: f64) -> Result<Self> {
        let p = predicted_probabilities(rho)?;
        let mut counts = [0.0; NUM_SETTINGS];
        for (c, pk) in counts.iter_mut().zip(p) {
            *c = pk * exposure;
        }
        TomographyRecord::new(counts)?.with_exposure(exposure)
    }

    pub fn count(&self, a: PolLabel, b: PolLabel) -> f64 {
        self.counts[setting_index(a, b)]
    }

    fn normalizer(&self) -> Result<f64> {
        let n = match self.exposure {
            Some(e) => e,
            None => [(PolLabel::H, PolLabel::H), (PolLabel::H, PolLabel::V), (PolLabel::V, PolLabel::H), (PolLabel::V, PolLabel::V)]
                .iter()
                .map(|&(a, b)| self.count(a, b))
                .sum(),
        };
        if !(n > 0.0) {
            return Err(Error::Degenerate("no counts in the H/V basis to normalize by".into()));
        }
        Ok(n)
    }

    /// Plain-text table, one `label_a label_b count` line per setting.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(e) = self.exposure {
            writeln!(out, "# exposure {}", format_count(e)).unwrap();
        }
        for ((a, b), n) in settings().iter().zip(&self.counts) {
            writeln!(out, "{a} {b} {}", format_count(*n)).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut counts = [0.0; NUM_SETTINGS];
        let mut seen = [false; NUM_SETTINGS];
        let mut exposure = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let mut it = meta.split_whitespace();
                if let (Some("exposure"), Some(v)) = (it.next(), it.next()) {
                    exposure = Some(parse_field::<f64>(v, lineno)?);
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse { line: lineno, msg: format!("expected `label_a label_b count`, got `{line}`") });
            }
            let a: PolLabel = f[0].parse().map_err(|_| Error::Parse { line: lineno, msg: format!("bad label `{}`", f[0]) })?;
            let b: PolLabel = f[1].parse().map_err(|_| Error::Parse { line: lineno, msg: format!("bad label `{}`", f[1]) })?;
            let k = setting_index(a, b);
            if seen[k] {
                return Err(Error::Parse { line: lineno, msg: format!("duplicate setting {a} {b}") });
            }
            seen[k] = true;
            counts[k] = parse_field(f[2], lineno)?;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            let (a, b) = settings()[k];
            return Err(Error::MissingSetting(format!("tomography setting {a} {b}")));
        }
        let rec = TomographyRecord::new(counts)?;
        match exposure {
            Some(e) => rec.with_exposure(e),
            None => Ok(rec),
        }
    }
}

/// Hermitian operator basis `σ_i ⊗ σ_j`, `i, j ∈ {I, X, Y, Z}`.
fn pauli_basis() -> Vec<Matrix> {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let paulis = [
        Matrix::identity(2),
        Matrix::from_rows(&[vec![z, one], vec![one, z]]).unwrap(),
        crate::qstate::sigma_y(),
        crate::qstate::sigma_z(),
    ];
    let mut out = Vec::with_capacity(16);
    for a in &paulis {
        for b in &paulis {
            out.push(a.kron(b).unwrap());
        }
    }
    out
}

/// Row-major 16×16 map from Pauli coefficients to setting probabilities.
fn design_matrix(basis: &[Matrix]) -> Vec<f64> {
    let mut a = Vec::with_capacity(NUM_SETTINGS * basis.len());
    for (la, lb) in settings() {
        let proj = joint_projector(la.into(), lb.into());
        for b in basis {
            a.push(b.mul(proj.matrix()).trace().re);
        }
    }
    a
}

/// `Tr(ρ Π_ab)` for every setting.
pub fn predicted_probabilities(rho: &DensityMatrix) -> Result<[f64; NUM_SETTINGS]> {
    if rho.dim() != 4 {
        return Err(Error::Dimension(format!("tomography needs a two-qubit state, got dim {}", rho.dim())));
    }
    let mut out = [0.0; NUM_SETTINGS];
    for (slot, (a, b)) in out.iter_mut().zip(settings()) {
        *slot = crate::qstate::born_probability(rho, &joint_projector(a.into(), b.into()))?;
    }
    Ok(out)
}

/// Unconstrained linear-inversion estimate (Hermitian, unit trace, possibly
/// with negative eigenvalues).
pub fn linear_inversion(rec: &TomographyRecord) -> Result<Matrix> {
    if rec.counts.iter().all(|&c| c == 0.0) {
        return Err(Error::Degenerate("all tomography counts are zero".into()));
    }
    let n = rec.normalizer()?;
    let probs: Vec<f64> = rec.counts.iter().map(|c| c / n).collect();
    let basis = pauli_basis();
    // An informationally complete setting list always gives a regular system.
    let coeffs = linalg::solve(&design_matrix(&basis), &probs).expect("tomography design matrix is regular");
    let mut rho = Matrix::zeros(4);
    for (b, x) in basis.iter().zip(coeffs) {
        rho = rho.add(&b.scale(x));
    }
    let tr = rho.trace().re;
    if !(tr > 0.0) {
        return Err(Error::Degenerate(format!("reconstructed trace {tr} is not positive")));
    }
    Ok(rho.scale(1.0 / tr).hermitian_part())
}

/// Linear inversion, then clip negative eigenvalues and renormalize.
pub fn reconstruct(rec: &TomographyRecord) -> Result<DensityMatrix> {
    let raw = linear_inversion(rec)?;
    DensityMatrix::physicalize(&raw)
}
