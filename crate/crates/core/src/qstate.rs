//! Dense complex linear algebra and quantum states for Hilbert spaces of
//! dimension at most 4 (one or two qubits; path ⊗ polarization).
//!
//! Basis orderings are fixed: polarization ⊗ polarization is
//! `[HH, HV, VH, VV]` and path ⊗ polarization is `[UH, UV, DH, DV]`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub type Complex = num_complex::Complex64;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;
/// Eigenvalues below `-CLIP_TOL` mark a matrix as non-physical; anything
/// between that and zero is treated as numerical noise and clipped.
pub const CLIP_TOL: f64 = 1e-6;
const MAX_DIM: usize = 16;

#[inline]
pub fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<Complex>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix { dim, data: vec![Complex::default(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { c(1.0, 0.0) } else { Complex::default() })
    }

    pub fn diag(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { c(values[i], 0.0) } else { Complex::default() })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Matrix { dim, data }
    }

    pub fn from_rows(rows: &[Vec<Complex>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension("matrix rows must form a square table".into()));
        }
        Ok(Matrix { dim, data: rows.concat() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex) {
        self.data[i * self.dim + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<Complex>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i).conj())
    }

    /// Elementwise complex conjugate (not the adjoint).
    pub fn conj(&self) -> Self {
        Matrix { dim: self.dim, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i))
    }

    pub fn trace(&self) -> Complex {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == Complex::default() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim);
        Matrix { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim);
        Matrix { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn kron(&self, other: &Matrix) -> Result<Matrix> {
        let n = self.dim * other.dim;
        if n > MAX_DIM {
            return Err(Error::Dimension(format!("tensor product dimension {n} exceeds {MAX_DIM}")));
        }
        let m = other.dim;
        Ok(Matrix::from_fn(n, |i, j| self.get(i / m, j / m) * other.get(i % m, j % m)))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// `(M + M†)/2`; removes rounding asymmetry from products of Hermitian matrices.
    pub fn hermitian_part(&self) -> Matrix {
        self.add(&self.adjoint()).scale(0.5)
    }

    pub fn apply(&self, v: &[Complex]) -> Vec<Complex> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum()).collect()
    }
}

/// Default basis labels for a given dimension.
pub fn default_labels(dim: usize) -> Vec<String> {
    match dim {
        2 => vec!["H".into(), "V".into()],
        4 => ["HH", "HV", "VH", "VV"].iter().map(|s| s.to_string()).collect(),
        _ => (0..dim).map(|i| i.to_string()).collect(),
    }
}

pub fn path_polarization_labels() -> Vec<String> {
    ["UH", "UV", "DH", "DV"].iter().map(|s| s.to_string()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex>,
    labels: Vec<String>,
}

impl StateVector {
    /// Builds a normalized state; the amplitudes are rescaled to unit norm.
    pub fn new(amplitudes: Vec<Complex>, labels: Vec<String>) -> Result<Self> {
        if amplitudes.is_empty() || amplitudes.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} amplitudes for {} labels",
                amplitudes.len(),
                labels.len()
            )));
        }
        let mut s = StateVector { amplitudes, labels };
        s.normalize()?;
        Ok(s)
    }

    pub fn with_default_labels(amplitudes: Vec<Complex>) -> Result<Self> {
        let labels = default_labels(amplitudes.len());
        Self::new(amplitudes, labels)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidInput("state vector has zero or non-finite norm".into()));
        }
        for a in &mut self.amplitudes {
            *a /= norm;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex] {
        &self.amplitudes
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn single(analyzer: Analyzer) -> StateVector {
        let amps = analyzer.ket();
        StateVector { amplitudes: amps.to_vec(), labels: default_labels(2) }
    }

    pub fn kron(&self, other: &StateVector) -> Result<StateVector> {
        let n = self.dim() * other.dim();
        if n > MAX_DIM {
            return Err(Error::Dimension(format!("tensor product dimension {n} exceeds {MAX_DIM}")));
        }
        let mut amplitudes = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for (a, la) in self.amplitudes.iter().zip(&self.labels) {
            for (b, lb) in other.amplitudes.iter().zip(&other.labels) {
                amplitudes.push(a * b);
                labels.push(format!("{la}{lb}"));
            }
        }
        Ok(StateVector { amplitudes, labels })
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> Complex {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn outer(&self) -> Matrix {
        let a = &self.amplitudes;
        Matrix::from_fn(a.len(), |i, j| a[i] * a[j].conj())
    }
}

/// Validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(Matrix);

impl DensityMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        let dev = m.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {:.12} != 1", tr.re)));
        }
        let min = eig_hermitian(&m)?.values.last().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::NotPhysical(min));
        }
        Ok(DensityMatrix(m))
    }

    /// Skips validation; for matrices that are physical by construction.
    pub(crate) fn new_unchecked(m: Matrix) -> Self {
        DensityMatrix(m)
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        DensityMatrix(psi.outer())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix(Matrix::identity(dim).scale(1.0 / dim as f64))
    }

    /// `p·ρ + (1−p)·I/d`
    pub fn werner_mix(&self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("mixing weight {p} outside [0,1]")));
        }
        let d = self.dim();
        Ok(DensityMatrix(self.0.scale(p).add(&Matrix::identity(d).scale((1.0 - p) / d as f64))))
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> Complex {
        self.0.get(i, j)
    }

    pub fn kron(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(DensityMatrix(self.0.kron(&other.0)?))
    }

    pub fn purity(&self) -> f64 {
        self.0.mul(&self.0).trace().re
    }

    /// Projects a Hermitian matrix onto the physical set: clip negative
    /// eigenvalues to zero and renormalize the trace.
    pub fn physicalize(m: &Matrix) -> Result<DensityMatrix> {
        let eig = eig_hermitian(&m.hermitian_part())?;
        let clipped: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Degenerate("no positive eigenvalues to renormalize".into()));
        }
        let scaled: Vec<f64> = clipped.iter().map(|l| l / total).collect();
        Ok(DensityMatrix(eig.reconstruct_with(&scaled).hermitian_part()))
    }
}

impl fmt::Display for DensityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.0.rows() {
            let cells: Vec<String> = row.iter().map(|z| format!("{:+.4}{:+.4}i", z.re, z.im)).collect();
            writeln!(f, "{}", cells.join("  "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Descending.
    pub values: Vec<f64>,
    pub vectors: Vec<StateVector>,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(&self.values)
    }

    /// `Σ f_k v_k v_k†` for replacement eigenvalues `f_k`.
    pub fn reconstruct_with(&self, values: &[f64]) -> Matrix {
        let n = self.values.len();
        let mut out = Matrix::zeros(n);
        for (v, &l) in self.vectors.iter().zip(values) {
            out = out.add(&v.outer().scale(l));
        }
        out
    }
}

/// Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.
pub fn eig_hermitian(m: &Matrix) -> Result<HermitianEigen> {
    let dev = m.hermitian_deviation();
    let scale = m.data.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if dev > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(dev));
    }
    let n = m.dim;
    let mut a = m.hermitian_part();
    let mut w = Matrix::identity(n);

    const MAX_SWEEPS: usize = 64;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).norm_sqr())
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                // Phase u makes the (p,q) entry real, then a real Jacobi rotation
                // annihilates it.
                let u = (apq / r).conj();
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                let mut rot = Matrix::identity(n);
                rot.set(p, p, c(cs, 0.0));
                rot.set(p, q, c(sn, 0.0));
                rot.set(q, p, u * (-sn));
                rot.set(q, q, u * cs);
                a = rot.adjoint().mul(&a).mul(&rot);
                w = w.mul(&rot);
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).re.partial_cmp(&a.get(i, i).re).unwrap_or(std::cmp::Ordering::Equal));
    let labels = default_labels(n);
    let values = order.iter().map(|&k| a.get(k, k).re).collect();
    let vectors = order
        .iter()
        .map(|&k| StateVector { amplitudes: (0..n).map(|i| w.get(i, k)).collect(), labels: labels.clone() })
        .collect();
    Ok(HermitianEigen { values, vectors })
}

/// Principal square root of a positive semidefinite matrix. Eigenvalues in
/// `[-CLIP_TOL, 0)` are clipped to zero.
pub fn matrix_sqrt(m: &Matrix) -> Result<Matrix> {
    let eig = eig_hermitian(m)?;
    let min = eig.values.last().copied().unwrap_or(0.0);
    if min < -CLIP_TOL {
        return Err(Error::NotPhysical(min));
    }
    let roots: Vec<f64> = denoised(&eig.values).iter().map(|l| l.sqrt()).collect();
    Ok(eig.reconstruct_with(&roots).hermitian_part())
}

/// Eigenvalues with negatives and round-off-level positives set to zero, so
/// that square roots do not amplify `1e-16` noise into `1e-8` errors.
pub fn denoised(values: &[f64]) -> Vec<f64> {
    let top = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 64.0 * f64::EPSILON * top;
    values.iter().map(|&l| if l <= floor { 0.0 } else { l }).collect()
}

/// Single-photon polarization analyzer labels used by tomography.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolLabel {
    H,
    V,
    /// (H+V)/√2
    D,
    /// (H−iV)/√2
    R,
}

impl PolLabel {
    pub const ALL: [PolLabel; 4] = [PolLabel::H, PolLabel::V, PolLabel::D, PolLabel::R];

    pub fn ket(self) -> [Complex; 2] {
        let s = FRAC_1_SQRT_2;
        match self {
            PolLabel::H => [c(1.0, 0.0), c(0.0, 0.0)],
            PolLabel::V => [c(0.0, 0.0), c(1.0, 0.0)],
            PolLabel::D => [c(s, 0.0), c(s, 0.0)],
            PolLabel::R => [c(s, 0.0), c(0.0, -s)],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PolLabel::H => "H",
            PolLabel::V => "V",
            PolLabel::D => "D",
            PolLabel::R => "R",
        }
    }
}

impl fmt::Display for PolLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H" => Ok(PolLabel::H),
            "V" => Ok(PolLabel::V),
            "D" => Ok(PolLabel::D),
            "R" => Ok(PolLabel::R),
            other => Err(Error::InvalidInput(format!("unknown polarization label `{other}`"))),
        }
    }
}

/// A single-arm analyzer: a basis label or a linear polarizer angle (radians).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Analyzer {
    Label(PolLabel),
    Linear(f64),
}

impl Analyzer {
    pub fn ket(self) -> [Complex; 2] {
        match self {
            Analyzer::Label(l) => l.ket(),
            Analyzer::Linear(theta) => [c(theta.cos(), 0.0), c(theta.sin(), 0.0)],
        }
    }

    pub fn projector(self) -> Matrix {
        let k = self.ket();
        Matrix::from_fn(2, |i, j| k[i] * k[j].conj())
    }
}

impl From<PolLabel> for Analyzer {
    fn from(l: PolLabel) -> Self {
        Analyzer::Label(l)
    }
}

/// Rank-1 projector for a single analyzer.
pub fn projector(a: Analyzer) -> DensityMatrix {
    DensityMatrix(a.projector())
}

/// Joint two-photon projector `Π_a ⊗ Π_b`.
pub fn joint_projector(a: Analyzer, b: Analyzer) -> DensityMatrix {
    DensityMatrix(a.projector().kron(&b.projector()).expect("2x2 ⊗ 2x2 fits"))
}

/// `Tr(ρ Π)`, clipped to `[0, 1]` when within 1e-9 of either end.
pub fn born_probability(state: &DensityMatrix, proj: &DensityMatrix) -> Result<f64> {
    if state.dim() != proj.dim() {
        return Err(Error::Dimension(format!("state dim {} vs projector dim {}", state.dim(), proj.dim())));
    }
    let p = state.matrix().mul(proj.matrix()).trace().re;
    if !(-1e-9..=1.0 + 1e-9).contains(&p) {
        return Err(Error::InvalidInput(format!("Born probability {p} outside [0,1]")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Pauli σy.
pub fn sigma_y() -> Matrix {
    Matrix::from_rows(&[vec![c(0.0, 0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), c(0.0, 0.0)]]).unwrap()
}

pub fn sigma_z() -> Matrix {
    Matrix::diag(&[1.0, -1.0])
}

/// The four Bell states in `[HH, HV, VH, VV]` ordering.
pub mod bell {
    use super::*;

    fn two(a: usize, b: usize, sign: f64) -> StateVector {
        let mut amps = vec![Complex::default(); 4];
        amps[a] = c(FRAC_1_SQRT_2, 0.0);
        amps[b] = c(sign * FRAC_1_SQRT_2, 0.0);
        StateVector::with_default_labels(amps).unwrap()
    }

    /// (|HV⟩ + |VH⟩)/√2
    pub fn psi_plus() -> StateVector {
        two(1, 2, 1.0)
    }

    /// (|HV⟩ − |VH⟩)/√2
    pub fn singlet() -> StateVector {
        two(1, 2, -1.0)
    }

    pub fn phi_plus() -> StateVector {
        two(0, 3, 1.0)
    }

    pub fn phi_minus() -> StateVector {
        two(0, 3, -1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_8;

    fn random_hermitian(rng: &mut impl Rng, n: usize) -> Matrix {
        let m = Matrix::from_fn(n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        m.hermitian_part()
    }

    fn random_psd(rng: &mut impl Rng, n: usize) -> Matrix {
        let g = Matrix::from_fn(n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        g.mul(&g.adjoint())
    }

    #[test]
    fn kron_basis_products() {
        let h = StateVector::single(PolLabel::H.into());
        let v = StateVector::single(PolLabel::V.into());
        let hv = h.kron(&v).unwrap();
        assert_eq!(hv.labels(), &["HH", "HV", "VH", "VV"]);
        let expect = [0.0, 1.0, 0.0, 0.0];
        for (a, e) in hv.amplitudes().iter().zip(expect) {
            assert_abs_diff_eq!(a.re, e);
            assert_abs_diff_eq!(a.im, 0.0);
        }

        let plus = StateVector::single(PolLabel::D.into());
        for a in plus.kron(&plus).unwrap().amplitudes() {
            assert_abs_diff_eq!(a.re, 0.5, epsilon = 1e-15);
        }

        let half = DensityMatrix::maximally_mixed(2);
        let quarter = half.kron(&half).unwrap();
        assert!(quarter.matrix().max_abs_diff(&Matrix::identity(4).scale(0.25)) < 1e-15);
    }

    #[test]
    fn kron_dimension_overflow() {
        let m = Matrix::identity(4);
        let m16 = m.kron(&m).unwrap();
        assert!(matches!(m16.kron(&Matrix::identity(2)), Err(Error::Dimension(_))));
    }

    #[test]
    fn eig_identity_and_pure() {
        let e = eig_hermitian(DensityMatrix::maximally_mixed(4).matrix()).unwrap();
        for l in e.values {
            assert_abs_diff_eq!(l, 0.25, epsilon = 1e-14);
        }
        let e = eig_hermitian(&bell::psi_plus().outer()).unwrap();
        let expect = [1.0, 0.0, 0.0, 0.0];
        for (l, x) in e.values.iter().zip(expect) {
            assert_abs_diff_eq!(*l, x, epsilon = 1e-12);
        }
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 0..200 {
            let n = if k % 2 == 0 { 4 } else { 2 };
            let h = random_hermitian(&mut rng, n);
            let e = eig_hermitian(&h).unwrap();
            assert!(e.reconstruct().max_abs_diff(&h) <= 1e-9);
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
            // eigenvectors are orthonormal
            for i in 0..n {
                for j in 0..n {
                    let ip = e.vectors[i].inner(&e.vectors[j]);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - c(want, 0.0)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let mut m = Matrix::identity(2);
        m.set(0, 1, c(0.5, 0.0));
        assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn sqrt_examples() {
        let i4 = Matrix::identity(4);
        assert!(matrix_sqrt(&i4).unwrap().max_abs_diff(&i4) < 1e-14);
        let q = Matrix::diag(&[0.25; 4]);
        assert!(matrix_sqrt(&q).unwrap().max_abs_diff(&Matrix::diag(&[0.5; 4])) < 1e-14);
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = random_psd(&mut rng, 4);
            let r = matrix_sqrt(&m).unwrap();
            assert!(r.mul(&r).max_abs_diff(&m) <= 1e-8);
        }
    }

    #[test]
    fn sqrt_rejects_negative() {
        let m = Matrix::diag(&[1.0, -1e-3]);
        assert!(matches!(matrix_sqrt(&m), Err(Error::NotPhysical(_))));
        // tiny negatives are clipped
        let m = Matrix::diag(&[1.0, -1e-8]);
        let r = matrix_sqrt(&m).unwrap();
        assert_abs_diff_eq!(r.get(1, 1).re, 0.0);
    }

    #[test]
    fn projector_examples() {
        let d = projector(PolLabel::D.into());
        for i in 0..2 {
            for j in 0..2 {
                assert!((d.get(i, j) - c(0.5, 0.0)).norm() < 1e-15);
            }
        }
        let r = projector(PolLabel::R.into());
        let want = Matrix::from_rows(&[vec![c(0.5, 0.0), c(0.0, 0.5)], vec![c(0.0, -0.5), c(0.5, 0.0)]]).unwrap();
        assert!(r.matrix().max_abs_diff(&want) < 1e-15);
        let t = projector(Analyzer::Linear(FRAC_PI_8));
        let (cs, sn) = (FRAC_PI_8.cos(), FRAC_PI_8.sin());
        assert_abs_diff_eq!(t.get(0, 0).re, cs * cs, epsilon = 1e-15);
        assert_abs_diff_eq!(t.get(0, 1).re, cs * sn, epsilon = 1e-15);
        assert_abs_diff_eq!(t.get(1, 1).re, sn * sn, epsilon = 1e-15);
    }

    #[test]
    fn born_examples() {
        let psi = DensityMatrix::from_pure(&bell::psi_plus());
        let hh = joint_projector(PolLabel::H.into(), PolLabel::H.into());
        let hv = joint_projector(PolLabel::H.into(), PolLabel::V.into());
        assert_abs_diff_eq!(born_probability(&psi, &hh).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(born_probability(&psi, &hv).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn born_linear_analyzers_match_amplitude_expansion() {
        // ⟨a b|ψ+⟩ = (cos a sin b + sin a cos b)/√2 = sin(a+b)/√2
        let psi = DensityMatrix::from_pure(&bell::psi_plus());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a: f64 = rng.random_range(-3.2..3.2);
            let b: f64 = rng.random_range(-3.2..3.2);
            let amp = a.cos() * b.sin() + a.sin() * b.cos();
            let brute = amp * amp / 2.0;
            let p = born_probability(&psi, &joint_projector(Analyzer::Linear(a), Analyzer::Linear(b))).unwrap();
            assert_abs_diff_eq!(p, brute, epsilon = 1e-12);
            assert_abs_diff_eq!(p, (a + b).sin().powi(2) / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn born_dimension_mismatch() {
        let psi = DensityMatrix::maximally_mixed(4);
        assert!(born_probability(&psi, &projector(PolLabel::H.into())).is_err());
    }

    #[test]
    fn complete_projector_sets_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let amps: Vec<Complex> = (0..4).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let rho = DensityMatrix::from_pure(&StateVector::with_default_labels(amps).unwrap());
            let a: f64 = rng.random_range(0.0..3.14);
            let b: f64 = rng.random_range(0.0..3.14);
            let total: f64 = [(a, b), (a + FRAC_PI_8 * 4.0, b), (a, b + FRAC_PI_8 * 4.0), (a + FRAC_PI_8 * 4.0, b + FRAC_PI_8 * 4.0)]
                .iter()
                .map(|&(x, y)| born_probability(&rho, &joint_projector(Analyzer::Linear(x), Analyzer::Linear(y))).unwrap())
                .sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(Matrix::identity(2)).is_err());
        assert!(matches!(DensityMatrix::new(Matrix::diag(&[1.5, -0.5])), Err(Error::NotPhysical(_))));
        let mut m = Matrix::diag(&[0.5, 0.5]);
        m.set(0, 1, c(0.1, 0.0));
        assert!(matches!(DensityMatrix::new(m), Err(Error::NotHermitian(_))));
        assert!(DensityMatrix::new(Matrix::diag(&[0.3, 0.7])).is_ok());
    }

    #[test]
    fn physicalize_clips_and_is_idempotent() {
        let m = Matrix::diag(&[0.7, 0.4, -0.1]);
        let p = DensityMatrix::physicalize(&m).unwrap();
        assert_abs_diff_eq!(p.matrix().trace().re, 1.0, epsilon = 1e-12);
        let again = DensityMatrix::physicalize(p.matrix()).unwrap();
        assert!(again.matrix().max_abs_diff(p.matrix()) < 1e-12);
        assert!(DensityMatrix::new(p.into_matrix()).is_ok());
    }

    #[test]
    fn complex_field_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let mut z = || c(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
            let (a, b, d) = (z(), z(), z());
            assert!(((a + b) * d - (a * d + b * d)).norm() < 1e-10);
            assert!((a * b - b * a).norm() < 1e-12);
            if a.norm() > 1e-3 {
                assert!((a * (c(1.0, 0.0) / a) - c(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }
}
