//! Dense complex operator algebra on a finite-dimensional Hilbert space.
//!
//! Besides commutators and spectral decompositions this module provides the
//! conditional operator `A_ρ = ∫₀¹ ρ^λ A ρ^{1-λ} dλ`. In the eigenbasis of
//! `ρ = Σ p_n |π_n⟩⟨π_n|` the λ-integral is elementary and
//!
//! ```text
//! ⟨π_m|A_ρ|π_n⟩ = L(p_m, p_n) ⟨π_m|A|π_n⟩,   L(x, y) = (x - y) / (ln x - ln y)
//! ```
//!
//! where `L` is the logarithmic mean, see [`log_weight_factor`].

use std::cmp::Ordering;
use std::ops::Deref;

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Eigenvalues at or below this value are treated as exact zeros.
pub const EIGENVALUE_FLOOR: f64 = 1e-30;

/// Below this log-ratio the logarithmic mean switches to its series form.
pub const NEAR_DEGENERATE_LOG_GAP: f64 = 1e-8;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-10;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn ensure_same_dim(a: &CMatrix, b: &CMatrix) -> Result<()> {
    ensure_square(a)?;
    ensure_square(b)?;
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(())
}

fn ensure_square(a: &CMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

/// Largest absolute deviation of `a` from Hermiticity.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(A + A†)/2`.
pub fn hermitize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

/// `tr(AB)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    ensure_same_dim(a, b)?;
    Ok(a * b - b * a)
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    ensure_same_dim(a, b)?;
    Ok(a * b + b * a)
}

// Unchecked variants for hot loops where dimensions are already validated.
pub(crate) fn comm(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub(crate) fn anticomm(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub(crate) fn scale(a: &CMatrix, s: f64) -> CMatrix {
    a * Complex64::new(s, 0.0)
}

pub(crate) fn times_i(a: &CMatrix) -> CMatrix {
    a * I
}

/// A self-adjoint `d×d` complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(CMatrix);

impl HermitianOperator {
    /// Validates Hermiticity to [`HERMITIAN_TOL`] (relative to the largest
    /// entry once it exceeds one) and stores the exactly Hermitian part.
    pub fn new(m: CMatrix) -> Result<Self> {
        ensure_square(&m)?;
        let scale = m.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
        let deviation = hermiticity_defect(&m);
        if deviation > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self(hermitize(&m)))
    }

    /// Hermitian part of an arbitrary square matrix.
    pub fn hermitian_part(m: &CMatrix) -> Self {
        Self(hermitize(m))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// `tr(A ρ)` for a density matrix.
    pub fn expectation(&self, rho: &CMatrix) -> f64 {
        trace_product(&self.0, rho).re
    }
}

impl Deref for HermitianOperator {
    type Target = CMatrix;

    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

impl AsRef<CMatrix> for HermitianOperator {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}

/// Hermitian, unit-trace, positive-semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(HermitianOperator);

impl DensityMatrix {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = trace(&op).re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace {tr} differs from 1"
            )));
        }
        let sd = SpectralDecomposition::of_hermitian(&op)?;
        let min = sd.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(Self(op))
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        Self::new(HermitianOperator::new(m)?)
    }

    /// Builds a density matrix from a decomposition without validation.
    pub fn from_spectral(sd: &SpectralDecomposition) -> Self {
        Self(HermitianOperator::hermitian_part(&sd.reconstruct()))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(HermitianOperator(
            CMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0),
        ))
    }

    /// Canonical state `exp(-H/kT) / Z`.
    pub fn canonical(h: &HermitianOperator, kt: f64) -> Result<Self> {
        if !(kt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "temperature must be positive, got {kt}"
            )));
        }
        let sd = SpectralDecomposition::of_hermitian(h)?;
        // descending energies; shift by the ground-state energy against overflow
        let e_min = sd.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = sd
            .eigenvalues
            .iter()
            .map(|e| (-(e - e_min) / kt).exp())
            .collect();
        let z: f64 = weights.iter().sum();
        let probs = DVector::from_iterator(weights.len(), weights.iter().map(|w| w / z));
        let state = SpectralDecomposition::from_parts(probs, sd.eigenvectors);
        Ok(Self::from_spectral(&state))
    }

    /// Wraps a matrix without checking trace or positivity; the matrix is
    /// Hermitized.
    pub fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self(HermitianOperator::hermitian_part(&m))
    }

    /// Pure state `|ψ⟩⟨ψ|` (ψ normalized internally).
    pub fn pure(psi: &DVector<Complex64>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        let v = psi / Complex64::new(norm, 0.0);
        Ok(Self(HermitianOperator::hermitian_part(&(&v * v.adjoint()))))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.0
    }

    pub fn matrix(&self) -> &CMatrix {
        self.0.matrix()
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0.into_matrix()
    }
}

impl Deref for DensityMatrix {
    type Target = CMatrix;

    fn deref(&self) -> &CMatrix {
        self.0.matrix()
    }
}

/// Eigenvalues (descending) and orthonormal eigenvectors (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    /// Decomposes a Hermitian matrix. Each eigenvector is rotated so that its
    /// largest-magnitude component is real and positive; eigenvalues are
    /// sorted descending, exact ties ordered lexicographically by eigenvector.
    pub fn of_hermitian(a: &CMatrix) -> Result<Self> {
        ensure_square(a)?;
        let dim = a.nrows();
        let eig = SymmetricEigen::try_new(hermitize(a), EIGEN_EPS, EIGEN_MAX_ITER)
            .ok_or(Error::EigenSolverFailure { dim })?;
        if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::EigenSolverFailure { dim });
        }

        let mut pairs: Vec<(f64, DVector<Complex64>)> = (0..dim)
            .map(|k| {
                let mut col: DVector<Complex64> = eig.eigenvectors.column(k).into_owned();
                fix_phase(&mut col);
                (eig.eigenvalues[k], col)
            })
            .collect();
        pairs.sort_by(|(va, ca), (vb, cb)| vb.total_cmp(va).then_with(|| lexicographic(ca, cb)));

        let eigenvalues = DVector::from_iterator(dim, pairs.iter().map(|(v, _)| *v));
        let mut eigenvectors = CMatrix::zeros(dim, dim);
        for (k, (_, col)) in pairs.iter().enumerate() {
            eigenvectors.set_column(k, col);
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn from_parts(eigenvalues: DVector<f64>, eigenvectors: CMatrix) -> Self {
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ p_n |π_n⟩⟨π_n|`.
    pub fn reconstruct(&self) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= Complex64::new(self.eigenvalues[k], 0.0);
        }
        scaled * v.adjoint()
    }

    /// Matrix elements `⟨π_m|A|π_n⟩`.
    pub fn to_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        self.eigenvectors.adjoint() * a * &self.eigenvectors
    }

    /// Inverse of [`Self::to_eigenbasis`].
    pub fn from_eigenbasis(&self, b: &CMatrix) -> CMatrix {
        &self.eigenvectors * b * self.eigenvectors.adjoint()
    }

    /// `Σ f(p_n) |π_n⟩⟨π_n|`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let mapped =
            SpectralDecomposition::from_parts(self.eigenvalues.map(f), self.eigenvectors.clone());
        mapped.reconstruct()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest gap between any two eigenvalues.
    pub fn min_gap(&self) -> f64 {
        let mut sorted: Vec<f64> = self.eigenvalues.iter().cloned().collect();
        sorted.sort_by(f64::total_cmp);
        sorted
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest deviation of `V†V` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.eigenvectors.adjoint() * &self.eigenvectors;
        let n = g.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

fn fix_phase(col: &mut DVector<Complex64>) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in col.iter().enumerate() {
        let mag = z.norm();
        if mag > best_mag {
            best_mag = mag;
            best = i;
        }
    }
    if best_mag <= 0.0 {
        return;
    }
    let phase = col[best].conj() / best_mag;
    *col *= phase;
    col[best] = Complex64::new(col[best].re, 0.0);
}

fn lexicographic(a: &DVector<Complex64>, b: &DVector<Complex64>) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let ord = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

pub fn spectral_decompose(rho: &DensityMatrix) -> Result<SpectralDecomposition> {
    SpectralDecomposition::of_hermitian(rho.matrix())
}

/// Logarithmic mean `(p_m - p_n) / (ln p_m - ln p_n)`.
///
/// Limits: equal arguments give `p_m`; an argument at or below
/// [`EIGENVALUE_FLOOR`] gives 0.
pub fn log_weight_factor(p_m: f64, p_n: f64) -> f64 {
    if !(p_m > EIGENVALUE_FLOOR && p_n > EIGENVALUE_FLOOR) {
        return 0.0;
    }
    if p_m == p_n {
        return p_m;
    }
    let (hi, lo) = if p_m > p_n { (p_m, p_n) } else { (p_n, p_m) };
    if hi <= 2.0 * lo {
        // hi - lo is exact here, and ln_1p keeps the log ratio accurate
        let diff = hi - lo;
        let log_ratio = (diff / lo).ln_1p();
        if log_ratio < NEAR_DEGENERATE_LOG_GAP {
            0.5 * (hi + lo) * (1.0 - log_ratio * log_ratio / 12.0)
        } else {
            diff / log_ratio
        }
    } else {
        (hi - lo) / (hi.ln() - lo.ln())
    }
}

/// `A_ρ` evaluated in the eigenbasis of ρ.
pub fn conditional_operator(a: &CMatrix, sd: &SpectralDecomposition) -> Result<CMatrix> {
    ensure_square(a)?;
    if a.nrows() != sd.dim() {
        return Err(Error::DimensionMismatch {
            expected: sd.dim(),
            found: a.nrows(),
        });
    }
    Ok(conditional(a, sd))
}

pub(crate) fn conditional(a: &CMatrix, sd: &SpectralDecomposition) -> CMatrix {
    let mut b = sd.to_eigenbasis(a);
    let p = &sd.eigenvalues;
    for m in 0..b.nrows() {
        for n in 0..b.ncols() {
            b[(m, n)] *= log_weight_factor(p[m], p[n]);
        }
    }
    sd.from_eigenbasis(&b)
}

/// Nonlinear remainder `A'_ρ = 2A_ρ - (Aρ + ρA)`.
pub fn nonlinear_part(a: &CMatrix, sd: &SpectralDecomposition) -> Result<CMatrix> {
    let a_rho = conditional_operator(a, sd)?;
    let rho = sd.reconstruct();
    Ok(scale(&a_rho, 2.0) - anticomm(a, &rho))
}

/// `ln ρ` with eigenvalues clamped to `floor` before the logarithm.
pub fn operator_log(sd: &SpectralDecomposition, floor: f64) -> CMatrix {
    let floor = floor.max(f64::MIN_POSITIVE);
    hermitize(&sd.map_eigenvalues(|p| p.max(floor).ln()))
}

/// Canonical correlation `⟨⟨A;B⟩⟩ = tr(A_ρ B)` (real part).
pub fn canonical_correlation(a: &CMatrix, b: &CMatrix, sd: &SpectralDecomposition) -> Result<f64> {
    ensure_same_dim(a, b)?;
    let a_rho = conditional_operator(a, sd)?;
    Ok(trace_product(&a_rho, b).re)
}
