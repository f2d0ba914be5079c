//! Independent oracles and random-state generators shared by the acceptance
//! suite.

use nalgebra::Vector3;
use num_complex::Complex64;
use qme_core::{CMatrix, DensityMatrix, SpectralDecomposition};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(x) and P_n'(x) by the three-term recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// `∫₀¹ ρ^λ A ρ^{1−λ} dλ` by Gauss-Legendre quadrature.
pub fn conditional_by_quadrature(
    a: &CMatrix,
    sd: &SpectralDecomposition,
    points: usize,
) -> CMatrix {
    let (nodes, weights) = gauss_legendre(points);
    let n = a.nrows();
    let mut acc = CMatrix::zeros(n, n);
    for (x, w) in nodes.iter().zip(&weights) {
        let left = sd.map_eigenvalues(|p| p.max(0.0).powf(*x));
        let right = sd.map_eigenvalues(|p| p.max(0.0).powf(1.0 - *x));
        acc += (left * a * right) * Complex64::new(*w, 0.0);
    }
    acc
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    })
}

/// Hermitian matrix from the Gaussian unitary ensemble.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let g = gaussian_matrix(rng, dim);
    (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Full-rank density matrix `G G† / tr(G G†)` mixed with a little of `I/d`
/// so that no eigenvalue falls below `floor`.
pub fn random_density_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    floor: f64,
) -> DensityMatrix {
    let g = gaussian_matrix(rng, dim);
    let w = &g * g.adjoint();
    let tr = w.trace().re;
    let mixed = w / Complex64::new(tr, 0.0) * Complex64::new(1.0 - dim as f64 * floor, 0.0)
        + CMatrix::identity(dim, dim) * Complex64::new(floor, 0.0);
    DensityMatrix::from_matrix(mixed).expect("valid by construction")
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n: f64 = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}
