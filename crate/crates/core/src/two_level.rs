//! Two-level system in the Bloch-vector representation.
//!
//! Every Hermitian 2×2 matrix is written `A = O(α, a) = ½(α I + a·σ)`, so a
//! density matrix is `ρ = O(1, m)` with `|m| ≤ 1`. The Hamiltonian is
//! `O(0, ħω q₃)` and the bath couples through `Q_j = O(0, q_j)` for
//! `j = 1, 2`, optionally with a weighted `Q_3`.

use std::sync::OnceLock;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::master::{BathState, Coupling, CouplingLaw, SystemSpec};
use crate::operator::{
    hermiticity_defect, CMatrix, DensityMatrix, HermitianOperator, HERMITIAN_TOL,
};

/// Below this norm `μ` and `dμ/dm` are summed from their power series.
pub const MU_SERIES_THRESHOLD: f64 = 0.3;

const MU_SERIES_TERMS: usize = 40;

/// Slack allowed on `|m| ≤ 1` when validating.
const SPHERE_TOL: f64 = 1e-12;

/// Bloch vector `m` of a two-level density matrix `ρ = ½(I + m·σ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector(Vector3<f64>);

impl BlochVector {
    pub fn new(m: Vector3<f64>) -> Result<Self> {
        let n = m.norm();
        if !n.is_finite() || n > 1.0 + SPHERE_TOL {
            return Err(Error::InvalidParameter(format!(
                "Bloch vector outside the sphere, |m| = {n}"
            )));
        }
        Ok(BlochVector(m))
    }

    pub fn from_density_matrix(rho: &DensityMatrix) -> Result<Self> {
        let (_, m) = pauli_decompose(rho.matrix())?;
        BlochVector::new(m)
    }

    pub fn to_density_matrix(&self) -> DensityMatrix {
        DensityMatrix::from_matrix_unchecked(pauli_compose(1.0, &self.0).into_matrix())
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }
}

impl std::ops::Deref for BlochVector {
    type Target = Vector3<f64>;

    fn deref(&self) -> &Vector3<f64> {
        &self.0
    }
}

/// Parameters of the damped two-level system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelParams {
    /// Level splitting as an angular frequency.
    pub omega: f64,
    /// Spontaneous emission rate.
    pub gamma0: f64,
    /// Bath temperature in energy units.
    pub kt: f64,
    pub hbar: f64,
    /// Weight of the optional `Q_3` coupling; 0 gives the anisotropic
    /// `R = ½(1 + q₃q₃)`, 1 the isotropic `R = 1`.
    pub q3_weight: f64,
}

impl TwoLevelParams {
    pub fn new(omega: f64, gamma0: f64, kt: f64) -> Result<Self> {
        let p = TwoLevelParams {
            omega,
            gamma0,
            kt,
            hbar: 1.0,
            q3_weight: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with `ħω/2kT` set to `x`.
    pub fn at_inverse_temperature(omega: f64, gamma0: f64, x: f64) -> Result<Self> {
        if !(x > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ħω/2kT must be positive, got {x}"
            )));
        }
        TwoLevelParams::new(omega, gamma0, omega / (2.0 * x))
    }

    pub fn isotropic(self) -> Self {
        TwoLevelParams {
            q3_weight: 1.0,
            ..self
        }
    }

    pub fn with_q3_weight(self, q3_weight: f64) -> Result<Self> {
        let p = TwoLevelParams { q3_weight, ..self };
        p.validate()?;
        Ok(p)
    }

    pub fn with_hbar(self, hbar: f64) -> Result<Self> {
        let p = TwoLevelParams { hbar, ..self };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} = {v}")));
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return bad("omega", self.omega);
        }
        if !(self.gamma0 >= 0.0 && self.gamma0.is_finite()) {
            return bad("gamma0", self.gamma0);
        }
        if !(self.kt > 0.0 && self.kt.is_finite()) {
            return bad("kT", self.kt);
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return bad("hbar", self.hbar);
        }
        if !(self.q3_weight >= 0.0 && self.q3_weight.is_finite()) {
            return bad("q3_weight", self.q3_weight);
        }
        Ok(())
    }

    /// `ħω/2kT`.
    pub fn half_beta_energy(&self) -> f64 {
        self.hbar * self.omega / (2.0 * self.kt)
    }

    /// Relaxation matrix `R = diag((1+w₃)/2, (1+w₃)/2, 1)`.
    pub fn r_matrix(&self) -> Matrix3<f64> {
        let t = 0.5 * (1.0 + self.q3_weight);
        Matrix3::from_diagonal(&Vector3::new(t, t, 1.0))
    }

    /// Master-equation form: `H = O(0, ħω q₃)`, `Q_1`, `Q_2` and, for a
    /// positive weight, `Q_3`.
    pub fn system_spec(&self) -> Result<SystemSpec> {
        self.validate()?;
        let h = pauli_compose(0.0, &Vector3::new(0.0, 0.0, self.hbar * self.omega));
        let mut couplings = vec![
            Coupling {
                op: pauli_compose(0.0, &Vector3::x()),
                weight: 1.0,
            },
            Coupling {
                op: pauli_compose(0.0, &Vector3::y()),
                weight: 1.0,
            },
        ];
        if self.q3_weight > 0.0 {
            couplings.push(Coupling {
                op: pauli_compose(0.0, &Vector3::z()),
                weight: self.q3_weight,
            });
        }
        SystemSpec::with_weights(h, couplings, self.hbar)
    }

    /// Heat bath with `M = γ0 kT/(ħω)`.
    pub fn bath(&self) -> Result<BathState> {
        BathState::heat_bath(
            CouplingLaw::EmissionRate {
                gamma0: self.gamma0,
                hbar_omega: self.hbar * self.omega,
            },
            self.kt,
        )
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `σ1, σ2, σ3`.
pub fn pauli_matrices() -> [CMatrix; 3] {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        CMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        CMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    ]
}

/// `O(α, a) = ½(α I + a·σ)`.
pub fn pauli_compose(alpha: f64, a: &Vector3<f64>) -> HermitianOperator {
    let m = CMatrix::from_row_slice(
        2,
        2,
        &[
            c(0.5 * (alpha + a.z), 0.0),
            c(0.5 * a.x, -0.5 * a.y),
            c(0.5 * a.x, 0.5 * a.y),
            c(0.5 * (alpha - a.z), 0.0),
        ],
    );
    HermitianOperator::hermitian_part(&m)
}

/// Inverse of [`pauli_compose`]: `α = tr A`, `a_j = tr(σ_j A)`.
pub fn pauli_decompose(a: &CMatrix) -> Result<(f64, Vector3<f64>)> {
    if a.nrows() != 2 || a.ncols() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: a.nrows().max(a.ncols()),
        });
    }
    let deviation = hermiticity_defect(a);
    if deviation > HERMITIAN_TOL * a.norm().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    let alpha = (a[(0, 0)] + a[(1, 1)]).re;
    let v = Vector3::new(
        (a[(0, 1)] + a[(1, 0)]).re,
        (a[(1, 0)] - a[(0, 1)]).im,
        (a[(0, 0)] - a[(1, 1)]).re,
    );
    Ok((alpha, v))
}

/// `f(A)` for `A = O(α, a)`, returned as `(α', a')`.
pub fn pauli_function(f: impl Fn(f64) -> f64, alpha: f64, a: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let n = a.norm();
    if n == 0.0 {
        return (2.0 * f(0.5 * alpha), Vector3::zeros());
    }
    let fp = f(0.5 * (alpha + n));
    let fm = f(0.5 * (alpha - n));
    (fp + fm, a * ((fp - fm) / n))
}

/// Coefficients `a_k` with `μ(m) = Σ a_k m^{2k}`, from the reciprocal of
/// `artanh(m)/m = Σ m^{2k}/(2k+1)`.
fn mu_series() -> &'static [f64; MU_SERIES_TERMS] {
    static COEFFS: OnceLock<[f64; MU_SERIES_TERMS]> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let s: Vec<f64> = (0..=MU_SERIES_TERMS)
            .map(|k| 1.0 / (2 * k + 1) as f64)
            .collect();
        let mut t = vec![0.0; MU_SERIES_TERMS + 1];
        t[0] = 1.0;
        for k in 1..=MU_SERIES_TERMS {
            t[k] = -(1..=k).map(|j| s[j] * t[k - j]).sum::<f64>();
        }
        let mut a = [0.0; MU_SERIES_TERMS];
        for k in 0..MU_SERIES_TERMS {
            a[k] = -t[k + 1];
        }
        a
    })
}

fn check_mu_domain(m: f64) -> Result<()> {
    if !(0.0..1.0).contains(&m) {
        return Err(Error::InvalidParameter(format!(
            "μ(m) needs 0 ≤ m < 1, got {m}"
        )));
    }
    Ok(())
}

/// `μ(m) = 1/m² − 1/(m artanh m)` on `[0, 1)`.
pub fn mu(m: f64) -> Result<f64> {
    check_mu_domain(m)?;
    Ok(mu_inner(m))
}

fn mu_inner(m: f64) -> f64 {
    if m < MU_SERIES_THRESHOLD {
        let x = m * m;
        mu_series().iter().rev().fold(0.0, |acc, &a| acc * x + a)
    } else {
        1.0 / (m * m) - 1.0 / (m * m.atanh())
    }
}

/// `dμ/dm = −2/m³ + (artanh m + m/(1−m²))/(m artanh m)²` on `[0, 1)`.
pub fn mu_derivative(m: f64) -> Result<f64> {
    check_mu_domain(m)?;
    Ok(mu_derivative_inner(m))
}

fn mu_derivative_inner(m: f64) -> f64 {
    if m < MU_SERIES_THRESHOLD {
        let x = m * m;
        let coeffs = mu_series();
        let mut acc = 0.0;
        for k in (1..MU_SERIES_TERMS).rev() {
            acc = acc * x + 2.0 * k as f64 * coeffs[k];
        }
        acc * m
    } else {
        let at = m.atanh();
        let d = m * at;
        -2.0 / (m * m * m) + (at + m / (1.0 - m * m)) / (d * d)
    }
}

/// `μ` continued to the sphere's boundary and beyond by its limit 1, so that
/// integrators can evaluate stage points that overshoot slightly.
fn mu_extended(m: f64) -> f64 {
    if m >= 1.0 {
        1.0
    } else {
        mu_inner(m)
    }
}

/// `(m, μ(m))` on `points` equally spaced norms from 0 to `m_max`.
pub fn mu_table(points: usize, m_max: f64) -> Result<Vec<(f64, f64)>> {
    if points < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least two points, got {points}"
        )));
    }
    check_mu_domain(m_max)?;
    (0..points)
        .map(|k| {
            let m = m_max * k as f64 / (points - 1) as f64;
            Ok((m, mu(m)?))
        })
        .collect()
}

/// Closed form of the nonlinear part of `A_ρ` for `ρ = O(1, m)`,
/// `A = O(α, a)`: `−μ(|m|) O(0, [m²1 − mm]·a)`, returned as its vector.
pub fn nonlinear_part_closed_form(m: &Vector3<f64>, a: &Vector3<f64>) -> Result<Vector3<f64>> {
    let n = m.norm();
    let mu = mu(n)?;
    Ok(-(a * (n * n) - m * m.dot(a)) * mu)
}

fn linear_relaxation(m: &Vector3<f64>, p: &TwoLevelParams, factor: f64) -> Vector3<f64> {
    let q3 = Vector3::z();
    p.omega * q3.cross(m) - (p.r_matrix() * m) * (p.gamma0 * factor) - q3 * p.gamma0
}

/// Nonlinear Bloch equation
/// `dm/dt = ω q₃×m − γ0(2kT/ħω) R·m − γ0 q₃ + γ0 (μ/2)(m²1 + mm)·q₃`.
pub fn bloch_rhs(m: &Vector3<f64>, p: &TwoLevelParams) -> Vector3<f64> {
    let q3 = Vector3::z();
    let n2 = m.norm_squared();
    let mu = mu_extended(n2.sqrt());
    let nonlinear = (q3 * n2 + m * m.z) * (0.5 * p.gamma0 * mu);
    linear_relaxation(m, p, 1.0 / p.half_beta_energy()) + nonlinear
}

/// The linear Bloch equation obtained for `μ = 0`; its fixed point
/// `−q₃ ħω/2kT` leaves the sphere when `ħω > 2kT`.
pub fn bloch_rhs_linear(m: &Vector3<f64>, p: &TwoLevelParams) -> Vector3<f64> {
    linear_relaxation(m, p, 1.0 / p.half_beta_energy())
}

/// Linear Bloch equation with `ħω/2kT → tanh(ħω/2kT)` (the Lindblad form).
pub fn bloch_rhs_lindblad(m: &Vector3<f64>, p: &TwoLevelParams) -> Vector3<f64> {
    linear_relaxation(m, p, 1.0 / p.half_beta_energy().tanh())
}

/// `m_eq = −q₃ tanh(ħω/2kT)`.
pub fn bloch_equilibrium(p: &TwoLevelParams) -> BlochVector {
    BlochVector(Vector3::new(0.0, 0.0, -p.half_beta_energy().tanh()))
}

/// Jacobian of [`bloch_rhs`] at the equilibrium.
pub fn bloch_linearized_matrix(p: &TwoLevelParams) -> Matrix3<f64> {
    let t = p.half_beta_energy().tanh();
    let precession = Matrix3::new(0.0, -p.omega, 0.0, p.omega, 0.0, 0.0, 0.0, 0.0, 0.0);
    let q3q3 = Matrix3::from_diagonal(&Vector3::new(0.0, 0.0, 1.0));
    let mu = mu_extended(t);
    let dmu = if t < 1.0 {
        mu_derivative_inner(t)
    } else {
        f64::INFINITY
    };
    precession
        - p.r_matrix() * (p.gamma0 / p.half_beta_energy())
        - (Matrix3::identity() + q3q3 * 3.0) * (0.5 * p.gamma0 * t * mu)
        - q3q3 * (p.gamma0 * t * t * dmu)
}

/// Which Bloch equation to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlochEquation {
    Thermodynamic,
    Linear,
    Lindblad,
}

impl BlochEquation {
    pub fn rhs(&self, m: &Vector3<f64>, p: &TwoLevelParams) -> Vector3<f64> {
        match self {
            BlochEquation::Thermodynamic => bloch_rhs(m, p),
            BlochEquation::Linear => bloch_rhs_linear(m, p),
            BlochEquation::Lindblad => bloch_rhs_lindblad(m, p),
        }
    }
}

/// Bloch-vector trajectory from [`integrate_bloch`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlochTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector3<f64>>,
    /// Largest `|m|` over every step, recorded or not.
    pub max_norm: f64,
}

/// Spectral-radius bound of the Jacobian at `m`, used to keep RK4 stable
/// where the nonlinear term stiffens near the sphere's surface.
fn stiffness(m: &Vector3<f64>, p: &TwoLevelParams, equation: BlochEquation) -> f64 {
    let r_max = (0.5 * (1.0 + p.q3_weight)).max(1.0);
    let x = match equation {
        BlochEquation::Lindblad => p.half_beta_energy().tanh(),
        _ => p.half_beta_energy(),
    };
    let mut rate = r_max / x;
    if equation == BlochEquation::Thermodynamic {
        let n = m.norm().min(1.0 - 1e-12);
        rate += 2.0 + n * n * mu_derivative_inner(n);
    }
    p.omega + p.gamma0 * rate
}

/// Classical RK4 integration of a Bloch equation with step `dt`, shortened
/// where the local stiffness demands it. Records every `record_stride`
/// steps plus the final state.
pub fn integrate_bloch(
    m0: &Vector3<f64>,
    p: &TwoLevelParams,
    equation: BlochEquation,
    dt: f64,
    t_end: f64,
    record_stride: usize,
) -> Result<BlochTrajectory> {
    p.validate()?;
    if !(dt > 0.0) || !(t_end >= 0.0) || record_stride == 0 {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0, t_end ≥ 0, stride ≥ 1 (dt = {dt}, t_end = {t_end}, stride = {record_stride})"
        )));
    }
    let n = (t_end / dt - 1e-9).ceil().max(1.0);
    let dt = t_end / n;
    let f = |m: &Vector3<f64>| equation.rhs(m, p);

    let mut m = *m0;
    let mut t = 0.0;
    let mut traj = BlochTrajectory {
        times: vec![0.0],
        states: vec![m],
        max_norm: m.norm(),
    };
    let mut step = 0usize;
    while t_end - t > 1e-12 * t_end.max(1.0) {
        let h = dt.min(1.0 / stiffness(&m, p, equation)).min(t_end - t);
        let k1 = f(&m);
        let k2 = f(&(m + k1 * (0.5 * h)));
        let k3 = f(&(m + k2 * (0.5 * h)));
        let k4 = f(&(m + k3 * h));
        m += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        t += h;
        step += 1;
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::NonPhysicalState {
                min_eigenvalue: f64::NAN,
            }
            .at(t));
        }
        traj.max_norm = traj.max_norm.max(m.norm());
        let last = t_end - t <= 1e-12 * t_end.max(1.0);
        if step.is_multiple_of(record_stride) || last {
            traj.times.push(if last { t_end } else { t });
            traj.states.push(m);
        }
    }
    Ok(traj)
}
