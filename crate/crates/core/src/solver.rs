//! Fixed-step RK4 propagation of the master equations.
//!
//! Two strategies are available:
//!
//! - [`Method::Direct`] integrates `dρ/dt` and re-Hermitizes and renormalizes
//!   after each step.
//! - [`Method::Eigensystem`] integrates the eigenvalues and eigenvectors of ρ,
//!
//!   ```text
//!   dp_n/dt    = ⟨π_n|R|π_n⟩
//!   d|π_n⟩/dt = -(i/ħ) H|π_n⟩ + Σ_{m≠n} |π_m⟩⟨π_m|R|π_n⟩ / (p_n - p_m)
//!   ```
//!
//!   re-orthonormalizing the eigenvectors (modified Gram-Schmidt) after each
//!   step. Steps where two eigenvalues come closer than the gap floor fall
//!   back to a direct step followed by a fresh decomposition.
//!
//! The bath energy is co-integrated with `dH_e/dt = -tr(H R)`; with
//! back-reaction enabled the bath temperature follows it.

use indexmap::IndexMap;
use nalgebra::DVector;
use num_complex::Complex64;

use crate::diagnostics::{entropy_rate, overlaps, von_neumann_entropy};
use crate::error::{Error, Result};
use crate::master::{BathState, MasterEquation};
use crate::operator::{
    hermitize, trace, trace_product, CMatrix, DensityMatrix, SpectralDecomposition,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Direct,
    Eigensystem,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Eigensystem => "eigensystem",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub method: Method,
    pub record_stride: usize,
    /// Largest trace drift accepted before renormalization.
    pub renorm_tol: f64,
    /// Largest eigenvector orthonormality defect accepted after
    /// re-orthonormalization.
    pub orth_tol: f64,
    /// Smallest eigenvalue gap the eigensystem method accepts.
    pub gap_floor: f64,
    /// Minimum eigenvalue below `-positivity_tol` aborts the run; `None`
    /// disables the check.
    pub positivity_tol: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3 * std::f64::consts::TAU,
            t_end: 100.0,
            method: Method::Direct,
            record_stride: 10,
            renorm_tol: 1e-8,
            orth_tol: 1e-9,
            gap_floor: 1e-8,
            positivity_tol: Some(1e-6),
        }
    }
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64, method: Method) -> Self {
        Self {
            dt,
            t_end,
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter(
                "record_stride must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Number of steps and the step actually taken (`t_end` is hit exactly).
    pub fn steps(&self) -> (usize, f64) {
        if self.t_end == 0.0 {
            return (0, self.dt);
        }
        let n = (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }
}

/// Quantities recorded along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    /// `tr(Aρ)` under the given column name.
    Expectation {
        name: String,
        op: CMatrix,
    },
    /// `p_0 .. p_{count-1}`, most probable first.
    Eigenvalues {
        count: usize,
    },
    /// `⟨j|ρ|j⟩` for the first `count` columns of `basis`.
    Populations {
        basis: CMatrix,
        count: usize,
    },
    /// `|⟨j|π_j⟩|` for the first `count` columns of `basis`.
    Overlaps {
        basis: CMatrix,
        count: usize,
    },
    VonNeumannEntropy,
    /// Total entropy production and its canonical-correlation form.
    EntropyRate,
    /// `dH_e/dt`.
    BathEnergyRate,
    BathTemperature,
    BathEnergy,
    /// Bloch components `tr(σ_j ρ)` of a two-level state.
    Bloch,
    MinEigenvalue,
}

impl Observable {
    pub fn columns(&self) -> Vec<String> {
        match self {
            Observable::Expectation { name, .. } => vec![name.clone()],
            Observable::Eigenvalues { count } => (0..*count).map(|n| format!("p_{n}")).collect(),
            Observable::Populations { count, .. } => {
                (0..*count).map(|n| format!("pop_{n}")).collect()
            }
            Observable::Overlaps { count, .. } => {
                (0..*count).map(|n| format!("overlap_{n}")).collect()
            }
            Observable::VonNeumannEntropy => vec!["entropy".into()],
            Observable::EntropyRate => vec!["entropy_rate".into(), "entropy_rate_canonical".into()],
            Observable::BathEnergyRate => vec!["bath_energy_rate".into()],
            Observable::BathTemperature => vec!["bath_kT".into()],
            Observable::BathEnergy => vec!["bath_energy".into()],
            Observable::Bloch => vec!["m_x".into(), "m_y".into(), "m_z".into()],
            Observable::MinEigenvalue => vec!["min_eigenvalue".into()],
        }
    }

    fn evaluate(&self, ctx: &RecordContext<'_>, out: &mut Vec<f64>) -> Result<()> {
        match self {
            Observable::Expectation { op, .. } => out.push(trace_product(op, ctx.rho).re),
            Observable::Eigenvalues { count } => {
                if *count > ctx.sd.dim() {
                    return Err(Error::IndexOutOfRange {
                        index: count - 1,
                        rank: ctx.sd.dim(),
                    });
                }
                out.extend(ctx.sd.eigenvalues.iter().take(*count));
            }
            Observable::Populations { basis, count } => {
                if *count > basis.ncols() {
                    return Err(Error::IndexOutOfRange {
                        index: count - 1,
                        rank: basis.ncols(),
                    });
                }
                for j in 0..*count {
                    let col = basis.column(j);
                    out.push((col.adjoint() * ctx.rho * col)[(0, 0)].re);
                }
            }
            Observable::Overlaps { basis, count } => out.extend(overlaps(ctx.sd, basis, *count)?),
            Observable::VonNeumannEntropy => out.push(von_neumann_entropy(ctx.sd)),
            Observable::EntropyRate => {
                let r = ctx.irreversible()?;
                let report = entropy_rate(ctx.sd, ctx.equation.system(), ctx.bath, &r)?;
                out.push(report.total_rate);
                out.push(report.canonical_form_rate);
            }
            Observable::BathEnergyRate => {
                let r = ctx.irreversible()?;
                out.push(ctx.equation.bath_energy_rate(&r));
            }
            Observable::BathTemperature => out.push(ctx.bath.kt()),
            Observable::BathEnergy => out.push(ctx.bath.energy()),
            Observable::Bloch => {
                if ctx.rho.nrows() != 2 {
                    return Err(Error::DimensionMismatch {
                        expected: 2,
                        found: ctx.rho.nrows(),
                    });
                }
                let r = ctx.rho;
                out.push(2.0 * r[(0, 1)].re);
                out.push(-2.0 * r[(0, 1)].im);
                out.push((r[(0, 0)] - r[(1, 1)]).re);
            }
            Observable::MinEigenvalue => out.push(ctx.sd.min_eigenvalue()),
        }
        Ok(())
    }
}

struct RecordContext<'a> {
    rho: &'a CMatrix,
    sd: &'a SpectralDecomposition,
    bath: &'a BathState,
    equation: &'a MasterEquation,
}

impl RecordContext<'_> {
    fn irreversible(&self) -> Result<CMatrix> {
        Ok(self
            .equation
            .rhs(self.rho, Some(self.sd), self.bath)?
            .irreversible)
    }
}

/// Recorded time series of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub series: IndexMap<String, Vec<f64>>,
    /// Density matrices at the recorded times, when requested.
    pub snapshots: Vec<CMatrix>,
    pub final_state: CMatrix,
    pub final_bath: BathState,
    /// Eigensystem steps that fell back to direct stepping.
    pub fallback_steps: usize,
}

impl Trajectory {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series.get(name).map(Vec::as_slice)
    }

    pub fn columns(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Last recorded value of a series.
    pub fn last(&self, name: &str) -> Option<f64> {
        self.series(name).and_then(|s| s.last().copied())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Let the bath temperature follow its energy (finite heat capacity).
    pub back_reaction: bool,
    pub observables: Vec<Observable>,
    pub store_snapshots: bool,
}

fn stage_bath(bath: &BathState, energy: f64, back_reaction: bool) -> Result<BathState> {
    if back_reaction {
        bath.with_energy(energy)
    } else {
        Ok(*bath)
    }
}

fn check_positivity(sd: &SpectralDecomposition, tol: Option<f64>) -> Result<()> {
    if let Some(tol) = tol {
        let min = sd.min_eigenvalue();
        if min < -tol {
            return Err(Error::NonPhysicalState {
                min_eigenvalue: min,
            });
        }
    }
    Ok(())
}

fn renormalize(rho: &CMatrix, renorm_tol: f64) -> Result<CMatrix> {
    let rho = hermitize(rho);
    let tr = trace(&rho).re;
    if (tr - 1.0).abs() > renorm_tol {
        return Err(Error::InvalidDensityMatrix(format!(
            "trace drifted to {tr}"
        )));
    }
    Ok(rho / Complex64::new(tr, 0.0))
}

struct DirectStep {
    rho: CMatrix,
    energy: f64,
}

fn direct_derivative(
    rho: &CMatrix,
    sd: Option<&SpectralDecomposition>,
    energy: f64,
    equation: &MasterEquation,
    bath: &BathState,
    back_reaction: bool,
) -> Result<(CMatrix, f64)> {
    let b = stage_bath(bath, energy, back_reaction)?;
    let rhs = equation.rhs(rho, sd, &b)?;
    let de = equation.bath_energy_rate(&rhs.irreversible);
    Ok((rhs.total(), de))
}

fn rk4_direct(
    rho: &CMatrix,
    sd: Option<&SpectralDecomposition>,
    energy: f64,
    equation: &MasterEquation,
    bath: &BathState,
    back_reaction: bool,
    dt: f64,
) -> Result<DirectStep> {
    let h = Complex64::new(dt, 0.0);
    let half = Complex64::new(0.5 * dt, 0.0);
    let f = |r: &CMatrix, s: Option<&SpectralDecomposition>, e: f64| {
        direct_derivative(r, s, e, equation, bath, back_reaction)
    };
    let (k1, e1) = f(rho, sd, energy)?;
    let (k2, e2) = f(
        &hermitize(&(rho + &k1 * half)),
        None,
        energy + 0.5 * dt * e1,
    )?;
    let (k3, e3) = f(
        &hermitize(&(rho + &k2 * half)),
        None,
        energy + 0.5 * dt * e2,
    )?;
    let (k4, e4) = f(&hermitize(&(rho + &k3 * h)), None, energy + dt * e3)?;
    let incr =
        (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * (h / 6.0);
    Ok(DirectStep {
        rho: rho + incr,
        energy: energy + dt / 6.0 * (e1 + 2.0 * e2 + 2.0 * e3 + e4),
    })
}

/// One RK4 step of `dρ/dt` followed by re-Hermitization and trace
/// renormalization. Fails with [`Error::NonPhysicalState`] when the new
/// state has an eigenvalue below `-1e-6`.
pub fn step_direct(
    rho: &DensityMatrix,
    equation: &MasterEquation,
    bath: &BathState,
    dt: f64,
) -> Result<DensityMatrix> {
    let config = SolverConfig::default();
    let step = rk4_direct(rho, None, bath.energy(), equation, bath, false, dt)?;
    let next = renormalize(&step.rho, config.renorm_tol)?;
    let sd = SpectralDecomposition::of_hermitian(&next)?;
    check_positivity(&sd, config.positivity_tol)?;
    Ok(DensityMatrix::from_matrix_unchecked(next))
}

struct EigenStep {
    sd: SpectralDecomposition,
    energy: f64,
}

fn eigen_derivative(
    p: &DVector<f64>,
    v: &CMatrix,
    energy: f64,
    equation: &MasterEquation,
    bath: &BathState,
    back_reaction: bool,
    gap_floor: f64,
) -> Result<(DVector<f64>, CMatrix, f64)> {
    let n = p.len();
    for a in 0..n {
        for b in (a + 1)..n {
            let gap = (p[a] - p[b]).abs();
            if gap < gap_floor {
                return Err(Error::DegenerateSpectrum {
                    gap,
                    floor: gap_floor,
                });
            }
        }
    }
    let sd = SpectralDecomposition::from_parts(p.clone(), v.clone());
    let rho = sd.reconstruct();
    let b = stage_bath(bath, energy, back_reaction)?;
    let rhs = equation.rhs(&rho, Some(&sd), &b)?;
    let r = &rhs.irreversible;
    let rt = v.adjoint() * r * v;

    let dp = DVector::from_fn(n, |k, _| rt[(k, k)].re);
    let mut coupling = CMatrix::zeros(n, n);
    for col in 0..n {
        for row in 0..n {
            if row != col {
                coupling[(row, col)] = rt[(row, col)] / (p[col] - p[row]);
            }
        }
    }
    let hbar = equation.hbar();
    let dv = equation.hamiltonian().matrix() * v * Complex64::new(0.0, -1.0 / hbar) + v * coupling;
    let de = equation.bath_energy_rate(r);
    Ok((dp, dv, de))
}

/// Modified Gram-Schmidt on the columns, in order.
pub fn orthonormalize_columns(v: &mut CMatrix) {
    let n = v.ncols();
    for k in 0..n {
        for j in 0..k {
            let proj = (v.column(j).adjoint() * v.column(k))[(0, 0)];
            let qj = v.column(j).into_owned();
            let mut ck = v.column_mut(k);
            ck -= qj * proj;
        }
        let norm = v.column(k).norm();
        let mut ck = v.column_mut(k);
        ck /= Complex64::new(norm, 0.0);
    }
}

#[allow(clippy::too_many_arguments)]
fn rk4_eigen(
    sd: &SpectralDecomposition,
    energy: f64,
    equation: &MasterEquation,
    bath: &BathState,
    back_reaction: bool,
    dt: f64,
    gap_floor: f64,
) -> Result<EigenStep> {
    let f = |p: &DVector<f64>, v: &CMatrix, e: f64| {
        eigen_derivative(p, v, e, equation, bath, back_reaction, gap_floor)
    };
    let p0 = &sd.eigenvalues;
    let v0 = &sd.eigenvectors;
    let half = Complex64::new(0.5 * dt, 0.0);
    let full = Complex64::new(dt, 0.0);

    let (p1, v1, e1) = f(p0, v0, energy)?;
    let (p2, v2, e2) = f(
        &(p0 + &p1 * (0.5 * dt)),
        &(v0 + &v1 * half),
        energy + 0.5 * dt * e1,
    )?;
    let (p3, v3, e3) = f(
        &(p0 + &p2 * (0.5 * dt)),
        &(v0 + &v2 * half),
        energy + 0.5 * dt * e2,
    )?;
    let (p4, v4, e4) = f(&(p0 + &p3 * dt), &(v0 + &v3 * full), energy + dt * e3)?;

    let p = p0 + (p1 + p2 * 2.0 + p3 * 2.0 + p4) * (dt / 6.0);
    let two = Complex64::new(2.0, 0.0);
    let mut v = v0 + (v1 + v2 * two + v3 * two + v4) * (full / 6.0);
    orthonormalize_columns(&mut v);
    Ok(EigenStep {
        sd: SpectralDecomposition::from_parts(p, v),
        energy: energy + dt / 6.0 * (e1 + 2.0 * e2 + 2.0 * e3 + e4),
    })
}

fn renormalize_spectrum(
    sd: SpectralDecomposition,
    config: &SolverConfig,
) -> Result<SpectralDecomposition> {
    let total: f64 = sd.eigenvalues.iter().sum();
    if (total - 1.0).abs() > config.renorm_tol {
        return Err(Error::InvalidDensityMatrix(format!(
            "eigenvalue sum drifted to {total}"
        )));
    }
    let defect = sd.orthonormality_defect();
    if defect > config.orth_tol {
        return Err(Error::InvalidDensityMatrix(format!(
            "eigenvector orthonormality defect {defect:e} after re-orthonormalization"
        )));
    }
    let p = sd.eigenvalues / total;
    Ok(SpectralDecomposition::from_parts(p, sd.eigenvectors))
}

/// One RK4 step of the coupled eigenvalue/eigenvector equations, followed
/// by re-orthonormalization and renormalization of `Σ p_n`.
pub fn step_eigensystem(
    sd: &SpectralDecomposition,
    equation: &MasterEquation,
    bath: &BathState,
    dt: f64,
    gap_floor: f64,
) -> Result<SpectralDecomposition> {
    let config = SolverConfig::default();
    let step = rk4_eigen(sd, bath.energy(), equation, bath, false, dt, gap_floor)?;
    renormalize_spectrum(step.sd, &config)
}

enum Propagated {
    Density {
        rho: CMatrix,
        sd: SpectralDecomposition,
    },
    Spectral(SpectralDecomposition),
}

impl Propagated {
    fn rho_and_sd(&self) -> (CMatrix, &SpectralDecomposition) {
        match self {
            Propagated::Density { rho, sd } => (rho.clone(), sd),
            Propagated::Spectral(sd) => (hermitize(&sd.reconstruct()), sd),
        }
    }
}

/// Integrates from `rho0` to `config.t_end`, recording the observables every
/// `record_stride` steps and at the final time.
pub fn evolve(
    rho0: &DensityMatrix,
    equation: &MasterEquation,
    bath: BathState,
    config: &SolverConfig,
    options: &RunOptions,
) -> Result<Trajectory> {
    config.validate()?;
    if rho0.dim() != equation.dim() {
        return Err(Error::DimensionMismatch {
            expected: equation.dim(),
            found: rho0.dim(),
        });
    }
    let (n_steps, dt) = config.steps();

    let mut names: Vec<String> = Vec::new();
    for obs in &options.observables {
        names.extend(obs.columns());
    }
    let mut series: IndexMap<String, Vec<f64>> =
        names.iter().map(|n| (n.clone(), Vec::new())).collect();
    let mut times = Vec::new();
    let mut snapshots = Vec::new();

    let sd0 = SpectralDecomposition::of_hermitian(rho0)?;
    let mut state = match config.method {
        Method::Direct => Propagated::Density {
            rho: rho0.matrix().clone(),
            sd: sd0,
        },
        Method::Eigensystem => Propagated::Spectral(sd0),
    };
    let mut energy = bath.energy();
    let mut current_bath = bath;
    let mut fallback_steps = 0;

    let mut record = |t: f64, state: &Propagated, b: &BathState| -> Result<()> {
        let (rho, sd) = state.rho_and_sd();
        let ctx = RecordContext {
            rho: &rho,
            sd,
            bath: b,
            equation,
        };
        let mut row = Vec::with_capacity(names.len());
        for obs in &options.observables {
            obs.evaluate(&ctx, &mut row)?;
        }
        for (name, value) in names.iter().zip(row) {
            series.get_mut(name).expect("column registered").push(value);
        }
        times.push(t);
        if options.store_snapshots {
            snapshots.push(rho);
        }
        Ok(())
    };

    record(0.0, &state, &current_bath)?;
    for k in 1..=n_steps {
        let t_prev = (k - 1) as f64 * dt;
        let t = k as f64 * dt;
        state = advance(
            state,
            &mut energy,
            equation,
            &bath,
            config,
            options.back_reaction,
            dt,
            &mut fallback_steps,
        )
        .map_err(|e| e.at(t_prev))?;
        current_bath = if options.back_reaction {
            bath.with_energy(energy).map_err(|e| e.at(t))?
        } else {
            bath.with_energy_at_fixed_temperature(energy)
        };
        if k % config.record_stride == 0 || k == n_steps {
            record(t, &state, &current_bath).map_err(|e| e.at(t))?;
        }
    }

    let (final_state, _) = state.rho_and_sd();
    Ok(Trajectory {
        times,
        series,
        snapshots,
        final_state,
        final_bath: current_bath,
        fallback_steps,
    })
}

#[allow(clippy::too_many_arguments)]
fn advance(
    state: Propagated,
    energy: &mut f64,
    equation: &MasterEquation,
    bath: &BathState,
    config: &SolverConfig,
    back_reaction: bool,
    dt: f64,
    fallback_steps: &mut usize,
) -> Result<Propagated> {
    let direct = |rho: &CMatrix,
                  sd: Option<&SpectralDecomposition>,
                  energy: &mut f64|
     -> Result<(CMatrix, SpectralDecomposition)> {
        let step = rk4_direct(rho, sd, *energy, equation, bath, back_reaction, dt)?;
        let next = renormalize(&step.rho, config.renorm_tol)?;
        let sd = SpectralDecomposition::of_hermitian(&next)?;
        check_positivity(&sd, config.positivity_tol)?;
        *energy = step.energy;
        Ok((next, sd))
    };
    match state {
        Propagated::Density { rho, sd } => {
            let (rho, sd) = direct(&rho, Some(&sd), energy)?;
            Ok(Propagated::Density { rho, sd })
        }
        Propagated::Spectral(sd) => match rk4_eigen(
            &sd,
            *energy,
            equation,
            bath,
            back_reaction,
            dt,
            config.gap_floor,
        ) {
            Ok(step) => {
                let next = renormalize_spectrum(step.sd, config)?;
                check_positivity(&next, config.positivity_tol)?;
                *energy = step.energy;
                Ok(Propagated::Spectral(next))
            }
            Err(Error::DegenerateSpectrum { .. }) => {
                *fallback_steps += 1;
                let rho = hermitize(&sd.reconstruct());
                let (_, fresh) = direct(&rho, None, energy)?;
                Ok(Propagated::Spectral(fresh))
            }
            Err(e) => Err(e),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::master::{CouplingLaw, SystemSpec};
    use crate::operator::{frobenius_norm, HermitianOperator};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn spec() -> SystemSpec {
        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.5]);
        let q = HermitianOperator::new(CMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.),
                c(1.),
                c(0.3),
                c(1.),
                c(0.),
                c(0.8),
                c(0.3),
                c(0.8),
                c(0.),
            ],
        ))
        .unwrap();
        SystemSpec::new(h, vec![q], 1.0).unwrap()
    }

    fn tilted_state() -> DensityMatrix {
        DensityMatrix::from_matrix(CMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.5),
                Complex64::new(0.1, 0.05),
                c(0.03),
                Complex64::new(0.1, -0.05),
                c(0.3),
                c(0.02),
                c(0.03),
                c(0.02),
                c(0.2),
            ],
        ))
        .unwrap()
    }

    #[test]
    fn step_counts_hit_t_end() {
        let cfg = SolverConfig::new(0.3, 1.0, Method::Direct);
        let (n, dt) = cfg.steps();
        assert_eq!(n, 4);
        assert!((n as f64 * dt - 1.0).abs() < 1e-15);
        let cfg = SolverConfig::new(0.25, 1.0, Method::Direct);
        assert_eq!(cfg.steps().0, 4);
    }

    #[test]
    fn invalid_config_is_rejected() {
        assert!(SolverConfig::new(0.0, 1.0, Method::Direct)
            .validate()
            .is_err());
        assert!(SolverConfig::new(0.1, -1.0, Method::Direct)
            .validate()
            .is_err());
    }

    #[test]
    fn von_neumann_limit_keeps_populations_and_rotates_phases() {
        let s = spec();
        let eq = MasterEquation::Linearized(s.clone());
        let bath = BathState::heat_bath(CouplingLaw::Constant(0.0), 1.0).unwrap();
        let rho0 = tilted_state();
        let mut rho = rho0.clone();
        let dt = 1e-3;
        for _ in 0..1000 {
            rho = step_direct(&rho, &eq, &bath, dt).unwrap();
        }
        for i in 0..3 {
            assert!((rho[(i, i)] - rho0[(i, i)]).norm() < 1e-12);
        }
        // ρ_01(t) = ρ_01(0) e^{-i(E0 - E1)t}
        let expected = rho0[(0, 1)] * Complex64::new(0.0, 1.0).exp();
        assert!((rho[(0, 1)] - expected).norm() < 1e-12);
    }

    #[test]
    fn eigensystem_without_dissipation_is_unitary() {
        let s = spec();
        let eq = MasterEquation::Thermodynamic(s.clone());
        let bath = BathState::heat_bath(CouplingLaw::Constant(0.0), 1.0).unwrap();
        let sd0 = SpectralDecomposition::of_hermitian(&tilted_state()).unwrap();
        let mut sd = sd0.clone();
        for _ in 0..500 {
            sd = step_eigensystem(&sd, &eq, &bath, 2e-3, 1e-8).unwrap();
        }
        for k in 0..3 {
            assert!((sd.eigenvalues[k] - sd0.eigenvalues[k]).abs() < 1e-13);
        }
        // |π_n(t)⟩ = exp(-iHt)|π_n(0)⟩ with H diagonal
        for n in 0..3 {
            for (j, e) in [0.0f64, 1.0, 2.5].iter().enumerate() {
                let expected = sd0.eigenvectors[(j, n)] * Complex64::new(0.0, -e).exp();
                assert!((sd.eigenvectors[(j, n)] - expected).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn eigenvalue_rates_sum_to_zero() {
        let s = spec();
        let eq = MasterEquation::Thermodynamic(s);
        let bath = BathState::heat_bath(CouplingLaw::Constant(0.4), 0.6).unwrap();
        let sd = SpectralDecomposition::of_hermitian(&tilted_state()).unwrap();
        let (dp, _, _) = eigen_derivative(
            &sd.eigenvalues,
            &sd.eigenvectors,
            0.0,
            &eq,
            &bath,
            false,
            1e-8,
        )
        .unwrap();
        assert!(dp.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn degenerate_spectrum_is_reported() {
        let eq = MasterEquation::Thermodynamic(spec());
        let bath = BathState::heat_bath(CouplingLaw::Constant(0.4), 0.6).unwrap();
        let sd = SpectralDecomposition::of_hermitian(&DensityMatrix::maximally_mixed(3)).unwrap();
        assert!(matches!(
            step_eigensystem(&sd, &eq, &bath, 1e-3, 1e-8),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn degenerate_start_falls_back_to_direct_steps() {
        let eq = MasterEquation::Thermodynamic(spec());
        let bath = BathState::heat_bath(CouplingLaw::Constant(0.4), 0.6).unwrap();
        let mut cfg = SolverConfig::new(1e-2, 0.5, Method::Eigensystem);
        cfg.record_stride = 5;
        let traj = evolve(
            &DensityMatrix::maximally_mixed(3),
            &eq,
            bath,
            &cfg,
            &RunOptions::default(),
        )
        .unwrap();
        assert!(traj.fallback_steps >= 1);
        let direct_cfg = SolverConfig {
            method: Method::Direct,
            ..cfg
        };
        let reference = evolve(
            &DensityMatrix::maximally_mixed(3),
            &eq,
            bath,
            &direct_cfg,
            &RunOptions::default(),
        )
        .unwrap();
        let diff = frobenius_norm(&(traj.final_state - reference.final_state));
        // both are fourth order in dt but integrate different variables
        assert!(diff < 1e-6, "{diff:e}");
    }

    #[test]
    fn nonphysical_state_is_flagged() {
        // a huge step through strong dissipation overshoots the boundary
        let eq = MasterEquation::Linearized(spec());
        let bath = BathState::heat_bath(CouplingLaw::Constant(50.0), 0.05).unwrap();
        let rho = DensityMatrix::canonical(spec().hamiltonian(), 0.05).unwrap();
        let err = step_direct(&rho, &eq, &bath, 0.5).unwrap_err();
        assert!(
            matches!(
                err,
                Error::NonPhysicalState { .. } | Error::InvalidDensityMatrix(_)
            ),
            "{err:?}"
        );
    }

    #[test]
    fn recording_schedule() {
        let eq = MasterEquation::Thermodynamic(spec());
        let bath = BathState::heat_bath(CouplingLaw::Constant(0.1), 0.6).unwrap();
        let mut cfg = SolverConfig::new(0.01, 0.25, Method::Direct);
        cfg.record_stride = 10;
        let opts = RunOptions {
            observables: vec![
                Observable::Eigenvalues { count: 3 },
                Observable::VonNeumannEntropy,
            ],
            store_snapshots: true,
            ..RunOptions::default()
        };
        let traj = evolve(&tilted_state(), &eq, bath, &cfg, &opts).unwrap();
        assert_eq!(traj.times.len(), 4);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert!((traj.times[3] - 0.25).abs() < 1e-15);
        assert_eq!(traj.snapshots.len(), 4);
        for (_, s) in &traj.series {
            assert_eq!(s.len(), traj.times.len());
        }
        assert_eq!(
            traj.columns().collect::<Vec<_>>(),
            vec!["p_0", "p_1", "p_2", "entropy"]
        );
    }
}
