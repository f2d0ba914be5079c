//! Damped harmonic oscillator on the truncated Fock space `|0⟩ .. |N⟩`.
//!
//! `H` is exact on the truncated space, `Q` drops the couplings of `|N⟩` to
//! `|N+1⟩`, and `P` is defined through `[Q,H] = (iħ/m) P` so that this
//! relation holds exactly within the truncated algebra.

use num_complex::Complex64;

use crate::diagnostics::energy_basis;
use crate::error::{Error, Result};
use crate::master::{BathState, CaldeiraLeggettSystem, CouplingLaw, MasterEquation, SystemSpec};
use crate::operator::{comm, CMatrix, DensityMatrix, HermitianOperator};
use crate::solver::{evolve, Observable, RunOptions, SolverConfig, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorParams {
    /// Highest retained Fock state; the space has `n_max + 1` states.
    pub n_max: usize,
    pub mass: f64,
    pub omega: f64,
    /// Friction coefficient ζ.
    pub zeta: f64,
    /// Initial temperature in energy units.
    pub kt0: f64,
    /// Bath temperature after the quench.
    pub kte: f64,
    pub hbar: f64,
}

impl Default for OscillatorParams {
    /// `kT0 = 1.5ħω`, `kTe = 0.5ħω`, `ζ/m = ω/10`, ten states.
    fn default() -> Self {
        OscillatorParams {
            n_max: 9,
            mass: 1.0,
            omega: 1.0,
            zeta: 0.1,
            kt0: 1.5,
            kte: 0.5,
            hbar: 1.0,
        }
    }
}

impl OscillatorParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} = {v}")));
        if self.n_max < 1 {
            return Err(Error::InvalidParameter(
                "need at least two states (n_max ≥ 1)".into(),
            ));
        }
        for (name, v) in [
            ("mass", self.mass),
            ("omega", self.omega),
            ("kT0", self.kt0),
            ("kTe", self.kte),
            ("hbar", self.hbar),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(name, v);
            }
        }
        if !(self.zeta >= 0.0 && self.zeta.is_finite()) {
            return bad("zeta", self.zeta);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// Damping rate `ζ/m`.
    pub fn damping_rate(&self) -> f64 {
        self.zeta / self.mass
    }

    /// Heat bath at `kTe` with `M = ζ kT/ħ²`.
    pub fn bath(&self) -> Result<BathState> {
        BathState::heat_bath(
            CouplingLaw::Friction {
                zeta: self.zeta,
                hbar: self.hbar,
            },
            self.kte,
        )
    }
}

/// Operators of the truncated oscillator.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorOperators {
    pub h: HermitianOperator,
    pub q: HermitianOperator,
    /// `[Q,H]`, anti-Hermitian.
    pub qh_comm: CMatrix,
    pub p: HermitianOperator,
    /// `P·P` in the truncated space.
    pub p2: HermitianOperator,
}

pub fn build_operators(p: &OscillatorParams) -> Result<OscillatorOperators> {
    p.validate()?;
    let n = p.dim();
    let h = HermitianOperator::from_real_diagonal(
        &(0..n)
            .map(|k| p.hbar * p.omega * (k as f64 + 0.5))
            .collect::<Vec<_>>(),
    );
    let scale = (p.hbar / (2.0 * p.mass * p.omega)).sqrt();
    let mut q = CMatrix::zeros(n, n);
    for k in 1..n {
        let v = Complex64::new(scale * (k as f64).sqrt(), 0.0);
        q[(k - 1, k)] = v;
        q[(k, k - 1)] = v;
    }
    let qh_comm = comm(&q, &h);
    // P = (m/iħ)[Q,H]
    let p_op =
        HermitianOperator::hermitian_part(&(&qh_comm * Complex64::new(0.0, -p.mass / p.hbar)));
    let p2 = HermitianOperator::hermitian_part(&(p_op.matrix() * p_op.matrix()));
    Ok(OscillatorOperators {
        h,
        q: HermitianOperator::new(q)?,
        qh_comm,
        p: p_op,
        p2,
    })
}

/// Closed-form `⟨P²⟩_t` of the Caldeira-Leggett equation for a start whose
/// eigenvectors are energy eigenstates (underdamped case only).
pub fn cl_moment_solution(t: f64, p: &OscillatorParams, p2_0: f64) -> Result<f64> {
    let g = p.damping_rate();
    let w2 = 4.0 * p.omega * p.omega;
    if w2 <= g * g {
        return Err(Error::OverdampedUnsupported);
    }
    let big = (w2 - g * g).sqrt();
    let target = p.mass * p.kte;
    let bracket = w2 - g * g * (big * t).cos() - g * big * (big * t).sin();
    Ok(target + (p2_0 - target) / (w2 - g * g) * (-g * t).exp() * bracket)
}

/// Exact equilibrium `⟨P²⟩ = ½ħωm coth(ħω/2kTe)` of the untruncated
/// oscillator.
pub fn equilibrium_p2(p: &OscillatorParams) -> f64 {
    let x = p.hbar * p.omega / (2.0 * p.kte);
    0.5 * p.hbar * p.omega * p.mass / x.tanh()
}

/// Canonical state at `kT0`, normalized on the truncated space.
pub fn initial_state(p: &OscillatorParams, ops: &OscillatorOperators) -> Result<DensityMatrix> {
    DensityMatrix::canonical(&ops.h, p.kt0)
}

/// Dynamics used for the quench.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuenchEquation {
    Thermodynamic,
    Linearized,
    CaldeiraLeggett,
}

impl QuenchEquation {
    pub fn name(&self) -> &'static str {
        match self {
            QuenchEquation::Thermodynamic => "thermodynamic",
            QuenchEquation::Linearized => "linearized",
            QuenchEquation::CaldeiraLeggett => "caldeira_leggett",
        }
    }
}

pub fn master_equation(
    ops: &OscillatorOperators,
    p: &OscillatorParams,
    kind: QuenchEquation,
) -> Result<MasterEquation> {
    let spec = || SystemSpec::new(ops.h.clone(), vec![ops.q.clone()], p.hbar);
    Ok(match kind {
        QuenchEquation::Thermodynamic => MasterEquation::Thermodynamic(spec()?),
        QuenchEquation::Linearized => MasterEquation::Linearized(spec()?),
        QuenchEquation::CaldeiraLeggett => {
            MasterEquation::CaldeiraLeggett(CaldeiraLeggettSystem::new(
                ops.h.clone(),
                ops.q.clone(),
                ops.p.clone(),
                p.mass,
                p.hbar,
            )?)
        }
    })
}

/// Observables recorded by [`quench_experiment`]: `P2`, `energy`, the
/// first three populations, eigenvalues and overlaps, entropy and entropy
/// production, the bath energy rate and the smallest eigenvalue.
pub fn quench_observables(ops: &OscillatorOperators) -> Result<Vec<Observable>> {
    let basis = energy_basis(&ops.h)?;
    let count = ops.h.dim().min(3);
    Ok(vec![
        Observable::Expectation {
            name: "P2".into(),
            op: ops.p2.matrix().clone(),
        },
        Observable::Expectation {
            name: "energy".into(),
            op: ops.h.matrix().clone(),
        },
        Observable::Populations {
            basis: basis.clone(),
            count,
        },
        Observable::Eigenvalues { count },
        Observable::Overlaps { basis, count },
        Observable::VonNeumannEntropy,
        Observable::EntropyRate,
        Observable::BathEnergyRate,
        Observable::MinEigenvalue,
    ])
}

/// Start canonical at `kT0`, quench the bath to `kTe` and evolve.
pub fn quench_experiment(
    p: &OscillatorParams,
    equation: QuenchEquation,
    solver: &SolverConfig,
) -> Result<Trajectory> {
    let ops = build_operators(p)?;
    let eq = master_equation(&ops, p, equation)?;
    let rho0 = initial_state(p, &ops)?;
    let options = RunOptions {
        back_reaction: false,
        observables: quench_observables(&ops)?,
        store_snapshots: false,
    };
    evolve(&rho0, &eq, p.bath()?, solver, &options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{frobenius_norm, hermiticity_defect};
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_state_matrices() {
        let p = OscillatorParams {
            n_max: 1,
            mass: 2.0,
            omega: 3.0,
            hbar: 0.7,
            ..OscillatorParams::default()
        };
        let ops = build_operators(&p).unwrap();
        assert_abs_diff_eq!(ops.h[(0, 0)].re, 0.5 * 0.7 * 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ops.h[(1, 1)].re, 1.5 * 0.7 * 3.0, epsilon = 1e-15);
        let s = (0.7 / (2.0 * 2.0 * 3.0f64)).sqrt();
        assert_abs_diff_eq!(ops.q[(0, 1)].re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(ops.q[(0, 0)].norm(), 0.0);
        let corner = (0.7f64.powi(3) * 3.0 / (2.0 * 2.0)).sqrt();
        assert_abs_diff_eq!(ops.qh_comm[(0, 1)].re, corner, epsilon = 1e-14);
        assert_abs_diff_eq!(ops.qh_comm[(1, 0)].re, -corner, epsilon = 1e-14);
    }

    #[test]
    fn commutator_hermiticity_and_canonical_relation() {
        let p = OscillatorParams::default();
        let ops = build_operators(&p).unwrap();
        assert!(hermiticity_defect(&(&ops.qh_comm * Complex64::i())) < 1e-15);
        let qp = comm(ops.q.matrix(), ops.p.matrix());
        let n = p.dim();
        let inner = qp.view((0, 0), (n - 1, n - 1))
            - CMatrix::identity(n - 1, n - 1) * Complex64::new(0.0, p.hbar);
        assert!(inner.norm() < 1e-10);
        // the edge state carries the truncation defect
        assert!((qp[(n - 1, n - 1)].im - p.hbar).abs() > 1.0);
    }

    #[test]
    fn p2_matches_ladder_form_away_from_edge() {
        // P² = (mħω/2)(2n+1) on the diagonal for the untruncated oscillator
        let p = OscillatorParams::default();
        let ops = build_operators(&p).unwrap();
        for k in 0..p.n_max {
            assert_abs_diff_eq!(
                ops.p2[(k, k)].re,
                0.5 * (2.0 * k as f64 + 1.0),
                epsilon = 1e-12
            );
        }
        assert_abs_diff_eq!(
            ops.p2[(p.n_max, p.n_max)].re,
            0.5 * p.n_max as f64,
            epsilon = 1e-12
        );
    }

    #[test]
    fn truncation_error_of_initial_p2_is_about_one_percent() {
        let p = OscillatorParams::default();
        let ops = build_operators(&p).unwrap();
        let rho = initial_state(&p, &ops).unwrap();
        let truncated = ops.p2.expectation(&rho);
        let exact = 0.5 / (1.0 / (2.0 * p.kt0)).tanh();
        let rel = (exact - truncated) / exact;
        assert!(rel > 0.005 && rel < 0.015, "{rel}");
    }

    #[test]
    fn equilibrium_p2_values_and_limits() {
        let p = OscillatorParams::default();
        assert_abs_diff_eq!(equilibrium_p2(&p), 0.5 / 1f64.tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(equilibrium_p2(&p), 0.656518, epsilon = 1e-6);
        let hot = OscillatorParams { kte: 1e6, ..p };
        assert_abs_diff_eq!(
            equilibrium_p2(&hot) / (hot.mass * hot.kte),
            1.0,
            epsilon = 1e-10
        );
        let cold = OscillatorParams { kte: 1e-3, ..p };
        assert_abs_diff_eq!(equilibrium_p2(&cold), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn moment_solution_endpoints() {
        let p = OscillatorParams::default();
        assert_abs_diff_eq!(
            cl_moment_solution(0.0, &p, 1.3).unwrap(),
            1.3,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            cl_moment_solution(1e3, &p, 1.3).unwrap(),
            p.mass * p.kte,
            epsilon = 1e-12
        );
        let over = OscillatorParams { zeta: 2.0, ..p };
        assert_eq!(
            cl_moment_solution(1.0, &over, 1.3),
            Err(Error::OverdampedUnsupported)
        );
    }

    #[test]
    fn moment_solution_matches_ode_integration() {
        let p = OscillatorParams {
            mass: 1.5,
            omega: 1.2,
            zeta: 0.4,
            kte: 0.7,
            ..OscillatorParams::default()
        };
        let g = p.damping_rate();
        let w2 = p.omega * p.omega;
        let target = p.mass * p.kte;
        let p2_0 = 2.1;
        // y = (⟨P²⟩, d/dt, d²/dt²)
        let f = |y: [f64; 3]| {
            [
                y[1],
                y[2],
                4.0 * w2 * p.kte * p.zeta
                    - 3.0 * g * y[2]
                    - (4.0 * w2 + 2.0 * g * g) * y[1]
                    - 4.0 * w2 * g * y[0],
            ]
        };
        let mut y = [
            p2_0,
            -2.0 * g * (p2_0 - target),
            4.0 * g * g * (p2_0 - target),
        ];
        let h = 1e-3;
        for step in 1..=20_000 {
            let add = |a: [f64; 3], b: [f64; 3], s: f64| {
                [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
            };
            let k1 = f(y);
            let k2 = f(add(y, k1, 0.5 * h));
            let k3 = f(add(y, k2, 0.5 * h));
            let k4 = f(add(y, k3, h));
            for i in 0..3 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if step % 1000 == 0 {
                let t = step as f64 * h;
                assert_abs_diff_eq!(
                    cl_moment_solution(t, &p, p2_0).unwrap(),
                    y[0],
                    epsilon = 1e-8
                );
            }
        }
    }

    #[test]
    fn canonical_truncated_state_is_stationary() {
        let p = OscillatorParams::default();
        let ops = build_operators(&p).unwrap();
        let eq = master_equation(&ops, &p, QuenchEquation::Thermodynamic).unwrap();
        let rho = DensityMatrix::canonical(&ops.h, p.kte).unwrap();
        let rhs = eq.rhs(&rho, None, &p.bath().unwrap()).unwrap().total();
        assert!(frobenius_norm(&rhs) < 1e-12);
    }

    #[test]
    fn caldeira_leggett_equals_linearized() {
        let p = OscillatorParams::default();
        let ops = build_operators(&p).unwrap();
        let bath = p.bath().unwrap();
        let rho = initial_state(&p, &ops).unwrap();
        let lin = master_equation(&ops, &p, QuenchEquation::Linearized).unwrap();
        let cl = master_equation(&ops, &p, QuenchEquation::CaldeiraLeggett).unwrap();
        let a = lin.rhs(&rho, None, &bath).unwrap().total();
        let b = cl.rhs(&rho, None, &bath).unwrap().total();
        assert!(frobenius_norm(&(a - b)) < 1e-12);
    }

    #[test]
    fn short_quench_records_expected_columns() {
        let p = OscillatorParams {
            n_max: 4,
            ..OscillatorParams::default()
        };
        let mut cfg = SolverConfig::new(1e-2, 0.1, crate::solver::Method::Direct);
        cfg.record_stride = 5;
        let traj = quench_experiment(&p, QuenchEquation::Thermodynamic, &cfg).unwrap();
        for name in [
            "P2",
            "energy",
            "pop_0",
            "p_2",
            "overlap_1",
            "entropy",
            "entropy_rate",
            "bath_energy_rate",
        ] {
            assert_eq!(traj.series(name).unwrap().len(), traj.times.len(), "{name}");
        }
        assert_eq!(traj.times, vec![0.0, 0.05, 0.1]);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(build_operators(&OscillatorParams {
            n_max: 0,
            ..OscillatorParams::default()
        })
        .is_err());
        assert!(build_operators(&OscillatorParams {
            mass: 0.0,
            ..OscillatorParams::default()
        })
        .is_err());
        assert!(build_operators(&OscillatorParams {
            zeta: -1.0,
            ..OscillatorParams::default()
        })
        .is_err());
    }
}
