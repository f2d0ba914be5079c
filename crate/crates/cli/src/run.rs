//! Experiment dispatch.

use nalgebra::{Matrix3, Vector3};
use qme_core::master::MasterEquation;
use qme_core::oscillator::{equilibrium_p2, quench_experiment};
use qme_core::solver::{evolve, Observable, RunOptions, Trajectory};
use qme_core::two_level::{
    bloch_equilibrium, bloch_linearized_matrix, integrate_bloch, mu_table, BlochEquation,
    BlochVector, TwoLevelParams,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::config::{Equation, Experiment, InitialBloch, RunConfig};
use crate::error::CliError;
use crate::output::{self, Table};

/// Result of one run before it is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub table: Table,
    /// Derived quantities appended to `run_meta` after the settings.
    pub extra_meta: Vec<(String, String)>,
}

/// Compute the requested experiment.
pub fn run(config: &RunConfig) -> Result<RunOutput, CliError> {
    match config.experiment {
        Experiment::OscillatorQuench => oscillator_quench(config),
        Experiment::TwoLevelRelax => two_level_relax(config),
        Experiment::MuTable => mu_curve(config),
        Experiment::BlochJacobian => bloch_jacobian(config),
    }
}

/// Compute the experiment and write `trajectory.csv`, `run_meta` and
/// `plot.gp` into the configured output directory.
pub fn execute(config: &RunConfig) -> Result<RunOutput, CliError> {
    let out = run(config)?;
    output::write_all(config, &out)?;
    Ok(out)
}

fn meta(key: &str, value: impl ToString) -> (String, String) {
    (key.to_string(), value.to_string())
}

fn from_trajectory(traj: &Trajectory) -> Table {
    let mut table = Table::new("time", traj.times.clone());
    for (name, values) in &traj.series {
        table.push(name, values.clone());
    }
    table
}

fn oscillator_quench(config: &RunConfig) -> Result<RunOutput, CliError> {
    let p = config.oscillator_params();
    p.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let traj = quench_experiment(&p, config.quench_equation(), &config.solver)?;
    let extra_meta = vec![
        meta("equilibrium_P2", format!("{:?}", equilibrium_p2(&p))),
        meta(
            "final_P2",
            format!("{:?}", traj.last("P2").unwrap_or(f64::NAN)),
        ),
        meta("damping_rate", format!("{:?}", p.damping_rate())),
        meta("fallback_steps", traj.fallback_steps),
    ];
    Ok(RunOutput {
        table: from_trajectory(&traj),
        extra_meta,
    })
}

/// Uniform point in the unit ball by rejection from the enclosing cube.
fn random_in_ball(seed: u64) -> Vector3<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    loop {
        let v = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        if v.norm() <= 1.0 {
            return v;
        }
    }
}

fn initial_bloch(config: &RunConfig) -> Result<Vector3<f64>, CliError> {
    Ok(match config.m0 {
        InitialBloch::Vector(v) => v,
        InitialBloch::Canonical => {
            *bloch_equilibrium(&config.two_level_params_at(config.kt0)?).vector()
        }
        InitialBloch::Random => random_in_ball(config.seed),
    })
}

fn two_level_relax(config: &RunConfig) -> Result<RunOutput, CliError> {
    let p = config.two_level_params()?;
    let m0 = initial_bloch(config)?;
    let mut table = match config.equation {
        Equation::LindbladBloch => {
            let solver = &config.solver;
            let traj = integrate_bloch(
                &m0,
                &p,
                BlochEquation::Lindblad,
                solver.dt,
                solver.t_end,
                solver.record_stride,
            )?;
            let mut table = Table::new("time", traj.times);
            for (k, name) in ["m_x", "m_y", "m_z"].into_iter().enumerate() {
                table.push(name, traj.states.iter().map(|m| m[k]).collect());
            }
            table
        }
        _ => {
            let spec = p.system_spec()?;
            let options = RunOptions {
                back_reaction: false,
                observables: vec![
                    Observable::Bloch,
                    Observable::Expectation {
                        name: "energy".into(),
                        op: spec.hamiltonian().matrix().clone(),
                    },
                    Observable::Eigenvalues { count: 2 },
                    Observable::VonNeumannEntropy,
                    Observable::EntropyRate,
                    Observable::BathEnergyRate,
                ],
                store_snapshots: false,
            };
            let equation = match config.equation {
                Equation::Linearized => MasterEquation::Linearized(spec),
                _ => MasterEquation::Thermodynamic(spec),
            };
            let rho0 = BlochVector::new(m0)?.to_density_matrix();
            from_trajectory(&evolve(
                &rho0,
                &equation,
                p.bath()?,
                &config.solver,
                &options,
            )?)
        }
    };
    let norm = (0..table.rows())
        .map(|k| {
            Vector3::new(
                table.value("m_x", k),
                table.value("m_y", k),
                table.value("m_z", k),
            )
            .norm()
        })
        .collect();
    table.insert_after("m_z", "m_norm", norm);
    let eq = bloch_equilibrium(&p);
    Ok(RunOutput {
        table,
        extra_meta: vec![
            meta("initial_m", format!("{:?},{:?},{:?}", m0.x, m0.y, m0.z)),
            meta("equilibrium_m_z", format!("{:?}", eq.z)),
            meta("half_beta_energy", format!("{:?}", p.half_beta_energy())),
        ],
    })
}

fn mu_curve(config: &RunConfig) -> Result<RunOutput, CliError> {
    let rows = mu_table(config.points, config.m_max)?;
    let mut table = Table::new("m", rows.iter().map(|r| r.0).collect());
    table.push("mu", rows.iter().map(|r| r.1).collect());
    Ok(RunOutput {
        table,
        extra_meta: Vec::new(),
    })
}

/// Jacobian of an affine Bloch equation from its values at the origin and
/// the unit vectors.
fn affine_jacobian(equation: BlochEquation, p: &TwoLevelParams) -> Matrix3<f64> {
    let f0 = equation.rhs(&Vector3::zeros(), p);
    let mut j = Matrix3::zeros();
    for k in 0..3 {
        let mut e = Vector3::zeros();
        e[k] = 1.0;
        j.set_column(k, &(equation.rhs(&e, p) - f0));
    }
    j
}

fn bloch_jacobian(config: &RunConfig) -> Result<RunOutput, CliError> {
    let p = config.two_level_params()?;
    let equation = config.bloch_equation();
    let j = match equation {
        BlochEquation::Thermodynamic => bloch_linearized_matrix(&p),
        affine => affine_jacobian(affine, &p),
    };
    let mut eig: Vec<(f64, f64)> = j
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect();
    eig.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut table = Table::new("row", vec![0.0, 1.0, 2.0]);
    for (k, name) in ["d_x", "d_y", "d_z"].into_iter().enumerate() {
        table.push(name, j.column(k).iter().copied().collect());
    }
    table.push("eig_re", eig.iter().map(|e| e.0).collect());
    table.push("eig_im", eig.iter().map(|e| e.1).collect());
    let decay = eig.iter().map(|e| -e.0).fold(f64::INFINITY, f64::min);
    Ok(RunOutput {
        table,
        extra_meta: vec![
            meta("slowest_decay_rate", format!("{decay:?}")),
            meta("half_beta_energy", format!("{:?}", p.half_beta_energy())),
        ],
    })
}
