//! Right-hand sides of the master equations for a system coupled to a heat
//! bath through Hermitian coupling operators `Q_j`.
//!
//! All three families share the form `dρ/dt = (i/ħ)[ρ,H] + R`:
//!
//! ```text
//! thermodynamic: R = -Σ_j w_j ( c_S [Q_j, [Q_j,H]_ρ]        + c_H [Q_j,[Q_j,ρ]] )
//! linearized:    R = -Σ_j w_j ( c_S [Q_j, ½{[Q_j,H], ρ}]    + c_H [Q_j,[Q_j,ρ]] )
//! Caldeira-Leggett: R = -(i/ħ)(ζ/2m)[Q,{P,ρ}] - (ζ kT/ħ²)[Q,[Q,ρ]]
//! ```
//!
//! with `c_S = M/kT`, `c_H = M` the heat-bath bracket coefficients.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{
    anticomm, comm, conditional, scale, trace_product, CMatrix, HermitianOperator,
    SpectralDecomposition,
};

/// Temperature dependence of the bracket strength `M(T_e)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingLaw {
    /// Temperature-independent `M`.
    Constant(f64),
    /// `M = ζ kT / ħ²` (particle friction coefficient ζ).
    Friction { zeta: f64, hbar: f64 },
    /// `M = γ0 kT / (ħω)` (spontaneous emission rate γ0).
    EmissionRate { gamma0: f64, hbar_omega: f64 },
}

impl CouplingLaw {
    pub fn strength(&self, kt: f64) -> f64 {
        match *self {
            CouplingLaw::Constant(m) => m,
            CouplingLaw::Friction { zeta, hbar } => zeta * kt / (hbar * hbar),
            CouplingLaw::EmissionRate { gamma0, hbar_omega } => gamma0 * kt / hbar_omega,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            CouplingLaw::Constant(m) => m >= 0.0,
            CouplingLaw::Friction { zeta, hbar } => zeta >= 0.0 && hbar > 0.0,
            CouplingLaw::EmissionRate { gamma0, hbar_omega } => gamma0 >= 0.0 && hbar_omega > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid coupling law {self:?}"
            )))
        }
    }
}

/// Heat bath with a single state variable, its energy.
///
/// With a finite heat capacity `C` the entropy is `S_e = C ln(H_e/E_ref)`,
/// so `kT_e = H_e / C`. With infinite capacity `kT_e` stays fixed and the
/// energy only records what has been exchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathState {
    law: CouplingLaw,
    kt: f64,
    energy: f64,
    heat_capacity: Option<f64>,
}

impl BathState {
    /// Infinite heat capacity at temperature `kt`; energy starts at zero.
    pub fn heat_bath(law: CouplingLaw, kt: f64) -> Result<Self> {
        law.validate()?;
        check_temperature(kt)?;
        Ok(Self {
            law,
            kt,
            energy: 0.0,
            heat_capacity: None,
        })
    }

    /// Finite heat capacity; the energy is `C·kt`.
    pub fn finite(law: CouplingLaw, kt: f64, heat_capacity: f64) -> Result<Self> {
        law.validate()?;
        check_temperature(kt)?;
        if !(heat_capacity > 0.0 && heat_capacity.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "heat capacity must be positive and finite, got {heat_capacity}"
            )));
        }
        Ok(Self {
            law,
            kt,
            energy: heat_capacity * kt,
            heat_capacity: Some(heat_capacity),
        })
    }

    /// Same bath with energy `energy`; the temperature follows when the heat
    /// capacity is finite.
    pub fn with_energy(&self, energy: f64) -> Result<Self> {
        let mut next = *self;
        next.energy = energy;
        if let Some(c) = self.heat_capacity {
            let kt = energy / c;
            check_temperature(kt)?;
            next.kt = kt;
        }
        Ok(next)
    }

    /// Same bath with energy `energy` but unchanged temperature.
    pub fn with_energy_at_fixed_temperature(&self, energy: f64) -> Self {
        Self { energy, ..*self }
    }

    pub fn law(&self) -> CouplingLaw {
        self.law
    }

    pub fn kt(&self) -> f64 {
        self.kt
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn heat_capacity(&self) -> Option<f64> {
        self.heat_capacity
    }

    /// `M(T_e)`.
    pub fn coupling(&self) -> f64 {
        self.law.strength(self.kt)
    }

    /// `S_e = C ln(H_e / E_ref)` for a finite bath.
    pub fn entropy(&self, reference_energy: f64) -> Option<f64> {
        self.heat_capacity
            .map(|c| c * (self.energy / reference_energy).ln())
    }
}

fn check_temperature(kt: f64) -> Result<()> {
    if kt > 0.0 && kt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "bath temperature must be positive, got {kt}"
        )))
    }
}

/// The two scalar prefactors of the dissipative terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketCoefficients {
    /// `{H_e, S_e}^Q = M/T_e` (with `k_B = 1`).
    pub entropy: f64,
    /// `{H_e, H_e}^Q = M`.
    pub energy: f64,
}

pub fn bracket_coefficients(bath: &BathState) -> BracketCoefficients {
    let m = bath.coupling();
    BracketCoefficients {
        entropy: m / bath.kt(),
        energy: m,
    }
}

/// A coupling operator with its relative strength.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub op: HermitianOperator,
    pub weight: f64,
}

/// Hamiltonian, coupling operators and ħ.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    hamiltonian: HermitianOperator,
    couplings: Vec<Coupling>,
    hbar: f64,
    // [Q_j, H], cached
    q_h: Vec<CMatrix>,
}

impl SystemSpec {
    /// Couplings with unit weight.
    pub fn new(
        hamiltonian: HermitianOperator,
        couplings: Vec<HermitianOperator>,
        hbar: f64,
    ) -> Result<Self> {
        let weighted = couplings
            .into_iter()
            .map(|op| Coupling { op, weight: 1.0 })
            .collect();
        Self::with_weights(hamiltonian, weighted, hbar)
    }

    pub fn with_weights(
        hamiltonian: HermitianOperator,
        couplings: Vec<Coupling>,
        hbar: f64,
    ) -> Result<Self> {
        if !(hbar > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "hbar must be positive, got {hbar}"
            )));
        }
        let dim = hamiltonian.dim();
        for c in &couplings {
            if c.op.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.op.dim(),
                });
            }
            if !(c.weight >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "negative coupling weight {}",
                    c.weight
                )));
            }
        }
        let q_h = couplings
            .iter()
            .map(|c| comm(&c.op, &hamiltonian))
            .collect();
        Ok(Self {
            hamiltonian,
            couplings,
            hbar,
            q_h,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `[Q_j, H]` for coupling `j`.
    pub fn coupling_commutator(&self, j: usize) -> &CMatrix {
        &self.q_h[j]
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }
}

/// Reversible and irreversible contributions to `dρ/dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rhs {
    /// `(i/ħ)[ρ, H]`
    pub reversible: CMatrix,
    /// `R`, traceless and Hermitian.
    pub irreversible: CMatrix,
}

impl Rhs {
    pub fn total(&self) -> CMatrix {
        &self.reversible + &self.irreversible
    }
}

/// `(i/ħ)[ρ, H]`.
pub fn von_neumann(rho: &CMatrix, h: &CMatrix, hbar: f64) -> CMatrix {
    comm(rho, h) * Complex64::new(0.0, 1.0 / hbar)
}

fn double_commutator_terms(
    spec: &SystemSpec,
    rho: &CMatrix,
    bath: &BathState,
    mut entropic: impl FnMut(usize) -> CMatrix,
) -> CMatrix {
    let coeffs = bracket_coefficients(bath);
    let mut r = CMatrix::zeros(spec.dim(), spec.dim());
    for (j, c) in spec.couplings.iter().enumerate() {
        if c.weight == 0.0 {
            continue;
        }
        let q = c.op.matrix();
        let x = entropic(j);
        let term =
            scale(&comm(q, &x), coeffs.entropy) + scale(&comm(q, &comm(q, rho)), coeffs.energy);
        r -= scale(&term, c.weight);
    }
    r
}

/// Thermodynamic (nonlinear) master equation.
pub fn rhs_thermodynamic(
    sd: &SpectralDecomposition,
    spec: &SystemSpec,
    bath: &BathState,
) -> Result<Rhs> {
    spec.check_dim(sd.dim())?;
    let rho = sd.reconstruct();
    Ok(thermodynamic(&rho, sd, spec, bath))
}

pub(crate) fn thermodynamic(
    rho: &CMatrix,
    sd: &SpectralDecomposition,
    spec: &SystemSpec,
    bath: &BathState,
) -> Rhs {
    let irreversible = double_commutator_terms(spec, rho, bath, |j| conditional(&spec.q_h[j], sd));
    Rhs {
        reversible: von_neumann(rho, &spec.hamiltonian, spec.hbar),
        irreversible,
    }
}

/// Linearized master equation, `[Q,H]_ρ → ½{[Q,H], ρ}`.
pub fn rhs_linearized(rho: &CMatrix, spec: &SystemSpec, bath: &BathState) -> Result<Rhs> {
    spec.check_dim(rho.nrows())?;
    Ok(linearized(rho, spec, bath))
}

pub(crate) fn linearized(rho: &CMatrix, spec: &SystemSpec, bath: &BathState) -> Rhs {
    let irreversible = double_commutator_terms(spec, rho, bath, |j| {
        scale(&anticomm(&spec.q_h[j], rho), 0.5)
    });
    Rhs {
        reversible: von_neumann(rho, &spec.hamiltonian, spec.hbar),
        irreversible,
    }
}

/// Particle of mass `m` coupled through its position to a heat bath.
#[derive(Debug, Clone, PartialEq)]
pub struct CaldeiraLeggettSystem {
    system: SystemSpec,
    momentum: HermitianOperator,
    mass: f64,
}

impl CaldeiraLeggettSystem {
    pub fn new(
        hamiltonian: HermitianOperator,
        position: HermitianOperator,
        momentum: HermitianOperator,
        mass: f64,
        hbar: f64,
    ) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mass must be positive, got {mass}"
            )));
        }
        if momentum.dim() != hamiltonian.dim() {
            return Err(Error::DimensionMismatch {
                expected: hamiltonian.dim(),
                found: momentum.dim(),
            });
        }
        let system = SystemSpec::new(hamiltonian, vec![position], hbar)?;
        Ok(Self {
            system,
            momentum,
            mass,
        })
    }

    /// Hamiltonian and the position as the single coupling.
    pub fn system(&self) -> &SystemSpec {
        &self.system
    }

    pub fn position(&self) -> &HermitianOperator {
        &self.system.couplings[0].op
    }

    pub fn momentum(&self) -> &HermitianOperator {
        &self.momentum
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
}

/// Caldeira-Leggett master equation. The friction coefficient is read off
/// the bath as `ζ = M ħ² / kT`.
pub fn rhs_caldeira_leggett(
    rho: &CMatrix,
    cl: &CaldeiraLeggettSystem,
    bath: &BathState,
) -> Result<Rhs> {
    cl.system.check_dim(rho.nrows())?;
    Ok(caldeira_leggett(rho, cl, bath))
}

pub(crate) fn caldeira_leggett(rho: &CMatrix, cl: &CaldeiraLeggettSystem, bath: &BathState) -> Rhs {
    let hbar = cl.system.hbar;
    let zeta = bath.coupling() * hbar * hbar / bath.kt();
    let q = cl.position().matrix();
    let friction =
        comm(q, &anticomm(&cl.momentum, rho)) * Complex64::new(0.0, zeta / (2.0 * cl.mass * hbar));
    let diffusion = scale(&comm(q, &comm(q, rho)), zeta * bath.kt() / (hbar * hbar));
    Rhs {
        reversible: von_neumann(rho, &cl.system.hamiltonian, hbar),
        irreversible: -(friction + diffusion),
    }
}

/// The three dynamics families behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum MasterEquation {
    Thermodynamic(SystemSpec),
    Linearized(SystemSpec),
    CaldeiraLeggett(CaldeiraLeggettSystem),
}

impl MasterEquation {
    pub fn system(&self) -> &SystemSpec {
        match self {
            MasterEquation::Thermodynamic(s) | MasterEquation::Linearized(s) => s,
            MasterEquation::CaldeiraLeggett(cl) => &cl.system,
        }
    }

    pub fn dim(&self) -> usize {
        self.system().dim()
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        self.system().hamiltonian()
    }

    pub fn hbar(&self) -> f64 {
        self.system().hbar()
    }

    pub fn name(&self) -> &'static str {
        match self {
            MasterEquation::Thermodynamic(_) => "thermodynamic",
            MasterEquation::Linearized(_) => "linearized",
            MasterEquation::CaldeiraLeggett(_) => "caldeira_leggett",
        }
    }

    pub fn requires_spectrum(&self) -> bool {
        matches!(self, MasterEquation::Thermodynamic(_))
    }

    /// Right-hand side at `rho`. The thermodynamic equation needs the
    /// spectral decomposition of `rho`; it is computed when not supplied.
    pub fn rhs(
        &self,
        rho: &CMatrix,
        sd: Option<&SpectralDecomposition>,
        bath: &BathState,
    ) -> Result<Rhs> {
        self.system().check_dim(rho.nrows())?;
        Ok(match self {
            MasterEquation::Thermodynamic(spec) => match sd {
                Some(sd) => thermodynamic(rho, sd, spec, bath),
                None => {
                    let sd = SpectralDecomposition::of_hermitian(rho)?;
                    thermodynamic(rho, &sd, spec, bath)
                }
            },
            MasterEquation::Linearized(spec) => linearized(rho, spec, bath),
            MasterEquation::CaldeiraLeggett(cl) => caldeira_leggett(rho, cl, bath),
        })
    }

    /// Energy flowing into the bath, `dH_e/dt = -tr(H R)`.
    pub fn bath_energy_rate(&self, irreversible: &CMatrix) -> f64 {
        -trace_product(self.hamiltonian(), irreversible).re
    }
}
