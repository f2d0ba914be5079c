//! Thermodynamic bookkeeping for heat-bath runs: free energy, entropy
//! production along two independent routes, energy exchange with the bath,
//! and overlaps between energy and density-matrix eigenstates.

use crate::error::{Error, Result};
use crate::master::{bracket_coefficients, BathState, SystemSpec};
use crate::operator::{
    comm, conditional, operator_log, scale, times_i, trace_product, CMatrix, HermitianOperator,
    SpectralDecomposition, EIGENVALUE_FLOOR,
};

/// Entropy production rates in units of `k_B` per time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyReport {
    /// `-tr(ln ρ · R)`
    pub system_entropy_rate: f64,
    /// `(1/T_e) dH_e/dt`
    pub bath_entropy_rate: f64,
    pub total_rate: f64,
    /// `Σ_j w_j M/T_e² ⟨⟨i[Q_j,F]; i[Q_j,F]⟩⟩`
    pub canonical_form_rate: f64,
}

/// Helmholtz free energy operator `F = H + kT ln ρ`.
pub fn free_energy_operator(
    h: &CMatrix,
    sd: &SpectralDecomposition,
    kt: f64,
) -> Result<HermitianOperator> {
    if !(kt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {kt}"
        )));
    }
    if h.nrows() != sd.dim() {
        return Err(Error::DimensionMismatch {
            expected: sd.dim(),
            found: h.nrows(),
        });
    }
    let f = h + scale(&operator_log(sd, EIGENVALUE_FLOOR), kt);
    Ok(HermitianOperator::hermitian_part(&f))
}

/// Von Neumann entropy `-Σ p ln p` (zero and negative eigenvalues dropped).
pub fn von_neumann_entropy(sd: &SpectralDecomposition) -> f64 {
    sd.eigenvalues
        .iter()
        .filter(|&&p| p > EIGENVALUE_FLOOR)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Energy flowing into the bath per unit time, from the bath-side equation:
/// `Σ_j w_j ( -c_S ⟨⟨[Q,H];[Q,H]⟩⟩ + c_H ⟨[Q,[Q,H]]⟩ )`.
pub fn environment_energy_rate(
    sd: &SpectralDecomposition,
    spec: &SystemSpec,
    bath: &BathState,
) -> Result<f64> {
    if spec.dim() != sd.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: sd.dim(),
        });
    }
    let coeffs = bracket_coefficients(bath);
    let rho = sd.reconstruct();
    let mut rate = 0.0;
    for (j, c) in spec.couplings().iter().enumerate() {
        let x = spec.coupling_commutator(j);
        // ⟨⟨X;X⟩⟩ = -⟨⟨iX;iX⟩⟩ for anti-Hermitian X
        let ix = times_i(x);
        let corr = -trace_product(&conditional(&ix, sd), &ix).re;
        let double = comm(c.op.matrix(), x);
        let avg = trace_product(&double, &rho).re;
        rate += c.weight * (-coeffs.entropy * corr + coeffs.energy * avg);
    }
    Ok(rate)
}

/// Entropy production of system plus bath for a given irreversible part `R`.
pub fn entropy_rate(
    sd: &SpectralDecomposition,
    spec: &SystemSpec,
    bath: &BathState,
    irreversible: &CMatrix,
) -> Result<EntropyReport> {
    if spec.dim() != sd.dim() || irreversible.nrows() != sd.dim() {
        return Err(Error::DimensionMismatch {
            expected: sd.dim(),
            found: spec.dim().max(irreversible.nrows()),
        });
    }
    let ln_rho = operator_log(sd, EIGENVALUE_FLOOR);
    let system = -trace_product(&ln_rho, irreversible).re;
    let bath_energy_rate = -trace_product(spec.hamiltonian(), irreversible).re;
    let bath_rate = bath_energy_rate / bath.kt();

    let f = free_energy_operator(spec.hamiltonian(), sd, bath.kt())?;
    let m = bath.coupling();
    let mut canonical = 0.0;
    for c in spec.couplings() {
        let y = times_i(&comm(c.op.matrix(), &f));
        canonical += c.weight * trace_product(&conditional(&y, sd), &y).re;
    }
    canonical *= m / (bath.kt() * bath.kt());

    Ok(EntropyReport {
        system_entropy_rate: system,
        bath_entropy_rate: bath_rate,
        total_rate: system + bath_rate,
        canonical_form_rate: canonical,
    })
}

/// Energy eigenbasis of `h`, columns ordered by increasing energy.
pub fn energy_basis(h: &CMatrix) -> Result<CMatrix> {
    let sd = SpectralDecomposition::of_hermitian(h)?;
    let n = sd.dim();
    let mut basis = CMatrix::zeros(n, n);
    for j in 0..n {
        basis.set_column(j, &sd.eigenvectors.column(n - 1 - j));
    }
    Ok(basis)
}

/// `|⟨j|π_j⟩|` for `j < count`, pairing the j-th column of `basis` with the
/// j-th most probable eigenvector of ρ.
pub fn overlaps(sd: &SpectralDecomposition, basis: &CMatrix, count: usize) -> Result<Vec<f64>> {
    let rank = sd.dim().min(basis.ncols());
    if count > rank {
        return Err(Error::IndexOutOfRange {
            index: count - 1,
            rank,
        });
    }
    Ok((0..count)
        .map(|j| {
            let v = (basis.column(j).adjoint() * sd.eigenvectors.column(j))[(0, 0)];
            v.norm().min(1.0)
        })
        .collect())
}

/// Overlap time series over stored density-matrix snapshots; one inner
/// vector per `j < count`.
pub fn overlap_series(snapshots: &[CMatrix], h: &CMatrix, count: usize) -> Result<Vec<Vec<f64>>> {
    let basis = energy_basis(h)?;
    let mut series = vec![Vec::with_capacity(snapshots.len()); count];
    for rho in snapshots {
        let sd = SpectralDecomposition::of_hermitian(rho)?;
        for (j, v) in overlaps(&sd, &basis, count)?.into_iter().enumerate() {
            series[j].push(v);
        }
    }
    Ok(series)
}
