//! Truncated Fock-space operators, canonical states, and the minimal dense
//! complex linear algebra the rest of the crate consumes.
//!
//! Everything is dense: at desk scale (D ≤ ~200) sparsity bookkeeping is not
//! worth it outside the Liouvillian assembly.

use crate::{Error, Result, C64};
use ndarray::prelude::*;
use ndarray_linalg::{Norm, UPLO};
use serde::{Deserialize, Serialize};

/// Hermiticity tolerance for density matrices: `max|ρ − ρ†| ≤ HERM_TOL`.
pub const HERM_TOL: f64 = 1e-10;
/// Trace tolerance for density matrices: `|tr ρ − 1| ≤ TRACE_TOL`.
pub const TRACE_TOL: f64 = 1e-8;
/// Positivity tolerance: smallest eigenvalue ≥ `−POS_TOL`.
pub const POS_TOL: f64 = 1e-8;
/// A state is considered converged in truncation when the population of the
/// top [`TRUNCATION_LEVELS`] Fock levels is below this.
pub const TRUNCATION_TOL: f64 = 1e-6;
/// Number of top Fock levels inspected by [`truncation_converged`].
pub const TRUNCATION_LEVELS: usize = 5;

/// Dense operator on a truncated Fock space of dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    entries: Array2<C64>,
}

impl Operator {
    /// Wrap a `dim × dim` complex matrix, checking shape and finiteness.
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        let dim = entries.nrows();
        if dim < 2 || entries.ncols() != dim {
            return Err(Error::InvalidDimension(dim));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParams("operator entries must be finite".into()));
        }
        Ok(Self { dim, entries })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Self { dim, entries: Array2::zeros((dim, dim)) })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Self { dim, entries: Array2::eye(dim) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<C64> {
        self.entries
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self { dim: self.dim, entries: self.entries.t().mapv(|z| z.conj()) }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch(self.dim, other.dim));
        }
        Ok(Self { dim: self.dim, entries: self.entries.dot(&other.entries) })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch(self.dim, other.dim));
        }
        Ok(Self { dim: self.dim, entries: &self.entries + &other.entries })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch(self.dim, other.dim));
        }
        Ok(Self { dim: self.dim, entries: &self.entries - &other.entries })
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { dim: self.dim, entries: self.entries.mapv(|e| e * z) }
    }

    pub fn trace(&self) -> C64 {
        self.entries.diag().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm_l2()
    }

    /// `max |A − A†|` over all entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = &self.entries - &self.entries.t().mapv(|z| z.conj());
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Hermitian, unit-trace, positive-semidefinite operator: the system state.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    /// Validate Hermiticity (≤ [`HERM_TOL`]), trace (±[`TRACE_TOL`]) and
    /// positivity (λ_min ≥ −[`POS_TOL`]).
    pub fn new(op: Operator) -> Result<Self> {
        Self::new_with_pos_tol(op, POS_TOL)
    }

    /// As [`new`](Self::new) but with a caller-chosen positivity floor;
    /// numerical steady states near criticality carry slightly larger
    /// negative eigenvalues than exactly constructed states.
    pub fn new_with_pos_tol(op: Operator, pos_tol: f64) -> Result<Self> {
        let herm = op.hermiticity_defect();
        if herm > HERM_TOL {
            return Err(Error::NotDensityMatrix(format!(
                "hermiticity defect {herm:.3e} > {HERM_TOL:.0e}"
            )));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::NotDensityMatrix(format!("trace {tr} not 1 within {TRACE_TOL:.0e}")));
        }
        let lam_min = min_eigenvalue(&op)?;
        if lam_min < -pos_tol {
            return Err(Error::NotDensityMatrix(format!(
                "smallest eigenvalue {lam_min:.3e} < -{pos_tol:.0e}"
            )));
        }
        Ok(Self { op })
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.op.entries
    }

    /// Diagonal populations ⟨n|ρ|n⟩.
    pub fn populations(&self) -> Vec<f64> {
        self.op.entries.diag().iter().map(|z| z.re).collect()
    }
}

fn min_eigenvalue(op: &Operator) -> Result<f64> {
    use ndarray_linalg::Eigh;
    // eigh wants an exactly Hermitian input; symmetrize the tolerated defect.
    let h = (&op.entries + &op.entries.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
    let (vals, _) = h.eigh(UPLO::Lower)?;
    Ok(vals.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Physical parameter record of the driven-dissipative Kerr oscillator.
///
/// `delta`, `u`, `xi`, `xi2` are angular frequencies, `gamma`, `gamma_phi`,
/// `gamma2` rates, all in the same inverse-time unit; `n_thermal` is the
/// dimensionless bath occupation and `dim` the Fock truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub delta: f64,
    pub u: f64,
    pub xi: C64,
    pub gamma: f64,
    #[serde(default)]
    pub gamma_phi: f64,
    #[serde(default)]
    pub n_thermal: f64,
    #[serde(default)]
    pub xi2: f64,
    #[serde(default)]
    pub gamma2: f64,
    pub dim: usize,
}

impl SystemParams {
    pub fn new(delta: f64, u: f64, xi: C64, gamma: f64, dim: usize) -> Result<Self> {
        let p = Self {
            delta,
            u,
            xi,
            gamma,
            gamma_phi: 0.0,
            n_thermal: 0.0,
            xi2: 0.0,
            gamma2: 0.0,
            dim,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidDimension(self.dim));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParams(format!("gamma = {} must be > 0", self.gamma)));
        }
        for (name, v) in [
            ("gamma_phi", self.gamma_phi),
            ("gamma2", self.gamma2),
            ("n_thermal", self.n_thermal),
        ] {
            if !(v >= 0.0) {
                return Err(Error::InvalidParams(format!("{name} = {v} must be >= 0")));
            }
        }
        for (name, v) in [
            ("delta", self.delta),
            ("u", self.u),
            ("xi.re", self.xi.re),
            ("xi.im", self.xi.im),
            ("xi2", self.xi2),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} = {v} must be finite")));
            }
        }
        Ok(())
    }

    pub fn with_xi(mut self, xi: C64) -> Self {
        self.xi = xi;
        self
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_thermal(mut self, n_thermal: f64) -> Self {
        self.n_thermal = n_thermal;
        self
    }

    pub fn with_dephasing(mut self, gamma_phi: f64) -> Self {
        self.gamma_phi = gamma_phi;
        self
    }

    pub fn with_two_photon(mut self, xi2: f64, gamma2: f64) -> Self {
        self.xi2 = xi2;
        self.gamma2 = gamma2;
        self
    }
}

/// Annihilation operator: `a|n⟩ = √n |n−1⟩`.
pub fn annihilation(dim: usize) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let mut m = Array2::<C64>::zeros((dim, dim));
    for n in 1..dim {
        m[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    Operator::new(m)
}

/// Creation operator a†.
pub fn creation(dim: usize) -> Result<Operator> {
    Ok(annihilation(dim)?.dagger())
}

/// Number operator a†a.
pub fn number(dim: usize) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let mut m = Array2::<C64>::zeros((dim, dim));
    for n in 0..dim {
        m[[n, n]] = C64::new(n as f64, 0.0);
    }
    Operator::new(m)
}

/// Vacuum projector |0⟩⟨0|.
pub fn vacuum(dim: usize) -> Result<DensityMatrix> {
    let mut m = Array2::<C64>::zeros((dim, dim));
    m[[0, 0]] = C64::new(1.0, 0.0);
    DensityMatrix::new(Operator::new(m)?)
}

/// Pure coherent state |α⟩⟨α|, renormalized after truncation.
///
/// Requires `|α|² ≤ dim/4` and a pre-normalization tail weight ≤ 1e−8.
pub fn coherent_state(alpha: C64, dim: usize) -> Result<DensityMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let n2 = alpha.norm_sqr();
    if n2 > dim as f64 / 4.0 {
        return Err(Error::TruncationInadequate(format!(
            "|alpha|^2 = {n2:.3} exceeds dim/4 = {}",
            dim as f64 / 4.0
        )));
    }
    // c_n = e^{-|α|²/2} αⁿ/√(n!), built by recurrence.
    let mut amps = Vec::with_capacity(dim);
    let mut c = C64::new((-n2 / 2.0).exp(), 0.0);
    amps.push(c);
    for n in 1..dim {
        c = c * alpha / C64::new((n as f64).sqrt(), 0.0);
        amps.push(c);
    }
    let weight: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    if 1.0 - weight > 1e-8 {
        return Err(Error::TruncationInadequate(format!(
            "coherent-state tail weight {:.3e} > 1e-8 at dim {dim}",
            1.0 - weight
        )));
    }
    let scale = weight.sqrt();
    let mut m = Array2::<C64>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            m[[i, j]] = amps[i] * amps[j].conj() / scale.powi(2);
        }
    }
    DensityMatrix::new(Operator::new(m)?)
}

/// Thermal state with mean occupation `n_bar`: diagonal Boltzmann weights
/// ∝ (n̄/(1+n̄))ⁿ, renormalized over the truncation.
pub fn thermal_state(n_bar: f64, dim: usize) -> Result<DensityMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    if !(n_bar >= 0.0) {
        return Err(Error::InvalidParams(format!("n_bar = {n_bar} must be >= 0")));
    }
    let q = n_bar / (1.0 + n_bar);
    let mut w = Vec::with_capacity(dim);
    let mut x = 1.0;
    for _ in 0..dim {
        w.push(x);
        x *= q;
    }
    let z: f64 = w.iter().sum();
    let mut m = Array2::<C64>::zeros((dim, dim));
    for n in 0..dim {
        m[[n, n]] = C64::new(w[n] / z, 0.0);
    }
    DensityMatrix::new(Operator::new(m)?)
}

/// tr(Aρ).
pub fn expectation(rho: &DensityMatrix, a: &Operator) -> Result<C64> {
    if rho.dim() != a.dim() {
        return Err(Error::DimMismatch(rho.dim(), a.dim()));
    }
    // tr(Aρ) = Σ_{ij} A_{ij} ρ_{ji}
    let mut s = C64::new(0.0, 0.0);
    for i in 0..a.dim() {
        for j in 0..a.dim() {
            s += a.entries[[i, j]] * rho.op.entries[[j, i]];
        }
    }
    Ok(s)
}

/// Population of the top [`TRUNCATION_LEVELS`] Fock levels.
pub fn tail_population(rho: &DensityMatrix) -> f64 {
    let d = rho.dim();
    let lo = d.saturating_sub(TRUNCATION_LEVELS);
    rho.populations()[lo..].iter().sum()
}

/// Standardized truncation-adequacy predicate: the population of the top
/// [`TRUNCATION_LEVELS`] Fock levels must be below [`TRUNCATION_TOL`].
pub fn truncation_converged(rho: &DensityMatrix) -> bool {
    tail_population(rho) < TRUNCATION_TOL
}
