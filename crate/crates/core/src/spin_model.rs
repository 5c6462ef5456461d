//! Battery Hamiltonian and initial states.
//!
//! The battery is an open-boundary transverse-field XY chain
//!
//! ```text
//! H = (h/2) Σ_j σz_j + (J/4) Σ_{j<N} [(1+γ) σx_j σx_{j+1} + (1-γ) σy_j σy_{j+1}]
//! ```
//!
//! written in the σz eigenbasis with |0⟩ the +1 eigenvector and tensor
//! order site 1 ⊗ … ⊗ site N.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, site_mask, CMatrix, C64, ZERO};
use crate::{Error, Result};

/// Default cap on the chain length; a 12-site density matrix is 4096×4096.
pub const DEFAULT_MAX_SITES: usize = 12;

/// Spectra narrower than this cannot be normalised.
const MIN_SPECTRAL_WIDTH: f64 = 1e-14;

/// Eigenvalue gap below which a ground space counts as degenerate.
const DEGENERACY_GAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinChainParams {
    pub n_sites: usize,
    pub field_h: f64,
    /// λ = J/h.
    pub coupling_lambda: f64,
    pub anisotropy_gamma: f64,
    pub boundary: Boundary,
}

impl SpinChainParams {
    /// Transverse Ising chain (γ = 1) with unit field.
    pub fn new(n_sites: usize, coupling_lambda: f64) -> Self {
        Self {
            n_sites,
            field_h: 1.0,
            coupling_lambda,
            anisotropy_gamma: 1.0,
            boundary: Boundary::Open,
        }
    }

    pub fn with_anisotropy(mut self, gamma: f64) -> Self {
        self.anisotropy_gamma = gamma;
        self
    }

    pub fn with_field(mut self, h: f64) -> Self {
        self.field_h = h;
        self
    }

    /// J = λ·h.
    pub fn coupling_j(&self) -> f64 {
        self.coupling_lambda * self.field_h
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidParameter("n_sites ≥ 2".into()));
        }
        if !(self.anisotropy_gamma >= 0.0) || !self.anisotropy_gamma.is_finite() {
            return Err(Error::InvalidParameter("anisotropy_gamma ≥ 0".into()));
        }
        if self.field_h == 0.0 || !self.field_h.is_finite() {
            return Err(Error::InvalidParameter("field_h ≠ 0".into()));
        }
        if !self.coupling_lambda.is_finite() {
            return Err(Error::InvalidParameter("coupling_lambda must be finite".into()));
        }
        Ok(())
    }
}

/// Builds the chain Hamiltonian with the default size cap.
pub fn build_hamiltonian(params: &SpinChainParams) -> Result<CMatrix> {
    build_hamiltonian_capped(params, DEFAULT_MAX_SITES)
}

pub fn build_hamiltonian_capped(params: &SpinChainParams, max_sites: usize) -> Result<CMatrix> {
    params.validate()?;
    let n = params.n_sites;
    if n > max_sites {
        return Err(Error::DimensionOverflow { n_sites: n, max_sites });
    }
    let dim = params.dim();
    let h = params.field_h;
    let j = params.coupling_j();
    let g = params.anisotropy_gamma;
    // σxσx and σyσy both flip the two bond bits; σyσy contributes -1 when
    // the bits agree and +1 when they differ.
    let same = 0.25 * j * ((1.0 + g) - (1.0 - g));
    let differ = 0.25 * j * ((1.0 + g) + (1.0 - g));

    let mut m = CMatrix::zeros(dim, dim);
    for a in 0..dim {
        let up = (0..n).filter(|&k| a & (1 << k) == 0).count() as f64;
        m[(a, a)] = C64::new(0.5 * h * (2.0 * up - n as f64), 0.0);
        for site in 1..n {
            let m1 = site_mask(site, n);
            let m2 = site_mask(site + 1, n);
            let b = a ^ m1 ^ m2;
            let equal = ((a & m1) != 0) == ((a & m2) != 0);
            m[(b, a)] += C64::new(if equal { same } else { differ }, 0.0);
        }
    }
    Ok(m)
}

/// Hamiltonian with its spectrum affinely mapped onto `[0, 1]`.
#[derive(Debug, Clone)]
pub struct NormalizedHamiltonian {
    pub matrix: CMatrix,
    pub e0_raw: f64,
    pub emax_raw: f64,
}

/// `(H - e0 I)/(emax - e0)` with `e0`, `emax` the extreme eigenvalues of `H`.
pub fn normalize_spectrum(h: &CMatrix) -> Result<NormalizedHamiltonian> {
    let values = linalg::hermitian_eigenvalues(h)?;
    let e0 = values[0];
    let emax = values[values.len() - 1];
    let width = emax - e0;
    if width < MIN_SPECTRAL_WIDTH {
        return Err(Error::DegenerateSpectrum(width));
    }
    let mut matrix = h.clone();
    for k in 0..matrix.nrows() {
        matrix[(k, k)] -= C64::new(e0, 0.0);
    }
    matrix.unscale_mut(width);
    Ok(NormalizedHamiltonian { matrix, e0_raw: e0, emax_raw: emax })
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite
/// within tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub const TRACE_TOL: f64 = 1e-10;
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const POSITIVITY_TOL: f64 = 1e-8;

    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || linalg::qubit_count(matrix.nrows()).is_none() {
            return Err(Error::Shape(format!(
                "density matrix must be square with power-of-two dimension, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let tr = linalg::trace(&matrix);
        if (tr - C64::new(1.0, 0.0)).norm() > Self::TRACE_TOL {
            return Err(Error::NonPhysical(format!("trace {tr} differs from 1")));
        }
        let herm = linalg::hermiticity_error(&matrix);
        if herm > Self::HERMITIAN_TOL {
            return Err(Error::NonPhysical(format!("hermiticity error {herm:e}")));
        }
        let min = linalg::hermitian_eigenvalues(&matrix)?[0];
        if min < -Self::POSITIVITY_TOL {
            return Err(Error::NonPhysical(format!("minimum eigenvalue {min:e}")));
        }
        Ok(Self(matrix))
    }

    /// Wraps a matrix without validation. Callers are responsible for the
    /// invariants.
    pub fn new_unchecked(matrix: CMatrix) -> Self {
        Self(matrix)
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalised) state vector.
    pub fn from_pure(psi: &DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NonPhysical("zero state vector".into()));
        }
        let psi = psi.unscale(norm);
        Ok(Self(&psi * psi.adjoint()))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim).unscale(dim as f64))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut CMatrix {
        &mut self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_sites(&self) -> usize {
        linalg::qubit_count(self.dim()).unwrap_or(0)
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.0)
    }

    pub fn purity(&self) -> f64 {
        // Tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ.
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(linalg::hermitian_eigenvalues(&self.0)?[0])
    }

    /// `Tr(O ρ)`.
    pub fn expectation(&self, op: &CMatrix) -> C64 {
        let n = self.dim();
        let mut acc = ZERO;
        for a in 0..n {
            for b in 0..n {
                acc += op[(a, b)] * self.0[(b, a)];
            }
        }
        acc
    }

    /// `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::Shape("trace distance between different dimensions".into()));
        }
        let diff = &self.0 - &other.0;
        Ok(0.5 * linalg::hermitian_eigenvalues(&diff)?.iter().map(|v| v.abs()).sum::<f64>())
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub state: DensityMatrix,
    pub energy: f64,
    /// Set when the two lowest eigenvalues lie within 1e-12; the state is
    /// then the lowest-index eigenvector of the ground space.
    pub degenerate: bool,
}

pub fn ground_state(h: &CMatrix) -> Result<GroundState> {
    let (values, vectors) = linalg::hermitian_eigen(h)?;
    let degenerate = values.len() > 1 && values[1] - values[0] < DEGENERACY_GAP;
    let psi = vectors.column(0).into_owned();
    Ok(GroundState {
        state: DensityMatrix::from_pure(&psi)?,
        energy: values[0],
        degenerate,
    })
}

/// `exp(-βH)/Z` via eigendecomposition.
pub fn thermal_state(h: &CMatrix, beta: f64) -> Result<DensityMatrix> {
    if beta < 0.0 || beta.is_nan() {
        return Err(Error::NegativeBeta(beta));
    }
    if !beta.is_finite() {
        return Err(Error::InvalidParameter("beta must be finite".into()));
    }
    let (values, vectors) = linalg::hermitian_eigen(h)?;
    let e0 = values[0];
    // Shifting by the ground energy keeps every weight in (0, 1].
    let weights: Vec<f64> = values.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let n = h.nrows();
    let mut rho = CMatrix::zeros(n, n);
    for (k, w) in weights.iter().enumerate() {
        let p = w / z;
        if p == 0.0 {
            continue;
        }
        let v = vectors.column(k);
        rho += (v * v.adjoint()).scale(p);
    }
    linalg::hermitize(&mut rho);
    Ok(DensityMatrix::new_unchecked(rho))
}

/// Two-qubit ground-state parameterisation used by the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitClosedFormParams {
    pub p: f64,
    pub e0: f64,
}

impl TwoQubitClosedFormParams {
    /// `e0 = -sqrt(h² + 5J²/8)`, `p = 4(h + e0)/J`.
    pub fn new(h: f64, j: f64) -> Result<Self> {
        if j == 0.0 {
            return Err(Error::PUndefined);
        }
        let e0 = -(h * h + 5.0 * j * j / 8.0).sqrt();
        Ok(Self { p: 4.0 * (h + e0) / j, e0 })
    }
}

/// The closed-form two-qubit state with weight `p²` on |00⟩ and 1 on |11⟩,
/// normalised.
pub fn two_qubit_closed_form_ground(
    h: f64,
    j: f64,
) -> Result<(TwoQubitClosedFormParams, DensityMatrix)> {
    let params = TwoQubitClosedFormParams::new(h, j)?;
    let p = params.p;
    let a = 1.0 + p * p;
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = C64::new(p * p / a, 0.0);
    m[(0, 3)] = C64::new(p / a, 0.0);
    m[(3, 0)] = C64::new(p / a, 0.0);
    m[(3, 3)] = C64::new(1.0 / a, 0.0);
    Ok((params, DensityMatrix::new_unchecked(m)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Paramagnetic,
    Antiferromagnetic,
    Ferromagnetic,
    Critical,
}

pub fn phase_label(lambda: f64) -> Phase {
    if (lambda.abs() - 1.0).abs() <= 1e-12 {
        Phase::Critical
    } else if lambda.abs() < 1.0 {
        Phase::Paramagnetic
    } else if lambda > 1.0 {
        Phase::Antiferromagnetic
    } else {
        Phase::Ferromagnetic
    }
}
