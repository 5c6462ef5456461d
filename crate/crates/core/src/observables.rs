//! Work, power, reduced states and entanglement.

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::linalg::{self, CMatrix, ZERO};
use crate::spin_model::DensityMatrix;
use crate::{Error, Result};

/// Largest tolerated imaginary part of `Tr(Hρ)`.
pub const IMAG_TOL: f64 = 1e-8;
/// Log-negativity values below this are reported as exactly zero.
pub const LOG_NEG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkSeries {
    pub times: Vec<f64>,
    pub work: Vec<f64>,
    /// `|dW/dt|`, filled by [`instantaneous_power`].
    pub power: Option<Vec<f64>>,
}

impl WorkSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Builds a series from absolute energies `Tr(Hρ_t)`.
    pub fn from_energies(times: Vec<f64>, energies: &[f64]) -> Self {
        let base = energies.first().copied().unwrap_or(0.0);
        let work = energies.iter().map(|e| e - base).collect();
        Self { times, work, power: None }
    }

    pub fn with_power(self) -> Result<Self> {
        instantaneous_power(self)
    }

    pub fn final_work(&self) -> Option<f64> {
        self.work.last().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementSeries {
    pub times: Vec<f64>,
    pub log_negativity: Vec<f64>,
}

/// Real part of `Tr(Hρ)`, rejecting states with a sizeable imaginary part.
pub fn energy(rho: &DensityMatrix, h: &CMatrix) -> Result<f64> {
    let e = rho.expectation(h);
    if e.im.abs() > IMAG_TOL {
        return Err(Error::NonPhysical(format!("Tr(Hρ) has imaginary part {:e}", e.im)));
    }
    Ok(e.re)
}

/// `W(t_i) = Tr(Hρ_{t_i}) − Tr(Hρ_0)`.
pub fn work(traj: &Trajectory, h: &CMatrix) -> Result<WorkSeries> {
    let energies = traj.states.iter().map(|s| energy(s, h)).collect::<Result<Vec<_>>>()?;
    Ok(WorkSeries::from_energies(traj.times.clone(), &energies))
}

/// Derivative on a sampled grid: central differences inside, one-sided at
/// the two ends. Needs at least two samples.
pub fn gradient(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let n = times.len();
    if n != values.len() {
        return Err(Error::Grid(format!("{} times but {} values", n, values.len())));
    }
    if n < 2 {
        return Err(Error::Grid("need at least 2 samples".into()));
    }
    let mut out = Vec::with_capacity(n);
    out.push((values[1] - values[0]) / (times[1] - times[0]));
    for k in 1..n - 1 {
        out.push((values[k + 1] - values[k - 1]) / (times[k + 1] - times[k - 1]));
    }
    out.push((values[n - 1] - values[n - 2]) / (times[n - 1] - times[n - 2]));
    Ok(out)
}

/// Checks that `times` is evenly spaced to within a relative 1e-9.
pub fn check_uniform(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Grid("need at least 2 samples".into()));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::Grid("times must be increasing".into()));
    }
    for (k, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
            return Err(Error::Grid(format!("non-uniform spacing at sample {}", k + 1)));
        }
    }
    Ok(dt)
}

/// Fills `power = |dW/dt|`.
pub fn instantaneous_power(mut series: WorkSeries) -> Result<WorkSeries> {
    if series.len() < 3 {
        return Err(Error::Grid("power needs at least 3 samples".into()));
    }
    check_uniform(&series.times)?;
    let slope = gradient(&series.times, &series.work)?;
    series.power = Some(slope.into_iter().map(f64::abs).collect());
    Ok(series)
}

/// Partial trace keeping `keep` (1-based sites, output ordered as given).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let n = rho.n_sites();
    for (k, &s) in keep.iter().enumerate() {
        if s == 0 || s > n {
            return Err(Error::InvalidSite { site: s, n_sites: n });
        }
        if keep[..k].contains(&s) {
            return Err(Error::InvalidSite { site: s, n_sites: n });
        }
    }
    let traced: Vec<usize> = (1..=n).filter(|s| !keep.contains(s)).collect();
    let spread = |bits: usize, sites: &[usize]| -> usize {
        let len = sites.len();
        sites
            .iter()
            .enumerate()
            .filter(|(i, _)| bits >> (len - 1 - i) & 1 == 1)
            .fold(0, |acc, (_, &s)| acc | linalg::site_mask(s, n))
    };
    let kept_idx: Vec<usize> = (0..1usize << keep.len()).map(|x| spread(x, keep)).collect();
    let env_idx: Vec<usize> = (0..1usize << traced.len()).map(|e| spread(e, &traced)).collect();

    let m = rho.matrix();
    let d = kept_idx.len();
    let mut out = CMatrix::zeros(d, d);
    for (x, &kx) in kept_idx.iter().enumerate() {
        for (y, &ky) in kept_idx.iter().enumerate() {
            let mut acc = ZERO;
            for &e in &env_idx {
                acc += m[(kx | e, ky | e)];
            }
            out[(x, y)] = acc;
        }
    }
    Ok(DensityMatrix::new_unchecked(out))
}

/// Two-site reduced state.
pub fn reduced_state(rho: &DensityMatrix, keep: (usize, usize)) -> Result<DensityMatrix> {
    partial_trace(rho, &[keep.0, keep.1])
}

/// Partial transpose of a two-qubit matrix on qubit `which` (1 or 2).
pub fn partial_transpose(rho: &CMatrix, which: usize) -> Result<CMatrix> {
    if rho.shape() != (4, 4) {
        return Err(Error::Shape(format!("expected 4x4, got {:?}", rho.shape())));
    }
    let mask = match which {
        1 => 0b10,
        2 => 0b01,
        _ => return Err(Error::InvalidSite { site: which, n_sites: 2 }),
    };
    Ok(CMatrix::from_fn(4, 4, |a, b| {
        let swap = (a ^ b) & mask;
        rho[(a ^ swap, b ^ swap)]
    }))
}

/// `log2 ‖ρ^{T_2}‖_1`, clipped to zero below [`LOG_NEG_FLOOR`].
pub fn log_negativity(rho: &DensityMatrix) -> Result<f64> {
    log_negativity_on(rho, 2)
}

/// Log-negativity with the transpose taken on qubit `which`.
pub fn log_negativity_on(rho: &DensityMatrix, which: usize) -> Result<f64> {
    let pt = partial_transpose(rho.matrix(), which)?;
    let norm: f64 = linalg::hermitian_eigenvalues(&pt)?.iter().map(|l| l.abs()).sum();
    let ln = norm.log2();
    Ok(if ln < LOG_NEG_FLOOR { 0.0 } else { ln })
}

/// Log-negativity of the reduced state on `pair` at every recorded time.
pub fn entanglement_series(traj: &Trajectory, pair: (usize, usize)) -> Result<EntanglementSeries> {
    let log_negativity = traj
        .states
        .iter()
        .map(|s| reduced_state(s, pair).and_then(|r| log_negativity(&r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EntanglementSeries { times: traj.times.clone(), log_negativity })
}
