//! Lindblad generator and fixed-step RK4 integration.
//!
//! The generator is never materialised as a `4^N × 4^N` superoperator. The
//! Hamiltonian is applied through a compressed-row copy of its nonzeros and
//! each local channel through bit-mask index arithmetic, so one evaluation
//! costs `O((nnz_row + #channels) · 4^N)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{ChannelSet, JumpKind, RateSchedule};
use crate::linalg::{self, site_mask, CMatrix, C64, ZERO};
use crate::observables;
use crate::spin_model::DensityMatrix;
use crate::{Error, Result};

/// Columns are processed in parallel once the Hilbert space is at least
/// this large.
const PARALLEL_DIM: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub step_dt: f64,
    pub t_max: f64,
    /// Record one state every this many steps.
    pub record_every: usize,
    pub positivity_tol: f64,
    pub trace_tol: f64,
    /// Run the eigenvalue positivity check on every k-th recorded state.
    pub positivity_check_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step_dt: 1e-3,
            t_max: 4.0,
            record_every: 100,
            positivity_tol: 1e-8,
            trace_tol: 1e-9,
            positivity_check_every: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_step(mut self, step_dt: f64, record_every: usize) -> Self {
        self.step_dt = step_dt;
        self.record_every = record_every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_dt > 0.0) || !self.step_dt.is_finite() {
            return Err(Error::InvalidParameter("integrator step_dt > 0".into()));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::InvalidParameter("integrator t_max > 0".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("integrator record_every ≥ 1".into()));
        }
        if self.positivity_check_every == 0 {
            return Err(Error::InvalidParameter("positivity_check_every ≥ 1".into()));
        }
        if !(self.trace_tol > 0.0) || !(self.positivity_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be > 0".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        ((self.t_max / self.step_dt).round() as usize).max(1)
    }

    /// Spacing of the recorded time grid.
    pub fn record_interval(&self) -> f64 {
        self.step_dt * self.record_every as f64
    }
}

/// Worst-case deviations seen over an evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalityStats {
    /// Largest `|Tr ρ − 1|` after a raw RK4 step, before renormalisation.
    pub max_trace_drift: f64,
    /// Largest `|Tr ρ − 1|` of a recorded state.
    pub max_trace_error: f64,
    /// Largest `max|ρ − ρ†|` of a raw RK4 step, before re-Hermitisation.
    pub max_hermiticity_drift: f64,
    /// Largest `max|ρ − ρ†|` of a recorded state.
    pub max_hermiticity_error: f64,
    /// Smallest eigenvalue among checked recorded states.
    pub min_eigenvalue: f64,
}

impl Default for PhysicalityStats {
    fn default() -> Self {
        Self {
            max_trace_drift: 0.0,
            max_trace_error: 0.0,
            max_hermiticity_drift: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: f64::INFINITY,
        }
    }
}

impl PhysicalityStats {
    pub fn merge(&mut self, other: &PhysicalityStats) {
        self.max_trace_drift = self.max_trace_drift.max(other.max_trace_drift);
        self.max_trace_error = self.max_trace_error.max(other.max_trace_error);
        self.max_hermiticity_drift = self.max_hermiticity_drift.max(other.max_hermiticity_drift);
        self.max_hermiticity_error = self.max_hermiticity_error.max(other.max_hermiticity_error);
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryMetadata {
    pub channels: ChannelSet,
    pub integrator: IntegratorConfig,
    pub warnings: Vec<String>,
    pub physicality: PhysicalityStats,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub metadata: TrajectoryMetadata,
}

/// What [`evolve_with`] returns when states are streamed to an observer
/// instead of stored.
#[derive(Debug, Clone)]
pub struct EvolutionSummary {
    pub times: Vec<f64>,
    pub final_state: DensityMatrix,
    pub warnings: Vec<String>,
    pub physicality: PhysicalityStats,
}

/// Compressed-row Hermitian matrix.
#[derive(Debug, Clone)]
struct SparseRows {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseRows {
    fn from_dense(m: &CMatrix) -> Self {
        let dim = m.nrows();
        let mut row_start = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for a in 0..dim {
            for k in 0..dim {
                let v = m[(a, k)];
                if v != ZERO {
                    cols.push(k);
                    vals.push(v);
                }
            }
            row_start.push(cols.len());
        }
        Self { row_start, cols, vals }
    }

    #[inline]
    fn row(&self, a: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_start[a]..self.row_start[a + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }
}

#[derive(Debug, Clone, Copy)]
struct LocalChannel {
    mask: usize,
    kind: JumpKind,
    schedule: RateSchedule,
}

/// The right-hand side `L_t(ρ)` of the master equation, precompiled for a
/// fixed Hamiltonian and channel set.
#[derive(Debug, Clone)]
pub struct Generator {
    dim: usize,
    hamiltonian: SparseRows,
    channels: Vec<LocalChannel>,
}

impl Generator {
    pub fn new(h: &CMatrix, channels: &ChannelSet) -> Result<Self> {
        let dim = h.nrows();
        if h.ncols() != dim {
            return Err(Error::Shape(format!("Hamiltonian is {}x{}", h.nrows(), h.ncols())));
        }
        let n_sites = channels.n_sites();
        if n_sites >= usize::BITS as usize || dim != 1usize << n_sites {
            return Err(Error::Shape(format!(
                "Hamiltonian dimension {dim} does not match {n_sites} sites"
            )));
        }
        let herm = linalg::hermiticity_error(h);
        if herm > 1e-10 {
            return Err(Error::Shape(format!("Hamiltonian is not Hermitian (error {herm:e})")));
        }
        let channels = channels
            .entries()
            .iter()
            .map(|c| LocalChannel {
                mask: site_mask(c.site, n_sites),
                kind: c.kind,
                schedule: c.schedule,
            })
            .collect();
        Ok(Self { dim, hamiltonian: SparseRows::from_dense(h), channels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes `L_t(ρ)` into `out`.
    pub fn apply(&self, rho: &CMatrix, t: f64, out: &mut CMatrix) {
        debug_assert_eq!(rho.shape(), (self.dim, self.dim));
        debug_assert_eq!(out.shape(), (self.dim, self.dim));
        let rates: Vec<f64> = self.channels.iter().map(|c| c.schedule.rate_at(t)).collect();
        let d = self.dim;
        let src = rho.as_slice();
        let dst = out.as_mut_slice();
        if d >= PARALLEL_DIM {
            dst.par_chunks_mut(d)
                .enumerate()
                .for_each(|(b, col)| self.column(src, b, &rates, col));
        } else {
            for (b, col) in dst.chunks_mut(d).enumerate() {
                self.column(src, b, &rates, col);
            }
        }
    }

    /// Column `b` of the generator output; `src` is column-major.
    fn column(&self, src: &[C64], b: usize, rates: &[f64], out: &mut [C64]) {
        let d = self.dim;
        let at = |a: usize, col: usize| src[col * d + a];
        let rho_b = &src[b * d..(b + 1) * d];

        // -i Hρ
        for (a, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for (k, h) in self.hamiltonian.row(a) {
                acc += h * rho_b[k];
            }
            *o = C64::new(acc.im, -acc.re);
        }
        // +i ρH, with H_kb = conj(H_bk).
        for (k, h_bk) in self.hamiltonian.row(b) {
            let coef = C64::new(0.0, 1.0) * h_bk.conj();
            let rho_k = &src[k * d..(k + 1) * d];
            for (o, r) in out.iter_mut().zip(rho_k) {
                *o += coef * r;
            }
        }

        for (ch, &rate) in self.channels.iter().zip(rates) {
            if rate == 0.0 {
                continue;
            }
            let m = ch.mask;
            let b_set = b & m != 0;
            match ch.kind {
                JumpKind::Absorption => {
                    // σ⁺ρσ⁻ moves |1⟩⟨1| weight on this site to |0⟩⟨0|;
                    // σ⁻σ⁺ = |1⟩⟨1|.
                    let nb = f64::from(u8::from(b_set));
                    for (a, o) in out.iter_mut().enumerate() {
                        let a_set = a & m != 0;
                        let mut v = -0.5 * rate * (f64::from(u8::from(a_set)) + nb) * rho_b[a];
                        if !a_set && !b_set {
                            v += rate * at(a | m, b | m);
                        }
                        *o += v;
                    }
                }
                JumpKind::Dissipation => {
                    let zb = f64::from(u8::from(!b_set));
                    for (a, o) in out.iter_mut().enumerate() {
                        let a_set = a & m != 0;
                        let mut v = -0.5 * rate * (f64::from(u8::from(!a_set)) + zb) * rho_b[a];
                        if a_set && b_set {
                            v += rate * at(a ^ m, b ^ m);
                        }
                        *o += v;
                    }
                }
                JumpKind::DephaseZ => {
                    for (a, o) in out.iter_mut().enumerate() {
                        if (a & m != 0) != b_set {
                            *o -= 2.0 * rate * rho_b[a];
                        }
                    }
                }
                JumpKind::DephaseX => {
                    let fb = b ^ m;
                    let flipped = &src[fb * d..(fb + 1) * d];
                    for (a, o) in out.iter_mut().enumerate() {
                        *o += rate * (flipped[a ^ m] - rho_b[a]);
                    }
                }
            }
        }
    }
}

/// `-i[H, ρ] + Σ_k γ_k(t) (L_k ρ L_k† − ½{L_k†L_k, ρ})`.
pub fn lindblad_generator(
    rho: &CMatrix,
    h: &CMatrix,
    channels: &ChannelSet,
    t: f64,
) -> Result<CMatrix> {
    if rho.shape() != h.shape() {
        return Err(Error::Shape(format!(
            "state is {:?} but Hamiltonian is {:?}",
            rho.shape(),
            h.shape()
        )));
    }
    let gen = Generator::new(h, channels)?;
    let mut out = CMatrix::zeros(gen.dim, gen.dim);
    gen.apply(rho, t, &mut out);
    Ok(out)
}

struct Rk4 {
    k1: CMatrix,
    k2: CMatrix,
    k3: CMatrix,
    k4: CMatrix,
    tmp: CMatrix,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        let z = CMatrix::zeros(dim, dim);
        Self { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }

    fn step(&mut self, gen: &Generator, rho: &mut CMatrix, t: f64, dt: f64) {
        let half = 0.5 * dt;
        gen.apply(rho, t, &mut self.k1);
        combine(&mut self.tmp, rho, half, &self.k1);
        gen.apply(&self.tmp, t + half, &mut self.k2);
        combine(&mut self.tmp, rho, half, &self.k2);
        gen.apply(&self.tmp, t + half, &mut self.k3);
        combine(&mut self.tmp, rho, dt, &self.k3);
        gen.apply(&self.tmp, t + dt, &mut self.k4);

        let w = dt / 6.0;
        let iter = rho
            .as_mut_slice()
            .iter_mut()
            .zip(self.k1.as_slice())
            .zip(self.k2.as_slice())
            .zip(self.k3.as_slice())
            .zip(self.k4.as_slice());
        for ((((r, a), b), c), d) in iter {
            *r += (a + (b + c) * 2.0 + d) * w;
        }
    }
}

/// `dst = x + s·y`
fn combine(dst: &mut CMatrix, x: &CMatrix, s: f64, y: &CMatrix) {
    for ((o, a), b) in dst.as_mut_slice().iter_mut().zip(x.as_slice()).zip(y.as_slice()) {
        *o = a + b * s;
    }
}

/// Integrates the master equation from `rho0`, calling `observe` on every
/// recorded state (including `t = 0`). States are not retained.
pub fn evolve_with<F>(
    rho0: &DensityMatrix,
    h: &CMatrix,
    channels: &ChannelSet,
    cfg: &IntegratorConfig,
    mut observe: F,
) -> Result<EvolutionSummary>
where
    F: FnMut(f64, &DensityMatrix) -> Result<()>,
{
    cfg.validate()?;
    if rho0.dim() != h.nrows() {
        return Err(Error::Shape(format!(
            "initial state has dimension {} but Hamiltonian {}",
            rho0.dim(),
            h.nrows()
        )));
    }
    let gen = Generator::new(h, channels)?;
    let relaxed_positivity = channels.has_negative_rates();
    let mut rk = Rk4::new(gen.dim);
    let mut state = rho0.clone();
    let mut stats = PhysicalityStats::default();
    let mut warnings = Vec::new();
    let mut times = Vec::new();
    let n_steps = cfg.n_steps();
    let mut n_recorded = 0usize;

    let mut record = |t: f64,
                      state: &DensityMatrix,
                      stats: &mut PhysicalityStats,
                      warnings: &mut Vec<String>,
                      times: &mut Vec<f64>|
     -> Result<()> {
        stats.max_trace_error = stats.max_trace_error.max((state.trace() - 1.0).norm());
        stats.max_hermiticity_error =
            stats.max_hermiticity_error.max(linalg::hermiticity_error(state.matrix()));
        if n_recorded.is_multiple_of(cfg.positivity_check_every) {
            let min = state.min_eigenvalue()?;
            stats.min_eigenvalue = stats.min_eigenvalue.min(min);
            if min < -cfg.positivity_tol {
                if min < -100.0 * cfg.positivity_tol && !relaxed_positivity {
                    return Err(Error::Positivity { t, min_eigenvalue: min });
                }
                warnings.push(format!("minimum eigenvalue {min:e} at t = {t}"));
            }
        }
        n_recorded += 1;
        times.push(t);
        observe(t, state)
    };

    record(0.0, &state, &mut stats, &mut warnings, &mut times)?;
    for step in 0..n_steps {
        let t = step as f64 * cfg.step_dt;
        rk.step(&gen, state.matrix_mut(), t, cfg.step_dt);
        let t_next = (step + 1) as f64 * cfg.step_dt;

        let m = state.matrix_mut();
        stats.max_hermiticity_drift = stats.max_hermiticity_drift.max(linalg::hermiticity_error(m));
        linalg::hermitize(m);
        let tr = linalg::trace(m).re;
        let drift = (tr - 1.0).abs();
        stats.max_trace_drift = stats.max_trace_drift.max(drift);
        if !(drift < cfg.trace_tol) {
            return Err(Error::Divergence { t: t_next, trace_error: drift });
        }
        m.unscale_mut(tr);

        let last = step + 1 == n_steps;
        if (step + 1) % cfg.record_every == 0 || last {
            record(t_next, &state, &mut stats, &mut warnings, &mut times)?;
        }
    }
    Ok(EvolutionSummary { times, final_state: state, warnings, physicality: stats })
}

/// Integrates the master equation and keeps every recorded state.
pub fn evolve(
    rho0: &DensityMatrix,
    h: &CMatrix,
    channels: &ChannelSet,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let mut states = Vec::new();
    let summary = evolve_with(rho0, h, channels, cfg, |_, s| {
        states.push(s.clone());
        Ok(())
    })?;
    Ok(Trajectory {
        times: summary.times,
        states,
        metadata: TrajectoryMetadata {
            channels: channels.clone(),
            integrator: *cfg,
            warnings: summary.warnings,
            physicality: summary.physicality,
        },
    })
}

/// Earliest recorded time after which `|dW/dt| < eps` at every remaining
/// sample.
pub fn detect_steady_state(traj: &Trajectory, h: &CMatrix, eps: f64) -> Option<f64> {
    let energies: Vec<f64> = traj.states.iter().map(|s| s.expectation(h).re).collect();
    steady_state_time(&traj.times, &energies, eps)
}

/// Series form of [`detect_steady_state`].
pub fn steady_state_time(times: &[f64], values: &[f64], eps: f64) -> Option<f64> {
    match times.len() {
        0 => None,
        1 => Some(times[0]),
        _ => {
            let slope = observables::gradient(times, values).ok()?;
            let mut first = None;
            for (k, s) in slope.iter().enumerate().rev() {
                if s.abs() < eps {
                    first = Some(times[k]);
                } else {
                    break;
                }
            }
            first
        }
    }
}
