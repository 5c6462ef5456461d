//! Charging and discharging protocols and the sweep experiments built on
//! them.
//!
//! Runs stream states through [`evolve_with`] and keep only scalar series,
//! so memory stays at a handful of density matrices regardless of `t_max`.
//! Sweeps fan out over rayon and always return results in input order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{is_non_markovian, ChannelSet, JumpKind, RateSchedule};
use crate::closed_form::{self, AdvantageKind, Direction};
use crate::dynamics::{evolve_with, steady_state_time, Generator, IntegratorConfig, PhysicalityStats};
use crate::linalg::CMatrix;
use crate::observables::{self, EntanglementSeries, WorkSeries};
use crate::spin_model::{
    build_hamiltonian_capped, ground_state, normalize_spectrum, thermal_state, two_qubit_closed_form_ground,
    DensityMatrix, NormalizedHamiltonian, SpinChainParams, DEFAULT_MAX_SITES,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Charge,
    Discharge,
    Cycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDirection {
    None,
    Z,
    X,
}

impl NoiseDirection {
    fn jump(self) -> Option<JumpKind> {
        match self {
            NoiseDirection::None => None,
            NoiseDirection::Z => Some(JumpKind::DephaseZ),
            NoiseDirection::X => Some(JumpKind::DephaseX),
        }
    }
}

/// Which sites carry dephasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisySites {
    /// Sites `1..=k`.
    FirstK(usize),
    /// Sites `1..=N`.
    All,
    Explicit(Vec<usize>),
}

impl NoisySites {
    pub fn resolve(&self, n_sites: usize) -> Result<Vec<usize>> {
        let sites: Vec<usize> = match self {
            NoisySites::FirstK(k) => {
                if *k > n_sites {
                    return Err(Error::InvalidParameter(format!("noise.count ≤ n_sites ({n_sites})")));
                }
                (1..=*k).collect()
            }
            NoisySites::All => (1..=n_sites).collect(),
            NoisySites::Explicit(v) => v.clone(),
        };
        for (k, &s) in sites.iter().enumerate() {
            if s == 0 || s > n_sites || sites[..k].contains(&s) {
                return Err(Error::InvalidSite { site: s, n_sites });
            }
        }
        Ok(sites)
    }
}

/// How the dephasing rate is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dephasing {
    /// Constant rate `ratio · Γ_abs` while charging and `ratio · Γ_dis`
    /// while discharging.
    Markovian { ratio: f64 },
    /// Time-dependent Ohmic rate, independent of the pump rate.
    Ohmic { s: f64, omega_c: f64 },
}

impl Dephasing {
    fn schedule(&self, pump_rate: f64) -> RateSchedule {
        match *self {
            Dephasing::Markovian { ratio } => RateSchedule::Constant(ratio * pump_rate),
            Dephasing::Ohmic { s, omega_c } => RateSchedule::Ohmic { s, omega_c },
        }
    }

    pub fn is_non_markovian(&self) -> bool {
        matches!(*self, Dephasing::Ohmic { s, .. } if is_non_markovian(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Ground,
    Thermal { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub chain: SpinChainParams,
    pub mode: Mode,
    pub noise_direction: NoiseDirection,
    pub noisy_sites: NoisySites,
    pub rate_abs: f64,
    pub rate_dis: f64,
    pub dephasing: Dephasing,
    pub init: InitialState,
    pub integrator: IntegratorConfig,
    /// Threshold on `|dW/dt|` for steady-state detection.
    pub steady_eps: f64,
    /// Horizon of the charging run that prepares the discharge start state.
    pub charge_t_max: f64,
    pub track_entanglement: bool,
    pub max_sites: usize,
}

impl ExperimentConfig {
    /// Four-site charging with x-noise on every site, `Γ_abs = 0.5` and a
    /// 0.3 noise ratio.
    pub fn new(n_sites: usize, lambda: f64) -> Self {
        Self {
            chain: SpinChainParams::new(n_sites, lambda),
            mode: Mode::Charge,
            noise_direction: NoiseDirection::X,
            noisy_sites: NoisySites::All,
            rate_abs: 0.5,
            rate_dis: 0.5,
            dephasing: Dephasing::Markovian { ratio: 0.3 },
            init: InitialState::Ground,
            integrator: IntegratorConfig::default(),
            steady_eps: 1e-4,
            charge_t_max: 40.0,
            track_entanglement: false,
            max_sites: DEFAULT_MAX_SITES,
        }
    }

    pub fn with_noise(mut self, direction: NoiseDirection, sites: NoisySites) -> Self {
        self.noise_direction = direction;
        self.noisy_sites = sites;
        self
    }

    pub fn with_dephasing(mut self, dephasing: Dephasing) -> Self {
        self.dephasing = dephasing;
        self
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.integrator.t_max = t_max;
        self
    }

    pub fn with_init(mut self, init: InitialState) -> Self {
        self.init = init;
        self
    }

    pub fn noiseless(&self) -> Self {
        let mut c = self.clone();
        c.noise_direction = NoiseDirection::None;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.chain.validate()?;
        if self.chain.n_sites > self.max_sites {
            return Err(Error::DimensionOverflow { n_sites: self.chain.n_sites, max_sites: self.max_sites });
        }
        self.integrator.validate()?;
        let steps = self.integrator.t_max / self.integrator.record_interval();
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::InvalidParameter(
                "integrator t_max must be a multiple of dt · record_every".into(),
            ));
        }
        for (name, v) in [("rates.abs", self.rate_abs), ("rates.dis", self.rate_dis)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} ≥ 0")));
            }
        }
        match self.dephasing {
            Dephasing::Markovian { ratio } if !(ratio >= 0.0) => {
                return Err(Error::InvalidParameter("rates.ratio ≥ 0".into()))
            }
            Dephasing::Ohmic { s, omega_c } => RateSchedule::Ohmic { s, omega_c }.validate()?,
            _ => {}
        }
        if let InitialState::Thermal { beta } = self.init {
            if !(beta >= 0.0) {
                return Err(Error::NegativeBeta(beta));
            }
        }
        if !(self.steady_eps > 0.0) {
            return Err(Error::InvalidParameter("steady.eps > 0".into()));
        }
        if !(self.charge_t_max > 0.0) {
            return Err(Error::InvalidParameter("charge_t_max > 0".into()));
        }
        self.noisy_sites.resolve(self.chain.n_sites)?;
        Ok(())
    }

    pub fn noisy_site_list(&self) -> Result<Vec<usize>> {
        if self.noise_direction == NoiseDirection::None {
            return Ok(Vec::new());
        }
        self.noisy_sites.resolve(self.chain.n_sites)
    }

    pub fn charging_channels(&self) -> Result<ChannelSet> {
        self.channels(JumpKind::Absorption, self.rate_abs)
    }

    pub fn discharging_channels(&self) -> Result<ChannelSet> {
        self.channels(JumpKind::Dissipation, self.rate_dis)
    }

    fn channels(&self, pump: JumpKind, rate: f64) -> Result<ChannelSet> {
        let n = self.chain.n_sites;
        let mut set = ChannelSet::new(n);
        set.extend_sites(1..=n, pump, RateSchedule::Constant(rate))?;
        if let Some(kind) = self.noise_direction.jump() {
            set.extend_sites(self.noisy_site_list()?, kind, self.dephasing.schedule(rate))?;
        }
        Ok(set)
    }
}

/// Normalised Hamiltonian and initial state for a configuration.
#[derive(Debug, Clone)]
pub struct PreparedSystem {
    pub hamiltonian: NormalizedHamiltonian,
    pub initial: DensityMatrix,
    pub ground_degenerate: bool,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<PreparedSystem> {
    cfg.validate()?;
    let raw = build_hamiltonian_capped(&cfg.chain, cfg.max_sites)?;
    let hamiltonian = normalize_spectrum(&raw)?;
    let g = ground_state(&hamiltonian.matrix)?;
    let initial = match cfg.init {
        InitialState::Ground => g.state,
        InitialState::Thermal { beta } => thermal_state(&hamiltonian.matrix, beta)?,
    };
    Ok(PreparedSystem { hamiltonian, initial, ground_degenerate: g.degenerate })
}

/// Scalar record of one evolution.
#[derive(Debug, Clone)]
pub struct RunRecord {
    /// `Tr(Hρ_t) − Tr(Hρ_start)` with power filled in.
    pub work: WorkSeries,
    /// Nearest-neighbour (sites 1, 2) log-negativity, when tracked.
    pub entanglement: Option<EntanglementSeries>,
    pub start_energy: f64,
    pub final_state: DensityMatrix,
    pub steady_time: Option<f64>,
    pub noisy_sites: Vec<usize>,
    pub warnings: Vec<String>,
    pub physicality: PhysicalityStats,
}

fn run(
    h: &CMatrix,
    rho0: &DensityMatrix,
    channels: &ChannelSet,
    integrator: &IntegratorConfig,
    track_entanglement: bool,
    steady_eps: f64,
    noisy_sites: Vec<usize>,
) -> Result<RunRecord> {
    let mut energies = Vec::new();
    let mut logneg = Vec::new();
    let summary = evolve_with(rho0, h, channels, integrator, |_, s| {
        energies.push(observables::energy(s, h)?);
        if track_entanglement {
            let r = observables::reduced_state(s, (1, 2))?;
            logneg.push(observables::log_negativity(&r)?);
        }
        Ok(())
    })?;
    let start_energy = energies[0];
    let steady_time = steady_state_time(&summary.times, &energies, steady_eps);
    let work = WorkSeries::from_energies(summary.times.clone(), &energies).with_power()?;
    let entanglement = track_entanglement
        .then(|| EntanglementSeries { times: summary.times.clone(), log_negativity: logneg });
    Ok(RunRecord {
        work,
        entanglement,
        start_energy,
        final_state: summary.final_state,
        steady_time,
        noisy_sites,
        warnings: summary.warnings,
        physicality: summary.physicality,
    })
}

/// Absorption on every site plus the configured dephasing, from the
/// configured initial state.
pub fn run_charging(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let sys = prepare(cfg)?;
    run_charging_from(cfg, &sys)
}

fn run_charging_from(cfg: &ExperimentConfig, sys: &PreparedSystem) -> Result<RunRecord> {
    let mut rec = run(
        &sys.hamiltonian.matrix,
        &sys.initial,
        &cfg.charging_channels()?,
        &cfg.integrator,
        cfg.track_entanglement,
        cfg.steady_eps,
        cfg.noisy_site_list()?,
    )?;
    if sys.ground_degenerate && cfg.init == InitialState::Ground {
        rec.warnings.push("degenerate ground state; lowest eigenvector used".into());
    }
    Ok(rec)
}

/// Dissipation on every site plus the configured dephasing, starting from
/// `rho_charged`. Work is relative to the charged state's energy, so
/// extraction shows up as negative values.
pub fn run_discharging(cfg: &ExperimentConfig, rho_charged: &DensityMatrix) -> Result<RunRecord> {
    let sys = prepare(cfg)?;
    run(
        &sys.hamiltonian.matrix,
        rho_charged,
        &cfg.discharging_channels()?,
        &cfg.integrator,
        cfg.track_entanglement,
        cfg.steady_eps,
        cfg.noisy_site_list()?,
    )
}

/// Charged state shared by discharge comparisons: the noiseless charging
/// run carried to `charge_t_max`.
#[derive(Debug, Clone)]
pub struct ChargedReference {
    pub state: DensityMatrix,
    pub steady_time: Option<f64>,
    pub energy: f64,
}

pub fn charged_reference(cfg: &ExperimentConfig) -> Result<ChargedReference> {
    let mut c = cfg.noiseless();
    c.integrator.t_max = cfg.charge_t_max;
    c.track_entanglement = false;
    let rec = run_charging(&c)?;
    let energy = rec.start_energy + rec.work.final_work().unwrap_or(0.0);
    Ok(ChargedReference { state: rec.final_state, steady_time: rec.steady_time, energy })
}

#[derive(Debug, Clone)]
pub struct CycleRecord {
    pub charge: RunRecord,
    /// Time at which charging was stopped.
    pub switch_time: f64,
    pub discharge: RunRecord,
}

/// Charges with the configured noise until the stored energy is steady
/// (searching up to `charge_t_max`), then discharges for
/// `integrator.t_max`.
pub fn run_cycle(cfg: &ExperimentConfig) -> Result<CycleRecord> {
    let sys = prepare(cfg)?;
    let mut probe = cfg.clone();
    probe.integrator.t_max = cfg.charge_t_max;
    let long = run_charging_from(&probe, &sys)?;
    let (switch_time, charge) = match long.steady_time {
        Some(t) if t > 0.0 => {
            let mut c = cfg.clone();
            c.integrator.t_max = t;
            (t, run_charging_from(&c, &sys)?)
        }
        Some(_) => (0.0, long),
        None => {
            let mut rec = long;
            rec.warnings.push(format!("no steady state before t = {}", cfg.charge_t_max));
            (cfg.charge_t_max, rec)
        }
    };
    let discharge = run(
        &sys.hamiltonian.matrix,
        &charge.final_state,
        &cfg.discharging_channels()?,
        &cfg.integrator,
        cfg.track_entanglement,
        cfg.steady_eps,
        cfg.noisy_site_list()?,
    )?;
    Ok(CycleRecord { charge, switch_time, discharge })
}

/// First crossing of `δ = noisy − noiseless` from positive to non-positive,
/// linearly interpolated. The positive window must start at the first
/// sample after `t = 0`.
pub fn crossover_time(noisy: &WorkSeries, noiseless: &WorkSeries) -> Result<Option<f64>> {
    let delta = delta_series(noisy, noiseless)?;
    Ok(first_crossing(&noisy.times, &delta))
}

pub fn delta_series(a: &WorkSeries, b: &WorkSeries) -> Result<Vec<f64>> {
    if a.times.len() != b.times.len()
        || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > 1e-12)
    {
        return Err(Error::Grid("series do not share a time grid".into()));
    }
    Ok(a.work.iter().zip(&b.work).map(|(x, y)| x - y).collect())
}

fn first_crossing(times: &[f64], delta: &[f64]) -> Option<f64> {
    if delta.len() < 2 || !(delta[1] > 0.0) {
        return None;
    }
    for k in 2..delta.len() {
        if delta[k] <= 0.0 {
            let (d0, d1) = (delta[k - 1], delta[k]);
            let frac = d0 / (d0 - d1);
            return Some(times[k - 1] + frac * (times[k] - times[k - 1]));
        }
    }
    None
}

/// What a hierarchy compares: stored work while charging, extracted work
/// (`−W`) while discharging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HierarchyQuantity {
    Work,
    Extracted,
}

#[derive(Debug, Clone)]
pub struct AdvantageReport {
    pub quantity: HierarchyQuantity,
    pub counts: Vec<usize>,
    pub runs: Vec<RunRecord>,
    pub times: Vec<f64>,
    /// Most-noisy minus least-noisy run.
    pub delta_series: Vec<f64>,
    pub crossover_time: Option<f64>,
    /// More noisy sites ⇒ strictly more of `quantity`, per sample.
    pub hierarchy_ok: Vec<bool>,
    /// The exact reverse ordering, per sample.
    pub reversed: Vec<bool>,
    /// Smallest adjacent gap in the forward direction, per sample.
    pub min_margin: Vec<f64>,
    /// End of the initial window `(0, t]` on which `hierarchy_ok` holds.
    pub window_end: Option<f64>,
    pub insufficient_runs: bool,
}

impl AdvantageReport {
    pub fn holds_on(&self, t_lo: f64, t_hi: f64) -> bool {
        self.times
            .iter()
            .zip(&self.hierarchy_ok)
            .filter(|(t, _)| **t >= t_lo - 1e-12 && **t <= t_hi + 1e-12)
            .all(|(_, ok)| *ok)
    }
}

/// Runs the template once per noisy-site count (sites `1..=k`) and checks
/// the ordering between neighbours in `counts`. The template's mode picks
/// charging or discharging; discharges share one noiseless charged state.
pub fn noise_count_hierarchy(template: &ExperimentConfig, counts: &[usize]) -> Result<AdvantageReport> {
    let discharge = template.mode == Mode::Discharge;
    let reference = if discharge { Some(charged_reference(template)?) } else { None };
    let runs: Vec<RunRecord> = counts
        .par_iter()
        .map(|&k| {
            let mut c = template.clone();
            c.noisy_sites = NoisySites::FirstK(k);
            if k == 0 {
                c.noise_direction = NoiseDirection::None;
            }
            match &reference {
                Some(r) => run_discharging(&c, &r.state),
                None => run_charging(&c),
            }
        })
        .collect::<Result<_>>()?;

    let quantity = if discharge { HierarchyQuantity::Extracted } else { HierarchyQuantity::Work };
    let sign = if discharge { -1.0 } else { 1.0 };
    let times = runs.first().map(|r| r.work.times.clone()).unwrap_or_default();
    let n_t = times.len();
    let mut hierarchy_ok = vec![true; n_t];
    let mut reversed = vec![true; n_t];
    let mut min_margin = vec![f64::INFINITY; n_t];
    for pair in runs.windows(2) {
        for k in 0..n_t {
            let gap = sign * (pair[1].work.work[k] - pair[0].work.work[k]);
            min_margin[k] = min_margin[k].min(gap);
            hierarchy_ok[k] &= gap > 0.0;
            reversed[k] &= gap < 0.0;
        }
    }
    let insufficient_runs = runs.len() < 2;
    if insufficient_runs {
        hierarchy_ok.iter_mut().for_each(|b| *b = false);
        reversed.iter_mut().for_each(|b| *b = false);
    }

    let (delta_series, crossover) = match (runs.first(), runs.last()) {
        (Some(lo), Some(hi)) if !insufficient_runs => {
            let d: Vec<f64> = delta_series(&hi.work, &lo.work)?.into_iter().map(|x| sign * x).collect();
            let c = first_crossing(&times, &d);
            (d, c)
        }
        _ => (vec![0.0; n_t], None),
    };

    let mut window_end = None;
    for k in 1..n_t {
        if hierarchy_ok[k] {
            window_end = Some(times[k]);
        } else {
            break;
        }
    }

    Ok(AdvantageReport {
        quantity,
        counts: counts.to_vec(),
        runs,
        times,
        delta_series,
        crossover_time: crossover,
        hierarchy_ok,
        reversed,
        min_margin,
        window_end,
        insufficient_runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridQuantity {
    /// `W(x-noise) − W(noiseless)`.
    DeltaBitFlip,
    /// `W(x-noise) − W(z-noise)`.
    DeltaXMinusZ,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridAxis {
    Lambda(Vec<f64>),
    /// Dephasing-to-absorption ratio.
    Ratio(Vec<f64>),
}

impl GridAxis {
    pub fn values(&self) -> &[f64] {
        match self {
            GridAxis::Lambda(v) | GridAxis::Ratio(v) => v,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GridAxis::Lambda(_) => "lambda",
            GridAxis::Ratio(_) => "ratio",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdvantageGrid {
    pub quantity: GridQuantity,
    pub axis: GridAxis,
    pub times: Vec<f64>,
    /// One row per axis value; a failed row is all `None`.
    pub values: Vec<Vec<Option<f64>>>,
    pub failures: Vec<(f64, String)>,
}

/// Tabulates δ over the recorded time grid (from the template integrator)
/// and the second axis.
pub fn advantage_grid(template: &ExperimentConfig, axis: GridAxis, quantity: GridQuantity) -> Result<AdvantageGrid> {
    let vals = axis.values();
    if vals.is_empty() {
        return Err(Error::Grid("empty grid axis".into()));
    }
    if !vals.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::Grid("grid axis must be strictly increasing".into()));
    }
    let n_t = template.integrator.n_steps() / template.integrator.record_every + 1;
    let times: Vec<f64> = (0..n_t).map(|k| k as f64 * template.integrator.record_interval()).collect();

    let rows: Vec<Result<Vec<f64>>> = vals
        .par_iter()
        .map(|&v| {
            let mut c = template.clone();
            c.noisy_sites = NoisySites::All;
            match axis {
                GridAxis::Lambda(_) => c.chain.coupling_lambda = v,
                GridAxis::Ratio(_) => c.dephasing = Dephasing::Markovian { ratio: v },
            }
            let mut x = c.clone();
            x.noise_direction = NoiseDirection::X;
            let mut other = c.clone();
            other.noise_direction = match quantity {
                GridQuantity::DeltaBitFlip => NoiseDirection::None,
                GridQuantity::DeltaXMinusZ => NoiseDirection::Z,
            };
            let a = run_charging(&x)?;
            let b = run_charging(&other)?;
            delta_series(&a.work, &b.work)
        })
        .collect();

    let mut values = Vec::with_capacity(rows.len());
    let mut failures = Vec::new();
    for (row, &v) in rows.into_iter().zip(vals) {
        match row {
            Ok(r) if r.len() == n_t => values.push(r.into_iter().map(Some).collect()),
            Ok(r) => {
                failures.push((v, format!("row has {} samples, expected {n_t}", r.len())));
                values.push(vec![None; n_t]);
            }
            Err(e) => {
                failures.push((v, e.to_string()));
                values.push(vec![None; n_t]);
            }
        }
    }
    Ok(AdvantageGrid { quantity, axis, times, values, failures })
}

pub const DEFAULT_OHMICITY: [f64; 5] = [0.5, 1.5, 2.5, 3.0, 4.0];

#[derive(Debug, Clone)]
pub struct OhmicityPoint {
    pub s: f64,
    pub non_markovian: bool,
    pub charge: RunRecord,
    pub discharge: RunRecord,
}

/// Charging and discharging with Ohmic dephasing on every site, one pair
/// per `s`. Discharges start from the shared noiseless charged state.
pub fn ohmicity_sweep(template: &ExperimentConfig, s_values: &[f64]) -> Result<Vec<OhmicityPoint>> {
    if let Some(&bad) = s_values.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::InvalidParameter(format!("Ohmicity s > 0 (got {bad})")));
    }
    let omega_c = match template.dephasing {
        Dephasing::Ohmic { omega_c, .. } => omega_c,
        Dephasing::Markovian { .. } => 1.0,
    };
    let reference = charged_reference(template)?;
    s_values
        .par_iter()
        .map(|&s| {
            let mut c = template.clone();
            c.noisy_sites = NoisySites::All;
            if c.noise_direction == NoiseDirection::None {
                c.noise_direction = NoiseDirection::X;
            }
            c.dephasing = Dephasing::Ohmic { s, omega_c };
            let charge = run_charging(&c)?;
            let discharge = run_discharging(&c, &reference.state)?;
            Ok(OhmicityPoint { s, non_markovian: is_non_markovian(s), charge, discharge })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ThermalPoint {
    pub beta: f64,
    pub run: RunRecord,
    /// `W_noisy,β(t) − W_noiseless,ground(t)`.
    pub delta: Vec<f64>,
    pub crossover_time: Option<f64>,
    /// δ is positive at the first recorded sample after `t = 0`.
    pub window: bool,
    /// `dδ/dt` at `t = 0`.
    pub initial_slope: f64,
}

/// Noisy charging from thermal states, each compared with the noiseless
/// run from the ground state.
pub fn thermal_scan(template: &ExperimentConfig, betas: &[f64]) -> Result<Vec<ThermalPoint>> {
    if let Some(&bad) = betas.iter().find(|b| !(**b >= 0.0)) {
        return Err(Error::NegativeBeta(bad));
    }
    let mut base = template.clone();
    base.init = InitialState::Ground;
    base.noisy_sites = NoisySites::All;
    if base.noise_direction == NoiseDirection::None {
        base.noise_direction = NoiseDirection::X;
    }
    let reference = run_charging(&base.noiseless())?;
    betas
        .par_iter()
        .map(|&beta| {
            let c = base.clone().with_init(InitialState::Thermal { beta });
            let run = run_charging(&c)?;
            let delta = delta_series(&run.work, &reference.work)?;
            let crossover_time = first_crossing(&run.work.times, &delta);
            let window = delta.len() > 1 && delta[1] > 0.0;
            let initial_slope = thermal_initial_slope(&base, beta)?;
            Ok(ThermalPoint { beta, run, delta, crossover_time, window, initial_slope })
        })
        .collect()
}

/// `dδ/dt` at `t = 0` for the thermal comparison, from one generator
/// evaluation on each side.
pub fn thermal_initial_slope(template: &ExperimentConfig, beta: f64) -> Result<f64> {
    let mut noisy = template.clone().with_init(InitialState::Thermal { beta });
    noisy.noisy_sites = NoisySites::All;
    let sys = prepare(&noisy)?;
    let h = &sys.hamiltonian.matrix;
    let ground = ground_state(h)?.state;
    let rate = |rho: &DensityMatrix, channels: &ChannelSet| -> Result<f64> {
        let gen = Generator::new(h, channels)?;
        let mut out = CMatrix::zeros(gen.dim(), gen.dim());
        gen.apply(rho.matrix(), 0.0, &mut out);
        Ok((h * out).trace().re)
    };
    Ok(rate(&sys.initial, &noisy.charging_channels()?)? - rate(&ground, &noisy.noiseless().charging_channels()?)?)
}

/// Smallest β on `[lo, hi]` at which the thermal comparison starts with a
/// positive slope, by bisection.
pub fn thermal_threshold(template: &ExperimentConfig, lo: f64, hi: f64) -> Result<f64> {
    closed_form::bisect(|b| thermal_initial_slope(template, b).unwrap_or(f64::NAN), lo, hi, 1e-6)
}

#[derive(Debug, Clone)]
pub struct ScaleReport {
    pub n_values: Vec<usize>,
    pub runs: Vec<RunRecord>,
    /// `(N_i, N_j, max_t |P_i − P_j|)` for every pair.
    pub pairwise: Vec<(usize, usize, f64)>,
    pub max_deviation: f64,
}

/// Identical protocols at several chain lengths; compares instantaneous
/// power.
pub fn scale_invariance_check(template: &ExperimentConfig, n_values: &[usize]) -> Result<ScaleReport> {
    let runs: Vec<RunRecord> = n_values
        .par_iter()
        .map(|&n| {
            let mut c = template.clone();
            c.chain.n_sites = n;
            c.noisy_sites = NoisySites::All;
            run_charging(&c)
        })
        .collect::<Result<_>>()?;
    let mut pairwise = Vec::new();
    let mut max_deviation: f64 = 0.0;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let pi = runs[i].work.power.as_deref().unwrap_or(&[]);
            let pj = runs[j].work.power.as_deref().unwrap_or(&[]);
            let dev = pi.iter().zip(pj).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            pairwise.push((n_values[i], n_values[j], dev));
            max_deviation = max_deviation.max(dev);
        }
    }
    Ok(ScaleReport { n_values: n_values.to_vec(), runs, pairwise, max_deviation })
}

/// Two-site runs of the general engine set up in the closed-form
/// convention: X-matrix Hamiltonian (not normalised) and the closed-form
/// initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleCell {
    pub direction: Option<Direction>,
    pub lambda: f64,
    pub ratio: f64,
    /// `max_t |W_engine − W_closed|`.
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub cells: Vec<OracleCell>,
    pub max_deviation: f64,
    pub slopes: Vec<SlopeCheck>,
    pub max_slope_rel_error: f64,
}

fn two_site_engine_work(
    direction: Option<Direction>,
    lambda: f64,
    gamma_abs: f64,
    gamma_dph: f64,
    integrator: &IntegratorConfig,
) -> Result<WorkSeries> {
    let h = closed_form::two_qubit_x_matrix(1.0, lambda);
    let (_, rho0) = two_qubit_closed_form_ground(1.0, lambda)?;
    let mut set = ChannelSet::new(2);
    set.extend_sites(1..=2, JumpKind::Absorption, RateSchedule::Constant(gamma_abs))?;
    if let Some(d) = direction {
        let kind = match d {
            Direction::Z => JumpKind::DephaseZ,
            Direction::X => JumpKind::DephaseX,
        };
        set.extend_sites(1..=2, kind, RateSchedule::Constant(gamma_dph))?;
    }
    let mut energies = Vec::new();
    let summary = evolve_with(&rho0, &h, &set, integrator, |_, s| {
        energies.push(observables::energy(s, &h)?);
        Ok(())
    })?;
    Ok(WorkSeries::from_energies(summary.times, &energies))
}

/// Maximum deviation between the engine and the closed forms for one cell.
pub fn oracle_cell(
    direction: Option<Direction>,
    lambda: f64,
    ratio: f64,
    gamma_abs: f64,
    integrator: &IntegratorConfig,
) -> Result<OracleCell> {
    let gamma_dph = ratio * gamma_abs;
    let w = two_site_engine_work(direction, lambda, gamma_abs, gamma_dph, integrator)?;
    let mut max_deviation: f64 = 0.0;
    for (t, x) in w.times.iter().zip(&w.work) {
        let c = closed_form::closed_form_work(direction, *t, 1.0, lambda, gamma_abs, gamma_dph)?;
        max_deviation = max_deviation.max((x - c).abs());
    }
    Ok(OracleCell { direction, lambda, ratio, max_deviation })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeCheck {
    pub kind: AdvantageKind,
    pub lambda: f64,
    pub engine_slope: f64,
    pub predicted: f64,
    pub rel_error: f64,
}

/// Finite-difference slope `δ(t)/t` of the engine's two-site work gaps at
/// small `t`, against the first-order coefficients.
pub fn oracle_slopes(lambdas: &[f64], gamma_abs: f64, gamma_dph: f64, t: f64) -> Result<Vec<SlopeCheck>> {
    let dt = t / 100.0;
    let integ = IntegratorConfig { step_dt: dt, t_max: t, record_every: 100, ..IntegratorConfig::default() };
    let mut out = Vec::new();
    for &lambda in lambdas {
        let at_t = |d: Option<Direction>| -> Result<f64> {
            let w = two_site_engine_work(d, lambda, gamma_abs, gamma_dph, &integ)?;
            Ok(*w.work.last().unwrap_or(&0.0))
        };
        let (wn, wz, wx) = (at_t(None)?, at_t(Some(Direction::Z))?, at_t(Some(Direction::X))?);
        for (kind, gap) in [
            (AdvantageKind::PhaseFlip, wz - wn),
            (AdvantageKind::BitFlip, wx - wn),
            (AdvantageKind::XMinusZ, wx - wz),
        ] {
            let engine_slope = gap / t;
            let predicted = closed_form::transient_advantage(kind, gamma_dph, 1.0, lambda)?;
            let rel_error = ((engine_slope - predicted) / predicted).abs();
            out.push(SlopeCheck { kind, lambda, engine_slope, predicted, rel_error });
        }
    }
    Ok(out)
}

/// Full engine-versus-closed-form comparison over a (λ, ratio) grid and
/// all three noise settings, plus the transient slopes.
pub fn oracle_equivalence(
    lambdas: &[f64],
    ratios: &[f64],
    gamma_abs: f64,
    integrator: &IntegratorConfig,
) -> Result<OracleReport> {
    let mut jobs = Vec::new();
    for &l in lambdas {
        jobs.push((None, l, 0.0));
        for &r in ratios {
            jobs.push((Some(Direction::Z), l, r));
            jobs.push((Some(Direction::X), l, r));
        }
    }
    let cells: Vec<OracleCell> = jobs
        .par_iter()
        .map(|&(d, l, r)| oracle_cell(d, l, r, gamma_abs, integrator))
        .collect::<Result<_>>()?;
    let max_deviation = cells.iter().map(|c| c.max_deviation).fold(0.0, f64::max);
    let slopes = oracle_slopes(lambdas, gamma_abs, 0.3 * gamma_abs, 1e-4)?;
    let max_slope_rel_error = slopes.iter().map(|s| s.rel_error).fold(0.0, f64::max);
    Ok(OracleReport { cells, max_deviation, slopes, max_slope_rel_error })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use super::*;

    fn series(times: &[f64], work: Vec<f64>) -> WorkSeries {
        WorkSeries { times: times.to_vec(), work, power: None }
    }

    #[test]
    fn crossover_examples() {
        let t: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
        let zero = series(&t, vec![0.0; t.len()]);
        assert_eq!(crossover_time(&zero, &zero).unwrap(), None);
        let bump = series(&t, t.iter().map(|x| x * (1.0 - x)).collect());
        let tc = crossover_time(&bump, &zero).unwrap().unwrap();
        assert!((tc - 1.0).abs() < 0.1 + 1e-12);
        let short = series(&t[..5], vec![0.0; 5]);
        assert!(matches!(crossover_time(&short, &zero), Err(Error::Grid(_))));
    }

    #[test]
    fn crossover_interpolates() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let a = series(&t, vec![0.0, 1.0, 1.0, -3.0]);
        let b = series(&t, vec![0.0; 4]);
        assert_eq!(crossover_time(&a, &b).unwrap(), Some(2.25));
        let never = series(&t, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(crossover_time(&never, &b).unwrap(), None);
    }

    #[test]
    fn channel_layout() {
        let cfg = ExperimentConfig::new(4, 0.5).with_noise(NoiseDirection::Z, NoisySites::FirstK(2));
        let ch = cfg.charging_channels().unwrap();
        assert_eq!(ch.entries().len(), 6);
        assert_eq!(cfg.noisy_site_list().unwrap(), vec![1, 2]);
        let dis = cfg.discharging_channels().unwrap();
        assert!(dis.entries().iter().any(|c| c.kind == JumpKind::Dissipation));
        assert!((dis.max_constant_rate() - 0.5).abs() < 1e-15);
        let none = cfg.noiseless().charging_channels().unwrap();
        assert_eq!(none.entries().len(), 4);
        let bad = ExperimentConfig::new(4, 0.5).with_noise(NoiseDirection::X, NoisySites::FirstK(5));
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::new(4, 0.5);
        assert!(c.validate().is_ok());
        c.integrator.t_max = 4.05;
        assert!(c.validate().is_err());
        let c = ExperimentConfig::new(4, 0.5).with_init(InitialState::Thermal { beta: -1.0 });
        assert!(matches!(c.validate(), Err(Error::NegativeBeta(_))));
        let mut c = ExperimentConfig::new(5, 0.5);
        c.max_sites = 4;
        assert!(matches!(c.validate(), Err(Error::DimensionOverflow { .. })));
    }

    #[test]
    fn single_count_hierarchy_is_vacuous() {
        let cfg = ExperimentConfig::new(2, 0.5).with_t_max(0.5);
        let r = noise_count_hierarchy(&cfg, &[1]).unwrap();
        assert!(r.insufficient_runs);
        assert!(r.hierarchy_ok.iter().all(|b| !b));
        assert_eq!(r.window_end, None);
    }

    #[test]
    fn charging_raises_energy_and_work_starts_at_zero() {
        let cfg = ExperimentConfig::new(3, 0.5).with_t_max(2.0);
        let r = run_charging(&cfg).unwrap();
        assert_eq!(r.work.work[0], 0.0);
        assert!(r.work.work.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(r.work.work.iter().all(|w| (-1.0..=1.0).contains(w)));
        assert_eq!(r.work.power.as_ref().unwrap().len(), r.work.len());
    }

    #[test]
    fn zero_temperature_matches_ground() {
        let cfg = ExperimentConfig::new(2, 0.5).with_t_max(2.0);
        let g = run_charging(&cfg).unwrap();
        let t = run_charging(&cfg.clone().with_init(InitialState::Thermal { beta: 1e6 })).unwrap();
        for (a, b) in g.work.work.iter().zip(&t.work.work) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn noiseless_discharge_is_monotone() {
        let mut cfg = ExperimentConfig::new(2, 0.5).noiseless().with_t_max(20.0);
        cfg.charge_t_max = 20.0;
        let charged = charged_reference(&cfg).unwrap();
        let r = run_discharging(&cfg, &charged.state).unwrap();
        let e: Vec<f64> = r.work.work.iter().map(|w| w + r.start_energy).collect();
        assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!((r.start_energy - charged.energy).abs() < 1e-12);
        assert!(r.work.work.last().unwrap() < &-0.5);
    }

    #[test]
    fn cycle_switches_at_steady_state() {
        let mut cfg = ExperimentConfig::new(2, 0.5).with_t_max(2.0);
        cfg.mode = Mode::Cycle;
        cfg.charge_t_max = 40.0;
        let c = run_cycle(&cfg).unwrap();
        assert!(c.switch_time > 0.0 && c.switch_time < 40.0);
        assert!((c.charge.work.times.last().unwrap() - c.switch_time).abs() < 1e-9);
        assert!(c.discharge.work.work.last().unwrap() < &0.0);
    }

    #[test]
    fn grid_rows_follow_axis_order() {
        let cfg = ExperimentConfig::new(2, 0.5).with_t_max(0.5);
        let g = advantage_grid(&cfg, GridAxis::Lambda(vec![0.3, 0.5, 1.5]), GridQuantity::DeltaXMinusZ).unwrap();
        assert_eq!(g.values.len(), 3);
        assert_eq!(g.times.len(), 6);
        assert!(g.failures.is_empty());
        let single = advantage_grid(&cfg.clone().with_t_max(0.5), GridAxis::Lambda(vec![1.5]), GridQuantity::DeltaXMinusZ)
            .unwrap();
        assert_eq!(single.values[0], g.values[2]);
        assert!(advantage_grid(&cfg, GridAxis::Lambda(vec![0.5, 0.3]), GridQuantity::DeltaBitFlip).is_err());
    }

    #[test]
    fn identical_sizes_have_zero_deviation() {
        let cfg = ExperimentConfig::new(4, 0.5).with_t_max(1.0);
        let r = scale_invariance_check(&cfg, &[4, 4]).unwrap();
        assert_eq!(r.max_deviation, 0.0);
    }

    #[test]
    fn slope_checks_agree_with_first_order_terms() {
        let s = oracle_slopes(&[0.5], 0.5, 0.15, 1e-4).unwrap();
        assert!(s.iter().all(|c| c.rel_error < 1e-3), "{s:?}");
    }

    fn max_abs_gap(a: &WorkSeries, b: &WorkSeries) -> f64 {
        a.work.iter().zip(&b.work).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn steady_state_is_reached_and_stable() {
        let cfg = ExperimentConfig::new(4, 0.5).with_t_max(40.0);
        let r = run_charging(&cfg).unwrap();
        let ts = r.steady_time.expect("steady state");
        let k = (ts / 0.1).round() as usize;
        let k4 = ((4.0 * ts / 0.1).round() as usize).min(r.work.len() - 1);
        assert!((r.work.work[k] - r.work.work[k4]).abs() < 1e-3, "t* = {ts}");
    }

    #[test]
    fn anisotropy_barely_matters_with_noise() {
        let noisy = ExperimentConfig::new(4, 0.5);
        let mut aniso = noisy.clone();
        aniso.chain.anisotropy_gamma = 0.5;
        let noisy_gap = max_abs_gap(&run_charging(&noisy).unwrap().work, &run_charging(&aniso).unwrap().work);
        let clean_gap = max_abs_gap(
            &run_charging(&noisy.noiseless()).unwrap().work,
            &run_charging(&aniso.noiseless()).unwrap().work,
        );
        assert!(noisy_gap <= 5e-2, "{noisy_gap}");
        assert!(clean_gap > noisy_gap, "{clean_gap} vs {noisy_gap}");
    }

    #[test]
    fn markovian_noise_leaves_more_residual_energy() {
        let mut cfg = ExperimentConfig::new(4, 0.5).with_t_max(40.0);
        cfg.mode = Mode::Discharge;
        let r = noise_count_hierarchy(&cfg, &[0, 4]).unwrap();
        let (clean, noisy) = (&r.runs[0].work.work, &r.runs[1].work.work);
        // Noise extracts faster at first, then stalls with more energy left.
        assert!(noisy[1] < clean[1]);
        let tc = r.crossover_time.unwrap();
        assert!(tc > 1.0 && tc < 4.0, "{tc}");
        for (t, (n, c)) in r.times.iter().zip(noisy.iter().zip(clean)) {
            if *t > tc {
                assert!(n > c, "t {t}");
            }
        }
        assert!(noisy.last().unwrap() - clean.last().unwrap() > 0.1);
    }

    #[test]
    fn ohmic_discharge_ends_below_noiseless_residual() {
        let mut cfg = ExperimentConfig::new(4, 0.5).with_t_max(40.0).with_dephasing(Dephasing::Ohmic { s: 4.0, omega_c: 1.0 });
        cfg.mode = Mode::Discharge;
        let r = noise_count_hierarchy(&cfg, &[0, 4]).unwrap();
        assert!(r.runs[1].work.work.last().unwrap() < r.runs[0].work.work.last().unwrap());
    }

    #[test]
    fn saturated_work_grows_then_plateaus_with_ohmicity() {
        let cfg = ExperimentConfig::new(4, 0.5).with_t_max(40.0);
        let sweep = ohmicity_sweep(&cfg, &DEFAULT_OHMICITY).unwrap();
        let finals: Vec<f64> = sweep.iter().map(|p| *p.charge.work.work.last().unwrap()).collect();
        assert!(finals[0] < finals[1] && finals[1] < finals[2], "{finals:?}");
        assert!(finals[2..].iter().all(|w| (w - finals[2]).abs() < 1e-3), "{finals:?}");
        for p in &sweep {
            assert_eq!(p.non_markovian, p.s > 2.0);
        }
    }

    #[test]
    fn entanglement_revival_grows_with_ohmicity() {
        let mut peaks = Vec::new();
        for s in [2.5, 3.0, 4.0] {
            let mut cfg = ExperimentConfig::new(4, 0.5).with_t_max(40.0).with_dephasing(Dephasing::Ohmic { s, omega_c: 1.0 });
            cfg.track_entanglement = true;
            let e = run_charging(&cfg).unwrap().entanglement.unwrap().log_negativity;
            let k = e.iter().position(|x| *x < 1e-4).expect("collapse");
            let peak = e[k..].iter().cloned().fold(0.0, f64::max);
            assert!(peak > 1e-3, "s {s}: no revival");
            peaks.push(peak);
        }
        assert!(peaks.windows(2).all(|w| w[1] > w[0]), "{peaks:?}");
    }

    #[test]
    fn markovian_noisy_entanglement_vanishes() {
        let mut cfg = ExperimentConfig::new(4, 0.5).with_t_max(40.0);
        cfg.track_entanglement = true;
        let e = run_charging(&cfg).unwrap().entanglement.unwrap().log_negativity;
        assert!(e[0] > 0.1);
        assert!(*e.last().unwrap() < 1e-3);
    }

    #[test]
    fn hierarchy_transient_and_reversal() {
        let cfg = ExperimentConfig::new(4, 0.5).with_t_max(40.0);
        let r = noise_count_hierarchy(&cfg, &[0, 1, 2, 3, 4]).unwrap();
        let tc = r.window_end.unwrap();
        assert!(r.holds_on(0.1, tc));
        assert!(*r.reversed.last().unwrap());
        let c = r.crossover_time.unwrap();
        assert!(c > 0.0 && c < 4.0);
        // δ > 0 before the crossing and ≤ 0 at the first sample after it.
        let k = r.times.iter().position(|t| *t >= c).unwrap();
        assert!(r.delta_series[1..k].iter().all(|d| *d > 0.0));
        assert!(r.delta_series[k] <= 0.0);
    }

    #[test]
    fn non_markovian_margin_in_early_window() {
        let cfg = ExperimentConfig::new(4, 0.5).with_t_max(4.0).with_dephasing(Dephasing::Ohmic { s: 4.0, omega_c: 1.0 });
        let r = noise_count_hierarchy(&cfg, &[0, 1, 2, 3, 4]).unwrap();
        for (t, m) in r.times.iter().zip(&r.min_margin) {
            if *t > 0.2 {
                assert!(*m > 1e-6, "t {t}: margin {m}");
            }
        }
    }

    #[test]
    fn grid_signs_follow_phase() {
        let cfg = ExperimentConfig::new(4, 0.5).with_t_max(4.0);
        let g = advantage_grid(&cfg, GridAxis::Lambda(vec![0.5, 0.9, 1.5]), GridQuantity::DeltaXMinusZ).unwrap();
        let row = |i: usize| -> Vec<f64> { g.values[i].iter().map(|v| v.unwrap()).collect() };
        let end_positive = |r: &[f64]| {
            let k = r.iter().skip(1).position(|d| *d <= 0.0).map(|k| k + 1).unwrap_or(r.len());
            g.times[k - 1]
        };
        let (l05, l09, l15) = (row(0), row(1), row(2));
        assert!((end_positive(&l05) - 2.0).abs() < 0.3, "{}", end_positive(&l05));
        assert!((end_positive(&l09) - 1.0).abs() < 0.3, "{}", end_positive(&l09));
        assert!(l15[1..].iter().all(|d| *d <= 0.0));
    }

    #[test]
    fn bit_flip_advantage_trades_height_for_duration() {
        let cfg = ExperimentConfig::new(4, 0.5).with_t_max(4.0);
        let ratios = vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0];
        let g = advantage_grid(&cfg, GridAxis::Ratio(ratios.clone()), GridQuantity::DeltaBitFlip).unwrap();
        let rows: Vec<Vec<f64>> = g.values.iter().map(|r| r.iter().map(|v| v.unwrap()).collect()).collect();
        let persistence: Vec<usize> = rows.iter().map(|r| r.iter().skip(1).take_while(|v| **v > 0.0).count()).collect();
        let peaks: Vec<f64> = rows.iter().map(|r| r.iter().cloned().fold(f64::MIN, f64::max)).collect();
        assert!(persistence.windows(2).all(|w| w[1] <= w[0]), "{persistence:?}");
        assert!(peaks.windows(2).all(|w| w[1] > w[0]), "{peaks:?}");
        for (r, p) in ratios.iter().zip(&persistence) {
            if (0.2..=0.4).contains(r) {
                let t_end = *p as f64 * 0.1;
                assert!(t_end > 1.5 && t_end < 3.0, "ratio {r}: {t_end}");
            }
        }
    }

    proptest! {
        #[test]
        fn crossover_brackets_sign_change(d in proptest::collection::vec(-1.0f64..1.0, 3..40)) {
            let t: Vec<f64> = (0..=d.len()).map(|k| k as f64 * 0.1).collect();
            let mut delta = vec![0.0];
            delta.extend(d);
            let a = series(&t, delta.clone());
            let b = series(&t, vec![0.0; t.len()]);
            if let Some(tc) = crossover_time(&a, &b).unwrap() {
                let k = t.iter().position(|x| *x >= tc - 1e-12).unwrap();
                prop_assert!(delta[1..k].iter().all(|x| *x > 0.0));
                prop_assert!(delta[k] <= 0.0);
            }
        }
    }
}
