use std::path::Path;
use std::time::Instant;

use qbattery_core::protocols::{self, GridQuantity, RunRecord};
use qbattery_core::Error as CoreError;
use serde_json::{json, Value};

use crate::config::{ConfigError, ExperimentKind, RunConfig};
use crate::output::{fmt_num, fmt_opt, Manifest, OutputDir};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DIVERGENCE: u8 = 3;
pub const EXIT_ORACLE: u8 = 4;

/// Warnings kept per run before the rest are summarised.
const WARNINGS_PER_RUN: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Core(CoreError::Divergence { .. }) => EXIT_DIVERGENCE,
            RunError::Core(
                CoreError::InvalidParameter(_)
                | CoreError::DimensionOverflow { .. }
                | CoreError::InvalidSite { .. }
                | CoreError::NegativeBeta(_)
                | CoreError::Grid(_),
            ) => EXIT_CONFIG,
            _ => 1,
        }
    }
}

struct Ctx {
    out: OutputDir,
    warnings: Vec<String>,
}

impl Ctx {
    fn warn(&mut self, label: &str, ws: &[String]) {
        for w in ws.iter().take(WARNINGS_PER_RUN) {
            self.warnings.push(format!("{label}: {w}"));
        }
        if ws.len() > WARNINGS_PER_RUN {
            self.warnings.push(format!("{label}: {} more warnings", ws.len() - WARNINGS_PER_RUN));
        }
    }

    fn run(&mut self, name: &str, r: &RunRecord) -> Result<(), RunError> {
        let logneg = r.entanglement.as_ref().map(|e| e.log_negativity.as_slice());
        self.out.series(name, &r.work, logneg)?;
        self.warn(name, &r.warnings);
        Ok(())
    }
}

fn run_summary(r: &RunRecord) -> Value {
    json!({
        "start_energy": r.start_energy,
        "final_work": r.work.final_work(),
        "steady_time": r.steady_time,
        "noisy_sites": r.noisy_sites,
        "max_trace_error": r.physicality.max_trace_error,
        "max_hermiticity_error": r.physicality.max_hermiticity_error,
        "min_eigenvalue": r.physicality.min_eigenvalue,
    })
}

/// Runs one experiment, writes its data files and manifest into `out`.
pub fn dispatch(kind: ExperimentKind, cfg: &RunConfig, out: &Path) -> Result<Manifest, RunError> {
    if let Some(k) = cfg.kind {
        if k != kind {
            return Err(ConfigError::KindMismatch { config: k.to_string(), cli: kind.to_string() }.into());
        }
    }
    let start = Instant::now();
    let mut ctx = Ctx { out: OutputDir::create(out)?, warnings: Vec::new() };
    let e = &cfg.experiment;
    let mut passed = None;

    let summary = match kind {
        ExperimentKind::Charge => {
            let r = protocols::run_charging(e)?;
            ctx.run("work.csv", &r)?;
            run_summary(&r)
        }
        ExperimentKind::Discharge => {
            let reference = protocols::charged_reference(e)?;
            let r = protocols::run_discharging(e, &reference.state)?;
            ctx.run("work.csv", &r)?;
            json!({ "charged_energy": reference.energy, "charge_steady_time": reference.steady_time, "run": run_summary(&r) })
        }
        ExperimentKind::Cycle => {
            let c = protocols::run_cycle(e)?;
            ctx.run("charge.csv", &c.charge)?;
            ctx.run("discharge.csv", &c.discharge)?;
            json!({ "switch_time": c.switch_time, "charge": run_summary(&c.charge), "discharge": run_summary(&c.discharge) })
        }
        ExperimentKind::Hierarchy => {
            let r = protocols::noise_count_hierarchy(e, &cfg.hierarchy_counts)?;
            for (c, run) in r.counts.iter().zip(&r.runs) {
                ctx.run(&format!("work_k{c}.csv", c = c), run)?;
            }
            let rows = (0..r.times.len()).map(|k| {
                vec![
                    fmt_num(r.times[k]),
                    fmt_num(r.delta_series[k]),
                    r.hierarchy_ok[k].to_string(),
                    r.reversed[k].to_string(),
                    fmt_num(r.min_margin[k]),
                ]
            });
            ctx.out.table("hierarchy.csv", &["t", "delta", "hierarchy_ok", "reversed", "min_margin"], rows)?;
            json!({
                "quantity": r.quantity,
                "counts": r.counts,
                "crossover_time": r.crossover_time,
                "window_end": r.window_end,
                "reversed_at_end": r.reversed.last().copied().unwrap_or(false),
                "insufficient_runs": r.insufficient_runs,
            })
        }
        ExperimentKind::Grid => {
            let g = protocols::advantage_grid(e, cfg.grid_axis.clone(), cfg.grid_quantity)?;
            let value_name = match g.quantity {
                GridQuantity::DeltaBitFlip => "delta_bit_flip",
                GridQuantity::DeltaXMinusZ => "delta_x_minus_z",
            };
            ctx.out.grid("grid.csv", g.axis.name(), value_name, g.axis.values(), &g.times, &g.values)?;
            for (a, msg) in &g.failures {
                ctx.warnings.push(format!("{} = {a}: {msg}", g.axis.name()));
            }
            json!({ "axis": g.axis.name(), "quantity": g.quantity, "rows": g.values.len(), "failed_rows": g.failures.len() })
        }
        ExperimentKind::Ohmicity => {
            let pts = protocols::ohmicity_sweep(e, &cfg.ohmicity)?;
            let mut rows = Vec::new();
            for p in &pts {
                ctx.run(&format!("charge_s{}.csv", p.s), &p.charge)?;
                ctx.run(&format!("discharge_s{}.csv", p.s), &p.discharge)?;
                rows.push(json!({
                    "s": p.s,
                    "non_markovian": p.non_markovian,
                    "charge": run_summary(&p.charge),
                    "discharge": run_summary(&p.discharge),
                }));
            }
            Value::Array(rows)
        }
        ExperimentKind::Thermal => {
            let pts = protocols::thermal_scan(e, &cfg.thermal_betas)?;
            for p in &pts {
                let w = &p.run.work;
                let rows = (0..w.len()).map(|k| {
                    vec![
                        fmt_num(w.times[k]),
                        fmt_num(w.work[k]),
                        fmt_opt(w.power.as_ref().map(|v| v[k])),
                        fmt_num(p.delta[k]),
                    ]
                });
                ctx.out.table(&format!("thermal_beta{}.csv", p.beta), &["t", "work", "power", "delta"], rows)?;
                ctx.warn(&format!("beta {}", p.beta), &p.run.warnings);
            }
            let rows = pts.iter().map(|p| {
                vec![fmt_num(p.beta), p.window.to_string(), fmt_opt(p.crossover_time), fmt_num(p.initial_slope)]
            });
            ctx.out.table("thermal.csv", &["beta", "window", "crossover_time", "initial_slope"], rows)?;
            let (lo, hi) = cfg.thermal_bracket;
            let threshold = match protocols::thermal_threshold(e, lo, hi) {
                Ok(b) => Some(b),
                Err(err) => {
                    ctx.warnings.push(format!("thermal threshold: {err}"));
                    None
                }
            };
            json!({ "threshold_beta": threshold })
        }
        ExperimentKind::Scale => {
            let r = protocols::scale_invariance_check(e, &cfg.scale_n)?;
            for (n, run) in r.n_values.iter().zip(&r.runs) {
                ctx.run(&format!("scale_n{n}.csv"), run)?;
            }
            let rows = r.pairwise.iter().map(|(a, b, d)| vec![a.to_string(), b.to_string(), fmt_num(*d)]);
            ctx.out.table("scale.csv", &["n_i", "n_j", "max_power_deviation"], rows)?;
            json!({ "max_deviation": r.max_deviation })
        }
        ExperimentKind::OracleCheck => {
            let integ = e.integrator.with_t_max(cfg.oracle_t_max);
            let r = protocols::oracle_equivalence(&cfg.oracle_lambdas, &cfg.oracle_ratios, e.rate_abs, &integ)?;
            let rows = r.cells.iter().map(|c| {
                let d = c.direction.map(|d| format!("{d:?}").to_lowercase()).unwrap_or_else(|| "none".into());
                vec![d, fmt_num(c.lambda), fmt_num(c.ratio), fmt_num(c.max_deviation)]
            });
            ctx.out.table("oracle.csv", &["direction", "lambda", "ratio", "max_deviation"], rows)?;
            let rows = r.slopes.iter().map(|s| {
                vec![
                    serde_json::to_value(s.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                    fmt_num(s.lambda),
                    fmt_num(s.engine_slope),
                    fmt_num(s.predicted),
                    fmt_num(s.rel_error),
                ]
            });
            ctx.out.table("slopes.csv", &["kind", "lambda", "engine_slope", "predicted", "rel_error"], rows)?;
            let ok = r.max_deviation < cfg.oracle_tol && r.max_slope_rel_error < cfg.oracle_slope_tol;
            passed = Some(ok);
            json!({
                "max_deviation": r.max_deviation,
                "tolerance": cfg.oracle_tol,
                "max_slope_rel_error": r.max_slope_rel_error,
                "slope_tolerance": cfg.oracle_slope_tol,
            })
        }
    };

    let manifest = Manifest {
        software: format!("qbattery {}", env!("CARGO_PKG_VERSION")),
        kind: kind.to_string(),
        config: cfg.resolved.clone(),
        duration_s: start.elapsed().as_secs_f64(),
        warnings: ctx.warnings,
        files: ctx.out.files,
        passed,
        summary,
    };
    manifest.write(out)?;
    Ok(manifest)
}
