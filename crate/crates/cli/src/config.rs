//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment. Keys are dotted
//! namespaces; every key has a default, so an empty file is valid.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use qbattery_core::dynamics::IntegratorConfig;
use qbattery_core::protocols::{
    Dephasing, ExperimentConfig, GridAxis, GridQuantity, InitialState, Mode, NoiseDirection, NoisySites,
    DEFAULT_OHMICITY,
};
use qbattery_core::SpinChainParams;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("{key}: cannot parse `{value}` ({expected})")]
    BadValue { key: String, value: String, expected: &'static str },
    #[error("{key}: out of range, requires {bound}")]
    OutOfRange { key: String, bound: String },
    #[error("experiment.kind = {config} conflicts with the `{cli}` subcommand")]
    KindMismatch { config: String, cli: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Charge,
    Discharge,
    Cycle,
    Hierarchy,
    Grid,
    Ohmicity,
    Thermal,
    Scale,
    OracleCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Charge,
        ExperimentKind::Discharge,
        ExperimentKind::Cycle,
        ExperimentKind::Hierarchy,
        ExperimentKind::Grid,
        ExperimentKind::Ohmicity,
        ExperimentKind::Thermal,
        ExperimentKind::Scale,
        ExperimentKind::OracleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Charge => "charge",
            ExperimentKind::Discharge => "discharge",
            ExperimentKind::Cycle => "cycle",
            ExperimentKind::Hierarchy => "hierarchy",
            ExperimentKind::Grid => "grid",
            ExperimentKind::Ohmicity => "ohmicity",
            ExperimentKind::Thermal => "thermal",
            ExperimentKind::Scale => "scale",
            ExperimentKind::OracleCheck => "oracle_check",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s || (s == "oracle-check" && *k == ExperimentKind::OracleCheck))
            .ok_or_else(|| format!("unknown experiment kind `{s}`"))
    }
}

pub struct KeySpec {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(key: &'static str, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec { key, default, help }
}

pub const KEYS: &[KeySpec] = &[
    key("experiment.kind", "", "optional; must match the subcommand when set"),
    key("chain.n_sites", "4", "number of spins N"),
    key("chain.lambda", "0.5", "coupling ratio J/h"),
    key("chain.gamma", "1", "XY anisotropy"),
    key("chain.h", "1", "transverse field"),
    key("chain.max_sites", "12", "dimension cap on N"),
    key("noise.direction", "x", "none | z | x"),
    key("noise.count", "all", "dephased sites 1..k, or `all`"),
    key("noise.sites", "", "explicit comma-separated site list; overrides noise.count"),
    key("noise.schedule", "markovian", "markovian | ohmic"),
    key("noise.s", "4", "Ohmicity parameter (ohmic schedule)"),
    key("noise.omega_c", "1", "cutoff frequency (ohmic schedule)"),
    key("rates.abs", "0.5", "absorption rate while charging"),
    key("rates.dis", "0.5", "dissipation rate while discharging"),
    key("rates.ratio", "0.3", "Markovian dephasing rate over pump rate"),
    key("init.kind", "ground", "ground | thermal"),
    key("init.beta", "10", "inverse temperature for thermal init"),
    key("integrator.dt", "0.001", "RK4 step"),
    key("integrator.t_max", "4", "horizon"),
    key("integrator.record_every", "100", "steps between recorded samples"),
    key("integrator.positivity_tol", "1e-8", "eigenvalue floor before a warning"),
    key("integrator.trace_tol", "1e-9", "trace drift that aborts the run"),
    key("steady.eps", "1e-4", "|dW/dt| threshold for steady state"),
    key("charge.t_max", "40", "horizon of the charging run feeding discharge"),
    key("output.logneg", "false", "add nearest-neighbour log-negativity column"),
    key("hierarchy.mode", "charge", "charge | discharge"),
    key("hierarchy.counts", "", "noisy-site counts; default 0..N"),
    key("grid.axis", "lambda", "lambda | ratio"),
    key("grid.values", "0.1:2.0:20", "list or start:stop:count"),
    key("grid.quantity", "bit_flip", "bit_flip (x minus noiseless) | x_minus_z"),
    key("ohmicity.s", "0.5,1.5,2.5,3,4", "Ohmicity values"),
    key("thermal.betas", "9.4,0.5,0.1", "inverse temperatures"),
    key("thermal.bracket", "0.1:20", "bisection bracket for the slope threshold"),
    key("scale.n", "2,4,6,8", "chain lengths"),
    key("oracle.lambdas", "0.1:1.0:10", "two-site couplings"),
    key("oracle.ratios", "0.1:0.5:5", "dephasing ratios"),
    key("oracle.t_max", "10", "oracle horizon"),
    key("oracle.tol", "1e-6", "max work deviation for a pass"),
    key("oracle.slope_tol", "1e-3", "max relative slope error for a pass"),
];

/// Fully resolved configuration plus the string echo of every key.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub kind: Option<ExperimentKind>,
    pub hierarchy_counts: Vec<usize>,
    pub grid_axis: GridAxis,
    pub grid_quantity: GridQuantity,
    pub ohmicity: Vec<f64>,
    pub thermal_betas: Vec<f64>,
    pub thermal_bracket: (f64, f64),
    pub scale_n: Vec<usize>,
    pub oracle_lambdas: Vec<f64>,
    pub oracle_ratios: Vec<f64>,
    pub oracle_t_max: f64,
    pub oracle_tol: f64,
    pub oracle_slope_tol: f64,
    pub resolved: BTreeMap<String, String>,
}

/// Parses `key = value` lines into a raw map; later lines win.
pub fn parse_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Parse { line: i + 1, msg: format!("expected `key = value`, got `{line}`") });
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Parse { line: i + 1, msg: "empty key".into() });
        }
        if !KEYS.iter().any(|s| s.key == k) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn parse_override(s: &str) -> Result<(String, String), ConfigError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| ConfigError::Invalid(format!("--set expects key=value, got `{s}`")))?;
    let k = k.trim();
    if !KEYS.iter().any(|s| s.key == k) {
        return Err(ConfigError::UnknownKey(k.to_string()));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    resolve(parse_text(&text)?)
}

/// Optional file, then `--set` overrides on top.
pub fn load_with_overrides(path: Option<&Path>, sets: &[String]) -> Result<RunConfig, ConfigError> {
    let mut raw = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|source| ConfigError::Io { path: p.display().to_string(), source })?;
            parse_text(&text)?
        }
        None => BTreeMap::new(),
    };
    for s in sets {
        let (k, v) = parse_override(s)?;
        raw.insert(k, v);
    }
    resolve(raw)
}

pub fn load_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    resolve(parse_text(text)?)
}

struct Values(BTreeMap<String, String>);

impl Values {
    fn raw(&self, k: &str) -> &str {
        &self.0[k]
    }

    fn get<T: FromStr>(&self, k: &str, expected: &'static str) -> Result<T, ConfigError> {
        let v = self.raw(k);
        v.parse().map_err(|_| ConfigError::BadValue { key: k.into(), value: v.into(), expected })
    }

    fn real(&self, k: &str) -> Result<f64, ConfigError> {
        let x: f64 = self.get(k, "a real number")?;
        if !x.is_finite() {
            return Err(ConfigError::OutOfRange { key: k.into(), bound: "a finite value".into() });
        }
        Ok(x)
    }

    fn positive(&self, k: &str) -> Result<f64, ConfigError> {
        let x = self.real(k)?;
        if x <= 0.0 {
            return Err(range(k, &format!("{} > 0", short(k))));
        }
        Ok(x)
    }

    fn nonneg(&self, k: &str) -> Result<f64, ConfigError> {
        let x = self.real(k)?;
        if x < 0.0 {
            return Err(range(k, &format!("{} ≥ 0", short(k))));
        }
        Ok(x)
    }

    fn reals(&self, k: &str) -> Result<Vec<f64>, ConfigError> {
        parse_reals(self.raw(k)).ok_or_else(|| ConfigError::BadValue {
            key: k.into(),
            value: self.raw(k).into(),
            expected: "a comma list or start:stop:count",
        })
    }

    fn sizes(&self, k: &str) -> Result<Vec<usize>, ConfigError> {
        let v = self.raw(k);
        v.split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| ConfigError::BadValue { key: k.into(), value: v.into(), expected: "a comma list of integers" })
    }

    fn choice<'a>(&self, k: &str, options: &[&'a str]) -> Result<&'a str, ConfigError> {
        let v = self.raw(k);
        options.iter().copied().find(|o| *o == v).ok_or_else(|| ConfigError::BadValue {
            key: k.into(),
            value: v.into(),
            expected: "one of the listed options",
        })
    }
}

fn short(k: &str) -> &str {
    k.rsplit('.').next().unwrap_or(k)
}

fn range(k: &str, bound: &str) -> ConfigError {
    ConfigError::OutOfRange { key: k.into(), bound: bound.into() }
}

/// `a,b,c` or `start:stop:count` (inclusive, evenly spaced) or `lo:hi`.
pub fn parse_reals(s: &str) -> Option<Vec<f64>> {
    if s.contains(':') {
        let p: Vec<&str> = s.split(':').map(str::trim).collect();
        let lo: f64 = p[0].parse().ok()?;
        let hi: f64 = p.get(1)?.parse().ok()?;
        return match p.len() {
            2 => Some(vec![lo, hi]),
            3 => match p[2].parse::<usize>().ok()? {
                0 => None,
                1 => Some(vec![lo]),
                n => Some((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()),
            },
            _ => None,
        };
    }
    s.split(',').map(|p| p.trim().parse::<f64>().ok()).collect()
}

fn resolve(given: BTreeMap<String, String>) -> Result<RunConfig, ConfigError> {
    let mut all = BTreeMap::new();
    for spec in KEYS {
        all.insert(spec.key.to_string(), spec.default.to_string());
    }
    all.extend(given);
    let v = Values(all);

    let kind = match v.raw("experiment.kind") {
        "" => None,
        s => Some(s.parse::<ExperimentKind>().map_err(ConfigError::Invalid)?),
    };

    let n_sites: usize = v.get("chain.n_sites", "a non-negative integer")?;
    if n_sites < 2 {
        return Err(range("chain.n_sites", "n_sites ≥ 2"));
    }
    let max_sites: usize = v.get("chain.max_sites", "a non-negative integer")?;
    if n_sites > max_sites {
        return Err(range("chain.n_sites", &format!("n_sites ≤ max_sites ({max_sites})")));
    }
    let mut chain = SpinChainParams::new(n_sites, v.real("chain.lambda")?);
    chain.anisotropy_gamma = v.nonneg("chain.gamma")?;
    chain.field_h = v.real("chain.h")?;
    if chain.field_h == 0.0 {
        return Err(range("chain.h", "h ≠ 0"));
    }

    let noise_direction = match v.choice("noise.direction", &["none", "z", "x"])? {
        "none" => NoiseDirection::None,
        "z" => NoiseDirection::Z,
        _ => NoiseDirection::X,
    };
    let noisy_sites = if !v.raw("noise.sites").is_empty() {
        NoisySites::Explicit(v.sizes("noise.sites")?)
    } else if v.raw("noise.count") == "all" {
        NoisySites::All
    } else {
        let k: usize = v.get("noise.count", "an integer or `all`")?;
        if k > n_sites {
            return Err(range("noise.count", &format!("count ≤ n_sites ({n_sites})")));
        }
        NoisySites::FirstK(k)
    };
    let dephasing = match v.choice("noise.schedule", &["markovian", "ohmic"])? {
        "markovian" => Dephasing::Markovian { ratio: v.nonneg("rates.ratio")? },
        _ => Dephasing::Ohmic { s: v.positive("noise.s")?, omega_c: v.positive("noise.omega_c")? },
    };
    let init = match v.choice("init.kind", &["ground", "thermal"])? {
        "ground" => InitialState::Ground,
        _ => InitialState::Thermal { beta: v.nonneg("init.beta")? },
    };

    let dt = v.positive("integrator.dt")?;
    let record_every: usize = v.get("integrator.record_every", "a positive integer")?;
    if record_every == 0 {
        return Err(range("integrator.record_every", "record_every ≥ 1"));
    }
    let integrator = IntegratorConfig {
        positivity_tol: v.positive("integrator.positivity_tol")?,
        trace_tol: v.positive("integrator.trace_tol")?,
        ..IntegratorConfig::default()
    }
    .with_step(dt, record_every)
    .with_t_max(v.positive("integrator.t_max")?);

    let experiment = ExperimentConfig {
        chain,
        mode: match v.choice("hierarchy.mode", &["charge", "discharge"])? {
            "charge" => Mode::Charge,
            _ => Mode::Discharge,
        },
        noise_direction,
        noisy_sites,
        rate_abs: v.nonneg("rates.abs")?,
        rate_dis: v.nonneg("rates.dis")?,
        dephasing,
        init,
        integrator,
        steady_eps: v.positive("steady.eps")?,
        charge_t_max: v.positive("charge.t_max")?,
        track_entanglement: v.get("output.logneg", "true or false")?,
        max_sites,
    };
    experiment.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

    let hierarchy_counts =
        if v.raw("hierarchy.counts").is_empty() { (0..=n_sites).collect() } else { v.sizes("hierarchy.counts")? };
    if let Some(&k) = hierarchy_counts.iter().find(|k| **k > n_sites) {
        return Err(range("hierarchy.counts", &format!("count ≤ n_sites ({n_sites}), got {k}")));
    }
    let grid_values = v.reals("grid.values")?;
    let grid_axis = match v.choice("grid.axis", &["lambda", "ratio"])? {
        "lambda" => GridAxis::Lambda(grid_values),
        _ => GridAxis::Ratio(grid_values),
    };
    let grid_quantity = match v.choice("grid.quantity", &["bit_flip", "x_minus_z"])? {
        "bit_flip" => GridQuantity::DeltaBitFlip,
        _ => GridQuantity::DeltaXMinusZ,
    };
    let ohmicity = if v.raw("ohmicity.s").is_empty() { DEFAULT_OHMICITY.to_vec() } else { v.reals("ohmicity.s")? };
    let bracket = v.reals("thermal.bracket")?;
    if bracket.len() != 2 || !(bracket[0] < bracket[1]) {
        return Err(range("thermal.bracket", "lo < hi"));
    }
    let scale_n = v.sizes("scale.n")?;
    if let Some(&n) = scale_n.iter().find(|n| **n < 2 || **n > max_sites) {
        return Err(range("scale.n", &format!("2 ≤ n ≤ max_sites ({max_sites}), got {n}")));
    }

    Ok(RunConfig {
        experiment,
        kind,
        hierarchy_counts,
        grid_axis,
        grid_quantity,
        ohmicity,
        thermal_betas: v.reals("thermal.betas")?,
        thermal_bracket: (bracket[0], bracket[1]),
        scale_n,
        oracle_lambdas: v.reals("oracle.lambdas")?,
        oracle_ratios: v.reals("oracle.ratios")?,
        oracle_t_max: v.positive("oracle.t_max")?,
        oracle_tol: v.positive("oracle.tol")?,
        oracle_slope_tol: v.positive("oracle.slope_tol")?,
        resolved: v.0,
    })
}

/// Help text listing every key with its default.
pub fn keys_help() -> String {
    let width = KEYS.iter().map(|k| k.key.len()).max().unwrap_or(0);
    let mut s = String::from("Configuration keys (default in brackets):\n");
    for k in KEYS {
        let d = if k.default.is_empty() { "unset" } else { k.default };
        s.push_str(&format!("  {:width$}  [{d}]  {}\n", k.key, k.help));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_resolves_defaults() {
        let c = load_config_str("experiment.kind = charge\nchain.n_sites = 4\nchain.lambda = 0.5\n").unwrap();
        let e = &c.experiment;
        assert_eq!(e.chain.anisotropy_gamma, 1.0);
        assert_eq!(e.rate_abs, 0.5);
        assert_eq!(e.dephasing, Dephasing::Markovian { ratio: 0.3 });
        assert_eq!(e.noise_direction, NoiseDirection::X);
        assert_eq!(e.noisy_sites, NoisySites::All);
        assert_eq!(c.kind, Some(ExperimentKind::Charge));
        assert_eq!(c.resolved.len(), KEYS.len());
    }

    #[test]
    fn ohmic_schedule() {
        let c = load_config_str("chain.lambda = 0.5\nnoise.schedule = ohmic\nnoise.s = 4").unwrap();
        assert_eq!(c.experiment.dephasing, Dephasing::Ohmic { s: 4.0, omega_c: 1.0 });
        assert!(c.experiment.dephasing.is_non_markovian());
    }

    #[test]
    fn range_error_names_the_bound() {
        let e = load_config_str("chain.n_sites = 0").unwrap_err();
        assert!(e.to_string().contains("n_sites ≥ 2"), "{e}");
    }

    #[test]
    fn parse_error_has_line_number() {
        let e = load_config_str("# header\nchain.lambda = 0.5\nnonsense\n").unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 3, .. }), "{e}");
    }

    #[test]
    fn unknown_key() {
        assert!(matches!(load_config_str("chain.lamda = 1"), Err(ConfigError::UnknownKey(k)) if k == "chain.lamda"));
        assert!(parse_override("foo=1").is_err());
    }

    #[test]
    fn comments_and_last_wins() {
        let c = load_config_str("chain.lambda = 0.2 # trailing\nchain.lambda = 0.7\n").unwrap();
        assert_eq!(c.experiment.chain.coupling_lambda, 0.7);
    }

    #[test]
    fn ranges_and_lists() {
        assert_eq!(parse_reals("1,2.5").unwrap(), vec![1.0, 2.5]);
        assert_eq!(parse_reals("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_reals("0.1:20").unwrap(), vec![0.1, 20.0]);
        assert!(parse_reals("0:1:0").is_none());
        let c = load_config_str("").unwrap();
        assert_eq!(c.grid_axis.values().len(), 20);
        assert_eq!(c.oracle_lambdas.len() * c.oracle_ratios.len(), 50);
        assert_eq!(c.hierarchy_counts, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn noise_site_selection() {
        let c = load_config_str("noise.count = 2").unwrap();
        assert_eq!(c.experiment.noisy_sites, NoisySites::FirstK(2));
        let c = load_config_str("noise.count = 2\nnoise.sites = 4,1").unwrap();
        assert_eq!(c.experiment.noisy_sites, NoisySites::Explicit(vec![4, 1]));
        assert!(matches!(load_config_str("noise.count = 5"), Err(ConfigError::OutOfRange { .. })));
        assert!(matches!(load_config_str("noise.sites = 0"), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn bad_values() {
        assert!(matches!(load_config_str("rates.abs = -1"), Err(ConfigError::OutOfRange { .. })));
        assert!(matches!(load_config_str("noise.direction = y"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(load_config_str("integrator.t_max = 4.05"), Err(ConfigError::Invalid(_))));
        assert!(matches!(load_config_str("chain.n_sites = 13"), Err(ConfigError::OutOfRange { .. })));
        assert!(load_config_str("chain.n_sites = 13\nchain.max_sites = 13").is_ok());
    }

    #[test]
    fn help_lists_every_key() {
        let h = keys_help();
        for k in KEYS {
            assert!(h.contains(k.key));
        }
    }
}
