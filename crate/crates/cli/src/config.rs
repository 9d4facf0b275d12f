//! Experiment configuration files.
//!
//! A config is a flat table of typed keys, read as TOML or, when the text
//! starts with `{`, as JSON. Frequencies carry their unit in the key name
//! (`g_b_hz` or `g_b_khz`) and are converted to rad/s once, here. Times
//! likewise use `_s` or `_us`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use ajch::dynamics::{uniform_grid, NoiseModel};
use ajch::model::{hopping_matrix, uniform_chain_kappa, IonChainGeometry, ModelParams, RadialMode};
use ajch::scalar::angular;
use ajch::sequence::{Pulse, PulseKind};
use ajch::Level;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Every key a config may contain.
pub const KNOWN_KEYS: &[&str] = &[
    "schema",
    "experiment",
    "description",
    "n_sites",
    "fock_cutoff",
    "kappa_hz",
    "kappa_khz",
    "trap_axial_hz",
    "trap_axial_khz",
    "trap_radial_hz",
    "trap_radial_khz",
    "g_b_hz",
    "g_b_khz",
    "delta_hz",
    "delta_khz",
    "eta",
    "kappa_scale",
    "dephasing_rate",
    "dephasing_contrast",
    "dephasing_contrast_time_us",
    "heating_rate",
    "rabi_drift_fraction",
    "prep_infidelity",
    "initial_state",
    "thermal_nbar",
    "preparation",
    "t_start_s",
    "t_stop_s",
    "t_step_s",
    "t_start_us",
    "t_stop_us",
    "t_step_us",
    "shots",
    "seed",
    "measurement_mode",
    "hopping_during_pulses",
    "max_sector",
];

/// The document as written, before units and defaults are resolved.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub schema: Option<u32>,
    pub experiment: Option<String>,
    pub description: Option<String>,
    pub n_sites: Option<usize>,
    pub fock_cutoff: Option<usize>,
    pub kappa_hz: Option<f64>,
    pub kappa_khz: Option<f64>,
    pub trap_axial_hz: Option<f64>,
    pub trap_axial_khz: Option<f64>,
    pub trap_radial_hz: Option<f64>,
    pub trap_radial_khz: Option<f64>,
    pub g_b_hz: Option<f64>,
    pub g_b_khz: Option<f64>,
    pub delta_hz: Option<f64>,
    pub delta_khz: Option<f64>,
    pub eta: Option<f64>,
    pub kappa_scale: Option<f64>,
    pub dephasing_rate: Option<f64>,
    pub dephasing_contrast: Option<f64>,
    pub dephasing_contrast_time_us: Option<f64>,
    pub heating_rate: Option<f64>,
    pub rabi_drift_fraction: Option<f64>,
    pub prep_infidelity: Option<f64>,
    pub initial_state: Option<Vec<String>>,
    pub thermal_nbar: Option<f64>,
    pub preparation: Option<Vec<String>>,
    pub t_start_s: Option<f64>,
    pub t_stop_s: Option<f64>,
    pub t_step_s: Option<f64>,
    pub t_start_us: Option<f64>,
    pub t_stop_us: Option<f64>,
    pub t_step_us: Option<f64>,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub measurement_mode: Option<String>,
    pub hopping_during_pulses: Option<bool>,
    pub max_sector: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Hopping,
    Blockade,
    Eigen,
    MapCheck,
    Leakage,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "hopping" => Self::Hopping,
            "blockade" => Self::Blockade,
            "eigen" => Self::Eigen,
            "map_check" => Self::MapCheck,
            "leakage" => Self::Leakage,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Hopping => "hopping",
            Self::Blockade => "blockade",
            Self::Eigen => "eigen",
            Self::MapCheck => "map_check",
            Self::Leakage => "leakage",
        }
    }

    fn needs_grid(self) -> bool {
        matches!(self, Self::Hopping | Self::Blockade)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementMode {
    /// Populations read directly off the simulated state.
    ExactManifold,
    /// Mapping pulses with every coupling equal to the reference one.
    MappedIdeal,
    /// Mapping pulses with their true √(n+1) couplings.
    MappedRealistic,
}

impl MeasurementMode {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "exact_manifold" => Self::ExactManifold,
            "mapped_ideal" => Self::MappedIdeal,
            "mapped_realistic" => Self::MappedRealistic,
            _ => return None,
        })
    }

    pub fn is_mapped(self) -> bool {
        self != Self::ExactManifold
    }
}

/// Initial product state, before preparation pulses.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Product(Vec<(Level, usize)>),
    /// Every site in `down` with thermal phonons of this mean.
    Thermal(f64),
}

/// Time window for a dephasing calibration: contrast `target` at `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingTarget {
    pub contrast: f64,
    pub time: f64,
}

/// A validated config with every quantity in SI angular units.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub description: String,
    pub n_sites: usize,
    pub fock_cutoff: usize,
    /// Model at the configured hopping, before `kappa_scale`.
    pub params: ModelParams<f64>,
    pub kappa_scale: f64,
    pub noise: NoiseModel<f64>,
    /// When set, the dephasing rate is fitted at run time.
    pub dephasing_target: Option<DephasingTarget>,
    pub initial: InitialState,
    pub preparation: Vec<Pulse<f64>>,
    pub times: Vec<f64>,
    pub shots: u64,
    pub seed: u64,
    pub mode: MeasurementMode,
    pub hopping_during_pulses: bool,
    pub max_sector: usize,
    /// The document this was resolved from.
    pub raw: RawConfig,
}

impl ExperimentConfig {
    /// Model with `kappa_scale` applied.
    pub fn scaled_params(&self) -> ModelParams<f64> {
        if self.kappa_scale == 1.0 {
            self.params.clone()
        } else {
            self.params.with_kappa_scale(self.kappa_scale)
        }
    }

    /// Duration used by the leakage experiment.
    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times.first().copied().unwrap_or(0.0)
    }
}

/// Parses a document without resolving it.
pub fn parse_raw(text: &str) -> Result<RawConfig, CliError> {
    let table: BTreeMap<String, serde_json::Value> = if text.trim_start().starts_with('{') {
        serde_json::from_str(text)
            .map_err(|e| CliError::Config(vec![format!("invalid JSON: {e}")]))?
    } else {
        let t: toml::Table = toml::from_str(text)
            .map_err(|e| CliError::Config(vec![format!("invalid TOML: {e}")]))?;
        t.into_iter()
            .map(|(k, v)| {
                let json = serde_json::to_value(&v)
                    .map_err(|e| CliError::Config(vec![format!("{k}: {e}")]))?;
                Ok((k, json))
            })
            .collect::<Result<_, CliError>>()?
    };
    let mut problems: Vec<String> = table
        .keys()
        .filter(|k| !KNOWN_KEYS.contains(&k.as_str()))
        .map(|k| format!("{k}: unknown key"))
        .collect();
    // Type-check each key separately so every bad value is reported.
    for (k, v) in &table {
        if !KNOWN_KEYS.contains(&k.as_str()) {
            continue;
        }
        let single = serde_json::Value::Object([(k.clone(), v.clone())].into_iter().collect());
        if let Err(e) = serde_json::from_value::<RawConfig>(single) {
            problems.push(format!("{k}: {e}"));
        }
    }
    if !problems.is_empty() {
        return Err(CliError::Config(problems));
    }
    let object = serde_json::Value::Object(table.into_iter().collect());
    serde_json::from_value(object).map_err(|e| CliError::Config(vec![e.to_string()]))
}

/// Reads, parses and resolves a config file.
pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    resolve(parse_raw(&text)?)
}

/// Parses and resolves config text.
pub fn from_str(text: &str) -> Result<ExperimentConfig, CliError> {
    resolve(parse_raw(text)?)
}

struct Problems(Vec<String>);

impl Problems {
    fn push(&mut self, key: &str, what: impl fmt::Display) {
        self.0.push(format!("{key}: {what}"));
    }

    /// A quantity given in one of two units; `scale` converts the second to the first.
    fn either(
        &mut self,
        a: (&str, Option<f64>),
        b: (&str, Option<f64>),
        scale: f64,
    ) -> Option<f64> {
        match (a.1, b.1) {
            (Some(_), Some(_)) => {
                self.push(a.0, format!("conflicts with {}", b.0));
                None
            }
            (Some(x), None) => Some(x),
            (None, Some(y)) => Some(y * scale),
            (None, None) => None,
        }
    }

    fn non_negative(&mut self, key: &str, v: Option<f64>) -> Option<f64> {
        match v {
            Some(x) if !(x >= 0.0) || !x.is_finite() => {
                self.push(
                    key,
                    format!("must be a finite non-negative number (got {x})"),
                );
                None
            }
            other => other,
        }
    }
}

fn parse_site_state(s: &str) -> Option<(Level, usize)> {
    let (level, n) = s.split_once(',')?;
    let level: Level = level.trim().parse().ok()?;
    let n: usize = n.trim().parse().ok()?;
    Some((level, n))
}

/// `kind@site` with kind one of carrier, blue, red, shelve_e0..shelve_e3,
/// and an optional `:angle` in units of π.
fn parse_prep_pulse(s: &str) -> Option<Pulse<f64>> {
    let (head, angle) = match s.split_once(':') {
        Some((h, a)) => (h, a.trim().parse::<f64>().ok()?),
        None => (s, 1.0),
    };
    let (kind, site) = head.split_once('@')?;
    let site: usize = site.trim().parse().ok()?;
    let kind = match kind.trim() {
        "carrier" => PulseKind::Carrier,
        "blue" => PulseKind::BlueSideband,
        "red" => PulseKind::RedSideband,
        other => {
            let level: Level = other.strip_prefix("shelve_")?.parse().ok()?;
            PulseKind::Shelve(level)
        }
    };
    if !(angle.is_finite() && angle > 0.0) {
        return None;
    }
    Some(Pulse::new(kind, site, angle * std::f64::consts::PI))
}

/// Checks a parsed document and converts it to internal units.
///
/// All problems are collected before returning.
pub fn resolve(raw: RawConfig) -> Result<ExperimentConfig, CliError> {
    let mut p = Problems(Vec::new());
    match raw.schema {
        Some(SCHEMA_VERSION) => {}
        Some(v) => p.push(
            "schema",
            format!("unsupported version {v} (expected {SCHEMA_VERSION})"),
        ),
        None => p.push("schema", "missing"),
    }
    let experiment = match raw.experiment.as_deref() {
        Some(s) => ExperimentKind::parse(s).or_else(|| {
            p.push("experiment", format!("unknown experiment `{s}`"));
            None
        }),
        None => {
            p.push("experiment", "missing");
            None
        }
    };

    let n_sites = raw.n_sites.unwrap_or(2);
    if n_sites == 0 {
        p.push("n_sites", "must be at least 1");
    }
    let fock_cutoff = raw.fock_cutoff.unwrap_or(3);
    if fock_cutoff < 2 {
        p.push("fock_cutoff", "must be at least 2");
    }

    let kappa_hz = p.either(
        ("kappa_hz", raw.kappa_hz),
        ("kappa_khz", raw.kappa_khz),
        1e3,
    );
    let kappa_hz = p.non_negative("kappa_hz", kappa_hz);
    let axial_hz = p.either(
        ("trap_axial_hz", raw.trap_axial_hz),
        ("trap_axial_khz", raw.trap_axial_khz),
        1e3,
    );
    let radial_hz = p.either(
        ("trap_radial_hz", raw.trap_radial_hz),
        ("trap_radial_khz", raw.trap_radial_khz),
        1e3,
    );
    let axial_hz = p.non_negative("trap_axial_hz", axial_hz);
    let radial_hz = p.non_negative("trap_radial_hz", radial_hz);
    let g_b_hz = p.either(("g_b_hz", raw.g_b_hz), ("g_b_khz", raw.g_b_khz), 1e3);
    let g_b_hz = p.non_negative("g_b_hz", g_b_hz);
    let delta_hz = p.either(
        ("delta_hz", raw.delta_hz),
        ("delta_khz", raw.delta_khz),
        1e3,
    );
    let eta = raw.eta.unwrap_or(0.1);
    if !(eta > 0.0 && eta < 1.0) {
        p.push("eta", format!("must lie in (0, 1) (got {eta})"));
    }
    let kappa_scale = p
        .non_negative("kappa_scale", raw.kappa_scale)
        .unwrap_or(1.0);

    let needs_model = !matches!(experiment, Some(ExperimentKind::Leakage));
    if needs_model && g_b_hz.is_none() && raw.g_b_hz.is_none() && raw.g_b_khz.is_none() {
        p.push("g_b_hz", "missing (give g_b_hz or g_b_khz)");
    }
    let geometry_given = axial_hz.is_some() || radial_hz.is_some();
    if geometry_given && kappa_hz.is_some() {
        p.push("kappa_hz", "conflicts with trap_axial/trap_radial");
    }
    if geometry_given && (axial_hz.is_none() || radial_hz.is_none()) {
        p.push(
            "trap_axial_hz",
            "trap geometry needs both axial and radial frequencies",
        );
    }
    let needs_kappa = matches!(
        experiment,
        Some(ExperimentKind::Hopping | ExperimentKind::Blockade | ExperimentKind::Eigen)
    ) && n_sites > 1;
    if needs_kappa
        && !geometry_given
        && kappa_hz.is_none()
        && raw.kappa_hz.is_none()
        && raw.kappa_khz.is_none()
    {
        p.push(
            "kappa_hz",
            "missing (give kappa_hz, kappa_khz or a trap geometry)",
        );
    }

    let dephasing_rate = p.non_negative("dephasing_rate", raw.dephasing_rate);
    let heating_rate = p
        .non_negative("heating_rate", raw.heating_rate)
        .unwrap_or(0.0);
    let drift = p
        .non_negative("rabi_drift_fraction", raw.rabi_drift_fraction)
        .unwrap_or(0.0);
    if drift >= 1.0 {
        p.push("rabi_drift_fraction", "must be below 1");
    }
    let prep_infidelity = p
        .non_negative("prep_infidelity", raw.prep_infidelity)
        .unwrap_or(0.0);
    if prep_infidelity > 1.0 {
        p.push("prep_infidelity", "must not exceed 1");
    }
    let dephasing_target = match (raw.dephasing_contrast, raw.dephasing_contrast_time_us) {
        (None, None) => None,
        (Some(c), Some(t)) => {
            if !(c > 0.0 && c < 1.0) {
                p.push("dephasing_contrast", "must lie in (0, 1)");
            }
            if !(t > 0.0 && t.is_finite()) {
                p.push("dephasing_contrast_time_us", "must be positive");
            }
            if dephasing_rate.is_some() || raw.dephasing_rate.is_some() {
                p.push("dephasing_contrast", "conflicts with dephasing_rate");
            }
            Some(DephasingTarget {
                contrast: c,
                time: t * 1e-6,
            })
        }
        (Some(_), None) => {
            p.push(
                "dephasing_contrast_time_us",
                "missing (needed with dephasing_contrast)",
            );
            None
        }
        (None, Some(_)) => {
            p.push(
                "dephasing_contrast",
                "missing (needed with dephasing_contrast_time_us)",
            );
            None
        }
    };

    let thermal = p.non_negative("thermal_nbar", raw.thermal_nbar);
    let initial = match (&raw.initial_state, thermal) {
        (Some(_), Some(_)) => {
            p.push("initial_state", "conflicts with thermal_nbar");
            InitialState::Thermal(0.0)
        }
        (None, Some(nbar)) => InitialState::Thermal(nbar),
        (Some(list), None) => {
            if list.len() != n_sites {
                p.push(
                    "initial_state",
                    format!("has {} entries for {n_sites} sites", list.len()),
                );
            }
            let mut sites = Vec::new();
            for (i, s) in list.iter().enumerate() {
                match parse_site_state(s) {
                    Some((level, n)) if n > fock_cutoff => {
                        p.push(
                            "initial_state",
                            format!("entry {i} has n = {n} above fock_cutoff"),
                        );
                        sites.push((level, 0));
                    }
                    Some((level, n)) if level.is_auxiliary() => {
                        p.push(
                            "initial_state",
                            format!("entry {i}: level {level} cannot start a run"),
                        );
                        sites.push((Level::Down, n));
                    }
                    Some(ln) => sites.push(ln),
                    None => {
                        p.push("initial_state", format!("entry {i} `{s}` is not `level,n`"));
                        sites.push((Level::Down, 0));
                    }
                }
            }
            InitialState::Product(sites)
        }
        (None, None) => InitialState::Product(vec![(Level::Down, 0); n_sites]),
    };
    let default_prep: &[&str] = match (experiment, &raw.initial_state, thermal) {
        (Some(ExperimentKind::Hopping), None, None) => &["carrier@0"],
        _ => &[],
    };
    let prep_strings: Vec<String> = raw
        .preparation
        .clone()
        .unwrap_or_else(|| default_prep.iter().map(|s| s.to_string()).collect());
    let mut preparation = Vec::new();
    for (i, s) in prep_strings.iter().enumerate() {
        match parse_prep_pulse(s) {
            Some(pulse) if pulse.site >= n_sites => p.push(
                "preparation",
                format!("entry {i} addresses site {} of {n_sites}", pulse.site),
            ),
            Some(pulse) if matches!(pulse.kind, PulseKind::Shelve(_)) => p.push(
                "preparation",
                format!("entry {i}: shelving is not a preparation pulse"),
            ),
            Some(pulse) => preparation.push(pulse),
            None => p.push(
                "preparation",
                format!("entry {i} `{s}` is not `kind@site[:angle]`"),
            ),
        }
    }

    // The grid is built in the unit the config uses and converted once.
    let micro = [raw.t_start_us, raw.t_stop_us, raw.t_step_us]
        .iter()
        .any(Option::is_some);
    let per_second = if micro { 1e6 } else { 1.0 };
    let start = p.either(
        ("t_start_us", raw.t_start_us),
        ("t_start_s", raw.t_start_s),
        per_second,
    );
    let stop = p.either(
        ("t_stop_us", raw.t_stop_us),
        ("t_stop_s", raw.t_stop_s),
        per_second,
    );
    let step = p.either(
        ("t_step_us", raw.t_step_us),
        ("t_step_s", raw.t_step_s),
        per_second,
    );
    let start = p.non_negative("t_start_s", start).unwrap_or(0.0);
    let needs_grid = experiment.is_some_and(ExperimentKind::needs_grid);
    let needs_stop = needs_grid || experiment == Some(ExperimentKind::Leakage);
    let mut times = Vec::new();
    match (stop, step) {
        (Some(stop), _) if !(stop > start) => p.push("t_stop_s", "must exceed t_start"),
        (_, Some(step)) if !(step > 0.0) => p.push("t_step_s", "must be positive"),
        (Some(stop), Some(step)) => match uniform_grid(start, stop, step) {
            Ok(g) => times = g.into_iter().map(|t| t / per_second).collect(),
            Err(e) => p.push("t_step_s", e),
        },
        (Some(stop), None) if !needs_grid => times = vec![start / per_second, stop / per_second],
        (None, _) if needs_stop => p.push("t_stop_s", "missing (give t_stop_s or t_stop_us)"),
        (_, None) if needs_grid => p.push("t_step_s", "missing (give t_step_s or t_step_us)"),
        _ => {}
    }
    if times.len() > 1_000_000 {
        p.push("t_step_s", format!("grid has {} points", times.len()));
    }

    let shots = raw.shots.unwrap_or(0);
    let seed = raw.seed.unwrap_or(0);
    let mode = match raw.measurement_mode.as_deref() {
        None => MeasurementMode::ExactManifold,
        Some(s) => MeasurementMode::parse(s).unwrap_or_else(|| {
            p.push("measurement_mode", format!("unknown mode `{s}`"));
            MeasurementMode::ExactManifold
        }),
    };
    let hopping_during_pulses = raw.hopping_during_pulses.unwrap_or(false);
    let max_sector = raw.max_sector.unwrap_or(2);

    let mut params = None;
    let kappa = if let (Some(ax), Some(rad)) = (axial_hz, radial_hz) {
        IonChainGeometry::calcium40(n_sites.max(1), [rad, rad, ax], RadialMode::X)
            .and_then(|g| hopping_matrix(&g))
            .map_err(|e| p.push("trap_axial_hz", e))
            .ok()
    } else {
        Some(uniform_chain_kappa(
            n_sites.max(1),
            angular(kappa_hz.unwrap_or(0.0)),
        ))
    };
    if let Some(kappa) = kappa {
        // Leakage runs carry the reference coupling so the manifest stays complete.
        let g_hz = g_b_hz.unwrap_or(7.5e3);
        match ModelParams::from_kappa(
            kappa,
            angular(g_hz),
            eta.clamp(1e-6, 0.999),
            fock_cutoff.max(1),
        ) {
            Ok(mut m) => {
                let d = angular(delta_hz.unwrap_or(0.0));
                m.delta = vec![d; m.n_sites()];
                params = Some(m);
            }
            Err(e) => p.push("g_b_hz", e),
        }
    }

    let noise = NoiseModel {
        dephasing_rates: dephasing_rate.map(|g| vec![g; n_sites]).unwrap_or_default(),
        heating_rate,
        rabi_drift_fraction: drift,
        prep_infidelity,
    };

    if !p.0.is_empty() {
        return Err(CliError::Config(p.0));
    }
    Ok(ExperimentConfig {
        experiment: experiment.expect("checked above"),
        description: raw.description.clone().unwrap_or_default(),
        n_sites,
        fock_cutoff,
        params: params.expect("built above"),
        kappa_scale,
        noise,
        dephasing_target,
        initial,
        preparation,
        times,
        shots,
        seed,
        mode,
        hopping_during_pulses,
        max_sector,
        raw,
    })
}
