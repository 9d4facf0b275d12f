//! Experiment pipelines behind the CLI subcommands.

use ajch::dynamics::{
    calibrate_dephasing, evolve_lindblad, evolve_lindblad_blocks, leakage_estimate,
    leakage_estimate_thermal, site_records, task_rng, thermal_state, EigenPropagator,
    LindbladOptions, NoiseModel, Trajectory, TRACKED_STATES,
};
use ajch::hilbert::{
    lift_site_state, partial_trace, partial_trace_pure, MixedState, PureState, State,
};
use ajch::model::{build_ajch, ModelParams};
use ajch::polariton::{decoupled_sector_energies, polariton_sectors};
use ajch::scalar::hertz;
use ajch::sequence::{
    apply_preparation, apply_pulse, apply_sequence, bright_probability, full_mapping_sequence,
    mapping_sequence, sample_shots_with, site_bright_probability, MappingTarget, Pulse, PulseKind,
    PulseMode, Sequence, SequenceContext,
};
use ajch::{CompositeSpace, Level, SiteSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::config::{ExperimentConfig, ExperimentKind, InitialState, MeasurementMode};
use crate::error::CliError;

/// Per-site quantities in column order: five basis states, then manifolds 0..2.
pub const QUANTITIES: [&str; 8] = ["up0", "up1", "down0", "up2", "down1", "l0", "l1", "l2"];

const SHOT_STREAM: u64 = 1;
const DRIFT_STREAM: u64 = 2;

/// Rows of numbers under named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// `time_s`, then `site{i}_{quantity}` for every site.
pub fn trajectory_columns(n_sites: usize) -> Vec<String> {
    let mut cols = vec!["time_s".to_string()];
    for i in 0..n_sites {
        cols.extend(QUANTITIES.iter().map(|q| format!("site{i}_{q}")));
    }
    cols
}

/// Output of a hopping or blockade run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub table: Table,
    /// Exact populations; present in `exact_manifold` mode.
    pub trajectory: Option<Trajectory<f64>>,
    /// Fitted dephasing rate, when the config asked for a calibration.
    pub calibrated_dephasing: Option<f64>,
    /// Coupling scale factor of each measurement series (one per mapping target).
    pub drift_factors: Vec<f64>,
}

/// Noise model with any requested dephasing calibration applied.
pub fn resolved_noise(cfg: &ExperimentConfig) -> Result<(NoiseModel<f64>, Option<f64>), CliError> {
    let mut noise = cfg.noise.clone();
    let mut fitted = None;
    if let Some(target) = cfg.dephasing_target {
        let cal = calibrate_dephasing(cfg.params.g_b, target.contrast, target.time)?;
        noise.dephasing_rates = vec![cal.gamma; cfg.n_sites];
        fitted = Some(cal.gamma);
    }
    Ok((noise, fitted))
}

fn dynamics_space(cfg: &ExperimentConfig) -> Result<CompositeSpace, CliError> {
    Ok(CompositeSpace::uniform(
        SiteSpec::two_level(cfg.fock_cutoff)?,
        cfg.n_sites,
    )?)
}

fn initial_state(cfg: &ExperimentConfig, space: &CompositeSpace) -> Result<State<f64>, CliError> {
    Ok(match &cfg.initial {
        InitialState::Product(sites) => State::Pure(PureState::product(space, sites)?),
        InitialState::Thermal(nbar) => {
            let one = thermal_state(*nbar, space.site(0)?)?;
            let mut rho = one.clone();
            for _ in 1..cfg.n_sites {
                rho = rho.kron(&one);
            }
            State::Mixed(rho)
        }
    })
}

/// Prepared state, before the free evolution starts.
pub fn prepared_state(
    cfg: &ExperimentConfig,
    space: &CompositeSpace,
    params: &ModelParams<f64>,
    noise: &NoiseModel<f64>,
) -> Result<State<f64>, CliError> {
    let psi = initial_state(cfg, space)?;
    if cfg.preparation.is_empty() {
        return Ok(psi);
    }
    let seq = cfg
        .preparation
        .iter()
        .cloned()
        .fold(Sequence::new("preparation"), Sequence::pulse);
    let ctx = SequenceContext::new(space, params, noise);
    Ok(apply_preparation(&seq, psi, &ctx)?)
}

/// Chain state at every grid time under the anti-JCH Hamiltonian.
pub fn evolve_states(
    cfg: &ExperimentConfig,
    params: &ModelParams<f64>,
    noise: &NoiseModel<f64>,
) -> Result<Vec<State<f64>>, CliError> {
    let space = dynamics_space(cfg)?;
    let start = prepared_state(cfg, &space, params, noise)?;
    let h = build_ajch(params, &space)?;
    let lead = cfg.times[0] > 0.0;
    let grid: Vec<f64> = if lead {
        std::iter::once(0.0)
            .chain(cfg.times.iter().copied())
            .collect()
    } else {
        cfg.times.clone()
    };
    let mut states: Vec<State<f64>> = if noise.has_decoherence() {
        let ops = noise.collapse_ops(&space)?;
        let rho0 = start.to_mixed();
        let blocks: Vec<Vec<usize>> = polariton_sectors(&space).into_values().collect();
        let opts = LindbladOptions::default();
        match evolve_lindblad_blocks(&h, &ops, &rho0, &grid, &blocks, &opts) {
            Ok(states) => states,
            Err(ajch::Error::Domain(_)) => evolve_lindblad(&h, &ops, &rho0, &grid)?,
            Err(e) => return Err(e.into()),
        }
        .into_iter()
        .map(State::Mixed)
        .collect()
    } else {
        let prop = EigenPropagator::new(&h)?;
        match &start {
            State::Pure(psi) => prop
                .evolve_pure_many(psi, &grid)?
                .into_iter()
                .map(State::Pure)
                .collect(),
            State::Mixed(rho) => prop
                .evolve_mixed_many(rho, &grid)?
                .into_iter()
                .map(State::Mixed)
                .collect(),
        }
    };
    if lead {
        states.remove(0);
    }
    Ok(states)
}

/// Sampled fraction, or `p` itself when no shots are requested.
fn measure(p: f64, shots: u64, seed: u64, task: &[u64]) -> Result<f64, CliError> {
    if shots == 0 {
        return Ok(p);
    }
    Ok(sample_shots_with(p, shots, &mut task_rng(seed, task))?)
}

/// Runs a hopping or blockade experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult, CliError> {
    if !matches!(
        cfg.experiment,
        ExperimentKind::Hopping | ExperimentKind::Blockade
    ) {
        return Err(CliError::Config(vec![format!(
            "experiment: `{}` has no trajectory; use the matching subcommand",
            cfg.experiment
        )]));
    }
    let (noise, fitted) = resolved_noise(cfg)?;
    let params = cfg.scaled_params();
    if cfg.mode.is_mapped() {
        return run_mapped(cfg, &params, &noise, fitted);
    }
    let space = dynamics_space(cfg)?;
    let states = evolve_states(cfg, &params, &noise)?;
    let mut records = Vec::with_capacity(states.len());
    for s in &states {
        records.push(site_records(&space, &s.populations())?);
    }
    let trajectory = Trajectory::new(cfg.times.clone(), records)?;
    let mut rows = Vec::with_capacity(trajectory.len());
    for (k, (t, sites)) in trajectory
        .times()
        .iter()
        .zip(trajectory.records())
        .enumerate()
    {
        let mut row = vec![*t];
        for (i, rec) in sites.iter().enumerate() {
            if cfg.shots == 0 {
                row.extend(rec.basis);
                row.extend(rec.manifold);
            } else {
                let mut b = [0.0; 5];
                for (slot, p) in rec.basis.iter().enumerate() {
                    b[slot] = measure(
                        *p,
                        cfg.shots,
                        cfg.seed,
                        &[SHOT_STREAM, k as u64, i as u64, 10 + slot as u64],
                    )?;
                }
                row.extend(b);
                row.extend([b[0], b[1] + b[2], b[3] + b[4]]);
            }
        }
        rows.push(row);
    }
    Ok(RunResult {
        table: Table {
            columns: trajectory_columns(cfg.n_sites),
            rows,
        },
        trajectory: Some(trajectory),
        calibrated_dephasing: fitted,
        drift_factors: Vec::new(),
    })
}

/// Coupling scale for one measurement series, uniform on `[1 - f, 1]`.
pub fn drift_factor(seed: u64, series: usize, fraction: f64) -> f64 {
    if fraction == 0.0 {
        return 1.0;
    }
    let u: f64 = task_rng(seed, &[DRIFT_STREAM, series as u64]).random();
    1.0 - fraction * u
}

/// Total polariton number if the prepared state has a definite one.
fn definite_polariton_number(state: &State<f64>, space: &CompositeSpace) -> Option<usize> {
    let pops = state.populations();
    polariton_sectors(space)
        .into_iter()
        .find(|(_, idx)| idx.iter().map(|&i| pops[i]).sum::<f64>() > 1.0 - 1e-9)
        .map(|(n, _)| n)
}

/// Re-expresses a two-level chain state on a chain with shelving levels.
fn lift_chain(
    state: &State<f64>,
    from: &CompositeSpace,
    to: &CompositeSpace,
) -> Result<State<f64>, CliError> {
    let map: Vec<usize> = (0..from.dim())
        .map(|i| to.basis_index(&from.basis_label(i)?))
        .collect::<ajch::Result<_>>()?;
    Ok(match state {
        State::Pure(psi) => {
            let mut v = DVector::zeros(to.dim());
            for (a, &ia) in map.iter().enumerate() {
                v[ia] = psi.amplitudes()[a];
            }
            State::Pure(PureState::new(v)?)
        }
        State::Mixed(rho) => {
            let mut m = DMatrix::zeros(to.dim(), to.dim());
            for (a, &ia) in map.iter().enumerate() {
                for (b, &ib) in map.iter().enumerate() {
                    m[(ia, ib)] = rho.matrix()[(a, b)];
                }
            }
            State::Mixed(MixedState::new(m)?)
        }
    })
}

fn pulse_mode(mode: MeasurementMode) -> PulseMode {
    match mode {
        MeasurementMode::MappedIdeal => PulseMode::Ideal,
        _ => PulseMode::Realistic,
    }
}

/// Bright probability at `site` after the mapping sequence for `target`.
///
/// Without hopping during the pulses the sequence acts on the site alone,
/// so the reduced state suffices.
fn mapped_bright(
    state: &State<f64>,
    target: MappingTarget,
    site: usize,
    cfg: &ExperimentConfig,
    params: &ModelParams<f64>,
    noise: &NoiseModel<f64>,
) -> Result<f64, CliError> {
    let space = dynamics_space(cfg)?;
    let shelved = SiteSpec::with_shelving(cfg.fock_cutoff)?;
    let mode = pulse_mode(cfg.mode);
    if cfg.hopping_during_pulses {
        let full = CompositeSpace::uniform(shelved, cfg.n_sites)?;
        let lifted = lift_chain(state, &space, &full)?;
        let ctx = SequenceContext::new(&full, params, noise)
            .with_mode(mode)
            .with_hopping(true);
        let out = apply_sequence(&mapping_sequence(target, site), lifted, &ctx)?;
        return Ok(bright_probability(&out, &full, site)?);
    }
    let reduced = match state {
        State::Pure(psi) => partial_trace_pure(psi, &space, site)?,
        State::Mixed(rho) => partial_trace(rho, &space, site)?,
    };
    let lifted = lift_site_state(&reduced, space.site(site)?, &shelved)?;
    let one = CompositeSpace::uniform(shelved.clone(), 1)?;
    let site_params = ModelParams::from_kappa(
        DMatrix::zeros(1, 1),
        params.g_b,
        params.eta,
        cfg.fock_cutoff,
    )?;
    let site_noise = NoiseModel {
        dephasing_rates: vec![noise.dephasing_rate(site)],
        heating_rate: noise.heating_rate,
        rabi_drift_fraction: 0.0,
        prep_infidelity: 0.0,
    };
    let ctx = SequenceContext::new(&one, &site_params, &site_noise).with_mode(mode);
    let out = apply_sequence(&mapping_sequence(target, 0), State::Mixed(lifted), &ctx)?;
    Ok(site_bright_probability(&out.to_mixed(), &shelved)?)
}

fn run_mapped(
    cfg: &ExperimentConfig,
    params: &ModelParams<f64>,
    noise: &NoiseModel<f64>,
    fitted: Option<f64>,
) -> Result<RunResult, CliError> {
    let space = dynamics_space(cfg)?;
    let n = cfg.n_sites;
    let nt = cfg.times.len();
    // measured[target][k][site]
    let mut measured = vec![vec![vec![0.0; n]; nt]; MappingTarget::ALL.len()];
    let mut factors = Vec::new();
    let mut cached: Option<Vec<State<f64>>> = None;
    for (ti, target) in MappingTarget::ALL.into_iter().enumerate() {
        let f = drift_factor(cfg.seed, ti, noise.rabi_drift_fraction);
        factors.push(f);
        let drifted = params.with_rabi_scale(f);
        let states = match (&cached, f == 1.0) {
            (Some(s), true) => s.clone(),
            _ => evolve_states(cfg, &drifted, noise)?,
        };
        for (k, state) in states.iter().enumerate() {
            for site in 0..n {
                let p = mapped_bright(state, target, site, cfg, &drifted, noise)?;
                measured[ti][k][site] = measure(
                    p,
                    cfg.shots,
                    cfg.seed,
                    &[SHOT_STREAM, k as u64, site as u64, ti as u64],
                )?;
            }
        }
        if f == 1.0 {
            cached = Some(states);
        }
    }
    // With two sites and exactly two polaritons, site i holds two exactly
    // when the other site holds none.
    let infer_l2 = n == 2 && {
        let prepared = prepared_state(cfg, &space, params, noise)?;
        definite_polariton_number(&prepared, &space) == Some(2)
    };
    let (up0, up1, down0) = (0, 1, 2);
    let mut rows = Vec::with_capacity(nt);
    for (k, t) in cfg.times.iter().enumerate() {
        let mut row = vec![*t];
        for site in 0..n {
            let m = |ti: usize| measured[ti][k][site];
            let l2 = if infer_l2 {
                measured[up0][k][1 - site]
            } else {
                f64::NAN
            };
            row.extend([
                m(up0),
                m(up1),
                m(down0),
                f64::NAN,
                f64::NAN,
                m(up0),
                m(up1) + m(down0),
                l2,
            ]);
        }
        rows.push(row);
    }
    Ok(RunResult {
        table: Table {
            columns: trajectory_columns(n),
            rows,
        },
        trajectory: None,
        calibrated_dephasing: fitted,
        drift_factors: factors,
    })
}

// ---------------------------------------------------------------------------
// Spectra

/// Eigenvalues of one total-polariton-number sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorSpectrum {
    pub total: usize,
    /// Eigenvalues in Hz (E/2π), ascending.
    pub energies_hz: Vec<f64>,
    /// Decoupled-site energies in Hz, when every hopping rate and detuning is zero.
    pub analytic_hz: Option<Vec<f64>>,
}

impl SectorSpectrum {
    pub fn dim(&self) -> usize {
        self.energies_hz.len()
    }

    /// Largest `|E - E_analytic| / max(|E_analytic|, g_b)`.
    pub fn max_relative_error(&self, g_b_hz: f64) -> Option<f64> {
        let a = self.analytic_hz.as_ref()?;
        Some(
            self.energies_hz
                .iter()
                .zip(a)
                .map(|(e, x)| (e - x).abs() / x.abs().max(g_b_hz))
                .fold(0.0, f64::max),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenReport {
    pub g_b_hz: f64,
    pub kappa_scale: f64,
    pub sectors: Vec<SectorSpectrum>,
}

impl EigenReport {
    pub fn table(&self) -> Table {
        let mut rows = Vec::new();
        for s in &self.sectors {
            for (i, e) in s.energies_hz.iter().enumerate() {
                let a = s.analytic_hz.as_ref().map_or(f64::NAN, |a| a[i]);
                rows.push(vec![s.total as f64, i as f64, *e, a]);
            }
        }
        Table {
            columns: ["sector", "index", "energy_hz", "analytic_hz"]
                .map(String::from)
                .to_vec(),
            rows,
        }
    }
}

/// Spectrum of the anti-JCH Hamiltonian grouped by total polariton number.
///
/// Sectors up to `max_sector` are reported; above the phonon cutoff they
/// would be truncated, so `max_sector` may not exceed it.
pub fn run_eigen(cfg: &ExperimentConfig) -> Result<EigenReport, CliError> {
    if cfg.max_sector > cfg.fock_cutoff {
        return Err(CliError::Config(vec![format!(
            "max_sector: {} exceeds fock_cutoff {}",
            cfg.max_sector, cfg.fock_cutoff
        )]));
    }
    let params = cfg.scaled_params();
    let space = dynamics_space(cfg)?;
    let h = build_ajch(&params, &space)?;
    let sectors = polariton_sectors(&space);
    let decoupled = params.kappa.iter().all(|k| *k == 0.0)
        && params.delta.iter().all(|d| *d == 0.0)
        && params
            .omega_shift
            .iter()
            .all(|w| *w == params.omega_shift[0]);
    let mut out = Vec::new();
    for total in 0..=cfg.max_sector {
        let idx = sectors.get(&total).cloned().unwrap_or_default();
        let energies_hz = h
            .submatrix(&idx)
            .eigenvalues()?
            .into_iter()
            .map(hertz)
            .collect();
        let analytic_hz = decoupled.then(|| {
            decoupled_sector_energies(cfg.n_sites, total, params.omega_shift[0], params.g_b)
                .into_iter()
                .map(hertz)
                .collect()
        });
        out.push(SectorSpectrum {
            total,
            energies_hz,
            analytic_hz,
        });
    }
    Ok(EigenReport {
        g_b_hz: hertz(params.g_b),
        kappa_scale: cfg.kappa_scale,
        sectors: out,
    })
}

// ---------------------------------------------------------------------------
// Mapping check

/// One cell of the mapping truth table.
#[derive(Debug, Clone, PartialEq)]
pub struct MapCheckRow {
    pub sequence: String,
    pub mode: PulseMode,
    pub input: (Level, usize),
    pub bright: f64,
    /// Contract value in ideal mode.
    pub expected_bright: Option<f64>,
    /// Intended final state of the full map and the overlap with it.
    pub image: Option<(Level, usize)>,
    pub fidelity: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MapCheckReport {
    pub listings: Vec<String>,
    pub rows: Vec<MapCheckRow>,
    /// Population moved from `|↓,1⟩` to `|↑,2⟩` by a realistic sideband π pulse.
    pub sideband_transfer: f64,
    pub violations: Vec<String>,
}

/// Tolerance on ideal-mode contract cells.
pub const CONTRACT_TOL: f64 = 1e-9;

/// Where the full map sends each tracked state.
pub const FULL_MAP_IMAGES: [((Level, usize), (Level, usize)); 5] = [
    ((Level::Up, 0), (Level::E0, 0)),
    ((Level::Up, 1), (Level::E2, 0)),
    ((Level::Down, 0), (Level::Down, 0)),
    ((Level::Up, 2), (Level::E1, 0)),
    ((Level::Down, 1), (Level::Up, 0)),
];

fn mode_name(mode: PulseMode) -> &'static str {
    match mode {
        PulseMode::Ideal => "ideal",
        PulseMode::Realistic => "realistic",
    }
}

/// Applies every mapping sequence to every tracked basis state.
pub fn run_map_check(params: &ModelParams<f64>) -> Result<MapCheckReport, CliError> {
    let cutoff = params.fock_cutoff.max(3);
    let spec = SiteSpec::full_detection(cutoff)?;
    let space = CompositeSpace::uniform(spec.clone(), 1)?;
    let site_params =
        ModelParams::from_kappa(DMatrix::zeros(1, 1), params.g_b, params.eta, cutoff)?;
    let noise = NoiseModel::default();
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    let mut listings: Vec<String> = MappingTarget::ALL
        .into_iter()
        .map(|t| mapping_sequence::<f64>(t, 0).to_string())
        .collect();
    listings.push(full_mapping_sequence::<f64>(0).to_string());

    for mode in [PulseMode::Ideal, PulseMode::Realistic] {
        let ctx = SequenceContext::new(&space, &site_params, &noise).with_mode(mode);
        for target in MappingTarget::ALL {
            let seq = mapping_sequence(target, 0);
            for input in TRACKED_STATES {
                let psi = PureState::site_basis(&spec, input.0, input.1)?;
                let out = apply_sequence(&seq, State::Pure(psi), &ctx)?;
                let bright = bright_probability(&out, &space, 0)?;
                let hit = input == target.state() || target.documented_leaks().contains(&input);
                let expected = if hit { 1.0 } else { 0.0 };
                if mode == PulseMode::Ideal && (bright - expected).abs() > CONTRACT_TOL {
                    violations.push(format!(
                        "{}: |{},{}⟩ bright {bright:.12} (expected {expected})",
                        seq.label, input.0, input.1
                    ));
                }
                rows.push(MapCheckRow {
                    sequence: seq.label.clone(),
                    mode,
                    input,
                    bright,
                    expected_bright: (mode == PulseMode::Ideal).then_some(expected),
                    image: None,
                    fidelity: None,
                });
            }
        }
        let seq = full_mapping_sequence(0);
        for (input, image) in FULL_MAP_IMAGES {
            let psi = PureState::site_basis(&spec, input.0, input.1)?;
            let out = apply_sequence(&seq, State::Pure(psi), &ctx)?;
            let bright = bright_probability(&out, &space, 0)?;
            let target = PureState::site_basis(&spec, image.0, image.1)?;
            let fidelity = match &out {
                State::Pure(p) => p.fidelity(&target),
                State::Mixed(m) => m.fidelity_with(&target),
            };
            let expected = if image.0.is_bright() { 1.0 } else { 0.0 };
            if mode == PulseMode::Ideal
                && (fidelity < 1.0 - CONTRACT_TOL || (bright - expected).abs() > CONTRACT_TOL)
            {
                violations.push(format!(
                    "{}: |{},{}⟩ reaches |{},{}⟩ with fidelity {fidelity:.12}",
                    seq.label, input.0, input.1, image.0, image.1
                ));
            }
            rows.push(MapCheckRow {
                sequence: seq.label.clone(),
                mode,
                input,
                bright,
                expected_bright: (mode == PulseMode::Ideal).then_some(expected),
                image: Some(image),
                fidelity: Some(fidelity),
            });
        }
    }

    let ctx = SequenceContext::new(&space, &site_params, &noise);
    let start = PureState::site_basis(&spec, Level::Down, 1)?;
    let out = apply_pulse(
        &Pulse::pi(PulseKind::BlueSideband, 0),
        State::Pure(start),
        &ctx,
    )?;
    let sideband_transfer = out.populations()[spec.index(Level::Up, 2)?];

    Ok(MapCheckReport {
        listings,
        rows,
        sideband_transfer,
        violations,
    })
}

impl MapCheckReport {
    pub fn table_lines(&self) -> Vec<String> {
        let mut lines = vec![format!(
            "{:<22} {:<10} {:<9} {:>14} {:>9} {:>10} {:>16}",
            "sequence", "mode", "input", "bright", "expected", "image", "fidelity"
        )];
        for r in &self.rows {
            lines.push(format!(
                "{:<22} {:<10} {:<9} {:>14.10} {:>9} {:>10} {:>16}",
                r.sequence,
                mode_name(r.mode),
                format!("{},{}", r.input.0, r.input.1),
                r.bright,
                r.expected_bright.map_or("-".into(), |e| format!("{e}")),
                r.image.map_or("-".into(), |(l, n)| format!("{l},{n}")),
                r.fidelity.map_or("-".into(), |f| format!("{f:.12}")),
            ));
        }
        lines
    }

    pub fn row(
        &self,
        sequence_prefix: &str,
        mode: PulseMode,
        input: (Level, usize),
    ) -> Option<&MapCheckRow> {
        self.rows
            .iter()
            .find(|r| r.sequence.starts_with(sequence_prefix) && r.mode == mode && r.input == input)
    }
}

// ---------------------------------------------------------------------------
// Leakage

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageReport {
    pub nbar: f64,
    pub ions: usize,
    pub heating_rate: f64,
    pub duration: f64,
    /// `N·n̄ + Γ·T`.
    pub bound: f64,
    /// `N·n̄/(1+n̄) + Γ·T`.
    pub thermal: f64,
}

pub fn run_leakage(
    nbar: f64,
    ions: usize,
    heating_rate: f64,
    duration: f64,
) -> Result<LeakageReport, CliError> {
    Ok(LeakageReport {
        nbar,
        ions,
        heating_rate,
        duration,
        bound: leakage_estimate(nbar, ions, heating_rate, duration)?,
        thermal: leakage_estimate_thermal(nbar, ions, heating_rate, duration)?,
    })
}
