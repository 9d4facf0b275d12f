//! Laser pulses, mapping sequences and fluorescence detection.
//!
//! Every pulse drives one site with `H = Σ_n c_n (e^{iφ}|hi⟩⟨lo| + h.c.)`
//! over the pairs of its transition family. A pulse of angle θ lasts
//! `θ / (2 c_ref)` where `c_ref` is the coupling at `reference_n`, so other
//! Fock states over- or under-rotate unless the pulse is evaluated in the
//! ideal limit, where every pair gets exactly `c_ref`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::dynamics::{evolve_lindblad, propagator, task_rng, NoiseModel};
use crate::error::{Error, Result};
use crate::hilbert::{
    embed_site_operator, CompositeSpace, Level, LinearOperator, MixedState, SiteSpec, State,
};
use crate::model::{build_ajch, build_free_phonons, ModelParams};
use crate::scalar::{cone, Real, C};

/// Transition family addressed by a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PulseKind {
    /// `|↓,n⟩ ↔ |↑,n⟩`.
    Carrier,
    /// `|↓,n⟩ ↔ |↑,n+1⟩`.
    BlueSideband,
    /// `|↓,n+1⟩ ↔ |↑,n⟩`.
    RedSideband,
    /// `|↓,n⟩ ↔ |e,n⟩` for an auxiliary level `e`.
    Shelve(Level),
    /// Exact swap of `|↓,0⟩↔|↑,1⟩` and `|↓,1⟩↔|↑,2⟩`; takes no time.
    UniformTransfer,
}

impl PulseKind {
    fn is_sideband(self) -> bool {
        matches!(self, PulseKind::BlueSideband | PulseKind::RedSideband)
    }

    /// Short symbol used in sequence listings.
    pub fn symbol(self) -> String {
        match self {
            PulseKind::Carrier => "C".into(),
            PulseKind::BlueSideband => "B".into(),
            PulseKind::RedSideband => "R".into(),
            PulseKind::Shelve(l) => format!("S[{l}]"),
            PulseKind::UniformTransfer => "U".into(),
        }
    }
}

/// Whether pulses use per-Fock-state couplings or exact rotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PulseMode {
    /// Every addressed pair rotates by exactly the pulse angle.
    Ideal,
    /// Sideband couplings scale as `√(n+1)`.
    #[default]
    Realistic,
}

/// One laser pulse on one site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse<T: Real> {
    pub kind: PulseKind,
    pub site: usize,
    /// Rotation angle on the reference transition, radians.
    pub angle: T,
    /// Drive phase, radians.
    pub phase: T,
    /// Carrier-scale Rabi frequency `Ω₀`, rad/s. `None` takes the model's.
    pub rabi: Option<T>,
    /// Lamb-Dicke parameter. `None` takes the model's.
    pub eta: Option<T>,
    /// Fock number whose transition defines the angle.
    pub reference_n: usize,
}

impl<T: Real> Pulse<T> {
    pub fn new(kind: PulseKind, site: usize, angle: T) -> Self {
        Self {
            kind,
            site,
            angle,
            phase: T::zero(),
            rabi: None,
            eta: None,
            reference_n: 0,
        }
    }

    pub fn pi(kind: PulseKind, site: usize) -> Self {
        Self::new(kind, site, T::pi())
    }

    pub fn with_phase(mut self, phase: T) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_rabi(mut self, rabi: T, eta: T) -> Self {
        self.rabi = Some(rabi);
        self.eta = Some(eta);
        self
    }

    pub fn with_reference(mut self, n: usize) -> Self {
        self.reference_n = n;
        self
    }

    /// Checks the pulse against the site it addresses.
    pub fn validate(&self, spec: &SiteSpec) -> Result<()> {
        if !(self.angle > T::zero()) {
            return Err(Error::Domain(format!(
                "pulse angle must be positive ({self})"
            )));
        }
        if self.rabi.is_some_and(|r| !(r > T::zero())) || self.eta.is_some_and(|e| !(e > T::zero()))
        {
            return Err(Error::Domain(format!(
                "pulse Rabi frequency and eta must be positive ({self})"
            )));
        }
        spec.require(Level::Down)?;
        match self.kind {
            PulseKind::Shelve(level) => {
                if !level.is_auxiliary() {
                    return Err(Error::Domain(format!(
                        "shelving target must be auxiliary, got {level}"
                    )));
                }
                spec.require(level)?;
            }
            PulseKind::UniformTransfer => {
                spec.require(Level::Up)?;
                if spec.fock_cutoff() < 2 {
                    return Err(Error::Domain(
                        "uniform transfer needs fock_cutoff >= 2".into(),
                    ));
                }
            }
            _ => {
                spec.require(Level::Up)?;
            }
        }
        if self.kind.is_sideband() && self.reference_n + 1 > spec.fock_cutoff() {
            return Err(Error::Domain(format!(
                "reference_n {} out of range for fock_cutoff {}",
                self.reference_n,
                spec.fock_cutoff()
            )));
        }
        Ok(())
    }

    fn resolved(&self, params: &ModelParams<T>) -> Result<(T, T)> {
        let rabi = self.rabi.unwrap_or(params.omega0_rabi);
        let eta = self.eta.unwrap_or(params.eta);
        if !(rabi > T::zero()) || !(eta > T::zero()) {
            return Err(Error::Domain(format!(
                "pulse {self} has no positive Rabi frequency or eta"
            )));
        }
        Ok((rabi, eta))
    }

    /// Coupling on the reference pair, rad/s.
    pub fn reference_coupling(&self, params: &ModelParams<T>) -> Result<T> {
        let (rabi, eta) = self.resolved(params)?;
        let half = T::lit(0.5);
        Ok(match self.kind {
            PulseKind::BlueSideband | PulseKind::RedSideband => {
                eta * rabi * half * T::from_usize_lossy(self.reference_n + 1).sqrt()
            }
            _ => rabi * half,
        })
    }

    /// Pulse length in seconds; zero for the idealized uniform transfer.
    pub fn duration(&self, params: &ModelParams<T>) -> Result<T> {
        if self.kind == PulseKind::UniformTransfer {
            return Ok(T::zero());
        }
        Ok(self.angle / (T::lit(2.0) * self.reference_coupling(params)?))
    }
}

impl<T: Real> fmt::Display for Pulse<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let turns = self.angle.to_f64_lossy() / PI;
        write!(f, "{}({:.3}π) ion {}", self.kind.symbol(), turns, self.site)?;
        if self.phase != T::zero() {
            write!(f, " phase {:.4}", self.phase.to_f64_lossy())?;
        }
        if self.reference_n != 0 {
            write!(f, " ref n={}", self.reference_n)?;
        }
        Ok(())
    }
}

/// Pulse or free evolution.
#[derive(Debug, Clone, PartialEq)]
pub enum Step<T: Real> {
    Pulse(Pulse<T>),
    /// Duration in seconds; the flag switches the chain Hamiltonian on.
    Wait {
        duration: T,
        hamiltonian_on: bool,
    },
}

impl<T: Real> fmt::Display for Step<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Pulse(p) => write!(f, "{p}"),
            Step::Wait {
                duration,
                hamiltonian_on,
            } => write!(
                f,
                "wait {:.3} us ({})",
                duration.to_f64_lossy() * 1e6,
                if *hamiltonian_on { "H on" } else { "H off" }
            ),
        }
    }
}

/// Ordered list of steps with a label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence<T: Real> {
    pub label: String,
    pub steps: Vec<Step<T>>,
}

impl<T: Real> Sequence<T> {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            steps: Vec::new(),
        }
    }

    pub fn pulse(mut self, p: Pulse<T>) -> Self {
        self.steps.push(Step::Pulse(p));
        self
    }

    pub fn wait(mut self, duration: T, hamiltonian_on: bool) -> Self {
        self.steps.push(Step::Wait {
            duration,
            hamiltonian_on,
        });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn pulses(&self) -> impl Iterator<Item = &Pulse<T>> {
        self.steps.iter().filter_map(|s| match s {
            Step::Pulse(p) => Some(p),
            Step::Wait { .. } => None,
        })
    }

    /// Copy with every pulse moved to `site`.
    pub fn retarget(&self, site: usize) -> Self {
        let mut out = self.clone();
        for s in &mut out.steps {
            if let Step::Pulse(p) = s {
                p.site = site;
            }
        }
        out
    }

    pub fn validate(&self, space: &CompositeSpace) -> Result<()> {
        for s in &self.steps {
            match s {
                Step::Pulse(p) => p.validate(space.site(p.site)?)?,
                Step::Wait { duration, .. } => {
                    if !(*duration >= T::zero()) {
                        return Err(Error::Domain("wait durations must be non-negative".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Total duration in seconds.
    pub fn duration(&self, params: &ModelParams<T>) -> Result<T> {
        self.steps.iter().try_fold(T::zero(), |acc, s| {
            Ok(acc
                + match s {
                    Step::Pulse(p) => p.duration(params)?,
                    Step::Wait { duration, .. } => *duration,
                })
        })
    }
}

impl<T: Real> fmt::Display for Sequence<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.label)?;
        if self.steps.is_empty() {
            return write!(f, " (empty)");
        }
        for (i, s) in self.steps.iter().enumerate() {
            write!(f, "{}{s}", if i == 0 { " " } else { "; " })?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Pulse propagators

/// Coupled pairs `(lo, hi, √-factor)` of a pulse family on one site.
fn transition_pairs<T: Real>(kind: PulseKind, spec: &SiteSpec) -> Result<Vec<(usize, usize, T)>> {
    let nmax = spec.fock_cutoff();
    let one = T::one();
    let mut pairs = Vec::new();
    match kind {
        PulseKind::Carrier => {
            for n in 0..=nmax {
                pairs.push((spec.index(Level::Down, n)?, spec.index(Level::Up, n)?, one));
            }
        }
        PulseKind::BlueSideband => {
            for n in 0..nmax {
                let f = T::from_usize_lossy(n + 1).sqrt();
                pairs.push((
                    spec.index(Level::Down, n)?,
                    spec.index(Level::Up, n + 1)?,
                    f,
                ));
            }
        }
        PulseKind::RedSideband => {
            for n in 0..nmax {
                let f = T::from_usize_lossy(n + 1).sqrt();
                pairs.push((
                    spec.index(Level::Down, n + 1)?,
                    spec.index(Level::Up, n)?,
                    f,
                ));
            }
        }
        PulseKind::Shelve(level) => {
            for n in 0..=nmax {
                pairs.push((spec.index(Level::Down, n)?, spec.index(level, n)?, one));
            }
        }
        PulseKind::UniformTransfer => {
            for n in 0..2 {
                pairs.push((
                    spec.index(Level::Down, n)?,
                    spec.index(Level::Up, n + 1)?,
                    one,
                ));
            }
        }
    }
    Ok(pairs)
}

/// Single-site drive Hamiltonian of a pulse and its duration.
pub fn pulse_hamiltonian<T: Real>(
    pulse: &Pulse<T>,
    spec: &SiteSpec,
    params: &ModelParams<T>,
    mode: PulseMode,
) -> Result<(LinearOperator<T>, T)> {
    pulse.validate(spec)?;
    if pulse.kind == PulseKind::UniformTransfer {
        return Err(Error::Domain(
            "uniform transfer has no drive Hamiltonian".into(),
        ));
    }
    let c_ref = pulse.reference_coupling(params)?;
    let ref_factor = match pulse.kind {
        PulseKind::BlueSideband | PulseKind::RedSideband => {
            T::from_usize_lossy(pulse.reference_n + 1).sqrt()
        }
        _ => T::one(),
    };
    let (s, c) = pulse.phase.sin_cos();
    let e = C::new(c, s);
    let mut m = DMatrix::zeros(spec.dim(), spec.dim());
    for (lo, hi, f) in transition_pairs::<T>(pulse.kind, spec)? {
        let coupling = match mode {
            PulseMode::Ideal => c_ref,
            PulseMode::Realistic => c_ref * f / ref_factor,
        };
        m[(hi, lo)] = e * coupling;
        m[(lo, hi)] = e.conj() * coupling;
    }
    Ok((LinearOperator::from_parts(m, true), pulse.duration(params)?))
}

/// Exact swap on `|↓,0⟩↔|↑,1⟩` and `|↓,1⟩↔|↑,2⟩`, identity elsewhere.
pub fn uniform_transfer_unitary<T: Real>(spec: &SiteSpec) -> Result<LinearOperator<T>> {
    if spec.fock_cutoff() < 2 {
        return Err(Error::Domain(
            "uniform transfer needs fock_cutoff >= 2".into(),
        ));
    }
    let mut perm: Vec<usize> = (0..spec.dim()).collect();
    for (lo, hi, _) in transition_pairs::<T>(PulseKind::UniformTransfer, spec)? {
        perm.swap(lo, hi);
    }
    let mut m = DMatrix::zeros(spec.dim(), spec.dim());
    for (col, &row) in perm.iter().enumerate() {
        m[(row, col)] = cone();
    }
    Ok(LinearOperator::from_parts(m, false))
}

/// Single-site unitary of a pulse.
pub fn pulse_unitary<T: Real>(
    pulse: &Pulse<T>,
    spec: &SiteSpec,
    params: &ModelParams<T>,
    mode: PulseMode,
) -> Result<LinearOperator<T>> {
    if pulse.kind == PulseKind::UniformTransfer {
        pulse.validate(spec)?;
        return uniform_transfer_unitary(spec);
    }
    let (h, t) = pulse_hamiltonian(pulse, spec, params, mode)?;
    propagator(&h, t)
}

// ---------------------------------------------------------------------------
// Mapping sequences

/// Basis state a single-ion mapping sequence reveals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MappingTarget {
    Up0,
    Up1,
    Down0,
}

impl MappingTarget {
    pub const ALL: [MappingTarget; 3] =
        [MappingTarget::Up0, MappingTarget::Up1, MappingTarget::Down0];

    pub fn state(self) -> (Level, usize) {
        match self {
            MappingTarget::Up0 => (Level::Up, 0),
            MappingTarget::Up1 => (Level::Up, 1),
            MappingTarget::Down0 => (Level::Down, 0),
        }
    }

    /// Tracked states that end bright even with exact pulses. Populations
    /// in them are miscounted as the target.
    pub fn documented_leaks(self) -> &'static [(Level, usize)] {
        match self {
            MappingTarget::Up1 => &[(Level::Up, 2)],
            MappingTarget::Up0 | MappingTarget::Down0 => &[],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MappingTarget::Up0 => "up0",
            MappingTarget::Up1 => "up1",
            MappingTarget::Down0 => "down0",
        }
    }
}

impl TryFrom<(Level, usize)> for MappingTarget {
    type Error = Error;

    fn try_from(s: (Level, usize)) -> Result<Self> {
        MappingTarget::ALL
            .into_iter()
            .find(|t| t.state() == s)
            .ok_or_else(|| Error::Domain(format!("no mapping sequence for |{},{}⟩", s.0, s.1)))
    }
}

/// Sequence that leaves the target bright and the other tracked states dark.
///
/// `(↑,1)`: πS πB. `(↑,0)`: πS πB πC. `(↓,0)`: πC πS πB πC.
/// Shelving uses `e0`.
pub fn mapping_sequence<T: Real>(target: MappingTarget, site: usize) -> Sequence<T> {
    let s = Pulse::pi(PulseKind::Shelve(Level::E0), site);
    let b = Pulse::pi(PulseKind::BlueSideband, site);
    let c = Pulse::pi(PulseKind::Carrier, site);
    let seq = Sequence::new(format!("map {} ion {site}", target.name()));
    match target {
        MappingTarget::Up1 => seq.pulse(s).pulse(b),
        MappingTarget::Up0 => seq.pulse(s).pulse(b).pulse(c),
        MappingTarget::Down0 => seq.pulse(c).pulse(s).pulse(b).pulse(c),
    }
}

/// Eight-step map storing every 0-, 1- and 2-polariton basis state in the
/// motional ground state: `|↑,0⟩→|e0,0⟩`, `|↑,1⟩→|e2,0⟩`, `|↓,0⟩→|↓,0⟩`,
/// `|↑,2⟩→|e1,0⟩`, `|↓,1⟩→|↑,0⟩`.
pub fn full_mapping_sequence<T: Real>(site: usize) -> Sequence<T> {
    let pi = |k| Pulse::pi(k, site);
    Sequence::new(format!("full map ion {site}"))
        .pulse(pi(PulseKind::Shelve(Level::E3)))
        .pulse(pi(PulseKind::UniformTransfer))
        .pulse(pi(PulseKind::Carrier))
        .pulse(pi(PulseKind::Shelve(Level::E0)))
        .pulse(pi(PulseKind::BlueSideband))
        .pulse(pi(PulseKind::Shelve(Level::E1)))
        .pulse(pi(PulseKind::Carrier))
        .pulse(pi(PulseKind::Shelve(Level::E2)))
        .pulse(pi(PulseKind::Shelve(Level::E3)))
        .pulse(pi(PulseKind::RedSideband))
}

// ---------------------------------------------------------------------------
// Application

/// Everything needed to apply a sequence to a chain state.
#[derive(Debug, Clone)]
pub struct SequenceContext<'a, T: Real> {
    pub space: &'a CompositeSpace,
    pub params: &'a ModelParams<T>,
    pub noise: &'a NoiseModel<T>,
    pub mode: PulseMode,
    /// Keep phonon hopping and shifts on while pulses run.
    pub hopping_during_pulses: bool,
}

impl<'a, T: Real> SequenceContext<'a, T> {
    pub fn new(
        space: &'a CompositeSpace,
        params: &'a ModelParams<T>,
        noise: &'a NoiseModel<T>,
    ) -> Self {
        Self {
            space,
            params,
            noise,
            mode: PulseMode::Realistic,
            hopping_during_pulses: false,
        }
    }

    pub fn with_mode(mut self, mode: PulseMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_hopping(mut self, on: bool) -> Self {
        self.hopping_during_pulses = on;
        self
    }
}

fn apply_unitary<T: Real>(state: State<T>, u: &LinearOperator<T>) -> Result<State<T>> {
    Ok(match state {
        State::Pure(p) => State::Pure(p.apply(u)?),
        State::Mixed(m) => State::Mixed(m.conjugate_by(u)?),
    })
}

/// Evolves under `h` for `t`, through the master equation when noise is on.
fn evolve_for<T: Real>(
    state: State<T>,
    h: &LinearOperator<T>,
    t: T,
    collapse: &[LinearOperator<T>],
) -> Result<State<T>> {
    if t == T::zero() {
        return Ok(state);
    }
    if collapse.is_empty() {
        return apply_unitary(state, &propagator(h, t)?);
    }
    let rho = state.to_mixed();
    let mut out = evolve_lindblad(h, collapse, &rho, &[T::zero(), t])?;
    Ok(State::Mixed(out.pop().expect("two grid points")))
}

/// Applies one pulse to a chain state.
pub fn apply_pulse<T: Real>(
    pulse: &Pulse<T>,
    state: State<T>,
    ctx: &SequenceContext<'_, T>,
) -> Result<State<T>> {
    let spec = ctx.space.site(pulse.site)?;
    check_state_dim(&state, ctx.space)?;
    if pulse.kind == PulseKind::UniformTransfer {
        pulse.validate(spec)?;
        let u = embed_site_operator(ctx.space, pulse.site, &uniform_transfer_unitary(spec)?)?;
        return apply_unitary(state, &u);
    }
    let collapse = if ctx.noise.has_decoherence() {
        ctx.noise.collapse_ops(ctx.space)?
    } else {
        Vec::new()
    };
    if collapse.is_empty() && !ctx.hopping_during_pulses {
        let u = pulse_unitary(pulse, spec, ctx.params, ctx.mode)?;
        return apply_unitary(state, &embed_site_operator(ctx.space, pulse.site, &u)?);
    }
    let (drive, t) = pulse_hamiltonian(pulse, spec, ctx.params, ctx.mode)?;
    let mut h = embed_site_operator(ctx.space, pulse.site, &drive)?;
    if ctx.hopping_during_pulses {
        h = h.add(&build_free_phonons(ctx.params, ctx.space)?)?;
    }
    evolve_for(state, &h, t, &collapse)
}

fn check_state_dim<T: Real>(state: &State<T>, space: &CompositeSpace) -> Result<()> {
    if state.dim() != space.dim() {
        return Err(Error::Dimension {
            expected: space.dim(),
            got: state.dim(),
        });
    }
    Ok(())
}

/// Applies every step in order.
pub fn apply_sequence<T: Real>(
    seq: &Sequence<T>,
    state: State<T>,
    ctx: &SequenceContext<'_, T>,
) -> Result<State<T>> {
    seq.validate(ctx.space)?;
    check_state_dim(&state, ctx.space)?;
    let mut state = state;
    for step in &seq.steps {
        state = match step {
            Step::Pulse(p) => apply_pulse(p, state, ctx)?,
            Step::Wait {
                duration,
                hamiltonian_on,
            } => {
                let h = if *hamiltonian_on {
                    build_ajch(ctx.params, ctx.space)?
                } else {
                    LinearOperator::zeros(ctx.space.dim())
                };
                let collapse = if ctx.noise.has_decoherence() {
                    ctx.noise.collapse_ops(ctx.space)?
                } else {
                    Vec::new()
                };
                evolve_for(state, &h, *duration, &collapse)?
            }
        };
    }
    Ok(state)
}

/// Preparation with classical failures: each pulse is skipped with
/// probability `ctx.noise.prep_infidelity`, giving `(1-p) UρU† + p ρ`.
pub fn apply_preparation<T: Real>(
    seq: &Sequence<T>,
    state: State<T>,
    ctx: &SequenceContext<'_, T>,
) -> Result<State<T>> {
    let p = ctx.noise.prep_infidelity;
    if p == T::zero() {
        return apply_sequence(seq, state, ctx);
    }
    seq.validate(ctx.space)?;
    let mut rho = state.to_mixed();
    for step in &seq.steps {
        let single = Sequence {
            label: String::new(),
            steps: vec![step.clone()],
        };
        let done = apply_sequence(&single, State::Mixed(rho.clone()), ctx)?.to_mixed();
        rho = match step {
            Step::Pulse(_) => done.mix(&rho, p)?,
            Step::Wait { .. } => done,
        };
    }
    Ok(State::Mixed(rho))
}

// ---------------------------------------------------------------------------
// Detection

/// Population of `down` (S1/2, fluorescing) at `site`.
pub fn bright_probability<T: Real>(
    state: &State<T>,
    space: &CompositeSpace,
    site: usize,
) -> Result<T> {
    check_state_dim(state, space)?;
    let spec = space.site(site)?;
    let pops = state.populations();
    Ok((0..space.dim())
        .filter(|&i| matches!(spec.label(space.site_digit(i, site)), Ok((Level::Down, _))))
        .fold(T::zero(), |acc, i| acc + pops[i]))
}

/// Bright population of a single-site density matrix.
pub fn site_bright_probability<T: Real>(rho: &MixedState<T>, spec: &SiteSpec) -> Result<T> {
    if rho.dim() != spec.dim() {
        return Err(Error::Dimension {
            expected: spec.dim(),
            got: rho.dim(),
        });
    }
    let mut p = T::zero();
    for n in 0..spec.fock_dim() {
        p += rho.population(spec.index(Level::Down, n)?);
    }
    Ok(p)
}

/// Fraction of bright outcomes in `shots` draws, from the given stream.
pub fn sample_shots_with<T: Real, R: Rng + ?Sized>(p: T, shots: u64, rng: &mut R) -> Result<T> {
    if shots == 0 {
        return Err(Error::Domain("shots must be at least 1".into()));
    }
    let pf = p.to_f64_lossy();
    // Populations carry integration noise of order 1e-9; clip it.
    let slack = 1e-6;
    if !(pf >= -slack && pf <= 1.0 + slack) {
        return Err(Error::Domain(format!("probability {pf} outside [0, 1]")));
    }
    let dist =
        Binomial::new(shots, pf.clamp(0.0, 1.0)).map_err(|e| Error::Domain(e.to_string()))?;
    let k = dist.sample(rng);
    Ok(T::lit(k as f64) / T::lit(shots as f64))
}

/// Fraction of bright outcomes in `shots` draws, seeded.
pub fn sample_shots<T: Real>(p: T, shots: u64, seed: u64) -> Result<T> {
    sample_shots_with(p, shots, &mut task_rng(seed, &[]))
}
