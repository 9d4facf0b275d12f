//! Time evolution, decoherence channels and trajectory bookkeeping.

mod lindblad;
mod unitary;

pub use lindblad::{
    evolve_lindblad, evolve_lindblad_blocks, evolve_lindblad_with, IntegrationStats,
    LindbladGenerator, LindbladOptions, Scratch,
};
pub use unitary::{evolve_unitary, propagator, EigenPropagator};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, creation, embed_site_operator, CompositeSpace, Level, LinearOperator, MixedState,
    PureState, SiteSpec,
};
use crate::model::build_ajc;
use crate::polariton::manifold_indices;
use crate::scalar::Real;

/// Decoherence and run-to-run imperfections.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel<T: Real> {
    /// Per-site internal dephasing rate γ, 1/s. Empty means zero everywhere.
    pub dephasing_rates: Vec<T>,
    /// Heating rate per site, quanta/s.
    pub heating_rate: T,
    /// Largest fractional reduction of `Ω₀` in one run.
    pub rabi_drift_fraction: T,
    /// Probability that the preparation pulse on an ion fails.
    pub prep_infidelity: T,
}

impl<T: Real> Default for NoiseModel<T> {
    fn default() -> Self {
        Self {
            dephasing_rates: Vec::new(),
            heating_rate: T::zero(),
            rabi_drift_fraction: T::zero(),
            prep_infidelity: T::zero(),
        }
    }
}

impl<T: Real> NoiseModel<T> {
    pub fn validate(&self, n_sites: usize) -> Result<()> {
        if !self.dephasing_rates.is_empty() && self.dephasing_rates.len() != n_sites {
            return Err(Error::Dimension {
                expected: n_sites,
                got: self.dephasing_rates.len(),
            });
        }
        if self.dephasing_rates.iter().any(|g| !(*g >= T::zero())) {
            return Err(Error::Domain("dephasing rates must be non-negative".into()));
        }
        if !(self.heating_rate >= T::zero()) {
            return Err(Error::Domain("heating rate must be non-negative".into()));
        }
        if !(self.rabi_drift_fraction >= T::zero() && self.rabi_drift_fraction < T::one()) {
            return Err(Error::Domain(
                "rabi drift fraction must lie in [0, 1)".into(),
            ));
        }
        if !(self.prep_infidelity >= T::zero() && self.prep_infidelity <= T::one()) {
            return Err(Error::Domain(
                "preparation infidelity must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn dephasing_rate(&self, site: usize) -> T {
        self.dephasing_rates
            .get(site)
            .copied()
            .unwrap_or_else(T::zero)
    }

    /// Whether any Lindblad channel is active.
    pub fn has_decoherence(&self) -> bool {
        self.heating_rate > T::zero() || self.dephasing_rates.iter().any(|g| *g > T::zero())
    }

    /// Dephasing and heating operators for every site of `space`.
    pub fn collapse_ops(&self, space: &CompositeSpace) -> Result<Vec<LinearOperator<T>>> {
        self.validate(space.n_sites())?;
        let mut ops = dephasing_ops(self, space)?;
        for site in 0..space.n_sites() {
            ops.extend(heating_ops(self.heating_rate, space, site)?);
        }
        Ok(ops)
    }

    /// Operators acting on one site in isolation, using that site's rates.
    pub fn site_collapse_ops(
        &self,
        spec: &SiteSpec,
        site: usize,
    ) -> Result<Vec<LinearOperator<T>>> {
        let mut ops = Vec::new();
        let g = self.dephasing_rate(site);
        if g > T::zero() {
            ops.push(dephasing_op(spec, g)?);
        }
        ops.extend(site_heating_ops(self.heating_rate, spec)?);
        Ok(ops)
    }
}

// ---------------------------------------------------------------------------
// Collapse operators

/// `√γ Z` with `Z = -1` on `down` and `+1` on every D5/2 level.
///
/// Coherences between `down` and the other levels decay as `e^{-2γt}`;
/// coherences among D5/2 levels are untouched.
pub fn dephasing_op<T: Real>(spec: &SiteSpec, gamma: T) -> Result<LinearOperator<T>> {
    if !(gamma >= T::zero()) {
        return Err(Error::Domain("dephasing rate must be non-negative".into()));
    }
    let s = gamma.sqrt();
    let diag: Vec<T> = (0..spec.dim())
        .map(|i| match spec.label(i) {
            Ok((Level::Down, _)) => -s,
            _ => s,
        })
        .collect();
    Ok(LinearOperator::from_real_diagonal(&diag))
}

/// One dephasing operator per site with a positive rate.
pub fn dephasing_ops<T: Real>(
    noise: &NoiseModel<T>,
    space: &CompositeSpace,
) -> Result<Vec<LinearOperator<T>>> {
    let mut ops = Vec::new();
    for site in 0..space.n_sites() {
        let g = noise.dephasing_rate(site);
        if g > T::zero() {
            ops.push(embed_site_operator(
                space,
                site,
                &dephasing_op(space.site(site)?, g)?,
            )?);
        }
    }
    Ok(ops)
}

fn site_heating_ops<T: Real>(rate: T, spec: &SiteSpec) -> Result<Vec<LinearOperator<T>>> {
    if !(rate >= T::zero()) {
        return Err(Error::Domain("heating rate must be non-negative".into()));
    }
    if rate == T::zero() {
        return Ok(Vec::new());
    }
    let s = rate.sqrt();
    Ok(vec![creation(spec).scale(s), annihilation(spec).scale(s)])
}

/// `{√Γ a†, √Γ a}` on one site: symmetric bath, `d⟨n⟩/dt = Γ`.
pub fn heating_ops<T: Real>(
    rate: T,
    space: &CompositeSpace,
    site: usize,
) -> Result<Vec<LinearOperator<T>>> {
    site_heating_ops(rate, space.site(site)?)?
        .iter()
        .map(|op| embed_site_operator(space, site, op))
        .collect()
}

// ---------------------------------------------------------------------------
// States and estimates

/// `|↓⟩⟨↓| ⊗ ρ_th` with geometric phonon weights renormalized on the cutoff.
pub fn thermal_state<T: Real>(nbar: T, spec: &SiteSpec) -> Result<MixedState<T>> {
    if !(nbar >= T::zero()) {
        return Err(Error::Domain(
            "mean phonon number must be non-negative".into(),
        ));
    }
    let ratio = nbar / (T::one() + nbar);
    let weights: Vec<T> = (0..spec.fock_dim())
        .scan(T::one(), |w, _| {
            let cur = *w;
            *w *= ratio;
            Some(cur)
        })
        .collect();
    let norm = weights.iter().fold(T::zero(), |a, &b| a + b);
    let mut probs = vec![T::zero(); spec.dim()];
    for (n, w) in weights.iter().enumerate() {
        probs[spec.index(Level::Down, n)?] = *w / norm;
    }
    MixedState::diagonal(&probs)
}

/// Bookkeeping bound on the population above the 2-polariton manifold:
/// `n_ions · n̄ + Γ · T`, using `P(n ≥ 1) ≤ n̄` per ion.
pub fn leakage_estimate<T: Real>(
    nbar: T,
    n_ions: usize,
    heating_rate: T,
    duration: T,
) -> Result<T> {
    check_leakage_inputs(nbar, heating_rate, duration)?;
    Ok(T::from_usize_lossy(n_ions) * nbar + heating_rate * duration)
}

/// Same bound with the exact thermal `P(n ≥ 1) = n̄ / (1 + n̄)` per ion.
pub fn leakage_estimate_thermal<T: Real>(
    nbar: T,
    n_ions: usize,
    heating_rate: T,
    duration: T,
) -> Result<T> {
    check_leakage_inputs(nbar, heating_rate, duration)?;
    Ok(T::from_usize_lossy(n_ions) * nbar / (T::one() + nbar) + heating_rate * duration)
}

fn check_leakage_inputs<T: Real>(nbar: T, rate: T, duration: T) -> Result<()> {
    if !(nbar >= T::zero() && rate >= T::zero() && duration >= T::zero()) {
        return Err(Error::Domain("leakage inputs must be non-negative".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Dephasing calibration

/// Result of [`calibrate_dephasing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingCalibration<T: Real> {
    pub gamma: T,
    pub contrast: T,
    pub iterations: usize,
}

/// Peak-to-peak amplitude of the blue-sideband Rabi flop `|↓,0⟩ ↔ |↑,1⟩`
/// over one period centred on `at_time`, under dephasing rate `gamma`.
pub fn sideband_contrast<T: Real>(g_b: T, gamma: T, at_time: T) -> Result<T> {
    if !(g_b > T::zero()) || !(at_time > T::zero()) {
        return Err(Error::Domain(
            "sideband contrast needs g_b > 0 and a positive time".into(),
        ));
    }
    let spec = SiteSpec::two_level(1)?;
    let h = build_ajc(T::zero(), T::zero(), g_b, &spec)?;
    let ops = if gamma > T::zero() {
        vec![dephasing_op(&spec, gamma)?]
    } else {
        Vec::new()
    };
    let rho0 = PureState::site_basis(&spec, Level::Down, 0)?.to_density();
    let period = T::pi() / g_b;
    let start = (at_time - period * T::lit(0.5)).max(T::zero());
    let samples = 400usize;
    let mut grid = vec![T::zero()];
    for k in 0..=samples {
        let t = start + period * T::from_usize_lossy(k) / T::from_usize_lossy(samples);
        if t > *grid.last().expect("non-empty") {
            grid.push(t);
        }
    }
    let states = evolve_lindblad(&h, &ops, &rho0, &grid)?;
    let down = spec.index(Level::Down, 0)?;
    let (lo, hi) = states[1..]
        .iter()
        .fold((T::one(), T::zero()), |(lo, hi), s| {
            let p = s.population(down);
            (lo.min(p), hi.max(p))
        });
    Ok(hi - lo)
}

/// Finds γ such that the sideband contrast at `at_time` equals `target`.
///
/// Seeded at `ln(1/target)/at_time`, the strong-drive estimate, and refined
/// by bisection on the simulated contrast.
pub fn calibrate_dephasing<T: Real>(
    g_b: T,
    target: T,
    at_time: T,
) -> Result<DephasingCalibration<T>> {
    if !(target > T::zero() && target < T::one()) {
        return Err(Error::Domain("target contrast must lie in (0, 1)".into()));
    }
    let tol = T::lit(1e-4);
    let seed = -target.ln() / at_time;
    let mut lo = T::zero();
    let mut hi = seed * T::lit(2.0);
    let mut iterations = 0;
    while sideband_contrast(g_b, hi, at_time)? > target {
        hi *= T::lit(2.0);
        iterations += 1;
        if iterations > 40 {
            return Err(Error::NoConvergence {
                what: "dephasing calibration bracket".into(),
                residual: f64::NAN,
            });
        }
    }
    let mut gamma = seed;
    for _ in 0..80 {
        iterations += 1;
        let c = sideband_contrast(g_b, gamma, at_time)?;
        if (c - target).abs() < tol {
            return Ok(DephasingCalibration {
                gamma,
                contrast: c,
                iterations,
            });
        }
        if c > target {
            lo = gamma;
        } else {
            hi = gamma;
        }
        gamma = (lo + hi) * T::lit(0.5);
    }
    Err(Error::NoConvergence {
        what: "dephasing calibration".into(),
        residual: (sideband_contrast(g_b, gamma, at_time)? - target).to_f64_lossy(),
    })
}

// ---------------------------------------------------------------------------
// Trajectories

/// Basis states recorded per site, in column order.
pub const TRACKED_STATES: [(Level, usize); 5] = [
    (Level::Up, 0),
    (Level::Up, 1),
    (Level::Down, 0),
    (Level::Up, 2),
    (Level::Down, 1),
];

/// Polariton manifolds recorded per site.
pub const TRACKED_MANIFOLDS: [usize; 3] = [0, 1, 2];

/// Populations of one site at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteRecord<T: Real> {
    /// Populations of [`TRACKED_STATES`].
    pub basis: [T; 5],
    /// Populations of [`TRACKED_MANIFOLDS`].
    pub manifold: [T; 3],
}

impl<T: Real> SiteRecord<T> {
    /// From the diagonal of a single-site density matrix.
    pub fn from_site_populations(spec: &SiteSpec, pops: &[T]) -> Result<Self> {
        if pops.len() != spec.dim() {
            return Err(Error::Dimension {
                expected: spec.dim(),
                got: pops.len(),
            });
        }
        let at = |(l, n): (Level, usize)| {
            spec.index(l, n)
                .map(|i| pops[i])
                .unwrap_or_else(|_| T::zero())
        };
        let mut manifold = [T::zero(); 3];
        for (m, &l) in manifold.iter_mut().zip(TRACKED_MANIFOLDS.iter()) {
            *m = manifold_indices(spec, l)?
                .into_iter()
                .fold(T::zero(), |acc, i| acc + pops[i]);
        }
        Ok(Self {
            basis: TRACKED_STATES.map(at),
            manifold,
        })
    }
}

/// Marginal populations of one site from the full diagonal.
pub fn site_populations<T: Real>(
    space: &CompositeSpace,
    site: usize,
    diag: &[T],
) -> Result<Vec<T>> {
    let spec = space.site(site)?;
    if diag.len() != space.dim() {
        return Err(Error::Dimension {
            expected: space.dim(),
            got: diag.len(),
        });
    }
    let mut out = vec![T::zero(); spec.dim()];
    for (i, &p) in diag.iter().enumerate() {
        out[space.site_digit(i, site)] += p;
    }
    Ok(out)
}

/// Per-site records for every site of `space`.
pub fn site_records<T: Real>(space: &CompositeSpace, diag: &[T]) -> Result<Vec<SiteRecord<T>>> {
    (0..space.n_sites())
        .map(|s| {
            SiteRecord::from_site_populations(space.site(s)?, &site_populations(space, s, diag)?)
        })
        .collect()
}

/// Population time series on a grid, one record per site and time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    times: Vec<T>,
    records: Vec<Vec<SiteRecord<T>>>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(times: Vec<T>, records: Vec<Vec<SiteRecord<T>>>) -> Result<Self> {
        check_grid(&times)?;
        if records.len() != times.len() {
            return Err(Error::Dimension {
                expected: times.len(),
                got: records.len(),
            });
        }
        let (lo, hi) = (T::lit(-1e-9), T::lit(1.0 + 1e-9));
        for (t, row) in times.iter().zip(&records) {
            for r in row {
                if r.basis
                    .iter()
                    .chain(r.manifold.iter())
                    .any(|p| !(*p >= lo && *p <= hi))
                {
                    return Err(Error::Domain(format!(
                        "population outside [0, 1] at t = {:e}",
                        t.to_f64_lossy()
                    )));
                }
            }
        }
        Ok(Self { times, records })
    }

    pub fn from_mixed(
        space: &CompositeSpace,
        times: Vec<T>,
        states: &[MixedState<T>],
    ) -> Result<Self> {
        let records = states
            .iter()
            .map(|s| site_records(space, &s.populations()))
            .collect::<Result<_>>()?;
        Self::new(times, records)
    }

    pub fn from_pure(
        space: &CompositeSpace,
        times: Vec<T>,
        states: &[PureState<T>],
    ) -> Result<Self> {
        let records = states
            .iter()
            .map(|s| {
                let diag: Vec<T> = s.amplitudes().iter().map(|z| z.norm_sqr()).collect();
                site_records(space, &diag)
            })
            .collect::<Result<_>>()?;
        Self::new(times, records)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn records(&self) -> &[Vec<SiteRecord<T>>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_sites(&self) -> usize {
        self.records.first().map_or(0, Vec::len)
    }

    /// Population of manifold `TRACKED_MANIFOLDS[slot]` at `site` over time.
    pub fn manifold_series(&self, site: usize, slot: usize) -> Vec<T> {
        self.records
            .iter()
            .map(|row| row[site].manifold[slot])
            .collect()
    }

    /// Population of `TRACKED_STATES[slot]` at `site` over time.
    pub fn basis_series(&self, site: usize, slot: usize) -> Vec<T> {
        self.records
            .iter()
            .map(|row| row[site].basis[slot])
            .collect()
    }
}

/// Requires a non-empty, finite, strictly increasing grid.
pub fn check_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("time grid is empty".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("time grid has non-finite entries".into()));
    }
    if let Some(w) = grid.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(format!(
            "time grid is not strictly increasing at {:e}",
            w[1].to_f64_lossy()
        )));
    }
    Ok(())
}

/// `start, start + step, …` up to and including `stop` (within rounding).
pub fn uniform_grid<T: Real>(start: T, stop: T, step: T) -> Result<Vec<T>> {
    if !(step > T::zero()) || !(stop > start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::Domain(
            "time grid needs stop > start and step > 0".into(),
        ));
    }
    let span = (stop - start) / step;
    let mut n = span.round();
    if n > span + T::lit(1e-9) * span.max(T::one()) {
        n -= T::one();
    }
    let n = n.to_f64_lossy() as usize;
    Ok((0..=n)
        .map(|k| start + step * T::from_usize_lossy(k))
        .collect())
}

/// Deterministic random stream for one task of a seeded run.
///
/// The master seed keys the generator; the task indices select an
/// independent ChaCha stream, so results do not depend on execution order.
pub fn task_rng(master_seed: u64, task: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    let mut stream = 0x9e37_79b9_7f4a_7c15u64;
    for &i in task {
        stream = splitmix64(stream ^ i);
    }
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Expectation;
    use crate::model::{build_ajch, ModelParams};
    use crate::polariton::total_polariton_number;
    use rand::Rng;

    #[test]
    fn thermal_examples() {
        let spec = SiteSpec::with_shelving(4).unwrap();
        let rho = thermal_state(0.0, &spec).unwrap();
        assert_eq!(rho.population(spec.index(Level::Down, 0).unwrap()), 1.0);

        // Independent oracle: truncated geometric series normalized by summation.
        let nbar: f64 = 0.04;
        let spec = SiteSpec::two_level(12).unwrap();
        let rho = thermal_state(nbar, &spec).unwrap();
        let raw: Vec<f64> = (0..=12).map(|n| (nbar / (1.0 + nbar)).powi(n)).collect();
        let z: f64 = raw.iter().sum();
        for n in 0..=12 {
            let p = rho.population(spec.index(Level::Down, n).unwrap());
            assert!((p - raw[n] / z).abs() < 1e-15);
        }
        assert!((rho.population(spec.index(Level::Down, 0).unwrap()) - 0.9615).abs() < 1e-4);
        assert!((rho.population(spec.index(Level::Down, 1).unwrap()) - 0.0370).abs() < 1e-4);
        assert!((rho.trace() - 1.0).abs() < 1e-15);
        assert!(thermal_state(-0.1, &spec).is_err());
    }

    #[test]
    fn thermal_mean_small_nbar() {
        for nbar in [0.0f64, 0.04, 0.1] {
            let n_max = (10.0 * nbar + 5.0).ceil() as usize;
            let spec = SiteSpec::two_level(n_max).unwrap();
            let rho = thermal_state(nbar, &spec).unwrap();
            let mean: f64 = (0..=n_max)
                .map(|n| n as f64 * rho.population(spec.index(Level::Down, n).unwrap()))
                .sum();
            assert!((mean - nbar).abs() < 1e-6, "nbar={nbar}: {mean}");
        }
    }

    #[test]
    fn leakage_examples() {
        let b: f64 = leakage_estimate(0.04, 2, 5.0, 840e-6).unwrap();
        assert!((b - 0.0842).abs() < 1e-12);
        assert_eq!(leakage_estimate(0.0, 0, 0.0, 0.0).unwrap(), 0.0);
        let exact: f64 = leakage_estimate_thermal(0.04, 1, 0.0, 0.0).unwrap();
        assert!((exact - (1.0 - 1.0 / 1.04)).abs() < 1e-15);
        assert!((exact - 0.0385).abs() < 1e-4);
        assert!(leakage_estimate(-1.0, 1, 0.0, 0.0).is_err());
    }

    #[test]
    fn empty_channels() {
        let space = CompositeSpace::uniform(SiteSpec::two_level(2).unwrap(), 2).unwrap();
        assert!(heating_ops(0.0f64, &space, 0).unwrap().is_empty());
        let noise = NoiseModel::<f64>::default();
        assert!(dephasing_ops(&noise, &space).unwrap().is_empty());
        assert!(noise.collapse_ops(&space).unwrap().is_empty());
        let bad = NoiseModel {
            rabi_drift_fraction: 1.0,
            ..NoiseModel::<f64>::default()
        };
        assert!(bad.validate(2).is_err());
    }

    #[test]
    fn heating_rate_short_time() {
        let spec = SiteSpec::two_level(4).unwrap();
        let space = CompositeSpace::new(vec![spec.clone()]).unwrap();
        let rate = 5.0;
        let ops = heating_ops(rate, &space, 0).unwrap();
        let rho0 = thermal_state(0.0, &spec).unwrap();
        let h = LinearOperator::zeros(spec.dim());
        let t = 1e-3;
        let states = evolve_lindblad(&h, &ops, &rho0, &[0.0, t]).unwrap();
        let n = crate::hilbert::number::<f64>(&spec);
        let slope = states[1].expectation(&n).unwrap().re / t;
        assert!((slope - rate).abs() < 0.02 * rate);
        assert!((states[1].trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heating_over_sequence_duration() {
        let spec = SiteSpec::two_level(4).unwrap();
        let space = CompositeSpace::new(vec![spec.clone()]).unwrap();
        let ops = heating_ops(5.0, &space, 0).unwrap();
        let rho0 = thermal_state(0.0, &spec).unwrap();
        let states = evolve_lindblad(
            &LinearOperator::zeros(spec.dim()),
            &ops,
            &rho0,
            &[0.0, 840e-6],
        )
        .unwrap();
        let n = states[1]
            .expectation(&crate::hilbert::number::<f64>(&spec))
            .unwrap()
            .re;
        assert!((n - 0.0042).abs() < 0.1 * 0.0042, "{n}");
    }

    #[test]
    fn independent_site_dephasing_factorizes() {
        let spec = SiteSpec::two_level(1).unwrap();
        let space = CompositeSpace::uniform(spec.clone(), 2).unwrap();
        let noise = NoiseModel {
            dephasing_rates: vec![100.0, 700.0],
            ..NoiseModel::<f64>::default()
        };
        let ops = dephasing_ops(&noise, &space).unwrap();
        assert_eq!(ops.len(), 2);
        let mut v = nalgebra::DVector::zeros(spec.dim());
        v[spec.index(Level::Down, 0).unwrap()] = crate::scalar::cr(0.6);
        v[spec.index(Level::Up, 0).unwrap()] = crate::scalar::cr(0.8);
        let single = PureState::new(v).unwrap();
        let rho0 = single.kron(&single).to_density();
        let t = 1e-3;
        let full =
            evolve_lindblad(&LinearOperator::zeros(space.dim()), &ops, &rho0, &[0.0, t]).unwrap();
        let mut parts = Vec::new();
        for site in 0..2 {
            let op = dephasing_op(&spec, noise.dephasing_rate(site)).unwrap();
            let s = evolve_lindblad(
                &LinearOperator::zeros(spec.dim()),
                &[op],
                &single.to_density(),
                &[0.0, t],
            )
            .unwrap();
            parts.push(s[1].clone());
        }
        let product = parts[0].kron(&parts[1]);
        assert!(crate::scalar::max_abs_diff(full[1].matrix(), product.matrix()) < 1e-9);
    }

    #[test]
    fn calibration_hits_target() {
        let g = crate::scalar::angular(7.5e3);
        let cal = calibrate_dephasing(g, 0.5f64, 840e-6).unwrap();
        assert!((cal.contrast - 0.5).abs() < 0.05);
        let c = sideband_contrast(g, cal.gamma, 840e-6).unwrap();
        assert!((c - 0.5).abs() < 0.05);
        let clean = sideband_contrast(g, 0.0, 840e-6).unwrap();
        assert!(clean > 0.999);
    }

    #[test]
    fn polariton_number_conserved() {
        let params = ModelParams::<f64>::two_ion_reference(3);
        let space = CompositeSpace::uniform(SiteSpec::two_level(3).unwrap(), 2).unwrap();
        let h = build_ajch(&params, &space).unwrap();
        let nt = total_polariton_number::<f64>(&space);
        let psi = PureState::product(&space, &[(Level::Up, 0), (Level::Down, 0)]).unwrap();
        let ep = EigenPropagator::new(&h).unwrap();
        let grid = uniform_grid(0.0, 1e-3, 2e-5).unwrap();
        let n0 = psi.expectation(&nt).unwrap().re;
        for s in ep.evolve_pure_many(&psi, &grid).unwrap() {
            assert!((s.expectation(&nt).unwrap().re - n0).abs() < 1e-8);
        }
    }

    #[test]
    fn trajectory_records_are_consistent() {
        let params = ModelParams::<f64>::two_ion_reference(3);
        let space = CompositeSpace::uniform(SiteSpec::two_level(3).unwrap(), 2).unwrap();
        let h = build_ajch(&params, &space).unwrap();
        let psi = PureState::product(&space, &[(Level::Down, 0), (Level::Down, 0)]).unwrap();
        let grid = uniform_grid(0.0, 2e-4, 1e-5).unwrap();
        let states = EigenPropagator::new(&h)
            .unwrap()
            .evolve_pure_many(&psi, &grid)
            .unwrap();
        let traj = Trajectory::from_pure(&space, grid.clone(), &states).unwrap();
        assert_eq!(traj.len(), grid.len());
        for row in traj.records() {
            for r in row {
                assert!((r.manifold[0] - r.basis[0]).abs() < 1e-12);
                assert!((r.manifold[1] - (r.basis[1] + r.basis[2])).abs() < 1e-12);
                assert!((r.manifold[2] - (r.basis[3] + r.basis[4])).abs() < 1e-12);
            }
        }
        assert!(Trajectory::<f64>::new(vec![0.0, 0.0], vec![vec![], vec![]]).is_err());
    }

    #[test]
    fn grids() {
        let g: Vec<f64> = uniform_grid(0.0, 840e-6, 1e-6).unwrap();
        assert_eq!(g.len(), 841);
        assert!((g[840] - 840e-6).abs() < 1e-18);
        assert_eq!(uniform_grid(0.0, 1.0, 0.3).unwrap().len(), 4);
        assert!(uniform_grid(1.0, 0.0, 0.1).is_err());
        assert!(check_grid(&[0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn task_streams() {
        let a: u64 = task_rng(7, &[1, 2]).random();
        let b: u64 = task_rng(7, &[1, 2]).random();
        let c: u64 = task_rng(7, &[2, 1]).random();
        let d: u64 = task_rng(8, &[1, 2]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
