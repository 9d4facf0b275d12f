//! Physical parameters and Hamiltonian builders.
//!
//! Every frequency is angular (rad/s). Conversion from Hz/kHz happens at the
//! configuration boundary.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, creation, embed_site_operator, level_projector, number, transition,
    CompositeSpace, Level, LinearOperator, SiteSpec,
};
use crate::scalar::{cr, Real};

/// CODATA 2018 values used for every unit-sensitive computation.
pub mod constants {
    /// Elementary charge, C (exact).
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    /// Vacuum permittivity ε₀, F/m.
    pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
    /// Unified atomic mass unit, kg.
    pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
    /// Mass of ⁴⁰Ca⁺ taken as 40 u.
    pub const CALCIUM_40_MASS: f64 = 40.0 * ATOMIC_MASS_UNIT;
}

/// Radial direction whose secular frequency enters the hopping rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialMode {
    X,
    Y,
}

/// Linear-chain trap geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct IonChainGeometry<T: Real> {
    pub ion_mass: T,
    pub ion_charge: T,
    /// `(ω_x, ω_y, ω_z)` in rad/s.
    pub trap_frequencies: [T; 3],
    /// Axial coordinates in metres.
    pub positions: Vec<T>,
    pub radial_reference: RadialMode,
}

impl<T: Real> IonChainGeometry<T> {
    /// ⁴⁰Ca⁺ chain of `n_ions` at equilibrium in a trap given in Hz.
    pub fn calcium40(n_ions: usize, trap_hz: [T; 3], radial: RadialMode) -> Result<Self> {
        let mut g = Self {
            ion_mass: T::lit(constants::CALCIUM_40_MASS),
            ion_charge: T::lit(constants::ELEMENTARY_CHARGE),
            trap_frequencies: trap_hz.map(crate::scalar::angular),
            positions: Vec::new(),
            radial_reference: radial,
        };
        g.validate_trap()?;
        g.positions = equilibrium_positions(n_ions, &g)?;
        Ok(g)
    }

    pub fn omega_axial(&self) -> T {
        self.trap_frequencies[2]
    }

    pub fn omega_radial(&self) -> T {
        match self.radial_reference {
            RadialMode::X => self.trap_frequencies[0],
            RadialMode::Y => self.trap_frequencies[1],
        }
    }

    /// `e²/(4πε₀)` in J·m.
    pub fn coulomb_constant(&self) -> T {
        self.ion_charge * self.ion_charge
            / (T::lit(4.0) * T::PI() * T::lit(constants::VACUUM_PERMITTIVITY))
    }

    /// Natural length `(e²/(4πε₀ m ω_z²))^(1/3)`.
    pub fn length_scale(&self) -> T {
        let wz = self.omega_axial();
        (self.coulomb_constant() / (self.ion_mass * wz * wz)).cbrt()
    }

    fn validate_trap(&self) -> Result<()> {
        let [wx, wy, wz] = self.trap_frequencies;
        if !(wz > T::zero()) {
            return Err(Error::Domain(
                "axial trap frequency must be positive".into(),
            ));
        }
        if !(wz < wx && wz < wy) {
            return Err(Error::Domain(
                "axial frequency must be below both radial frequencies for a linear chain".into(),
            ));
        }
        Ok(())
    }
}

/// Axial equilibrium positions of `n_ions` in a harmonic well with mutual
/// Coulomb repulsion, centred on the trap.
///
/// Damped Newton iteration on the dimensionless force balance, seeded from
/// the two-ion closed form spacing. Converges to `|F| < 1e-20 N`.
pub fn equilibrium_positions<T: Real>(
    n_ions: usize,
    geometry: &IonChainGeometry<T>,
) -> Result<Vec<T>> {
    if n_ions == 0 {
        return Err(Error::Domain("need at least one ion".into()));
    }
    if !(geometry.omega_axial() > T::zero()) {
        return Err(Error::Domain(
            "axial trap frequency must be positive".into(),
        ));
    }
    if n_ions == 1 {
        return Ok(vec![T::zero()]);
    }

    let residual = |u: &[T]| -> DVector<T> {
        DVector::from_fn(n_ions, |i, _| {
            let mut f = u[i];
            for (j, &uj) in u.iter().enumerate() {
                if j != i {
                    let d = u[i] - uj;
                    f -= d.signum() / (d * d);
                }
            }
            f
        })
    };
    let jacobian = |u: &[T]| -> DMatrix<T> {
        DMatrix::from_fn(n_ions, n_ions, |i, j| {
            if i == j {
                let mut s = T::one();
                for (k, &uk) in u.iter().enumerate() {
                    if k != i {
                        s += T::lit(2.0) / (u[i] - uk).abs().powi(3);
                    }
                }
                s
            } else {
                -T::lit(2.0) / (u[i] - u[j]).abs().powi(3)
            }
        })
    };

    // two-ion spacing in units of the length scale is 2^(1/3)
    let spacing = T::lit(2.0).cbrt();
    let centre = T::from_usize_lossy(n_ions - 1) / T::lit(2.0);
    let mut u: Vec<T> = (0..n_ions)
        .map(|k| (T::from_usize_lossy(k) - centre) * spacing)
        .collect();

    let tol = T::default_epsilon() * T::lit(64.0);
    let mut res = residual(&u);
    for _ in 0..200 {
        let norm = res.amax();
        if norm <= tol {
            break;
        }
        let step = jacobian(&u)
            .lu()
            .solve(&(-&res))
            .ok_or_else(|| Error::NoConvergence {
                what: "equilibrium positions (singular Jacobian)".into(),
                residual: norm.to_f64_lossy(),
            })?;
        let mut damping = T::one();
        loop {
            let trial: Vec<T> = u
                .iter()
                .zip(step.iter())
                .map(|(&a, &s)| a + damping * s)
                .collect();
            let ordered = trial.windows(2).all(|w| w[0] < w[1]);
            if ordered {
                let r = residual(&trial);
                if r.amax() < norm || damping < T::lit(1e-6) {
                    u = trial;
                    res = r;
                    break;
                }
            }
            damping *= T::lit(0.5);
            if damping < T::lit(1e-12) {
                return Err(Error::NoConvergence {
                    what: "equilibrium positions (line search)".into(),
                    residual: norm.to_f64_lossy(),
                });
            }
        }
    }

    let scale = geometry.length_scale();
    let wz = geometry.omega_axial();
    let force_unit = geometry.ion_mass * wz * wz * scale;
    let force = (res.amax() * force_unit).to_f64_lossy();
    if !(force < 1e-20) {
        return Err(Error::NoConvergence {
            what: "equilibrium positions".into(),
            residual: force,
        });
    }
    Ok(u.into_iter().map(|x| x * scale).collect())
}

/// Two-ion separation `(e²/(2πε₀ m ω_z²))^(1/3)`.
pub fn two_ion_spacing<T: Real>(geometry: &IonChainGeometry<T>) -> T {
    let wz = geometry.omega_axial();
    (T::lit(2.0) * geometry.coulomb_constant() / (geometry.ion_mass * wz * wz)).cbrt()
}

/// Coulomb-mediated hopping rates `κ_ij = e²/(4πε₀ m d_ij³ ω_r)` (rad/s).
pub fn hopping_matrix<T: Real>(geometry: &IonChainGeometry<T>) -> Result<DMatrix<T>> {
    let wr = geometry.omega_radial();
    if !(wr > T::zero()) {
        return Err(Error::Domain(
            "radial trap frequency must be positive".into(),
        ));
    }
    let x = &geometry.positions;
    let n = x.len();
    let prefactor = geometry.coulomb_constant() / (geometry.ion_mass * wr);
    let mut kappa = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (x[i] - x[j]).abs();
            if d == T::zero() {
                return Err(Error::Domain(format!("ions {i} and {j} coincide")));
            }
            let k = prefactor / (d * d * d);
            kappa[(i, j)] = k;
            kappa[(j, i)] = k;
        }
    }
    Ok(kappa)
}

/// Position-dependent frequency shifts `ω_i = -Σ_{j≠i} κ_ij / 2`.
pub fn site_shifts<T: Real>(kappa: &DMatrix<T>) -> Result<Vec<T>> {
    if !kappa.is_square() {
        return Err(Error::Dimension {
            expected: kappa.nrows(),
            got: kappa.ncols(),
        });
    }
    let half = T::lit(0.5);
    Ok((0..kappa.nrows())
        .map(|i| {
            -(0..kappa.ncols())
                .filter(|&j| j != i)
                .fold(T::zero(), |s, j| s + kappa[(i, j)])
                * half
        })
        .collect())
}

/// Hopping matrix of an equally spaced chain with nearest-neighbour rate
/// `kappa_nn`, using the cubic distance law for longer range pairs.
pub fn uniform_chain_kappa<T: Real>(n_sites: usize, kappa_nn: T) -> DMatrix<T> {
    DMatrix::from_fn(n_sites, n_sites, |i, j| {
        if i == j {
            T::zero()
        } else {
            let d = T::from_usize_lossy(i.abs_diff(j));
            kappa_nn / (d * d * d)
        }
    })
}

/// Parameters of the anti-JCH Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T: Real> {
    /// `ω_i`, rad/s.
    pub omega_shift: Vec<T>,
    /// `δ_i`, blue-sideband detuning, rad/s.
    pub delta: Vec<T>,
    /// Anti-JC coupling `g_b`, rad/s.
    pub g_b: T,
    /// JC coupling `g_r`, rad/s.
    pub g_r: T,
    /// `κ_ij`, rad/s; symmetric with zero diagonal.
    pub kappa: DMatrix<T>,
    pub fock_cutoff: usize,
    /// Lamb-Dicke parameter.
    pub eta: T,
    /// Carrier-scale Rabi frequency `Ω₀`, rad/s.
    pub omega0_rabi: T,
}

impl<T: Real> ModelParams<T> {
    /// Resonant (`δ = 0`) parameters with shifts derived from `kappa`.
    ///
    /// `eta` fixes `Ω₀ = 2 g_b / η`; the red-sideband coupling equals `g_b`.
    pub fn from_kappa(kappa: DMatrix<T>, g_b: T, eta: T, fock_cutoff: usize) -> Result<Self> {
        let n = kappa.nrows();
        let p = Self {
            omega_shift: site_shifts(&kappa)?,
            delta: vec![T::zero(); n],
            g_b,
            g_r: g_b,
            kappa,
            fock_cutoff,
            eta,
            omega0_rabi: T::lit(2.0) * g_b / eta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Two ions with `(κ₁₂, 2g_b)/2π = (2, 15) kHz`, η = 0.1.
    pub fn two_ion_reference(fock_cutoff: usize) -> Self {
        let kappa = uniform_chain_kappa(2, crate::scalar::angular(T::lit(2.0e3)));
        Self::from_kappa(
            kappa,
            crate::scalar::angular(T::lit(7.5e3)),
            T::lit(0.1),
            fock_cutoff,
        )
        .expect("reference parameters are valid")
    }

    pub fn n_sites(&self) -> usize {
        self.omega_shift.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_sites();
        if n == 0 {
            return Err(Error::Domain("no sites".into()));
        }
        if self.delta.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.delta.len(),
            });
        }
        if self.kappa.nrows() != n || self.kappa.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.kappa.nrows(),
            });
        }
        for i in 0..n {
            if self.kappa[(i, i)] != T::zero() {
                return Err(Error::Domain(format!("kappa[{i},{i}] must be zero")));
            }
            for j in 0..n {
                let k = self.kappa[(i, j)];
                if k < T::zero() || k != self.kappa[(j, i)] {
                    return Err(Error::Domain(format!(
                        "kappa must be symmetric and non-negative (entry {i},{j})"
                    )));
                }
            }
        }
        if self.g_b < T::zero() || self.g_r < T::zero() {
            return Err(Error::Domain("couplings must be non-negative".into()));
        }
        if self.fock_cutoff < 1 {
            return Err(Error::Domain("fock_cutoff must be at least 1".into()));
        }
        if self.eta > T::zero() && self.omega0_rabi > T::zero() {
            let expected = self.eta * self.omega0_rabi / T::lit(2.0);
            let rel =
                ((expected - self.g_b).abs() / self.g_b.max(T::default_epsilon())).to_f64_lossy();
            if rel > 1e-9 {
                return Err(Error::Domain(format!(
                    "g_b inconsistent with eta * omega0 / 2 (relative mismatch {rel:e})"
                )));
            }
        }
        Ok(())
    }

    /// Copy with every coupling scaled, as for a drifting laser intensity.
    pub fn with_rabi_scale(&self, factor: T) -> Self {
        let mut p = self.clone();
        p.g_b *= factor;
        p.g_r *= factor;
        p.omega0_rabi *= factor;
        p
    }

    /// Copy with the hopping matrix scaled and shifts re-derived.
    pub fn with_kappa_scale(&self, factor: T) -> Self {
        let mut p = self.clone();
        p.kappa = self.kappa.map(|k| k * factor);
        p.omega_shift = site_shifts(&p.kappa).expect("square kappa");
        p
    }
}

fn require_two_level(spec: &SiteSpec) -> Result<(usize, usize)> {
    Ok((spec.require(Level::Down)?, spec.require(Level::Up)?))
}

/// `H_JC = ω a†a + (ω+Δ_JC) σ⁺σ⁻ + g_r (a σ⁺ + a† σ⁻)` on one site.
pub fn build_jc<T: Real>(
    omega: T,
    delta_jc: T,
    g_r: T,
    spec: &SiteSpec,
) -> Result<LinearOperator<T>> {
    require_two_level(spec)?;
    let a = annihilation::<T>(spec);
    let sp = transition::<T>(spec, Level::Up, Level::Down)?;
    let coupling = a.compose(&sp)?;
    let h = number::<T>(spec)
        .scale(omega)
        .add(&level_projector(spec, Level::Up)?.scale(omega + delta_jc))?
        .add(&coupling.add(&coupling.adjoint())?.scale(g_r))?;
    LinearOperator::new(h.into_matrix(), true)
}

/// `H_aJC = ω a†a + (ω+Δ_aJC) σ⁻σ⁺ + g_b (a σ⁻ + a† σ⁺)` on one site.
///
/// `σ⁻σ⁺ = |↓⟩⟨↓|`; auxiliary levels carry only the phonon energy.
pub fn build_ajc<T: Real>(
    omega: T,
    delta_ajc: T,
    g_b: T,
    spec: &SiteSpec,
) -> Result<LinearOperator<T>> {
    require_two_level(spec)?;
    let a = annihilation::<T>(spec);
    let sm = transition::<T>(spec, Level::Down, Level::Up)?;
    let coupling = a.compose(&sm)?;
    let h = number::<T>(spec)
        .scale(omega)
        .add(&level_projector(spec, Level::Down)?.scale(omega + delta_ajc))?
        .add(&coupling.add(&coupling.adjoint())?.scale(g_b))?;
    LinearOperator::new(h.into_matrix(), true)
}

/// Anti-JCH Hamiltonian of the chain:
///
/// `Σ ω_i a_i†a_i + Σ δ_i σ_i⁻σ_i⁺ + g_b Σ (a_i σ_i⁻ + a_i† σ_i⁺)
///  + Σ_{i<j} (κ_ij/2)(a_i† a_j + a_j† a_i)`.
///
/// Assembled directly on the product basis.
pub fn build_ajch<T: Real>(
    params: &ModelParams<T>,
    space: &CompositeSpace,
) -> Result<LinearOperator<T>> {
    let m = ajch_terms(params, space, true)?;
    Ok(LinearOperator::from_parts(m, true))
}

/// Phonon part of the chain Hamiltonian (shifts and hopping only).
pub fn build_free_phonons<T: Real>(
    params: &ModelParams<T>,
    space: &CompositeSpace,
) -> Result<LinearOperator<T>> {
    let m = ajch_terms(params, space, false)?;
    Ok(LinearOperator::from_parts(m, true))
}

fn ajch_terms<T: Real>(
    params: &ModelParams<T>,
    space: &CompositeSpace,
    driven: bool,
) -> Result<DMatrix<crate::scalar::C<T>>> {
    params.validate()?;
    let n_sites = space.n_sites();
    if params.n_sites() != n_sites {
        return Err(Error::Dimension {
            expected: n_sites,
            got: params.n_sites(),
        });
    }
    let mut downs = Vec::with_capacity(n_sites);
    let mut ups = Vec::with_capacity(n_sites);
    for (k, spec) in space.sites().iter().enumerate() {
        let (d, u) = require_two_level(spec).map_err(|e| Error::Site {
            site: k,
            what: e.to_string(),
        })?;
        downs.push(d);
        ups.push(u);
    }

    let dim = space.dim();
    let mut h = DMatrix::zeros(dim, dim);
    let mut digits = vec![0usize; n_sites];
    for col in 0..dim {
        for (k, d) in digits.iter_mut().enumerate() {
            *d = space.site_digit(col, k);
        }
        let mut diag = T::zero();
        for (k, spec) in space.sites().iter().enumerate() {
            let fd = spec.fock_dim();
            let (li, n) = (digits[k] / fd, digits[k] % fd);
            diag += params.omega_shift[k] * T::from_usize_lossy(n);
            if driven && li == downs[k] {
                diag += params.delta[k];
            }
            if driven && params.g_b != T::zero() {
                let stride = space.stride(k);
                // a σ⁻ : |↑,n⟩ → √n |↓,n-1⟩ (and its adjoint)
                if li == ups[k] && n >= 1 {
                    let row = col - digits[k] * stride + (downs[k] * fd + n - 1) * stride;
                    h[(row, col)] += cr(params.g_b * T::from_usize_lossy(n).sqrt());
                }
                if li == downs[k] && n + 1 < fd {
                    let row = col - digits[k] * stride + (ups[k] * fd + n + 1) * stride;
                    h[(row, col)] += cr(params.g_b * T::from_usize_lossy(n + 1).sqrt());
                }
            }
        }
        h[(col, col)] += cr(diag);

        // (κ_ij/2) a_i† a_j for every ordered pair i ≠ j
        for i in 0..n_sites {
            for j in 0..n_sites {
                if i == j {
                    continue;
                }
                let k = params.kappa[(i, j)];
                if k == T::zero() {
                    continue;
                }
                let (fi, fj) = (space.sites()[i].fock_dim(), space.sites()[j].fock_dim());
                let ni = digits[i] % fi;
                let nj = digits[j] % fj;
                if nj == 0 || ni + 1 >= fi {
                    continue;
                }
                let amp = T::from_usize_lossy(nj).sqrt() * T::from_usize_lossy(ni + 1).sqrt();
                let row = col + space.stride(i) - space.stride(j);
                h[(row, col)] += cr(k * T::lit(0.5) * amp);
            }
        }
    }
    Ok(h)
}

/// Same Hamiltonian assembled from embedded site operators; the dense
/// reference the direct builder is tested against.
pub fn build_ajch_by_embedding<T: Real>(
    params: &ModelParams<T>,
    space: &CompositeSpace,
) -> Result<LinearOperator<T>> {
    params.validate()?;
    let n_sites = space.n_sites();
    if params.n_sites() != n_sites {
        return Err(Error::Dimension {
            expected: n_sites,
            got: params.n_sites(),
        });
    }
    let mut h = LinearOperator::zeros(space.dim());
    let mut a_ops = Vec::with_capacity(n_sites);
    for (k, spec) in space.sites().iter().enumerate() {
        let local = build_ajc(T::zero(), params.delta[k], params.g_b, spec)?
            .add(&number::<T>(spec).scale(params.omega_shift[k]))?;
        h = h.add(&embed_site_operator(space, k, &local)?)?;
        a_ops.push(embed_site_operator(space, k, &annihilation::<T>(spec))?);
    }
    for i in 0..n_sites {
        for j in (i + 1)..n_sites {
            let hop = a_ops[i].adjoint().compose(&a_ops[j])?;
            let term = hop
                .add(&hop.adjoint())?
                .scale(params.kappa[(i, j)] * T::lit(0.5));
            h = h.add(&term)?;
        }
    }
    let _ = creation::<T>; // a† is formed through adjoint() above
    LinearOperator::new(h.into_matrix(), true)
}
