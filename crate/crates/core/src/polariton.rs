//! Polariton algebra of the resonant anti-JC ladder.
//!
//! `|0⟩ = |↑,0⟩`, `|l±⟩ = (|↑,l⟩ ± |↓,l-1⟩)/√2` with energies
//! `E₀ = 0`, `E_{±,l} = lω ± √l g_b`. The polariton number of a site is
//! `N_i = a†a + σ⁻σ⁺`, which counts `|↓⟩` as one excitation.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{CompositeSpace, Level, LinearOperator, MixedState, PureState, SiteSpec};
use crate::scalar::{cone, cr, Real};

/// Branch of the anti-JC doublet. `Plus` carries the `+√l g_b` energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign<T: Real>(self) -> T {
        match self {
            Branch::Plus => T::one(),
            Branch::Minus => -T::one(),
        }
    }
}

/// Polariton number and branch; the branch is absent exactly when `l = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolaritonLabel {
    l: usize,
    branch: Option<Branch>,
}

impl PolaritonLabel {
    pub fn new(l: usize, branch: Option<Branch>) -> Result<Self> {
        if (l == 0) != branch.is_none() {
            return Err(Error::Domain(format!(
                "polariton label l={l} requires {} branch",
                if l == 0 { "no" } else { "a" }
            )));
        }
        Ok(Self { l, branch })
    }

    pub const fn vacuum() -> Self {
        Self { l: 0, branch: None }
    }

    pub fn plus(l: usize) -> Result<Self> {
        Self::new(l, Some(Branch::Plus))
    }

    pub fn minus(l: usize) -> Result<Self> {
        Self::new(l, Some(Branch::Minus))
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn branch(&self) -> Option<Branch> {
        self.branch
    }
}

impl fmt::Display for PolaritonLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.branch {
            None => write!(f, "0"),
            Some(Branch::Plus) => write!(f, "{}+", self.l),
            Some(Branch::Minus) => write!(f, "{}-", self.l),
        }
    }
}

/// Resonant anti-JC eigenstate on one site.
pub fn polariton_state<T: Real>(label: PolaritonLabel, spec: &SiteSpec) -> Result<PureState<T>> {
    if label.l > spec.fock_cutoff() {
        return Err(Error::Domain(format!(
            "polariton number {} exceeds fock cutoff {}",
            label.l,
            spec.fock_cutoff()
        )));
    }
    let Some(branch) = label.branch else {
        return PureState::site_basis(spec, Level::Up, 0);
    };
    let mut v = nalgebra::DVector::zeros(spec.dim());
    let h = T::FRAC_1_SQRT_2();
    v[spec.index(Level::Up, label.l)?] = cr(h);
    v[spec.index(Level::Down, label.l - 1)?] = cr(branch.sign::<T>() * h);
    PureState::new(v)
}

/// `E₀ = 0`, `E_{±,l} = lω ± √l g_b`.
pub fn polariton_energy<T: Real>(label: PolaritonLabel, omega: T, g_b: T) -> T {
    match label.branch {
        None => T::zero(),
        Some(b) => {
            let l = T::from_usize_lossy(label.l);
            l * omega + b.sign::<T>() * l.sqrt() * g_b
        }
    }
}

/// `E_k + E_l = Lω ± (√k + √l) g_b` for two sites on the same branch.
pub fn pair_energy<T: Real>(k: PolaritonLabel, l: PolaritonLabel, omega: T, g_b: T) -> Result<T> {
    if let (Some(a), Some(b)) = (k.branch, l.branch) {
        if a != b {
            return Err(Error::Domain(format!(
                "pair energy is defined per branch; got {k} and {l}"
            )));
        }
    }
    Ok(polariton_energy(k, omega, g_b) + polariton_energy(l, omega, g_b))
}

/// `(E_{2±} + E_0) - 2E_{1±} = ∓(2-√2) g_b`.
pub fn blockade_gap<T: Real>(g_b: T, branch: Branch) -> T {
    -branch.sign::<T>() * (T::lit(2.0) - T::SQRT_2()) * g_b
}

/// `δE_l = ω ± (√l - √(l-1)) g_b`, the gap between `|(l-1)±⟩` and `|l±⟩`.
pub fn ladder_gap<T: Real>(l: usize, branch: Branch, omega: T, g_b: T) -> Result<T> {
    if l == 0 {
        return Err(Error::Domain("ladder gap needs l >= 1".into()));
    }
    let step = T::from_usize_lossy(l).sqrt() - T::from_usize_lossy(l - 1).sqrt();
    Ok(omega + branch.sign::<T>() * step * g_b)
}

/// Polariton number of `|level, n⟩`; auxiliary levels count phonons only.
pub fn site_polariton_number(level: Level, n: usize) -> usize {
    n + usize::from(level == Level::Down)
}

/// `N_i = a_i†a_i + σ_i⁻σ_i⁺` embedded in the chain.
pub fn polariton_number_operator<T: Real>(
    space: &CompositeSpace,
    site: usize,
) -> Result<LinearOperator<T>> {
    let spec = space.site(site)?;
    let diag: Vec<T> = (0..space.dim())
        .map(|i| {
            let (level, n) = spec
                .label(space.site_digit(i, site))
                .expect("digit in range");
            T::from_usize_lossy(site_polariton_number(level, n))
        })
        .collect();
    Ok(LinearOperator::from_real_diagonal(&diag))
}

/// `N_t = Σ_i N_i`.
pub fn total_polariton_number<T: Real>(space: &CompositeSpace) -> LinearOperator<T> {
    let diag: Vec<T> = (0..space.dim())
        .map(|i| T::from_usize_lossy(total_polariton_number_of(space, i)))
        .collect();
    LinearOperator::from_real_diagonal(&diag)
}

fn total_polariton_number_of(space: &CompositeSpace, index: usize) -> usize {
    space
        .sites()
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let (level, n) = spec
                .label(space.site_digit(index, k))
                .expect("digit in range");
            site_polariton_number(level, n)
        })
        .sum()
}

/// Basis indices grouped by total polariton number.
pub fn polariton_sectors(space: &CompositeSpace) -> BTreeMap<usize, Vec<usize>> {
    let mut sectors: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..space.dim() {
        sectors
            .entry(total_polariton_number_of(space, i))
            .or_default()
            .push(i);
    }
    sectors
}

/// Basis states of manifold `l` on one site: `{|↑,0⟩}` for `l = 0`, else
/// `{|↑,l⟩, |↓,l-1⟩}` restricted to the cutoff. `l` may be `n_max + 1`,
/// which holds only `|↓,n_max⟩`.
pub fn manifold_indices(spec: &SiteSpec, l: usize) -> Result<Vec<usize>> {
    if l > spec.fock_cutoff() + 1 {
        return Err(Error::Domain(format!(
            "manifold {l} is beyond the cutoff {}",
            spec.fock_cutoff()
        )));
    }
    let mut idx = Vec::with_capacity(2);
    if l <= spec.fock_cutoff() {
        idx.push(spec.index(Level::Up, l)?);
    }
    if l > 0 {
        idx.push(spec.index(Level::Down, l - 1)?);
    }
    Ok(idx)
}

/// Manifolds at or above the cutoff miss part of their support.
pub fn is_truncation_affected(spec: &SiteSpec, l: usize) -> bool {
    l >= spec.fock_cutoff()
}

/// Population of the `l`-polariton manifold in a single-site state.
pub fn manifold_population<T: Real>(
    rho_site: &MixedState<T>,
    spec: &SiteSpec,
    l: usize,
) -> Result<T> {
    if rho_site.dim() != spec.dim() {
        return Err(Error::Dimension {
            expected: spec.dim(),
            got: rho_site.dim(),
        });
    }
    Ok(manifold_indices(spec, l)?
        .into_iter()
        .fold(T::zero(), |acc, i| acc + rho_site.population(i)))
}

/// Projector on manifold `l` (see [`manifold_indices`]).
pub fn manifold_projector<T: Real>(spec: &SiteSpec, l: usize) -> Result<LinearOperator<T>> {
    let mut m = DMatrix::zeros(spec.dim(), spec.dim());
    for i in manifold_indices(spec, l)? {
        m[(i, i)] = cone();
    }
    Ok(LinearOperator::from_parts(m, true))
}

/// Projector on the shelving levels of a site.
pub fn auxiliary_projector<T: Real>(spec: &SiteSpec) -> LinearOperator<T> {
    let diag: Vec<T> = (0..spec.dim())
        .map(|i| {
            let (level, _) = spec.label(i).expect("index in range");
            if level.is_auxiliary() {
                T::one()
            } else {
                T::zero()
            }
        })
        .collect();
    LinearOperator::from_real_diagonal(&diag)
}

/// Decoupled-chain spectrum of the `total`-polariton sector: every sum of
/// per-site resonant energies over labels with `Σ l_i = total`.
///
/// Exact for `κ = 0`, `δ = 0`, `ω_i = omega` and `total ≤ n_max`.
pub fn decoupled_sector_energies<T: Real>(
    n_sites: usize,
    total: usize,
    omega: T,
    g_b: T,
) -> Vec<T> {
    fn labels_for(l: usize) -> Vec<PolaritonLabel> {
        if l == 0 {
            vec![PolaritonLabel::vacuum()]
        } else {
            vec![
                PolaritonLabel {
                    l,
                    branch: Some(Branch::Plus),
                },
                PolaritonLabel {
                    l,
                    branch: Some(Branch::Minus),
                },
            ]
        }
    }
    fn recurse<T: Real>(
        site: usize,
        n_sites: usize,
        left: usize,
        acc: T,
        omega: T,
        g_b: T,
        out: &mut Vec<T>,
    ) {
        if site + 1 == n_sites {
            for lab in labels_for(left) {
                out.push(acc + polariton_energy(lab, omega, g_b));
            }
            return;
        }
        for l in 0..=left {
            for lab in labels_for(l) {
                recurse(
                    site + 1,
                    n_sites,
                    left - l,
                    acc + polariton_energy(lab, omega, g_b),
                    omega,
                    g_b,
                    out,
                );
            }
        }
    }
    let mut out = Vec::new();
    if n_sites > 0 {
        recurse(0, n_sites, total, T::zero(), omega, g_b, &mut out);
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{embed_site_operator, Expectation};
    use crate::model::build_ajc;
    use crate::scalar::{angular, max_abs_diff};

    fn khz(x: f64) -> f64 {
        angular(x * 1e3)
    }

    #[test]
    fn label_invariant() {
        assert!(PolaritonLabel::new(0, Some(Branch::Plus)).is_err());
        assert!(PolaritonLabel::new(2, None).is_err());
        assert_eq!(PolaritonLabel::plus(1).unwrap().to_string(), "1+");
    }

    #[test]
    fn polariton_state_examples() {
        let spec = SiteSpec::two_level(3).unwrap();
        let s0 = polariton_state::<f64>(PolaritonLabel::vacuum(), &spec).unwrap();
        assert_eq!(s0.probability(spec.index(Level::Up, 0).unwrap()), 1.0);

        let s1 = polariton_state::<f64>(PolaritonLabel::plus(1).unwrap(), &spec).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s1.amplitudes()[spec.index(Level::Up, 1).unwrap()].re - h).abs() < 1e-15);
        assert!((s1.amplitudes()[spec.index(Level::Down, 0).unwrap()].re - h).abs() < 1e-15);
        assert_eq!(s1.amplitudes().iter().filter(|z| z.norm() > 0.0).count(), 2);

        let s2 = polariton_state::<f64>(PolaritonLabel::minus(2).unwrap(), &spec).unwrap();
        assert!((s2.amplitudes()[spec.index(Level::Down, 1).unwrap()].re + h).abs() < 1e-15);

        assert!(polariton_state::<f64>(PolaritonLabel::plus(4).unwrap(), &spec).is_err());
    }

    // Every |l±⟩ is an eigenvector of the numerically built resonant H_aJC.
    #[test]
    fn polariton_states_diagonalize_ajc() {
        let n_max = 6;
        let spec = SiteSpec::two_level(n_max).unwrap();
        let (w, g) = (khz(1.0), khz(7.5));
        let h = build_ajc(w, 0.0, g, &spec).unwrap();
        let scale = h.max_abs();
        for l in 0..n_max {
            let labels = if l == 0 {
                vec![PolaritonLabel::vacuum()]
            } else {
                vec![
                    PolaritonLabel::plus(l).unwrap(),
                    PolaritonLabel::minus(l).unwrap(),
                ]
            };
            for lab in labels {
                let v = polariton_state::<f64>(lab, &spec).unwrap();
                let e = polariton_energy(lab, w, g);
                let hv = h.matrix() * v.amplitudes();
                let ev = v.amplitudes() * crate::scalar::cr(e);
                let res = max_abs_diff(&hv, &ev);
                assert!(res < 1e-10 * scale.max(1.0), "{lab}: residual {res}");
            }
        }
    }

    #[test]
    fn energy_examples() {
        assert_eq!(polariton_energy(PolaritonLabel::vacuum(), 3.0, 2.0), 0.0);
        let e = polariton_energy(PolaritonLabel::plus(1).unwrap(), khz(1.0), khz(7.5));
        assert!((e - khz(8.5)).abs() < 1e-9);
        let e = polariton_energy(PolaritonLabel::minus(2).unwrap(), 0.0, khz(7.5));
        assert!((e / angular(1e3) + 10.606_601_717_798_213).abs() < 1e-9);
    }

    #[test]
    fn pair_energy_examples() {
        let (w, g) = (0.37f64, 1.3f64);
        let p1 = PolaritonLabel::plus(1).unwrap();
        let p2 = PolaritonLabel::plus(2).unwrap();
        let vac = PolaritonLabel::vacuum();
        let a = pair_energy(p1, vac, w, g).unwrap();
        let b = pair_energy(vac, p1, w, g).unwrap();
        assert!((a - (w + g)).abs() < 1e-15 && a == b);
        assert!((pair_energy(p1, p1, 0.0, g).unwrap() - 2.0 * g).abs() < 1e-15);
        let d = pair_energy(p2, vac, w, g).unwrap() - pair_energy(p1, p1, w, g).unwrap();
        assert!((d + (2.0 - 2f64.sqrt()) * g).abs() < 1e-14);
        assert!(pair_energy(p1, PolaritonLabel::minus(1).unwrap(), w, g).is_err());
    }

    #[test]
    fn blockade_gap_examples() {
        let g = khz(7.5);
        let gap = blockade_gap(g, Branch::Plus);
        assert!((gap.abs() / angular(1e3) - 4.393_398_282_201_787).abs() < 1e-9);
        assert!(gap < 0.0 && blockade_gap(g, Branch::Minus) == -gap);
        assert_eq!(blockade_gap(0.0, Branch::Plus), 0.0);
        for (w, g) in [(0.3f64, 2.0f64), (-1.1, 0.4), (17.0, 5.5)] {
            for b in [Branch::Plus, Branch::Minus] {
                let two = PolaritonLabel::new(2, Some(b)).unwrap();
                let one = PolaritonLabel::new(1, Some(b)).unwrap();
                let via_pairs = pair_energy(two, PolaritonLabel::vacuum(), w, g).unwrap()
                    - 2.0 * polariton_energy(one, w, g);
                assert!((via_pairs - blockade_gap(g, b)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ladder_gap_examples() {
        let (w, g) = (0.2f64, 0.9f64);
        assert!((ladder_gap(1, Branch::Plus, w, g).unwrap() - (w + g)).abs() < 1e-15);
        let d2 = ladder_gap(2, Branch::Plus, 0.0, khz(7.5)).unwrap();
        assert!((d2 / angular(1e3) - 3.106_601_717_798_213).abs() < 1e-9);
        for l in 1..=8 {
            let a = ladder_gap(l, Branch::Plus, w, g).unwrap();
            let b = ladder_gap(l + 1, Branch::Plus, w, g).unwrap();
            assert!(a - b > 0.0);
        }
        assert!(ladder_gap(0, Branch::Plus, w, g).is_err());
    }

    #[test]
    fn polariton_number_examples() {
        let spec = SiteSpec::with_shelving(3).unwrap();
        let space = CompositeSpace::new(vec![spec.clone()]).unwrap();
        let n = polariton_number_operator::<f64>(&space, 0).unwrap();
        let at = |l, k| {
            PureState::<f64>::site_basis(&spec, l, k)
                .unwrap()
                .expectation(&n)
                .unwrap()
                .re
        };
        assert_eq!(at(Level::Up, 0), 0.0);
        assert_eq!(at(Level::Down, 0), 1.0);
        assert_eq!(at(Level::Down, 1), 2.0);
        assert_eq!(at(Level::E0, 2), 2.0);
        assert!(polariton_number_operator::<f64>(&space, 1).is_err());

        let two = CompositeSpace::uniform(SiteSpec::two_level(2).unwrap(), 2).unwrap();
        let nt = total_polariton_number::<f64>(&two);
        let psi = PureState::product(&two, &[(Level::Down, 0), (Level::Down, 0)]).unwrap();
        assert_eq!(psi.expectation(&nt).unwrap().re, 2.0);
        let sum = polariton_number_operator::<f64>(&two, 0)
            .unwrap()
            .add(&polariton_number_operator(&two, 1).unwrap())
            .unwrap();
        assert_eq!(sum.matrix(), nt.matrix());
    }

    #[test]
    fn manifold_population_examples() {
        let spec = SiteSpec::two_level(3).unwrap();
        let up0 = PureState::<f64>::site_basis(&spec, Level::Up, 0)
            .unwrap()
            .to_density();
        assert_eq!(manifold_population(&up0, &spec, 0).unwrap(), 1.0);
        let p1 = polariton_state::<f64>(PolaritonLabel::plus(1).unwrap(), &spec)
            .unwrap()
            .to_density();
        assert!((manifold_population(&p1, &spec, 1).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(manifold_population(&p1, &spec, 0).unwrap(), 0.0);
        let mut probs = vec![0.0; spec.dim()];
        probs[spec.index(Level::Up, 1).unwrap()] = 0.5;
        probs[spec.index(Level::Down, 0).unwrap()] = 0.5;
        let mix = MixedState::diagonal(&probs).unwrap();
        assert_eq!(manifold_population(&mix, &spec, 1).unwrap(), 1.0);
        assert!(manifold_population(&mix, &spec, 5).is_err());
    }

    #[test]
    fn manifold_projectors() {
        let spec = SiteSpec::full_detection(3).unwrap();
        let p0 = manifold_projector::<f64>(&spec, 0).unwrap();
        assert_eq!(p0.matrix().iter().filter(|z| z.re != 0.0).count(), 1);
        assert_eq!(
            p0.matrix()[(
                spec.index(Level::Up, 0).unwrap(),
                spec.index(Level::Up, 0).unwrap()
            )]
                .re,
            1.0
        );
        let mut total = auxiliary_projector::<f64>(&spec);
        for l in 0..=spec.fock_cutoff() + 1 {
            let p = manifold_projector::<f64>(&spec, l).unwrap();
            let tr: f64 = p.matrix().diagonal().iter().map(|z| z.re).sum();
            let expected = match l {
                0 => 1.0,
                l if l <= spec.fock_cutoff() => 2.0,
                _ => 1.0,
            };
            assert_eq!(tr, expected, "l={l}");
            let p2 = p.compose(&p).unwrap();
            assert!(max_abs_diff(p2.matrix(), p.matrix()) < 1e-12);
            total = total.add(&p).unwrap();
        }
        assert!(
            max_abs_diff(
                total.matrix(),
                LinearOperator::<f64>::identity(spec.dim()).matrix()
            ) < 1e-12
        );
        assert!(is_truncation_affected(&spec, 3) && !is_truncation_affected(&spec, 2));
        assert!(manifold_projector::<f64>(&spec, 5).is_err());
    }

    #[test]
    fn projector_expectation_equals_population() {
        let spec = SiteSpec::two_level(3).unwrap();
        let space = CompositeSpace::new(vec![spec.clone()]).unwrap();
        let d = spec.dim();
        let v = nalgebra::DVector::from_fn(d, |i, _| {
            crate::scalar::C::new(((i * 7 + 3) % 5) as f64 - 1.7, (i as f64 * 0.9).sin())
        });
        let rho = PureState::<f64>::normalized(v)
            .unwrap()
            .to_density()
            .mix(&MixedState::maximally_mixed(d), 0.25)
            .unwrap();
        for l in 0..=4 {
            let p = embed_site_operator(&space, 0, &manifold_projector(&spec, l).unwrap()).unwrap();
            let e = rho.expectation(&p).unwrap().re;
            let m = manifold_population(&rho, &spec, l).unwrap();
            assert!((e - m).abs() < 1e-14);
        }
    }

    #[test]
    fn decoupled_sector_counts() {
        assert_eq!(decoupled_sector_energies(2, 0, 0.0, 1.0f64).len(), 1);
        assert_eq!(decoupled_sector_energies(2, 1, 0.0, 1.0f64).len(), 4);
        assert_eq!(decoupled_sector_energies(2, 2, 0.0, 1.0f64).len(), 8);
        let sq2 = 2f64.sqrt();
        let e = decoupled_sector_energies(2, 2, 0.0, 1.0f64);
        let expected = [-2.0, -sq2, -sq2, 0.0, 0.0, sq2, sq2, 2.0];
        for (a, b) in e.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
