//! Lindblad master equation with an adaptive Dormand–Prince 5(4) stepper.
//!
//! `dρ/dt = Kρ + ρK† + Σ_k L_k ρ L_k†` with `K = -iH - ½ Σ_k L_k† L_k`.
//! `K` and the `L_k` are held in CSR form; `ρK†` is obtained as `(Kρ)†`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{LinearOperator, MixedState, SparseOperator};
use crate::scalar::{czero, modulus, Real, C};

use super::unitary::require_hermitian;

/// Integrator settings.
///
/// The defaults keep the global error of a closed-system run over about a
/// millisecond of reference dynamics below 1e-8 in fidelity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladOptions<T: Real> {
    pub rtol: T,
    pub atol: T,
    /// Upper bound on the step, seconds.
    pub h_max: Option<T>,
    pub max_steps: usize,
}

impl<T: Real> Default for LindbladOptions<T> {
    fn default() -> Self {
        let eps = T::default_epsilon() * T::lit(100.0);
        Self {
            rtol: T::lit(1e-9).max(eps),
            atol: T::lit(1e-11).max(eps),
            h_max: None,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

/// Right-hand side of the master equation.
#[derive(Debug, Clone)]
pub struct LindbladGenerator<T: Real> {
    k: SparseOperator<T>,
    jumps: Vec<SparseOperator<T>>,
    dim: usize,
}

impl<T: Real> LindbladGenerator<T> {
    pub fn new(h: &LinearOperator<T>, collapse_ops: &[LinearOperator<T>]) -> Result<Self> {
        require_hermitian(h)?;
        let dim = h.dim();
        let mut k = h.matrix().map(|z| C::new(z.im, -z.re));
        let half = T::lit(0.5);
        for l in collapse_ops {
            if l.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: l.dim(),
                });
            }
            let ldl = l.matrix().ad_mul(l.matrix());
            k -= ldl.map(|z| z * half);
        }
        Ok(Self {
            k: SparseOperator::from_matrix(&k),
            jumps: collapse_ops
                .iter()
                .map(SparseOperator::from_dense)
                .collect(),
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `out = L[ρ]`.
    pub fn apply(&self, rho: &DMatrix<C<T>>, out: &mut DMatrix<C<T>>, scratch: &mut Scratch<T>) {
        let n = self.dim;
        self.k.mul_dense_into(rho, &mut scratch.a);
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] = scratch.a[(i, j)] + scratch.a[(j, i)].conj();
            }
        }
        for l in &self.jumps {
            l.mul_dense_into(rho, &mut scratch.a);
            scratch.a.adjoint_to(&mut scratch.b);
            l.mul_dense_into(&scratch.b, &mut scratch.a);
            *out += &scratch.a;
        }
    }
}

/// Work buffers for [`LindbladGenerator::apply`].
#[derive(Debug, Clone)]
pub struct Scratch<T: Real> {
    a: DMatrix<C<T>>,
    b: DMatrix<C<T>>,
}

impl<T: Real> Scratch<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            a: DMatrix::zeros(dim, dim),
            b: DMatrix::zeros(dim, dim),
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// `out = y + h Σ c_j k_j`.
fn lincomb<T: Real>(
    out: &mut DMatrix<C<T>>,
    y: &DMatrix<C<T>>,
    h: T,
    terms: &[(f64, &DMatrix<C<T>>)],
) {
    let coeffs: Vec<(T, &[C<T>])> = terms
        .iter()
        .map(|(c, k)| (T::lit(*c) * h, k.as_slice()))
        .collect();
    for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
        let mut acc = y.as_slice()[i];
        for (c, k) in &coeffs {
            acc += k[i] * *c;
        }
        *o = acc;
    }
}

struct Stepper<T: Real> {
    gen: LindbladGenerator<T>,
    opts: LindbladOptions<T>,
    scratch: Scratch<T>,
    k: [DMatrix<C<T>>; 7],
    tmp: DMatrix<C<T>>,
    y_new: DMatrix<C<T>>,
    stats: IntegrationStats,
}

impl<T: Real> Stepper<T> {
    /// `k[into] = f(y + h Σ c_j k_j)`.
    fn stage(&mut self, y: &DMatrix<C<T>>, h: T, coeffs: &[(f64, usize)], into: usize) {
        {
            let terms: Vec<(f64, &DMatrix<C<T>>)> =
                coeffs.iter().map(|&(c, j)| (c, &self.k[j])).collect();
            lincomb(&mut self.tmp, y, h, &terms);
        }
        self.gen
            .apply(&self.tmp, &mut self.k[into], &mut self.scratch);
        self.stats.rhs_evaluations += 1;
    }

    fn eval_initial(&mut self, y: &DMatrix<C<T>>) {
        self.gen.apply(y, &mut self.k[0], &mut self.scratch);
        self.stats.rhs_evaluations += 1;
    }

    fn weighted_norm(&self, m: &DMatrix<C<T>>, y: &DMatrix<C<T>>) -> T {
        m.as_slice()
            .iter()
            .zip(y.as_slice())
            .fold(T::zero(), |acc, (e, v)| {
                acc.max(modulus(*e) / (self.opts.atol + self.opts.rtol * modulus(*v)))
            })
    }

    /// Attempts one step of size `h` from `y`; leaves the result in `y_new`
    /// and returns the scaled error. `k[0]` must hold `f(y)`.
    fn attempt(&mut self, y: &DMatrix<C<T>>, h: T) -> T {
        self.stage(y, h, &[(A21, 0)], 1);
        self.stage(y, h, &[(A31, 0), (A32, 1)], 2);
        self.stage(y, h, &[(A41, 0), (A42, 1), (A43, 2)], 3);
        self.stage(y, h, &[(A51, 0), (A52, 1), (A53, 2), (A54, 3)], 4);
        self.stage(y, h, &[(A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4)], 5);
        {
            let k = &self.k;
            lincomb(
                &mut self.y_new,
                y,
                h,
                &[
                    (A71, &k[0]),
                    (A73, &k[2]),
                    (A74, &k[3]),
                    (A75, &k[4]),
                    (A76, &k[5]),
                ],
            );
        }
        self.gen
            .apply(&self.y_new, &mut self.k[6], &mut self.scratch);
        self.stats.rhs_evaluations += 1;

        let e: [(T, &[C<T>]); 6] = [
            (T::lit(E1) * h, self.k[0].as_slice()),
            (T::lit(E3) * h, self.k[2].as_slice()),
            (T::lit(E4) * h, self.k[3].as_slice()),
            (T::lit(E5) * h, self.k[4].as_slice()),
            (T::lit(E6) * h, self.k[5].as_slice()),
            (T::lit(E7) * h, self.k[6].as_slice()),
        ];
        let mut worst = T::zero();
        for (i, (a, b)) in y.as_slice().iter().zip(self.y_new.as_slice()).enumerate() {
            let mut err = C::new(T::zero(), T::zero());
            for (c, k) in &e {
                err += k[i] * *c;
            }
            let scale = self.opts.atol + self.opts.rtol * modulus(*a).max(modulus(*b));
            worst = worst.max(modulus(err) / scale);
        }
        worst
    }
}

/// Integrates from `grid[0]` (where the state is `rho0`) through every grid
/// point and returns the state at each of them.
pub fn evolve_lindblad<T: Real>(
    h: &LinearOperator<T>,
    collapse_ops: &[LinearOperator<T>],
    rho0: &MixedState<T>,
    grid: &[T],
) -> Result<Vec<MixedState<T>>> {
    Ok(evolve_lindblad_with(h, collapse_ops, rho0, grid, &LindbladOptions::default())?.0)
}

pub fn evolve_lindblad_with<T: Real>(
    h: &LinearOperator<T>,
    collapse_ops: &[LinearOperator<T>],
    rho0: &MixedState<T>,
    grid: &[T],
    opts: &LindbladOptions<T>,
) -> Result<(Vec<MixedState<T>>, IntegrationStats)> {
    let gen = LindbladGenerator::new(h, collapse_ops)?;
    if rho0.dim() != gen.dim() {
        return Err(Error::Dimension {
            expected: gen.dim(),
            got: rho0.dim(),
        });
    }
    super::check_grid(grid)?;
    let n = gen.dim();
    let mut st = Stepper {
        gen,
        opts: *opts,
        scratch: Scratch::new(n),
        k: std::array::from_fn(|_| DMatrix::zeros(n, n)),
        tmp: DMatrix::zeros(n, n),
        y_new: DMatrix::zeros(n, n),
        stats: IntegrationStats::default(),
    };

    let mut y = rho0.matrix().clone();
    let mut out = Vec::with_capacity(grid.len());
    out.push(MixedState::from_parts(y.clone()));
    let Some(&t0) = grid.first() else {
        return Ok((out, st.stats));
    };
    let mut t = t0;
    st.eval_initial(&y);

    // Initial step from the ratio of state to derivative scale.
    let d0 = st.weighted_norm(&y, &y);
    let d1 = st.weighted_norm(&st.k[0], &y);
    let mut h_prop = if d1 > T::lit(1e-5) && d0 > T::lit(1e-5) {
        T::lit(0.01) * d0 / d1
    } else {
        T::lit(1e-6)
    };
    if let Some(hm) = opts.h_max {
        h_prop = h_prop.min(hm);
    }

    let safety = T::lit(0.8);
    let fac_min = T::lit(0.2);
    let fac_max = T::lit(3.0);
    let fifth = T::lit(0.2);
    let tiny = T::default_epsilon() * T::lit(4.0);

    for &target in &grid[1..] {
        while t < target {
            let remaining = target - t;
            let clamped = h_prop >= remaining;
            let h = if clamped { remaining } else { h_prop };
            if h <= tiny * t.abs() {
                return Err(Error::Integration {
                    time: t.to_f64_lossy(),
                    reason: format!("step size underflow (h = {:e})", h.to_f64_lossy()),
                });
            }
            if st.stats.accepted + st.stats.rejected >= opts.max_steps {
                return Err(Error::Integration {
                    time: t.to_f64_lossy(),
                    reason: format!("step budget of {} exhausted", opts.max_steps),
                });
            }
            let err = st.attempt(&y, h);
            if err.is_finite() && err <= T::one() {
                st.stats.accepted += 1;
                t = if clamped { target } else { t + h };
                std::mem::swap(&mut y, &mut st.y_new);
                st.k.swap(0, 6);
                let fac = if err > T::zero() {
                    (safety * err.powf(-fifth)).min(fac_max).max(fac_min)
                } else {
                    fac_max
                };
                // A clamped step says nothing about the natural step size.
                let h_next = if clamped {
                    h_prop.max(h * fac)
                } else {
                    h * fac
                };
                h_prop = match opts.h_max {
                    Some(hm) => h_next.min(hm),
                    None => h_next,
                };
            } else {
                st.stats.rejected += 1;
                let fac = if err.is_finite() {
                    (safety * err.powf(-fifth)).min(T::one()).max(fac_min)
                } else {
                    fac_min
                };
                h_prop = h * fac;
            }
        }
        if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Integration {
                time: t.to_f64_lossy(),
                reason: "non-finite state".into(),
            });
        }
        out.push(MixedState::from_parts(y.clone()));
    }
    Ok((out, st.stats))
}

/// Master-equation evolution split over invariant blocks of the basis.
///
/// `blocks` must partition the basis into subspaces that `h` and every
/// collapse operator map into themselves. Blocks linked by coherence in
/// `rho0` are merged, and each populated group then evolves on its own,
/// which is far cheaper than the full problem when the groups are small.
pub fn evolve_lindblad_blocks<T: Real>(
    h: &LinearOperator<T>,
    collapse_ops: &[LinearOperator<T>],
    rho0: &MixedState<T>,
    grid: &[T],
    blocks: &[Vec<usize>],
    opts: &LindbladOptions<T>,
) -> Result<Vec<MixedState<T>>> {
    let n = h.dim();
    if rho0.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            got: rho0.dim(),
        });
    }
    super::check_grid(grid)?;
    let mut owner = vec![usize::MAX; n];
    for (b, idx) in blocks.iter().enumerate() {
        for &i in idx {
            if i >= n || owner[i] != usize::MAX {
                return Err(Error::Domain(format!(
                    "block index {i} is out of range or repeated"
                )));
            }
            owner[i] = b;
        }
    }
    if owner.contains(&usize::MAX) {
        return Err(Error::Domain("blocks do not cover the basis".into()));
    }
    let couples = |m: &DMatrix<C<T>>| {
        (0..n).any(|i| (0..n).any(|j| owner[i] != owner[j] && m[(i, j)] != czero()))
    };
    if std::iter::once(h)
        .chain(collapse_ops)
        .any(|op| couples(op.matrix()))
    {
        return Err(Error::Domain("an operator couples different blocks".into()));
    }

    let mut group: Vec<usize> = (0..blocks.len()).collect();
    fn root(g: &mut [usize], mut b: usize) -> usize {
        while g[b] != b {
            g[b] = g[g[b]];
            b = g[b];
        }
        b
    }
    for i in 0..n {
        for j in 0..n {
            if owner[i] != owner[j] && rho0.matrix()[(i, j)] != czero() {
                let (a, b) = (root(&mut group, owner[i]), root(&mut group, owner[j]));
                group[a] = b;
            }
        }
    }
    let mut merged: Vec<Vec<usize>> = vec![Vec::new(); blocks.len()];
    for (b, idx) in blocks.iter().enumerate() {
        let r = root(&mut group, b);
        merged[r].extend_from_slice(idx);
    }

    let mut out = vec![DMatrix::<C<T>>::zeros(n, n); grid.len()];
    for idx in merged.iter().filter(|idx| !idx.is_empty()) {
        let weight: T = idx
            .iter()
            .map(|&i| rho0.matrix()[(i, i)].re)
            .fold(T::zero(), |a, b| a + b);
        if !(weight > T::zero()) {
            continue;
        }
        let m = idx.len();
        let sub = DMatrix::from_fn(m, m, |i, j| {
            rho0.matrix()[(idx[i], idx[j])] / C::new(weight, T::zero())
        });
        let ops: Vec<_> = collapse_ops.iter().map(|l| l.submatrix(idx)).collect();
        let (states, _) = evolve_lindblad_with(
            &h.submatrix(idx),
            &ops,
            &MixedState::from_parts(sub),
            grid,
            opts,
        )?;
        for (full, part) in out.iter_mut().zip(&states) {
            for i in 0..m {
                for j in 0..m {
                    full[(idx[i], idx[j])] = part.matrix()[(i, j)] * C::new(weight, T::zero());
                }
            }
        }
    }
    Ok(out.into_iter().map(MixedState::from_parts).collect())
}
