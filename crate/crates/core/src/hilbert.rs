//! Composite Hilbert space of an ion chain and the dense linear-algebra
//! substrate built on it.
//!
//! Each ion contributes `levels ⊗ Fock(0..=n_max)`. Basis ordering is
//! site-major (site 0 is the most significant digit); within a site the
//! index is `level_index * (n_max + 1) + n`. CSV columns, fixtures and the
//! sparse kernels all rely on this ordering.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::{cone, cr, czero, modulus, Real, C};

/// Default tolerance for Hermiticity claims (max element deviation).
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Default tolerance on unit trace / unit norm.
pub const NORM_TOL: f64 = 1e-9;
/// Smallest eigenvalue accepted for a density matrix.
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Internal electronic level of a ⁴⁰Ca⁺ ion.
///
/// `Down` is S1/2(mj=-1/2); `Up` is D5/2(mj=-1/2); `E0..E3` are the
/// D5/2 sublevels mj = -5/2, -3/2, +1/2, +3/2 used for shelving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Down,
    Up,
    E0,
    E1,
    E2,
    E3,
}

impl Level {
    pub const ALL: [Level; 6] = [
        Level::Down,
        Level::Up,
        Level::E0,
        Level::E1,
        Level::E2,
        Level::E3,
    ];

    /// Only S1/2 scatters detection light.
    pub fn is_bright(self) -> bool {
        self == Level::Down
    }

    /// Shelving levels sit outside the polariton algebra.
    pub fn is_auxiliary(self) -> bool {
        !matches!(self, Level::Down | Level::Up)
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::Down => "down",
            Level::Up => "up",
            Level::E0 => "e0",
            Level::E1 => "e1",
            Level::E2 => "e2",
            Level::E3 => "e3",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Level::ALL
            .iter()
            .copied()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown level label `{s}`")))
    }
}

/// Internal levels and phonon cutoff of one ion.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SiteSpec {
    levels: Vec<Level>,
    fock_cutoff: usize,
}

impl SiteSpec {
    pub fn new(levels: Vec<Level>, fock_cutoff: usize) -> Result<Self> {
        for required in [Level::Down, Level::Up] {
            let count = levels.iter().filter(|&&l| l == required).count();
            if count != 1 {
                return Err(Error::Domain(format!(
                    "level `{required}` must appear exactly once (found {count})"
                )));
            }
        }
        for (i, l) in levels.iter().enumerate() {
            if levels[..i].contains(l) {
                return Err(Error::Domain(format!("duplicate level label `{l}`")));
            }
        }
        if fock_cutoff < 1 {
            return Err(Error::Domain("fock_cutoff must be at least 1".into()));
        }
        Ok(Self {
            levels,
            fock_cutoff,
        })
    }

    /// `{down, up}` with the given cutoff.
    pub fn two_level(fock_cutoff: usize) -> Result<Self> {
        Self::new(vec![Level::Down, Level::Up], fock_cutoff)
    }

    /// `{down, up, e0}`: enough for the three single-polariton detection sequences.
    pub fn with_shelving(fock_cutoff: usize) -> Result<Self> {
        Self::new(vec![Level::Down, Level::Up, Level::E0], fock_cutoff)
    }

    /// `{down, up, e0, e1, e2, e3}`: the complete 2-polariton mapping.
    pub fn full_detection(fock_cutoff: usize) -> Result<Self> {
        Self::new(Level::ALL.to_vec(), fock_cutoff)
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_cutoff + 1
    }

    pub fn dim(&self) -> usize {
        self.levels.len() * self.fock_dim()
    }

    pub fn has_level(&self, level: Level) -> bool {
        self.levels.contains(&level)
    }

    pub fn level_index(&self, level: Level) -> Option<usize> {
        self.levels.iter().position(|&l| l == level)
    }

    /// Index of `|level, n⟩` within this site.
    pub fn index(&self, level: Level, n: usize) -> Result<usize> {
        let li = self
            .level_index(level)
            .ok_or_else(|| Error::Domain(format!("level `{level}` not present in site levels")))?;
        if n > self.fock_cutoff {
            return Err(Error::Domain(format!(
                "phonon number {n} exceeds fock cutoff {}",
                self.fock_cutoff
            )));
        }
        Ok(li * self.fock_dim() + n)
    }

    /// Inverse of [`SiteSpec::index`].
    pub fn label(&self, index: usize) -> Result<(Level, usize)> {
        if index >= self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: index,
            });
        }
        Ok((
            self.levels[index / self.fock_dim()],
            index % self.fock_dim(),
        ))
    }

    /// Same levels and cutoff check used by level-dependent builders.
    pub(crate) fn require(&self, level: Level) -> Result<usize> {
        self.level_index(level).ok_or_else(|| {
            Error::Domain(format!(
                "site has no `{level}` level (levels: {:?})",
                self.levels
            ))
        })
    }
}

/// Tensor product of the per-site spaces of an `N`-ion chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompositeSpace {
    sites: Vec<SiteSpec>,
    strides: Vec<usize>,
    dim: usize,
}

impl CompositeSpace {
    pub fn new(sites: Vec<SiteSpec>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Domain("a chain needs at least one site".into()));
        }
        let mut strides = vec![1; sites.len()];
        for k in (0..sites.len() - 1).rev() {
            strides[k] = strides[k + 1] * sites[k + 1].dim();
        }
        let dim = strides[0] * sites[0].dim();
        Ok(Self {
            sites,
            strides,
            dim,
        })
    }

    /// `n_sites` copies of the same site.
    pub fn uniform(spec: SiteSpec, n_sites: usize) -> Result<Self> {
        Self::new(vec![spec; n_sites])
    }

    pub fn sites(&self) -> &[SiteSpec] {
        &self.sites
    }

    pub fn site(&self, site: usize) -> Result<&SiteSpec> {
        self.sites.get(site).ok_or(Error::SiteIndex {
            site,
            n_sites: self.sites.len(),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stride(&self, site: usize) -> usize {
        self.strides[site]
    }

    /// Digit of `site` in a composite index.
    #[inline]
    pub fn site_digit(&self, index: usize, site: usize) -> usize {
        (index / self.strides[site]) % self.sites[site].dim()
    }

    /// Composite index of a product basis state given per-site `(level, n)`.
    pub fn basis_index(&self, assignment: &[(Level, usize)]) -> Result<usize> {
        if assignment.len() != self.sites.len() {
            return Err(Error::Dimension {
                expected: self.sites.len(),
                got: assignment.len(),
            });
        }
        let mut index = 0;
        for (k, (spec, &(level, n))) in self.sites.iter().zip(assignment).enumerate() {
            let local = spec.index(level, n).map_err(|e| Error::Site {
                site: k,
                what: e.to_string(),
            })?;
            index += local * self.strides[k];
        }
        Ok(index)
    }

    /// Inverse of [`CompositeSpace::basis_index`].
    pub fn basis_label(&self, index: usize) -> Result<Vec<(Level, usize)>> {
        if index >= self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: index,
            });
        }
        (0..self.sites.len())
            .map(|k| self.sites[k].label(self.site_digit(index, k)))
            .collect()
    }

    /// Per-site `(level, n)` for every basis index, in order.
    pub fn labels(&self) -> Vec<Vec<(Level, usize)>> {
        (0..self.dim)
            .map(|i| self.basis_label(i).expect("index in range"))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Operators

/// Dense complex operator with an optional Hermiticity claim.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator<T: Real> {
    matrix: DMatrix<C<T>>,
    hermitian: bool,
}

impl<T: Real> LinearOperator<T> {
    /// Wraps a square matrix, checking the Hermiticity claim if one is made.
    pub fn new(matrix: DMatrix<C<T>>, hermitian: bool) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let op = Self { matrix, hermitian };
        if hermitian {
            let dev = op.hermitian_deviation();
            if dev > HERMITIAN_TOL * op.max_abs().max(1.0) {
                return Err(Error::NotHermitian { deviation: dev });
            }
        }
        Ok(op)
    }

    pub(crate) fn from_parts(matrix: DMatrix<C<T>>, hermitian: bool) -> Self {
        Self { matrix, hermitian }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_parts(DMatrix::identity(dim, dim), true)
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_parts(DMatrix::zeros(dim, dim), true)
    }

    /// Real diagonal operator.
    pub fn from_real_diagonal(diag: &[T]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| cr(x)));
        Self::from_parts(DMatrix::from_diagonal(&d), true)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C<T>> {
        self.matrix
    }

    pub fn is_hermitian_claimed(&self) -> bool {
        self.hermitian
    }

    pub fn adjoint(&self) -> Self {
        Self::from_parts(self.matrix.adjoint(), self.hermitian)
    }

    /// Largest `|A - A†|` element.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim();
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = modulus(self.matrix[(i, j)] - self.matrix[(j, i)].conj());
                dev = dev.max(d.to_f64_lossy());
            }
        }
        dev
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix
            .iter()
            .fold(0.0f64, |m, z| m.max(modulus(*z).to_f64_lossy()))
    }

    pub fn frobenius_norm(&self) -> T {
        self.matrix
            .iter()
            .fold(T::zero(), |acc, z| acc + z.norm_sqr())
            .sqrt()
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim())?;
        Ok(Self::from_parts(&self.matrix * &other.matrix, false))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim())?;
        Ok(Self::from_parts(
            &self.matrix + &other.matrix,
            self.hermitian && other.hermitian,
        ))
    }

    pub fn scale(&self, factor: T) -> Self {
        Self::from_parts(self.matrix.map(|z| z * factor), self.hermitian)
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim())?;
        // Hamiltonians and conserved quantities are very sparse.
        let ab = SparseOperator::from_matrix(&self.matrix).mul_dense(&other.matrix);
        let ba = SparseOperator::from_matrix(&other.matrix).mul_dense(&self.matrix);
        Ok(Self::from_parts(ab - ba, false))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        Self::from_parts(
            self.matrix.kronecker(&other.matrix),
            self.hermitian && other.hermitian,
        )
    }

    /// Restriction to the given basis indices.
    pub fn submatrix(&self, indices: &[usize]) -> Self {
        let m = indices.len();
        Self::from_parts(
            DMatrix::from_fn(m, m, |i, j| self.matrix[(indices[i], indices[j])]),
            self.hermitian,
        )
    }

    /// Real eigenvalues in ascending order (requires a Hermitian operator).
    pub fn eigenvalues(&self) -> Result<Vec<T>> {
        let dev = self.hermitian_deviation();
        if dev > HERMITIAN_TOL * self.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let eig = SymmetricEigen::new(self.matrix.clone());
        let mut vals: Vec<T> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalue"));
        Ok(vals)
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: dim,
            });
        }
        Ok(())
    }
}

/// Compressed-sparse-row copy of a [`LinearOperator`].
///
/// Used inside the master-equation right-hand side; every product agrees
/// with the dense route to rounding.
#[derive(Debug, Clone)]
pub struct SparseOperator<T: Real> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C<T>>,
}

impl<T: Real> SparseOperator<T> {
    pub fn from_dense(op: &LinearOperator<T>) -> Self {
        Self::from_matrix(op.matrix())
    }

    pub fn from_matrix(m: &DMatrix<C<T>>) -> Self {
        let dim = m.nrows();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..dim {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                if z != czero() {
                    cols.push(j);
                    vals.push(z);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn to_dense(&self) -> DMatrix<C<T>> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k])] = self.vals[k];
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &DVector<C<T>>) -> DVector<C<T>> {
        let mut out = DVector::zeros(self.dim);
        for i in 0..self.dim {
            let mut acc = czero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            out[i] = acc;
        }
        out
    }

    /// `out = self · rhs` for a dense right-hand side (column-major).
    pub fn mul_dense_into(&self, rhs: &DMatrix<C<T>>, out: &mut DMatrix<C<T>>) {
        let ncols = rhs.ncols();
        out.fill(czero());
        let rhs_s = rhs.as_slice();
        let out_s = out.as_mut_slice();
        let n = self.dim;
        for c in 0..ncols {
            let col_in = &rhs_s[c * n..(c + 1) * n];
            let col_out = &mut out_s[c * n..(c + 1) * n];
            for i in 0..n {
                let mut acc = czero();
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.vals[k] * col_in[self.cols[k]];
                }
                col_out[i] = acc;
            }
        }
    }

    pub fn mul_dense(&self, rhs: &DMatrix<C<T>>) -> DMatrix<C<T>> {
        let mut out = DMatrix::zeros(self.dim, rhs.ncols());
        self.mul_dense_into(rhs, &mut out);
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_matrix(&self.to_dense().adjoint())
    }
}

// ---------------------------------------------------------------------------
// Per-site operators

/// Phonon annihilation operator `a` on one site (truncated, not renormalized).
pub fn annihilation<T: Real>(spec: &SiteSpec) -> LinearOperator<T> {
    let fd = spec.fock_dim();
    let mut m = DMatrix::zeros(spec.dim(), spec.dim());
    for li in 0..spec.levels().len() {
        for n in 1..fd {
            m[(li * fd + n - 1, li * fd + n)] = cr(T::from_usize_lossy(n).sqrt());
        }
    }
    LinearOperator::from_parts(m, false)
}

pub fn creation<T: Real>(spec: &SiteSpec) -> LinearOperator<T> {
    annihilation(spec).adjoint()
}

/// `a†a` on one site.
pub fn number<T: Real>(spec: &SiteSpec) -> LinearOperator<T> {
    let diag: Vec<T> = (0..spec.dim())
        .map(|i| T::from_usize_lossy(i % spec.fock_dim()))
        .collect();
    LinearOperator::from_real_diagonal(&diag)
}

/// `|to⟩⟨from| ⊗ 1_phonon` on one site.
pub fn transition<T: Real>(spec: &SiteSpec, to: Level, from: Level) -> Result<LinearOperator<T>> {
    let ti = spec.require(to)?;
    let fi = spec.require(from)?;
    let fd = spec.fock_dim();
    let mut m = DMatrix::zeros(spec.dim(), spec.dim());
    for n in 0..fd {
        m[(ti * fd + n, fi * fd + n)] = cone();
    }
    Ok(LinearOperator::from_parts(m, to == from))
}

/// Projector on an internal level, `|l⟩⟨l| ⊗ 1_phonon`.
pub fn level_projector<T: Real>(spec: &SiteSpec, level: Level) -> Result<LinearOperator<T>> {
    transition(spec, level, level)
}

/// Projector on a single site basis state `|level, n⟩`.
pub fn basis_projector<T: Real>(
    spec: &SiteSpec,
    level: Level,
    n: usize,
) -> Result<LinearOperator<T>> {
    let i = spec.index(level, n)?;
    let mut m = DMatrix::zeros(spec.dim(), spec.dim());
    m[(i, i)] = cone();
    Ok(LinearOperator::from_parts(m, true))
}

/// `1 ⊗ … ⊗ op ⊗ … ⊗ 1` with `op` acting on `site`.
pub fn embed_site_operator<T: Real>(
    space: &CompositeSpace,
    site: usize,
    op: &LinearOperator<T>,
) -> Result<LinearOperator<T>> {
    let spec = space.site(site)?;
    if op.dim() != spec.dim() {
        return Err(Error::Dimension {
            expected: spec.dim(),
            got: op.dim(),
        });
    }
    let before: usize = space.sites()[..site].iter().map(SiteSpec::dim).product();
    let after = space.stride(site);
    let mut out = op.clone();
    if before > 1 {
        out = LinearOperator::identity(before).kron(&out);
    }
    if after > 1 {
        out = out.kron(&LinearOperator::identity(after));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// States

/// Normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState<T: Real> {
    amplitudes: DVector<C<T>>,
}

impl<T: Real> PureState<T> {
    /// Accepts a vector that is already normalized (within 1e-9).
    pub fn new(amplitudes: DVector<C<T>>) -> Result<Self> {
        let norm = amplitudes.norm().to_f64_lossy();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Domain(format!("state norm {norm} is not 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(amplitudes: DVector<C<T>>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == T::zero() {
            return Err(Error::Domain("cannot normalize the zero vector".into()));
        }
        Ok(Self {
            amplitudes: amplitudes.map(|z| z / norm),
        })
    }

    pub(crate) fn from_parts(amplitudes: DVector<C<T>>) -> Self {
        Self { amplitudes }
    }

    /// Basis vector `e_index`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::Dimension {
                expected: dim,
                got: index,
            });
        }
        let mut v = DVector::zeros(dim);
        v[index] = cone();
        Ok(Self { amplitudes: v })
    }

    /// Product basis state `|l₁,n₁⟩ ⊗ … ⊗ |l_N,n_N⟩`.
    pub fn product(space: &CompositeSpace, assignment: &[(Level, usize)]) -> Result<Self> {
        Self::basis(space.dim(), space.basis_index(assignment)?)
    }

    /// Single-site basis state.
    pub fn site_basis(spec: &SiteSpec, level: Level, n: usize) -> Result<Self> {
        Self::basis(spec.dim(), spec.index(level, n)?)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C<T>> {
        &self.amplitudes
    }

    pub fn norm(&self) -> T {
        self.amplitudes.norm()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C<T> {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &Self) -> T {
        self.inner(other).norm_sqr()
    }

    pub fn probability(&self, index: usize) -> T {
        self.amplitudes[index].norm_sqr()
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self::from_parts(self.amplitudes.kronecker(&other.amplitudes))
    }

    pub fn to_density(&self) -> MixedState<T> {
        MixedState::from_parts(&self.amplitudes * self.amplitudes.adjoint())
    }

    pub fn apply(&self, op: &LinearOperator<T>) -> Result<Self> {
        if op.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: op.dim(),
            });
        }
        Ok(Self::from_parts(op.matrix() * &self.amplitudes))
    }

    pub fn scale_phase(&self, phase: C<T>) -> Self {
        Self::from_parts(self.amplitudes.map(|z| z * phase))
    }
}

/// Density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedState<T: Real> {
    matrix: DMatrix<C<T>>,
}

impl<T: Real> MixedState<T> {
    /// Validates Hermiticity, unit trace and numerical positivity.
    pub fn new(matrix: DMatrix<C<T>>) -> Result<Self> {
        let s = Self::from_parts(matrix);
        s.validate()?;
        Ok(s)
    }

    pub(crate) fn from_parts(matrix: DMatrix<C<T>>) -> Self {
        Self { matrix }
    }

    /// Diagonal density matrix from a probability vector.
    pub fn diagonal(probabilities: &[T]) -> Result<Self> {
        let d = DVector::from_iterator(probabilities.len(), probabilities.iter().map(|&p| cr(p)));
        Self::new(DMatrix::from_diagonal(&d))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let p = T::one() / T::from_usize_lossy(dim);
        Self::from_parts(DMatrix::from_diagonal_element(dim, dim, cr(p)))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if !self.matrix.is_square() {
            return Err(Error::Dimension {
                expected: n,
                got: self.matrix.ncols(),
            });
        }
        let dev = self.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let tr = self.trace().to_f64_lossy();
        if (tr - 1.0).abs() > NORM_TOL {
            return Err(Error::Domain(format!("density matrix trace {tr} is not 1")));
        }
        let min = self.min_eigenvalue().to_f64_lossy();
        if min < -POSITIVITY_TOL {
            return Err(Error::Domain(format!(
                "density matrix has negative eigenvalue {min:e}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C<T>> {
        self.matrix
    }

    pub fn trace(&self) -> T {
        self.matrix
            .diagonal()
            .iter()
            .fold(T::zero(), |a, z| a + z.re)
    }

    pub fn population(&self, index: usize) -> T {
        self.matrix[(index, index)].re
    }

    pub fn populations(&self) -> Vec<T> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn purity(&self) -> T {
        self.matrix.iter().fold(T::zero(), |a, z| a + z.norm_sqr())
    }

    pub fn hermitian_deviation(&self) -> f64 {
        LinearOperator::from_parts(self.matrix.clone(), false).hermitian_deviation()
    }

    pub fn min_eigenvalue(&self) -> T {
        let herm = (&self.matrix + self.matrix.adjoint()).map(|z| z * T::lit(0.5));
        SymmetricEigen::new(herm).eigenvalues.iter().copied().fold(
            T::max_value().unwrap_or(T::one()),
            |m, x| if x < m { x } else { m },
        )
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with(&self, psi: &PureState<T>) -> T {
        psi.amplitudes().dotc(&(&self.matrix * psi.amplitudes())).re
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self::from_parts(self.matrix.kronecker(&other.matrix))
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &LinearOperator<T>) -> Result<Self> {
        if u.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: u.dim(),
            });
        }
        Ok(Self::from_parts(
            u.matrix() * &self.matrix * u.matrix().adjoint(),
        ))
    }

    /// Convex combination `(1-p)·self + p·other`.
    pub fn mix(&self, other: &Self, p: T) -> Result<Self> {
        if other.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self::from_parts(
            self.matrix.map(|z| z * (T::one() - p)) + other.matrix.map(|z| z * p),
        ))
    }
}

/// Either kind of state; the sequence engine promotes pure states to
/// density matrices when noise is switched on.
#[derive(Debug, Clone, PartialEq)]
pub enum State<T: Real> {
    Pure(PureState<T>),
    Mixed(MixedState<T>),
}

impl<T: Real> State<T> {
    pub fn dim(&self) -> usize {
        match self {
            State::Pure(p) => p.dim(),
            State::Mixed(m) => m.dim(),
        }
    }

    pub fn to_mixed(&self) -> MixedState<T> {
        match self {
            State::Pure(p) => p.to_density(),
            State::Mixed(m) => m.clone(),
        }
    }

    pub fn populations(&self) -> Vec<T> {
        match self {
            State::Pure(p) => (0..p.dim()).map(|i| p.probability(i)).collect(),
            State::Mixed(m) => m.populations(),
        }
    }

    pub fn trace(&self) -> T {
        match self {
            State::Pure(p) => p.norm() * p.norm(),
            State::Mixed(m) => m.trace(),
        }
    }
}

impl<T: Real> From<PureState<T>> for State<T> {
    fn from(p: PureState<T>) -> Self {
        State::Pure(p)
    }
}

impl<T: Real> From<MixedState<T>> for State<T> {
    fn from(m: MixedState<T>) -> Self {
        State::Mixed(m)
    }
}

/// Something an operator's expectation value can be taken in.
pub trait Expectation<T: Real> {
    fn expectation(&self, op: &LinearOperator<T>) -> Result<C<T>>;
}

impl<T: Real> Expectation<T> for PureState<T> {
    fn expectation(&self, op: &LinearOperator<T>) -> Result<C<T>> {
        if op.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: op.dim(),
                got: self.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&(op.matrix() * &self.amplitudes)))
    }
}

impl<T: Real> Expectation<T> for MixedState<T> {
    fn expectation(&self, op: &LinearOperator<T>) -> Result<C<T>> {
        if op.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: op.dim(),
                got: self.dim(),
            });
        }
        // tr(Aρ) = Σ_ij A_ij ρ_ji
        let n = self.dim();
        let mut acc = czero();
        for i in 0..n {
            for j in 0..n {
                acc += op.matrix()[(i, j)] * self.matrix[(j, i)];
            }
        }
        Ok(acc)
    }
}

impl<T: Real> Expectation<T> for State<T> {
    fn expectation(&self, op: &LinearOperator<T>) -> Result<C<T>> {
        match self {
            State::Pure(p) => p.expectation(op),
            State::Mixed(m) => m.expectation(op),
        }
    }
}

/// `⟨ψ|A|ψ⟩` or `tr(Aρ)`.
pub fn expectation<T: Real, S: Expectation<T>>(op: &LinearOperator<T>, state: &S) -> Result<C<T>> {
    state.expectation(op)
}

/// Reduced density matrix of one site.
pub fn partial_trace<T: Real>(
    rho: &MixedState<T>,
    space: &CompositeSpace,
    keep_site: usize,
) -> Result<MixedState<T>> {
    let spec = space.site(keep_site)?;
    if rho.dim() != space.dim() {
        return Err(Error::Dimension {
            expected: space.dim(),
            got: rho.dim(),
        });
    }
    let d = spec.dim();
    let stride = space.stride(keep_site);
    let mut out = DMatrix::zeros(d, d);
    for base in 0..space.dim() {
        if space.site_digit(base, keep_site) != 0 {
            continue;
        }
        for a in 0..d {
            let ia = base + a * stride;
            for b in 0..d {
                out[(a, b)] += rho.matrix()[(ia, base + b * stride)];
            }
        }
    }
    Ok(MixedState::from_parts(out))
}

/// Reduced density matrix of one site for a pure composite state.
pub fn partial_trace_pure<T: Real>(
    psi: &PureState<T>,
    space: &CompositeSpace,
    keep_site: usize,
) -> Result<MixedState<T>> {
    let spec = space.site(keep_site)?;
    if psi.dim() != space.dim() {
        return Err(Error::Dimension {
            expected: space.dim(),
            got: psi.dim(),
        });
    }
    let d = spec.dim();
    let stride = space.stride(keep_site);
    let v = psi.amplitudes();
    let mut out = DMatrix::zeros(d, d);
    for base in 0..space.dim() {
        if space.site_digit(base, keep_site) != 0 {
            continue;
        }
        for a in 0..d {
            let za = v[base + a * stride];
            if za == czero() {
                continue;
            }
            for b in 0..d {
                out[(a, b)] += za * v[base + b * stride].conj();
            }
        }
    }
    Ok(MixedState::from_parts(out))
}

/// Re-expresses a site state on a site spec with more internal levels.
///
/// Every level of `from` must exist in `to`, and the cutoffs must agree.
pub fn lift_site_state<T: Real>(
    rho: &MixedState<T>,
    from: &SiteSpec,
    to: &SiteSpec,
) -> Result<MixedState<T>> {
    if from.fock_cutoff() != to.fock_cutoff() {
        return Err(Error::Domain(format!(
            "cannot lift between cutoffs {} and {}",
            from.fock_cutoff(),
            to.fock_cutoff()
        )));
    }
    if rho.dim() != from.dim() {
        return Err(Error::Dimension {
            expected: from.dim(),
            got: rho.dim(),
        });
    }
    let map: Vec<usize> = (0..from.dim())
        .map(|i| {
            let (l, n) = from.label(i)?;
            to.index(l, n)
        })
        .collect::<Result<_>>()?;
    let mut out = DMatrix::zeros(to.dim(), to.dim());
    for (a, &ia) in map.iter().enumerate() {
        for (b, &ib) in map.iter().enumerate() {
            out[(ia, ib)] = rho.matrix()[(a, b)];
        }
    }
    Ok(MixedState::from_parts(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::max_abs_diff;

    fn two_site(n_max: usize) -> CompositeSpace {
        CompositeSpace::uniform(SiteSpec::two_level(n_max).unwrap(), 2).unwrap()
    }

    #[test]
    fn basis_index_examples() {
        let spec = SiteSpec::two_level(2).unwrap();
        let one = CompositeSpace::new(vec![spec.clone()]).unwrap();
        assert_eq!(one.basis_index(&[(Level::Down, 0)]).unwrap(), 0);
        assert_eq!(one.basis_index(&[(Level::Up, 1)]).unwrap(), 4);
        let two = two_site(2);
        assert_eq!(
            two.basis_index(&[(Level::Up, 0), (Level::Down, 1)])
                .unwrap(),
            19
        );
        assert_eq!(
            two.basis_label(19).unwrap(),
            vec![(Level::Up, 0), (Level::Down, 1)]
        );
    }

    #[test]
    fn basis_index_errors_name_the_site() {
        let two = two_site(2);
        let err = two
            .basis_index(&[(Level::Up, 0), (Level::Down, 3)])
            .unwrap_err();
        match err {
            Error::Site { site, what } => {
                assert_eq!(site, 1);
                assert!(what.contains('3'), "{what}");
            }
            e => panic!("unexpected {e:?}"),
        }
        assert!(two
            .basis_index(&[(Level::E0, 0), (Level::Down, 0)])
            .is_err());
    }

    #[test]
    fn site_spec_rejects_bad_levels() {
        assert!(SiteSpec::new(vec![Level::Down], 2).is_err());
        assert!(SiteSpec::new(vec![Level::Down, Level::Up, Level::Up], 2).is_err());
        assert!(SiteSpec::new(vec![Level::Down, Level::Up, Level::E0, Level::E0], 2).is_err());
        assert!(SiteSpec::new(vec![Level::Up, Level::Down], 0).is_err());
        assert!(SiteSpec::full_detection(3).is_ok());
    }

    #[test]
    fn level_round_trips_through_str() {
        for l in Level::ALL {
            assert_eq!(l.name().parse::<Level>().unwrap(), l);
        }
        assert!("e7".parse::<Level>().is_err());
    }

    #[test]
    fn embedding_identity_and_single_site() {
        let spec = SiteSpec::two_level(2).unwrap();
        let space = two_site(2);
        let id = LinearOperator::<f64>::identity(spec.dim());
        let e = embed_site_operator(&space, 1, &id).unwrap();
        assert_eq!(e, LinearOperator::identity(space.dim()));

        let single = CompositeSpace::new(vec![spec.clone()]).unwrap();
        let a = annihilation::<f64>(&spec);
        assert_eq!(
            embed_site_operator(&single, 0, &a).unwrap().matrix(),
            a.matrix()
        );
        assert!(embed_site_operator(&space, 2, &a).is_err());
        assert!(embed_site_operator(&space, 0, &LinearOperator::<f64>::identity(3)).is_err());
    }

    #[test]
    fn embedded_number_operators_commute() {
        let spec = SiteSpec::two_level(3).unwrap();
        let space = CompositeSpace::uniform(spec.clone(), 2).unwrap();
        let n1 = embed_site_operator(&space, 0, &number::<f64>(&spec)).unwrap();
        let n2 = embed_site_operator(&space, 1, &number::<f64>(&spec)).unwrap();
        assert!(n1.commutator(&n2).unwrap().frobenius_norm() < 1e-12);
        // a_1 and a_2† too
        let a1 = embed_site_operator(&space, 0, &annihilation::<f64>(&spec)).unwrap();
        let ad2 = embed_site_operator(&space, 1, &creation::<f64>(&spec)).unwrap();
        assert!(a1.commutator(&ad2).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn expectation_examples() {
        let spec = SiteSpec::two_level(3).unwrap();
        let space = two_site(3);
        let psi = PureState::<f64>::product(&space, &[(Level::Up, 2), (Level::Down, 0)]).unwrap();
        let id = LinearOperator::identity(space.dim());
        assert!((psi.expectation(&id).unwrap().re - 1.0).abs() < 1e-12);
        let n1 = embed_site_operator(&space, 0, &number(&spec)).unwrap();
        let e = expectation(&n1, &psi).unwrap();
        assert!((e.re - 2.0).abs() < 1e-12 && e.im.abs() < 1e-12);
        let rho = psi.to_density();
        assert!((rho.expectation(&n1).unwrap().re - 2.0).abs() < 1e-12);
        assert!(rho.expectation(&LinearOperator::identity(3)).is_err());
    }

    #[test]
    fn partial_trace_of_product_state() {
        let spec = SiteSpec::two_level(2).unwrap();
        let space = CompositeSpace::uniform(spec.clone(), 2).unwrap();
        let d = spec.dim();
        // ρ_A: mixture with a coherence, ρ_B: thermal-like diagonal
        let a = PureState::<f64>::normalized(DVector::from_fn(d, |i, _| {
            C::new(1.0 + i as f64, 0.5 * i as f64)
        }))
        .unwrap()
        .to_density()
        .mix(&MixedState::maximally_mixed(d), 0.3)
        .unwrap();
        let probs: Vec<f64> = (0..d).map(|i| (i + 1) as f64).collect();
        let total: f64 = probs.iter().sum();
        let b = MixedState::diagonal(&probs.iter().map(|p| p / total).collect::<Vec<_>>()).unwrap();
        let rho = a.kron(&b);
        let ra = partial_trace(&rho, &space, 0).unwrap();
        let rb = partial_trace(&rho, &space, 1).unwrap();
        assert!(max_abs_diff(ra.matrix(), a.matrix()) < 1e-10);
        assert!(max_abs_diff(rb.matrix(), b.matrix()) < 1e-10);
        assert!(partial_trace(&rho, &space, 2).is_err());
    }

    #[test]
    fn partial_trace_of_entangled_state_is_maximally_mixed_on_support() {
        let space = two_site(2);
        let x = space
            .basis_index(&[(Level::Up, 0), (Level::Down, 0)])
            .unwrap();
        let y = space
            .basis_index(&[(Level::Down, 0), (Level::Up, 0)])
            .unwrap();
        let mut v = DVector::zeros(space.dim());
        v[x] = C::new(1.0, 0.0);
        v[y] = C::new(1.0, 0.0);
        let psi = PureState::<f64>::normalized(v).unwrap();
        let r = partial_trace(&psi.to_density(), &space, 0).unwrap();
        let spec = &space.sites()[0];
        let up = spec.index(Level::Up, 0).unwrap();
        let dn = spec.index(Level::Down, 0).unwrap();
        assert!((r.population(up) - 0.5).abs() < 1e-12);
        assert!((r.population(dn) - 0.5).abs() < 1e-12);
        assert!(r.matrix()[(up, dn)].norm() < 1e-12);
        let rp = partial_trace_pure(&psi, &space, 0).unwrap();
        assert!(max_abs_diff(rp.matrix(), r.matrix()) < 1e-14);
    }

    #[test]
    fn mixed_state_validation() {
        assert!(MixedState::<f64>::diagonal(&[0.5, 0.6]).is_err());
        assert!(MixedState::<f64>::diagonal(&[1.2, -0.2]).is_err());
        let mut m = DMatrix::<C<f64>>::identity(2, 2) * C::new(0.5, 0.0);
        m[(0, 1)] = C::new(0.1, 0.0);
        assert!(matches!(
            MixedState::new(m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn commutator_matches_dense_products() {
        let space = two_site(2);
        let spec = SiteSpec::two_level(2).unwrap();
        let a = embed_site_operator(&space, 0, &annihilation::<f64>(&spec)).unwrap();
        let n = embed_site_operator(&space, 1, &number::<f64>(&spec)).unwrap();
        let b = a.adjoint().scale(0.3).add(&n).unwrap();
        let c = a.commutator(&b).unwrap();
        let (am, bm) = (a.matrix(), b.matrix());
        assert!(max_abs_diff(c.matrix(), &(am * bm - bm * am)) < 1e-14);
    }

    #[test]
    fn sparse_agrees_with_dense() {
        let spec = SiteSpec::with_shelving(3).unwrap();
        let space = CompositeSpace::uniform(spec.clone(), 2).unwrap();
        let a = embed_site_operator(&space, 1, &annihilation::<f64>(&spec)).unwrap();
        let op = a
            .add(&a.adjoint())
            .unwrap()
            .add(
                &embed_site_operator(&space, 0, &number(&spec))
                    .unwrap()
                    .scale(0.7),
            )
            .unwrap();
        let sp = SparseOperator::from_dense(&op);
        let rhs = DMatrix::from_fn(space.dim(), space.dim(), |i, j| {
            C::new((i as f64 * 0.37).sin(), (j as f64 * 0.11).cos())
        });
        let diff = max_abs_diff(&sp.mul_dense(&rhs), &(op.matrix() * &rhs));
        assert!(diff < 1e-12, "{diff}");
        let v = rhs.column(3).into_owned();
        assert!(max_abs_diff(&sp.mul_vec(&v), &(op.matrix() * &v)) < 1e-12);
        assert_eq!(&sp.to_dense(), op.matrix());
        assert_eq!(sp.adjoint().to_dense(), op.matrix().adjoint());
    }

    #[test]
    fn lift_preserves_populations() {
        let small = SiteSpec::two_level(2).unwrap();
        let big = SiteSpec::full_detection(2).unwrap();
        let psi = PureState::<f64>::site_basis(&small, Level::Up, 1).unwrap();
        let lifted = lift_site_state(&psi.to_density(), &small, &big).unwrap();
        assert_eq!(lifted.population(big.index(Level::Up, 1).unwrap()), 1.0);
        assert!((lifted.trace() - 1.0).abs() < 1e-15);
        assert!(lift_site_state(&psi.to_density(), &big, &small).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let spec = SiteSpec::two_level(3).unwrap();
        let a = annihilation::<f32>(&spec);
        let n = a.adjoint().compose(&a).unwrap();
        let diff = max_abs_diff(n.matrix(), number::<f32>(&spec).matrix());
        assert!(diff < 1e-6);
    }
}
