//! Closed-system propagation.
//!
//! Two routes: the scaling-and-squaring matrix exponential for single
//! times, and a cached eigendecomposition for dense time grids. The test
//! suite checks them against each other.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::hilbert::{LinearOperator, MixedState, PureState, HERMITIAN_TOL};
use crate::scalar::{Real, C};

pub(crate) fn require_hermitian<T: Real>(h: &LinearOperator<T>) -> Result<()> {
    let dev = h.hermitian_deviation();
    if dev > HERMITIAN_TOL * h.max_abs().max(1.0) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(())
}

fn require_time<T: Real>(t: T) -> Result<()> {
    if !(t >= T::zero()) {
        return Err(Error::Domain(format!(
            "evolution time must be non-negative, got {}",
            t.to_f64_lossy()
        )));
    }
    Ok(())
}

/// `exp(-iHt)`.
pub fn propagator<T: Real>(h: &LinearOperator<T>, t: T) -> Result<LinearOperator<T>> {
    require_hermitian(h)?;
    require_time(t)?;
    let gen = h.matrix().map(|z| C::new(z.im * t, -z.re * t));
    Ok(LinearOperator::from_parts(gen.exp(), false))
}

/// `ψ(t) = exp(-iHt) ψ₀`.
pub fn evolve_unitary<T: Real>(
    h: &LinearOperator<T>,
    psi0: &PureState<T>,
    t: T,
) -> Result<PureState<T>> {
    if psi0.dim() != h.dim() {
        return Err(Error::Dimension {
            expected: h.dim(),
            got: psi0.dim(),
        });
    }
    let u = propagator(h, t)?;
    Ok(PureState::from_parts(u.matrix() * psi0.amplitudes()))
}

/// Eigendecomposition of a Hermitian `H`, reused for any number of times.
#[derive(Debug, Clone)]
pub struct EigenPropagator<T: Real> {
    energies: DVector<T>,
    vectors: DMatrix<C<T>>,
}

impl<T: Real> EigenPropagator<T> {
    pub fn new(h: &LinearOperator<T>) -> Result<Self> {
        require_hermitian(h)?;
        let eig = SymmetricEigen::new(h.matrix().clone());
        Ok(Self {
            energies: eig.eigenvalues,
            vectors: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &DVector<T> {
        &self.energies
    }

    fn phases(&self, t: T) -> DVector<C<T>> {
        self.energies.map(|e| {
            let (s, c) = (e * t).sin_cos();
            C::new(c, -s)
        })
    }

    pub fn evolve(&self, psi0: &PureState<T>, t: T) -> Result<PureState<T>> {
        Ok(self.evolve_pure_many(psi0, &[t])?.pop().expect("one time"))
    }

    pub fn evolve_pure_many(&self, psi0: &PureState<T>, times: &[T]) -> Result<Vec<PureState<T>>> {
        self.check_dim(psi0.dim())?;
        let coeffs = self.vectors.ad_mul(psi0.amplitudes());
        times
            .iter()
            .map(|&t| {
                require_time(t)?;
                let c = coeffs.component_mul(&self.phases(t));
                Ok(PureState::from_parts(&self.vectors * c))
            })
            .collect()
    }

    /// `U ρ U†` at every time.
    pub fn evolve_mixed_many(
        &self,
        rho0: &MixedState<T>,
        times: &[T],
    ) -> Result<Vec<MixedState<T>>> {
        self.check_dim(rho0.dim())?;
        let in_eigenbasis = self.vectors.ad_mul(rho0.matrix()) * &self.vectors;
        times
            .iter()
            .map(|&t| {
                require_time(t)?;
                let p = self.phases(t);
                let rotated = DMatrix::from_fn(self.dim(), self.dim(), |j, k| {
                    in_eigenbasis[(j, k)] * p[j] * p[k].conj()
                });
                Ok(MixedState::from_parts(
                    &self.vectors * rotated * self.vectors.adjoint(),
                ))
            })
            .collect()
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}
