//! Anti-Jaynes–Cummings–Hubbard model of a trapped-ion chain.
//!
//! Hamiltonians, polariton bookkeeping, open-system dynamics and the pulse
//! sequences used to read out polariton populations. Everything is generic
//! over the real scalar (`f64` or `f32`); the aliases below fix `f64`.
//!
//! Units: frequencies and couplings are angular (rad/s) and times are in
//! seconds. Use [`scalar::angular`] to convert from Hz.

pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod model;
pub mod polariton;
pub mod scalar;
pub mod sequence;

pub use error::{Error, Result};
pub use hilbert::{CompositeSpace, Level, SiteSpec};
pub use scalar::Real;

pub type LinearOperator64 = hilbert::LinearOperator<f64>;
pub type PureState64 = hilbert::PureState<f64>;
pub type MixedState64 = hilbert::MixedState<f64>;
pub type State64 = hilbert::State<f64>;
pub type ModelParams64 = model::ModelParams<f64>;
pub type NoiseModel64 = dynamics::NoiseModel<f64>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
pub type Pulse64 = sequence::Pulse<f64>;
pub type Sequence64 = sequence::Sequence<f64>;

pub type LinearOperator32 = hilbert::LinearOperator<f32>;
pub type PureState32 = hilbert::PureState<f32>;
pub type MixedState32 = hilbert::MixedState<f32>;
pub type ModelParams32 = model::ModelParams<f32>;
