//! Dynamics of a spin-1/2 coupled to an N-state classically fluctuating
//! environment.
//!
//! The environment is a continuous-time Markov chain over `N` states; while
//! the chain sits in state `i` the spin precesses about a state-conditional
//! vector `omega_i`.  The joint evolution of the sub-normalized conditional
//! density matrices is linear and is solved exactly by exponentiating a
//! `4N x 4N` generator ([`propagator`]).  An independent Monte Carlo sampler
//! over telegraph trajectories ([`telegraph`]) provides a cross-check, and
//! [`analysis`] extracts decoherence rates and precession frequencies from
//! either representation.  [`nv`] builds the optically illuminated
//! nuclear-spin scenarios on top: randomized excited-state ensembles,
//! dephasing anisotropy, and external-field compensation.
//!
//! Units: times in microseconds, rates in inverse microseconds, precession
//! vectors in radians per microsecond.

pub mod analysis;
pub mod error;
pub mod fluctuator;
pub mod linalg;
pub mod nv;
pub mod propagator;
pub mod quantum;
pub mod telegraph;

pub use analysis::{CrossoverCurve, CrossoverTemplate, DecayAnalysis, Method};
pub use error::{FluxError, Result};
pub use fluctuator::{AsymptoticRates, FluctuatorSpec, StationaryDistribution};
pub use nv::{EnsembleSpec, SweepResult, SweetSpot};
pub use propagator::{Generator, JointState, Occupation, SpectralModes};
pub use quantum::{DensityMatrix, Vec3};
pub use telegraph::{McEnsemble, Trajectory};
