//! Solver and calibration toolkit for a mean-field model of binary
//! collective decisions.
//!
//! N agents hold decisions s = +-1 and flip under an external field, an
//! imitation coupling, and idiosyncratic noise; the population count n of
//! +1 decisions performs a birth-death process on 0..=N. The library
//! provides:
//!
//! * [`model`]: parameters, flip-rate families, aggregate rate tables, and
//!   the mean-field self-consistency analysis;
//! * [`spectral`]: the tridiagonal master operator, its stationary law and
//!   real spectrum, the exact finite-time transition kernel, evolution
//!   under piecewise-constant fields, and the slow-mode approximation;
//! * [`simulate`]: exact stochastic simulation (Gillespie direct method)
//!   of single trajectories and seeded ensembles;
//! * [`metastability`]: lock-in analysis -- stationary mode structure,
//!   mean first-passage times, fixation probabilities, and escape-time
//!   asymptotics;
//! * [`calibrate`]: maximum-likelihood parameter recovery from trajectory
//!   data via self-adaptive differential evolution.

pub mod calibrate;
pub mod error;
pub mod metastability;
pub mod model;
pub mod simulate;
pub mod spectral;
pub(crate) mod util;

pub use error::{Error, Result};
