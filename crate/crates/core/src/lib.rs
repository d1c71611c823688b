//! Learning Nash equilibria of stochastic games from noisy cost evaluations.
//!
//! Players never exchange information: each one perturbs its own strategy,
//! observes its own realized cost, estimates its own gradient by
//! simultaneous perturbation, and takes a mirror-descent step.
//!
//! * [`game`] and [`cournot`]: the game abstraction and a multi-market Cournot
//!   instance with closed-form expected costs and gradients.
//! * [`estimators`]: zeroth-order gradient estimators and a bias/variance probe.
//! * [`mirror`]: Bregman prox steps and Euclidean projections.
//! * [`sdl`]: the learning loop and a single-shot baseline.
//! * [`oracle`]: certified reference equilibria and rate fitting.

pub mod cournot;
pub mod error;
pub mod estimators;
pub mod game;
pub mod mirror;
pub mod oracle;
pub mod sdl;
pub mod stream;

pub use cournot::{CournotConstraint, CournotGame, CournotParams};
pub use error::{Error, Result};
pub use estimators::{BiasVarianceReport, EstimatorKind, GradientEstimate, PerturbationVector};
pub use game::{Game, Layout, ScaledCosts, StrategySet};
pub use mirror::{Euclidean, ProjectionMode, Regularizer};
pub use oracle::{NeReference, RateFit, SolverOptions};
pub use sdl::{RunOptions, RunTrace, ScheduleStep, Schedules, SingleShotSchedules};
pub use stream::{Stream, StreamRng};
