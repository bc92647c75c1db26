//! Particle-flow generative modelling.
//!
//! A template point cloud is transported onto a reference cloud by a residual
//! network read as the forward-Euler discretization of a velocity field:
//! `x_{j+1} = x_j + h * tanh(K_j x_j + b_j)` with step `h = 1/L`. Training
//! minimizes the mismatch between the Gaussian-mixture densities of the
//! transported template and the reference, plus a kinetic-energy penalty on
//! the particle paths. There is no discriminator and no inner optimization:
//! the whole procedure is plain stochastic minimization with an annealed
//! mixture bandwidth, coarse to fine.
//!
//! The crate is generic over the scalar type through the [`float::Scalar`]
//! trait (`f32` and `f64` are provided); the `*64` aliases at the crate root
//! fix the common double-precision case.
//!
//! Modules, bottom up:
//! - [`matrix`]: dense row-major matrices, one particle per row.
//! - [`rng`]: the frozen deterministic random number generator.
//! - [`numdiff`]: central finite differences, the gradient test oracle.
//! - [`flow`]: the residual transport map and its reverse-mode sweep.
//! - [`kernel`]: mixture densities and the density-matching misfit.
//! - [`objective`]: misfit plus weighted kinetic energy, with gradients.
//! - [`trainer`]: annealed minibatch training with Adam or plain descent.
//! - [`synthetic`]: recovery tasks with a known ground-truth transport.
//! - [`saddle`]: the descent-ascent spiral on a coupled quadratic saddle.
//! - [`io`]: CSV clouds, JSON checkpoints, and run histories.

pub mod error;
pub mod float;
pub mod flow;
pub mod io;
pub mod kernel;
pub mod matrix;
pub mod numdiff;
pub mod objective;
pub mod rng;
pub mod saddle;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use float::Scalar;
pub use flow::{flow_backward, flow_forward, flow_velocity, push, FlowGrad, FlowParams, FlowTrajectory};
pub use kernel::{density_at, density_vector, misfit, misfit_with_grad, KernelConfig};
pub use matrix::Matrix;
pub use objective::{energy, evaluate, gradient, ObjectiveConfig, ObjectiveValue};
pub use rng::{gaussian_sample, Seed, SeededRng};
pub use saddle::{run_descent_ascent, SaddleConfig, SaddleTrajectory};
pub use synthetic::{evaluate_error, make_task, SyntheticTask};
pub use trainer::{
    evaluate_full, train, EpochRecord, OptimizerKind, SigmaSchedule, TrainConfig, TrainHistory,
    TrainOutcome,
};

/// Double-precision matrix.
pub type Matrix64 = matrix::Matrix<f64>;
/// Double-precision flow parameters.
pub type FlowParams64 = flow::FlowParams<f64>;
/// Double-precision flow gradient.
pub type FlowGrad64 = flow::FlowGrad<f64>;
/// Double-precision kernel configuration.
pub type KernelConfig64 = kernel::KernelConfig<f64>;
/// Double-precision objective configuration.
pub type ObjectiveConfig64 = objective::ObjectiveConfig<f64>;
/// Double-precision objective value.
pub type ObjectiveValue64 = objective::ObjectiveValue<f64>;
/// Double-precision training configuration.
pub type TrainConfig64 = trainer::TrainConfig<f64>;
/// Double-precision bandwidth schedule.
pub type SigmaSchedule64 = trainer::SigmaSchedule<f64>;
