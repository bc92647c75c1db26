//! The training objective: density misfit of the transported template plus a
//! kinetic-energy penalty on the flow.
//!
//! ```text
//! J(theta) = M(flow(T; theta), R) + alpha * E(theta)
//! E(theta) = h/n * sum_j |V_j|_F^2
//! ```
//!
//! The energy sums the squared velocities over all layers and particles, a
//! discrete transport cost that discourages wild detours of the particle
//! paths. Its cotangent enters the backward sweep directly through the
//! per-layer velocity gradients.

use crate::error::Result;
use crate::float::Scalar;
use crate::flow::{flow_backward, flow_forward, FlowGrad, FlowParams, FlowTrajectory};
use crate::kernel::{self, KernelConfig};
use crate::matrix::Matrix;

/// Misfit weight and energy weight of the combined objective.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveConfig<F> {
    pub kernel: KernelConfig<F>,
    pub alpha: F,
}

impl<F: Scalar> ObjectiveConfig<F> {
    /// Default energy weight `alpha = 1e-2`.
    pub fn new(kernel: KernelConfig<F>) -> Self {
        ObjectiveConfig {
            kernel,
            alpha: F::from_f64_lossy(1e-2),
        }
    }

    pub fn with_alpha(mut self, alpha: F) -> Self {
        self.alpha = alpha;
        self
    }
}

/// The three numbers reported for one evaluation; `total` is always the
/// expression `misfit + alpha * energy`, never recomputed another way.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveValue<F> {
    pub total: F,
    pub misfit: F,
    pub energy: F,
}

/// Kinetic energy of a trajectory: `h/n * sum_j |V_j|_F^2`.
pub fn energy<F: Scalar>(params: &FlowParams<F>, traj: &FlowTrajectory<F>) -> F {
    let n = traj.states[0].rows();
    let mut acc = F::zero();
    for vel in &traj.velocities {
        for &v in vel.data() {
            acc += v * v;
        }
    }
    params.step_size() * acc / F::from_usize(n).expect("cloud size fits in a float")
}

/// Evaluates the objective at the given parameters.
pub fn evaluate<F: Scalar>(
    cfg: &ObjectiveConfig<F>,
    params: &FlowParams<F>,
    template: &Matrix<F>,
    reference: &Matrix<F>,
) -> Result<ObjectiveValue<F>> {
    let traj = flow_forward(params, template)?;
    let misfit = kernel::misfit(&cfg.kernel, traj.output(), reference)?;
    let energy = energy(params, &traj);
    Ok(ObjectiveValue {
        total: misfit + cfg.alpha * energy,
        misfit,
        energy,
    })
}

/// Evaluates the objective and its gradient with respect to all flow
/// parameters.
///
/// The misfit feeds the backward sweep through the output state; the energy
/// feeds it through the direct per-layer velocity cotangent
/// `alpha * 2h/n * V_j`.
pub fn gradient<F: Scalar>(
    cfg: &ObjectiveConfig<F>,
    params: &FlowParams<F>,
    template: &Matrix<F>,
    reference: &Matrix<F>,
) -> Result<(ObjectiveValue<F>, FlowGrad<F>)> {
    let traj = flow_forward(params, template)?;
    let (misfit, grad_out) = kernel::misfit_with_grad(&cfg.kernel, traj.output(), reference)?;
    let energy = energy(params, &traj);

    let n = traj.states[0].rows();
    let scale = cfg.alpha
        * F::from_f64_lossy(2.0)
        * params.step_size()
        / F::from_usize(n).expect("cloud size fits in a float");
    let grad_vel: Vec<Matrix<F>> = traj
        .velocities
        .iter()
        .map(|vel| {
            let mut g = Matrix::zeros(vel.rows(), vel.cols());
            for (out, &v) in g.data_mut().iter_mut().zip(vel.data()) {
                *out = scale * v;
            }
            g
        })
        .collect();

    let (grad, _) = flow_backward(params, &traj, &grad_out, &grad_vel)?;
    Ok((
        ObjectiveValue {
            total: misfit + cfg.alpha * energy,
            misfit,
            energy,
        },
        grad,
    ))
}
