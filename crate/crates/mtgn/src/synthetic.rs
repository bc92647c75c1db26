//! Synthetic recovery tasks with a known ground-truth transport.
//!
//! A task draws a random flow `theta_true`, a standard normal template cloud,
//! and a reference cloud obtained by pushing an *independent* standard normal
//! sample through `theta_true`. The reference is therefore a genuinely
//! non-Gaussian cloud whose generating map is known, so a trained flow can be
//! scored by how well it reproduces the true transport on held-out points.

use crate::error::{Error, Result};
use crate::float::Scalar;
use crate::flow::{push, FlowParams};
use crate::matrix::Matrix;
use crate::rng::{gaussian_sample, Seed};

/// Substream indices of the task seed; distinct from the trainer's streams
/// so reusing one seed for both never aliases draws.
const STREAM_TRUE_PARAMS: u64 = 10;
const STREAM_TEMPLATE: u64 = 11;
const STREAM_REFERENCE_SOURCE: u64 = 12;
const STREAM_TEST: u64 = 13;

/// A generated task: clouds plus the transport that produced the reference.
#[derive(Clone, Debug)]
pub struct SyntheticTask<F> {
    pub theta_true: FlowParams<F>,
    /// Training template cloud, standard normal.
    pub template: Matrix<F>,
    /// Training reference: an independent normal sample pushed through
    /// `theta_true`.
    pub reference: Matrix<F>,
    /// Held-out template points for transport-recovery scoring.
    pub template_test: Matrix<F>,
}

/// Generates a recovery task.
///
/// `weight_scale` is the standard deviation of the true flow's weights;
/// larger values bend the reference cloud further from Gaussian.
pub fn make_task<F: Scalar>(
    d: usize,
    depth: usize,
    n_train: usize,
    n_test: usize,
    weight_scale: F,
    seed: Seed,
) -> Result<SyntheticTask<F>> {
    if !(weight_scale >= F::zero()) || !weight_scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "weight scale must be nonnegative and finite, got {weight_scale}"
        )));
    }
    let theta_true = FlowParams::random_init(
        d,
        depth,
        weight_scale,
        false,
        seed.stream(STREAM_TRUE_PARAMS),
    )?;
    let template = gaussian_sample(n_train, d, seed.stream(STREAM_TEMPLATE))?;
    let source = gaussian_sample(n_train, d, seed.stream(STREAM_REFERENCE_SOURCE))?;
    let reference = push(&theta_true, &source)?;
    let template_test = gaussian_sample(n_test, d, seed.stream(STREAM_TEST))?;
    Ok(SyntheticTask {
        theta_true,
        template,
        reference,
        template_test,
    })
}

/// Relative transport-recovery error on held-out points:
/// `|F(test; trained) - F(test; true)|_F / |F(test; true)|_F`.
pub fn evaluate_error<F: Scalar>(
    trained: &FlowParams<F>,
    theta_true: &FlowParams<F>,
    template_test: &Matrix<F>,
) -> Result<F> {
    let a = push(trained, template_test)?;
    let b = push(theta_true, template_test)?;
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            expected: b.rows() * b.cols(),
            got: a.rows() * a.cols(),
        });
    }
    let mut num = F::zero();
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let diff = x - y;
        num += diff * diff;
    }
    let den = b.frobenius_norm();
    if den == F::zero() {
        return Ok(if num == F::zero() { F::zero() } else { F::infinity() });
    }
    Ok(num.sqrt() / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_generation_is_deterministic() {
        let a = make_task::<f64>(2, 3, 20, 10, 0.5, Seed(7)).unwrap();
        let b = make_task::<f64>(2, 3, 20, 10, 0.5, Seed(7)).unwrap();
        assert_eq!(a.theta_true, b.theta_true);
        assert_eq!(a.template.data(), b.template.data());
        assert_eq!(a.reference.data(), b.reference.data());
        assert_eq!(a.template_test.data(), b.template_test.data());
    }

    #[test]
    fn different_seeds_give_different_tasks() {
        let a = make_task::<f64>(2, 3, 20, 10, 0.5, Seed(7)).unwrap();
        let b = make_task::<f64>(2, 3, 20, 10, 0.5, Seed(8)).unwrap();
        assert_ne!(a.template.data(), b.template.data());
        assert_ne!(a.theta_true, b.theta_true);
    }

    #[test]
    fn zero_weight_scale_makes_reference_the_raw_source() {
        // With an all-zero true flow the push is the identity, so the
        // reference must equal the untransported source sample bitwise.
        let task = make_task::<f64>(3, 4, 15, 5, 0.0, Seed(9)).unwrap();
        let source =
            gaussian_sample::<f64>(15, 3, Seed(9).stream(STREAM_REFERENCE_SOURCE)).unwrap();
        assert_eq!(task.reference.data(), source.data());
    }

    #[test]
    fn reference_is_visibly_non_gaussian_at_large_weight_scale() {
        // The pushed cloud should differ from its Gaussian source; compare
        // mean displacement, which is zero in distribution for the source.
        let task = make_task::<f64>(2, 10, 400, 10, 0.5, Seed(42)).unwrap();
        let source =
            gaussian_sample::<f64>(400, 2, Seed(42).stream(STREAM_REFERENCE_SOURCE)).unwrap();
        let mut shift = 0.0;
        for (&r, &s) in task.reference.data().iter().zip(source.data()) {
            shift += (r - s).abs();
        }
        shift /= task.reference.data().len() as f64;
        assert!(
            shift > 0.05,
            "true flow should move particles measurably, mean |shift| {shift}"
        );
    }

    #[test]
    fn recovery_error_is_zero_for_the_true_params() {
        let task = make_task::<f64>(2, 5, 30, 25, 0.5, Seed(3)).unwrap();
        let e = evaluate_error(&task.theta_true, &task.theta_true, &task.template_test).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn recovery_error_detects_a_wrong_flow() {
        let task = make_task::<f64>(2, 5, 30, 25, 0.5, Seed(4)).unwrap();
        let wrong = FlowParams::random_init(2, 5, 0.5, false, Seed(999)).unwrap();
        let e = evaluate_error(&wrong, &task.theta_true, &task.template_test).unwrap();
        assert!(e > 0.01, "independent random flows should disagree, E = {e}");
    }

    #[test]
    fn cloud_shapes_match_the_request() {
        let task = make_task::<f64>(4, 2, 12, 7, 0.3, Seed(5)).unwrap();
        assert_eq!((task.template.rows(), task.template.cols()), (12, 4));
        assert_eq!((task.reference.rows(), task.reference.cols()), (12, 4));
        assert_eq!((task.template_test.rows(), task.template_test.cols()), (7, 4));
        assert_eq!(task.theta_true.dim(), 4);
        assert_eq!(task.theta_true.depth(), 2);
    }
}
