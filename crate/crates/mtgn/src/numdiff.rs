//! Central finite differences; the independent oracle every analytic
//! gradient in this crate is tested against.

use crate::error::{Error, Result};
use crate::float::Scalar;

/// Central-difference gradient of `f` at `x`:
/// `g_i = (f(x + step e_i) - f(x - step e_i)) / (2 step)`.
///
/// Fails when `step` is not positive or when `f` returns a non-finite value.
pub fn finite_diff<F, G>(mut f: G, x: &[F], step: F) -> Result<Vec<F>>
where
    F: Scalar,
    G: FnMut(&[F]) -> F,
{
    if !(step > F::zero()) {
        return Err(Error::InvalidArgument(format!(
            "finite_diff step must be positive, got {step}"
        )));
    }
    let two = F::from_f64_lossy(2.0);
    let mut work = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        work[i] = x[i] + step;
        let plus = f(&work);
        work[i] = x[i] - step;
        let minus = f(&work);
        work[i] = x[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "finite_diff objective at coordinate {i}"
            )));
        }
        grad.push((plus - minus) / (two * step));
    }
    Ok(grad)
}
