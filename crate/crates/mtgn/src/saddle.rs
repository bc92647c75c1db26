//! Descent-ascent dynamics on a strongly coupled quadratic saddle.
//!
//! The two-player objective `f(theta, eta) = theta^2/2 + 10 theta eta -
//! eta^2/20` is minimized in `theta` and maximized in `eta` by alternating
//! gradient steps:
//!
//! ```text
//! theta_{k+1} = theta_k - mu * (theta_k + 10 eta_k)
//! eta_{k+1}   = eta_k   - mu * (eta_k / 10 - 10 theta_{k+1})
//! ```
//!
//! The cross-coupling dominates both curvatures, so the iterates spiral
//! around the saddle for dozens of turns before the tiny self-damping terms
//! win. This is the failure mode of adversarial two-player training that a
//! pure minimization objective sidesteps, kept here as a measurable
//! reference dynamic. A simultaneous (Jacobi) variant updates `eta` from the
//! old `theta_k` instead.

use crate::error::{Error, Result};
use crate::float::Scalar;

/// Step size, iteration count, start point, and update ordering.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaddleConfig<F> {
    pub mu: F,
    pub steps: usize,
    pub theta0: F,
    pub eta0: F,
    /// `false`: alternating updates (eta sees the fresh theta).
    /// `true`: simultaneous updates (eta sees the old theta).
    pub simultaneous: bool,
}

impl<F: Scalar> SaddleConfig<F> {
    /// The reference configuration: `mu = 0.01`, 5000 steps, start `(1, 1)`,
    /// alternating updates.
    pub fn new() -> Self {
        SaddleConfig {
            mu: F::from_f64_lossy(0.01),
            steps: 5000,
            theta0: F::one(),
            eta0: F::one(),
            simultaneous: false,
        }
    }

    pub fn with_mu(mut self, mu: F) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_start(mut self, theta0: F, eta0: F) -> Self {
        self.theta0 = theta0;
        self.eta0 = eta0;
        self
    }

    pub fn with_simultaneous(mut self, simultaneous: bool) -> Self {
        self.simultaneous = simultaneous;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.mu > F::zero()) || !self.mu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "saddle step size must be positive and finite, got {}",
                self.mu
            )));
        }
        if !self.theta0.is_finite() || !self.eta0.is_finite() {
            return Err(Error::NonFinite("saddle start point".to_string()));
        }
        Ok(())
    }
}

impl<F: Scalar> Default for SaddleConfig<F> {
    fn default() -> Self {
        Self::new()
    }
}

/// The iterates `(theta_k, eta_k)` for `k = 0..=steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct SaddleTrajectory<F> {
    pub points: Vec<(F, F)>,
}

impl<F: Scalar> SaddleTrajectory<F> {
    pub fn start(&self) -> (F, F) {
        self.points[0]
    }

    pub fn end(&self) -> (F, F) {
        *self.points.last().expect("trajectory contains the start")
    }

    fn norm(p: (F, F)) -> F {
        (p.0 * p.0 + p.1 * p.1).sqrt()
    }

    /// `|end| / |start|`; infinity when starting at the origin with a
    /// nonzero end (which the dynamics never produce).
    pub fn norm_ratio(&self) -> F {
        let start = Self::norm(self.start());
        let end = Self::norm(self.end());
        if start == F::zero() {
            if end == F::zero() {
                F::zero()
            } else {
                F::infinity()
            }
        } else {
            end / start
        }
    }

    /// Which of the four open quadrants the path enters, in the order
    /// `(+,+), (-,+), (-,-), (+,-)`. Points on the axes count for none.
    pub fn quadrants_visited(&self) -> [bool; 4] {
        let mut seen = [false; 4];
        for &(t, e) in &self.points {
            if t > F::zero() && e > F::zero() {
                seen[0] = true;
            } else if t < F::zero() && e > F::zero() {
                seen[1] = true;
            } else if t < F::zero() && e < F::zero() {
                seen[2] = true;
            } else if t > F::zero() && e < F::zero() {
                seen[3] = true;
            }
        }
        seen
    }

    /// Signed cumulative rotation of the iterates around the origin, in
    /// radians: the sum of angle increments wrapped to `(-pi, pi]`. A value
    /// of `2 pi k` means the path circled the saddle `k` times.
    pub fn winding_angle(&self) -> F {
        let pi = F::PI();
        let two_pi = pi + pi;
        let mut total = F::zero();
        let mut prev: Option<F> = None;
        for &(t, e) in &self.points {
            if t == F::zero() && e == F::zero() {
                prev = None;
                continue;
            }
            let angle = e.atan2(t);
            if let Some(p) = prev {
                let mut delta = angle - p;
                while delta > pi {
                    delta -= two_pi;
                }
                while delta < -pi {
                    delta += two_pi;
                }
                total += delta;
            }
            prev = Some(angle);
        }
        total
    }
}

/// Runs the descent-ascent recurrence and records every iterate.
pub fn run_descent_ascent<F: Scalar>(cfg: &SaddleConfig<F>) -> Result<SaddleTrajectory<F>> {
    cfg.validate()?;
    let mu = cfg.mu;
    let ten = F::from_f64_lossy(10.0);
    let tenth = F::from_f64_lossy(0.1);
    let mut theta = cfg.theta0;
    let mut eta = cfg.eta0;
    let mut points = Vec::with_capacity(cfg.steps + 1);
    points.push((theta, eta));
    for k in 0..cfg.steps {
        let theta_next = theta - mu * (theta + ten * eta);
        let theta_for_eta = if cfg.simultaneous { theta } else { theta_next };
        let eta_next = eta - mu * (tenth * eta - ten * theta_for_eta);
        theta = theta_next;
        eta = eta_next;
        if !theta.is_finite() || !eta.is_finite() {
            return Err(Error::NonFinite(format!("saddle iterate {}", k + 1)));
        }
        points.push((theta, eta));
    }
    Ok(SaddleTrajectory { points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_iterate_matches_hand_computation() {
        // theta_1 = 1 - 0.01 * 11 = 0.89
        // eta_1   = 1 - 0.01 * (0.1 - 8.9) = 1.088
        let cfg = SaddleConfig::<f64>::new().with_steps(1);
        let traj = run_descent_ascent(&cfg).unwrap();
        let (t1, e1) = traj.end();
        assert!((t1 - 0.89).abs() < 1e-12);
        assert!((e1 - 1.088).abs() < 1e-12);
    }

    #[test]
    fn second_iterate_matches_hand_computation() {
        // theta_2 = 0.89 - 0.01 * (0.89 + 10.88)  = 0.7723
        // eta_2   = 1.088 - 0.01 * (0.1088 - 7.723) = 1.164142
        let cfg = SaddleConfig::<f64>::new().with_steps(2);
        let traj = run_descent_ascent(&cfg).unwrap();
        let (t2, e2) = traj.end();
        assert!((t2 - 0.7723).abs() < 1e-12);
        assert!((e2 - 1.164142).abs() < 1e-12);
    }

    #[test]
    fn simultaneous_variant_uses_the_old_theta() {
        // eta_1 = 1 - 0.01 * (0.1 - 10) = 1.099 when eta sees theta_0.
        let cfg = SaddleConfig::<f64>::new().with_steps(1).with_simultaneous(true);
        let traj = run_descent_ascent(&cfg).unwrap();
        let (t1, e1) = traj.end();
        assert!((t1 - 0.89).abs() < 1e-12, "theta update is unchanged");
        assert!((e1 - 1.099).abs() < 1e-12);
    }

    #[test]
    fn long_run_spirals_in_through_every_quadrant() {
        let cfg = SaddleConfig::<f64>::new();
        let traj = run_descent_ascent(&cfg).unwrap();
        assert_eq!(traj.points.len(), 5001);
        assert!(
            traj.norm_ratio() < 1e-11,
            "after 5000 steps the iterates should have decayed, ratio {}",
            traj.norm_ratio()
        );
        assert_eq!(traj.quadrants_visited(), [true; 4]);
        let winding = traj.winding_angle().abs();
        assert!(
            (501.0..501.2).contains(&winding),
            "frozen winding angle around 501.09 rad, got {winding}"
        );
        assert!(
            winding > 2.0 * std::f64::consts::PI,
            "the path must circle the saddle at least once"
        );
    }

    #[test]
    fn origin_is_a_fixed_point() {
        let cfg = SaddleConfig::<f64>::new().with_start(0.0, 0.0).with_steps(100);
        let traj = run_descent_ascent(&cfg).unwrap();
        for &(t, e) in &traj.points {
            assert_eq!((t, e), (0.0, 0.0));
        }
        assert_eq!(traj.norm_ratio(), 0.0);
    }

    #[test]
    fn invalid_step_sizes_are_rejected() {
        assert!(run_descent_ascent(&SaddleConfig::<f64>::new().with_mu(0.0)).is_err());
        assert!(run_descent_ascent(&SaddleConfig::<f64>::new().with_mu(-0.1)).is_err());
        assert!(run_descent_ascent(&SaddleConfig::<f64>::new().with_mu(f64::NAN)).is_err());
    }

    #[test]
    fn zero_steps_return_only_the_start() {
        let cfg = SaddleConfig::<f64>::new().with_steps(0).with_start(2.0, -3.0);
        let traj = run_descent_ascent(&cfg).unwrap();
        assert_eq!(traj.points, vec![(2.0, -3.0)]);
    }
}
