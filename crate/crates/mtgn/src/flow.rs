//! The particle flow: a residual network read as a forward-Euler
//! discretization of an ODE on [0, 1].
//!
//! Each particle x follows `x_{j+1} = x_j + h * tanh(K_j x_j + b_j)` with
//! step `h = 1/L`, so the network's depth is the time discretization and the
//! per-layer increment is bounded by `h` in every coordinate. The backward
//! pass is a hand-rolled reverse-mode sweep through the same recurrence.

use crate::error::{Error, Result};
use crate::float::Scalar;
use crate::matrix::Matrix;
use crate::rng::{Seed, SeededRng};

/// Parameters of the transport network: `L` square layer matrices (and
/// optional biases) acting on `d`-dimensional particles.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowParams<F> {
    d: usize,
    h: F,
    /// One `d*d` row-major matrix per layer.
    layers: Vec<Vec<F>>,
    /// One length-`d` bias per layer when biases are enabled.
    biases: Option<Vec<Vec<F>>>,
}

impl<F: Scalar> FlowParams<F> {
    /// Builds bias-free parameters; `h` is fixed to `1/L` so the flow always
    /// integrates over unit time.
    pub fn new(d: usize, layers: Vec<Vec<F>>) -> Result<Self> {
        Self::with_biases(d, layers, None)
    }

    /// Builds parameters with optional biases.
    pub fn with_biases(
        d: usize,
        layers: Vec<Vec<F>>,
        biases: Option<Vec<Vec<F>>>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument(
                "flow dimension must be positive".to_string(),
            ));
        }
        if layers.is_empty() {
            return Err(Error::InvalidArgument(
                "flow needs at least one layer".to_string(),
            ));
        }
        for layer in &layers {
            if layer.len() != d * d {
                return Err(Error::DimensionMismatch {
                    expected: d * d,
                    got: layer.len(),
                });
            }
            if layer.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("layer weights".to_string()));
            }
        }
        if let Some(bs) = &biases {
            if bs.len() != layers.len() {
                return Err(Error::DimensionMismatch {
                    expected: layers.len(),
                    got: bs.len(),
                });
            }
            for b in bs {
                if b.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: b.len(),
                    });
                }
                if b.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("layer biases".to_string()));
                }
            }
        }
        let h = F::one() / F::from_usize(layers.len()).expect("layer count fits in a float");
        Ok(FlowParams {
            d,
            h,
            layers,
            biases,
        })
    }

    /// All-zero parameters: the identity transport.
    pub fn zeros(d: usize, depth: usize, use_bias: bool) -> Result<Self> {
        let layers = vec![vec![F::zero(); d * d]; depth];
        let biases = use_bias.then(|| vec![vec![F::zero(); d]; depth]);
        Self::with_biases(d, layers, biases)
    }

    /// Weights drawn from N(0, std^2); biases (when enabled) start at zero.
    pub fn random_init(
        d: usize,
        depth: usize,
        std: F,
        use_bias: bool,
        seed: Seed,
    ) -> Result<Self> {
        let mut rng = SeededRng::new(seed);
        let layers = (0..depth)
            .map(|_| {
                (0..d * d)
                    .map(|_| std * F::from_f64_lossy(rng.next_normal()))
                    .collect()
            })
            .collect();
        let biases = use_bias.then(|| vec![vec![F::zero(); d]; depth]);
        Self::with_biases(d, layers, biases)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of layers L; also the number of Euler steps.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Euler step size, always `1/depth`.
    pub fn step_size(&self) -> F {
        self.h
    }

    pub fn use_bias(&self) -> bool {
        self.biases.is_some()
    }

    pub fn layer(&self, j: usize) -> &[F] {
        &self.layers[j]
    }

    pub fn bias(&self, j: usize) -> Option<&[F]> {
        self.biases.as_ref().map(|bs| bs[j].as_slice())
    }

    /// Flattens all parameters (layers, then biases) into one vector; the
    /// layout matches [`FlowParams::from_flat`] and [`FlowGrad::flatten`].
    pub fn flatten(&self) -> Vec<F> {
        let mut out: Vec<F> = self.layers.iter().flatten().copied().collect();
        if let Some(bs) = &self.biases {
            out.extend(bs.iter().flatten().copied());
        }
        out
    }

    /// Rebuilds parameters from the flat layout of [`FlowParams::flatten`].
    pub fn from_flat(d: usize, depth: usize, use_bias: bool, flat: &[F]) -> Result<Self> {
        let expected = depth * d * d + if use_bias { depth * d } else { 0 };
        if flat.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: flat.len(),
            });
        }
        let layers = flat[..depth * d * d]
            .chunks(d * d)
            .map(<[F]>::to_vec)
            .collect();
        let biases = use_bias.then(|| {
            flat[depth * d * d..]
                .chunks(d)
                .map(<[F]>::to_vec)
                .collect()
        });
        Self::with_biases(d, layers, biases)
    }
}

/// Gradient container mirroring the [`FlowParams`] layout.
#[derive(Clone, Debug)]
pub struct FlowGrad<F> {
    pub layers: Vec<Vec<F>>,
    pub biases: Option<Vec<Vec<F>>>,
}

impl<F: Scalar> FlowGrad<F> {
    pub fn zeros_like(params: &FlowParams<F>) -> Self {
        FlowGrad {
            layers: vec![vec![F::zero(); params.d * params.d]; params.depth()],
            biases: params
                .biases
                .as_ref()
                .map(|bs| vec![vec![F::zero(); params.d]; bs.len()]),
        }
    }

    /// Flat view matching [`FlowParams::flatten`].
    pub fn flatten(&self) -> Vec<F> {
        let mut out: Vec<F> = self.layers.iter().flatten().copied().collect();
        if let Some(bs) = &self.biases {
            out.extend(bs.iter().flatten().copied());
        }
        out
    }

    /// Euclidean norm over all entries.
    pub fn norm(&self) -> F {
        let mut acc = F::zero();
        for l in &self.layers {
            for &v in l {
                acc += v * v;
            }
        }
        if let Some(bs) = &self.biases {
            for b in bs {
                for &v in b {
                    acc += v * v;
                }
            }
        }
        acc.sqrt()
    }
}

/// States and velocities along the flow: `states[0]` is the input cloud,
/// `states[j+1] = states[j] + h * velocities[j]`, and
/// `velocities[j] = tanh(states[j] K_j^T + b_j)`.
#[derive(Clone, Debug)]
pub struct FlowTrajectory<F> {
    pub states: Vec<Matrix<F>>,
    pub velocities: Vec<Matrix<F>>,
}

impl<F: Scalar> FlowTrajectory<F> {
    /// The transported cloud at time 1.
    pub fn output(&self) -> &Matrix<F> {
        self.states.last().expect("trajectory has L+1 states")
    }
}

fn check_input<F: Scalar>(params: &FlowParams<F>, x: &Matrix<F>) -> Result<()> {
    if x.cols() != params.d {
        return Err(Error::DimensionMismatch {
            expected: params.d,
            got: x.cols(),
        });
    }
    if x.rows() == 0 {
        return Err(Error::InvalidArgument(
            "flow input needs at least one particle".to_string(),
        ));
    }
    Ok(())
}

/// Velocity field of layer `j` at a single point: `tanh(K_j x + b_j)`.
pub fn flow_velocity<F: Scalar>(params: &FlowParams<F>, x: &[F], layer: usize) -> Result<Vec<F>> {
    if x.len() != params.d {
        return Err(Error::DimensionMismatch {
            expected: params.d,
            got: x.len(),
        });
    }
    if layer >= params.depth() {
        return Err(Error::InvalidArgument(format!(
            "layer {layer} out of range for depth {}",
            params.depth()
        )));
    }
    let d = params.d;
    let k = params.layer(layer);
    let bias = params.bias(layer);
    let mut out = Vec::with_capacity(d);
    for r in 0..d {
        let mut acc = bias.map_or(F::zero(), |b| b[r]);
        for (c, &xc) in x.iter().enumerate() {
            acc += k[r * d + c] * xc;
        }
        out.push(acc.tanh());
    }
    Ok(out)
}

/// Runs the forward Euler recurrence, keeping every state and velocity for
/// the backward pass.
pub fn flow_forward<F: Scalar>(params: &FlowParams<F>, x0: &Matrix<F>) -> Result<FlowTrajectory<F>> {
    check_input(params, x0)?;
    let (n, d) = (x0.rows(), params.d);
    let h = params.h;
    let mut states = Vec::with_capacity(params.depth() + 1);
    let mut velocities = Vec::with_capacity(params.depth());
    states.push(x0.clone());
    for j in 0..params.depth() {
        let k = params.layer(j);
        let bias = params.bias(j);
        let prev = states.last().expect("at least the input state");
        let mut vel = Matrix::zeros(n, d);
        let mut next = Matrix::zeros(n, d);
        for i in 0..n {
            let xi = prev.row(i);
            let vi = vel.row_mut(i);
            for r in 0..d {
                let mut acc = bias.map_or(F::zero(), |b| b[r]);
                for (c, &xc) in xi.iter().enumerate() {
                    acc += k[r * d + c] * xc;
                }
                vi[r] = acc.tanh();
            }
            let ni = next.row_mut(i);
            for r in 0..d {
                ni[r] = xi[r] + h * vi[r];
            }
        }
        velocities.push(vel);
        states.push(next);
    }
    Ok(FlowTrajectory { states, velocities })
}

/// Transports a cloud and returns only the final state.
pub fn push<F: Scalar>(params: &FlowParams<F>, x0: &Matrix<F>) -> Result<Matrix<F>> {
    Ok(flow_forward(params, x0)?
        .states
        .pop()
        .expect("trajectory has L+1 states"))
}

/// Reverse-mode sweep through the Euler recurrence.
///
/// `grad_out` holds the partial derivatives of a scalar loss with respect to
/// the final state; `grad_vel[j]` holds its *direct* partials with respect to
/// `velocities[j]` (zero matrices when the loss only reads the output).
/// Returns the parameter gradient and the gradient with respect to the input
/// cloud.
pub fn flow_backward<F: Scalar>(
    params: &FlowParams<F>,
    traj: &FlowTrajectory<F>,
    grad_out: &Matrix<F>,
    grad_vel: &[Matrix<F>],
) -> Result<(FlowGrad<F>, Matrix<F>)> {
    let depth = params.depth();
    let d = params.d;
    let n = traj.states[0].rows();
    if traj.states.len() != depth + 1 || traj.velocities.len() != depth {
        return Err(Error::InvalidArgument(format!(
            "trajectory shape (states {}, velocities {}) does not match depth {depth}",
            traj.states.len(),
            traj.velocities.len()
        )));
    }
    if grad_out.rows() != n || grad_out.cols() != d {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            got: grad_out.rows() * grad_out.cols(),
        });
    }
    if grad_vel.len() != depth {
        return Err(Error::DimensionMismatch {
            expected: depth,
            got: grad_vel.len(),
        });
    }
    for gv in grad_vel {
        if gv.rows() != n || gv.cols() != d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                got: gv.rows() * gv.cols(),
            });
        }
    }

    let h = params.h;
    let mut grad = FlowGrad::zeros_like(params);
    // adjoint of the state, initialized at the output
    let mut a = grad_out.clone();
    for j in (0..depth).rev() {
        let vel = &traj.velocities[j];
        let state = &traj.states[j];
        let k = params.layer(j);
        let dk = &mut grad.layers[j];
        // pbar = (h * a + grad_vel[j]) .* tanh'(pre) with tanh' = 1 - v^2
        let mut pbar = Matrix::zeros(n, d);
        for i in 0..n {
            let ai = a.row(i);
            let gi = grad_vel[j].row(i);
            let vi = vel.row(i);
            let pi = pbar.row_mut(i);
            for r in 0..d {
                pi[r] = (h * ai[r] + gi[r]) * (F::one() - vi[r] * vi[r]);
            }
        }
        // dK_j += pbar^T state;  db_j += column sums of pbar;
        // a <- a + pbar K_j
        for i in 0..n {
            let pi = pbar.row(i);
            let xi = state.row(i);
            for r in 0..d {
                let pir = pi[r];
                for c in 0..d {
                    dk[r * d + c] += pir * xi[c];
                }
            }
            let ai = a.row_mut(i);
            for c in 0..d {
                let mut acc = F::zero();
                for r in 0..d {
                    acc += pi[r] * k[r * d + c];
                }
                ai[c] += acc;
            }
        }
        if let Some(bs) = &mut grad.biases {
            let db = &mut bs[j];
            for i in 0..n {
                let pi = pbar.row(i);
                for r in 0..d {
                    db[r] += pi[r];
                }
            }
        }
    }
    Ok((grad, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numdiff::finite_diff;
    use proptest::prelude::*;

    fn vec_matrix(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn zero_weights_give_identity_transport() {
        let params = FlowParams::<f64>::zeros(2, 3, false).unwrap();
        let x = vec_matrix(&[&[0.5, -1.5], &[2.0, 0.0]]);
        let out = push(&params, &x).unwrap();
        assert_eq!(out, x, "tanh(0) = 0 so every state is the input");
    }

    #[test]
    fn single_layer_hand_value() {
        // d=1, L=1, K=[1], x0=[1]: x1 = 1 + tanh(1) = 1.7615941559557649
        let params = FlowParams::new(1, vec![vec![1.0f64]]).unwrap();
        let x = vec_matrix(&[&[1.0]]);
        let out = push(&params, &x).unwrap();
        assert!((out[(0, 0)] - 1.761_594_155_955_764_9).abs() < 1e-15);
    }

    #[test]
    fn step_size_is_reciprocal_depth() {
        let params = FlowParams::<f64>::zeros(2, 8, false).unwrap();
        assert_eq!(params.step_size(), 0.125);
        assert_eq!(params.depth(), 8);
    }

    #[test]
    fn velocity_matches_trajectory_entries() {
        let params = FlowParams::random_init(3, 4, 0.7f64, true, Seed(2)).unwrap();
        let x = crate::rng::gaussian_sample(5, 3, Seed(3)).unwrap();
        let traj = flow_forward(&params, &x).unwrap();
        for j in 0..params.depth() {
            for i in 0..x.rows() {
                let v = flow_velocity(&params, traj.states[j].row(i), j).unwrap();
                for r in 0..3 {
                    assert!(
                        (v[r] - traj.velocities[j][(i, r)]).abs() < 1e-15,
                        "pointwise velocity must match the forward pass"
                    );
                }
            }
        }
    }

    #[test]
    fn mismatched_input_dimension_is_rejected() {
        let params = FlowParams::<f64>::zeros(2, 2, false).unwrap();
        let x = vec_matrix(&[&[1.0, 2.0, 3.0]]);
        assert!(matches!(
            flow_forward(&params, &x),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn flat_round_trip_preserves_params() {
        let params = FlowParams::random_init(2, 3, 0.5, true, Seed(11)).unwrap();
        let rebuilt =
            FlowParams::from_flat(2, 3, true, &params.flatten()).unwrap();
        assert_eq!(params, rebuilt);
    }

    #[test]
    fn backward_matches_hand_formula_single_layer() {
        // L=1, loss = sum(states[1]): dK = h (1 - tanh(Kx)^2) x, here h=1.
        let kval = 0.8f64;
        let xval = 1.3f64;
        let params = FlowParams::new(1, vec![vec![kval]]).unwrap();
        let x = vec_matrix(&[&[xval]]);
        let traj = flow_forward(&params, &x).unwrap();
        let ones = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let zeros = vec![Matrix::zeros(1, 1)];
        let (grad, grad_in) = flow_backward(&params, &traj, &ones, &zeros).unwrap();
        let t = (kval * xval).tanh();
        let expected_k = (1.0 - t * t) * xval;
        let expected_x = 1.0 + (1.0 - t * t) * kval;
        assert!((grad.layers[0][0] - expected_k).abs() < 1e-15);
        assert!((grad_in[(0, 0)] - expected_x).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_finite_differences() {
        // 50 random configurations; relative error < 1e-6 against the
        // central-difference oracle on a scalar probe loss that reads both
        // the output state and the velocities.
        let mut worst = 0.0f64;
        for trial in 0..50u64 {
            let mut rng = SeededRng::new(Seed(1000 + trial));
            let d = 1 + (rng.next_index(3));
            let depth = 1 + (rng.next_index(4));
            let n = 1 + (rng.next_index(8));
            let use_bias = trial % 2 == 0;
            let params = FlowParams::random_init(
                d,
                depth,
                0.6,
                use_bias,
                Seed(2000 + trial),
            )
            .unwrap();
            let x = crate::rng::gaussian_sample::<f64>(n, d, Seed(3000 + trial)).unwrap();
            // probe loss: sum(w_out .* out) + sum over layers of w_j .* vel_j
            let w_out = crate::rng::gaussian_sample::<f64>(n, d, Seed(4000 + trial)).unwrap();
            let w_vel: Vec<Matrix<f64>> = (0..depth)
                .map(|j| {
                    crate::rng::gaussian_sample(n, d, Seed(5000 + trial * 7 + j as u64))
                        .unwrap()
                })
                .collect();
            let loss = |p: &FlowParams<f64>| -> f64 {
                let traj = flow_forward(p, &x).unwrap();
                let mut acc = 0.0;
                for (o, w) in traj.output().data().iter().zip(w_out.data()) {
                    acc += o * w;
                }
                for (vel, w) in traj.velocities.iter().zip(&w_vel) {
                    for (v, wi) in vel.data().iter().zip(w.data()) {
                        acc += v * wi;
                    }
                }
                acc
            };
            let traj = flow_forward(&params, &x).unwrap();
            let (grad, _) = flow_backward(&params, &traj, &w_out, &w_vel).unwrap();
            let analytic = grad.flatten();
            let flat = params.flatten();
            let fd = finite_diff(
                |v| loss(&FlowParams::from_flat(d, depth, use_bias, v).unwrap()),
                &flat,
                1e-5,
            )
            .unwrap();
            let num: f64 = analytic
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let den: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-30);
            worst = worst.max(num / den);
        }
        assert!(
            worst < 1e-6,
            "worst flow gradient relative error {worst} exceeds 1e-6"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn per_layer_step_is_bounded_by_h(
            seed in 0u64..1_000,
            d in 1usize..4,
            depth in 1usize..6,
            scale in 0.1f64..20.0,
        ) {
            let params = FlowParams::random_init(d, depth, scale, false, Seed(seed)).unwrap();
            let x = crate::rng::gaussian_sample::<f64>(4, d, Seed(seed + 1)).unwrap();
            let traj = flow_forward(&params, &x).unwrap();
            let h = params.step_size();
            // Exact bound in real arithmetic; the slack absorbs one rounding
            // of x + h*v followed by the subtraction.
            let slack = 1e-14;
            for j in 0..depth {
                for i in 0..4 {
                    for c in 0..d {
                        let dx = (traj.states[j + 1][(i, c)] - traj.states[j][(i, c)]).abs();
                        prop_assert!(
                            dx <= h + slack,
                            "|tanh| <= 1 bounds every coordinate step by h, got {dx} vs {h}"
                        );
                    }
                }
            }
        }

        #[test]
        fn forward_is_deterministic(seed in 0u64..500) {
            let params = FlowParams::random_init(2, 3, 0.5, true, Seed(seed)).unwrap();
            let x = crate::rng::gaussian_sample::<f64>(3, 2, Seed(seed ^ 0xabc)).unwrap();
            let a = flow_forward(&params, &x).unwrap();
            let b = flow_forward(&params, &x).unwrap();
            for (sa, sb) in a.states.iter().zip(&b.states) {
                prop_assert_eq!(sa.data(), sb.data());
            }
        }
    }
}
