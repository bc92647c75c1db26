//! Minibatch training of the transport flow with an annealed bandwidth.
//!
//! Training sweeps the mixture bandwidth from coarse to fine on a fixed
//! schedule: `sigma(epoch) = max(floor, initial / factor^(epoch div period))`.
//! Within one bandwidth block the trainer runs plain stochastic minimization
//! (Adam or gradient descent) of the objective on batch pairs drawn without
//! replacement from freshly shuffled template and reference clouds.
//!
//! Two numerical choices matter and are part of the contract:
//!
//! - **Gradient preconditioning.** The misfit carries the squared mixture
//!   coefficient `(2 pi sigma^2)^(-d)`, which in high dimension at coarse
//!   bandwidth drops far below Adam's epsilon and stalls every update. Each
//!   batch gradient is therefore multiplied by the inverse of that factor, a
//!   positive constant within a bandwidth block, so update directions are
//!   unchanged and block objectives are exact positive rescales. Recorded
//!   history always reports the unscaled objective.
//! - **Optimizer reset at bandwidth changes.** Each block is a fresh
//!   objective at a very different scale; Adam's moment estimates and step
//!   counter restart at every sigma change so stale second moments from the
//!   previous block cannot freeze the step size.

use crate::error::{Error, Result};
use crate::float::Scalar;
use crate::flow::{FlowGrad, FlowParams};
use crate::kernel::KernelConfig;
use crate::matrix::Matrix;
use crate::objective::{self, ObjectiveConfig, ObjectiveValue};
use crate::rng::{Seed, SeededRng};

/// Piecewise-constant bandwidth annealing schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaSchedule<F> {
    pub initial: F,
    pub factor: F,
    pub period: usize,
    pub floor: F,
}

impl<F: Scalar> Default for SigmaSchedule<F> {
    fn default() -> Self {
        SigmaSchedule {
            initial: F::from_f64_lossy(50.0),
            factor: F::from_f64_lossy(2.0),
            period: 30,
            floor: F::from_f64_lossy(0.78),
        }
    }
}

impl<F: Scalar> SigmaSchedule<F> {
    pub fn new(initial: F, factor: F, period: usize, floor: F) -> Result<Self> {
        let schedule = SigmaSchedule {
            initial,
            factor,
            period,
            floor,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// A constant bandwidth: useful for fixed-sigma experiments.
    pub fn constant(sigma: F) -> Result<Self> {
        Self::new(sigma, F::one(), 1, sigma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial > F::zero()) || !self.initial.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "schedule initial bandwidth must be positive and finite, got {}",
                self.initial
            )));
        }
        if !(self.factor >= F::one()) || !self.factor.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "schedule factor must be at least 1, got {}",
                self.factor
            )));
        }
        if self.period == 0 {
            return Err(Error::InvalidArgument(
                "schedule period must be positive".to_string(),
            ));
        }
        if !(self.floor > F::zero()) || !self.floor.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "schedule floor must be positive and finite, got {}",
                self.floor
            )));
        }
        Ok(())
    }

    /// Bandwidth used during `epoch`:
    /// `max(floor, initial / factor^(epoch div period))`.
    pub fn sigma_at(&self, epoch: usize) -> F {
        let halvings = (epoch / self.period) as i32;
        let sigma = self.initial / self.factor.powi(halvings);
        if sigma > self.floor {
            sigma
        } else {
            self.floor
        }
    }
}

/// Which update rule consumes the batch gradients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    /// Adam with beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8, bias-corrected.
    Adam,
    /// Plain gradient descent.
    Descent,
}

/// Everything `train` needs besides the data.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig<F> {
    /// Energy weight of the trained objective.
    pub alpha: F,
    pub learning_rate: F,
    pub epochs: usize,
    pub batch_size: usize,
    /// Smallest batch the misfit is trusted on; see [`TrainConfig::validate`].
    pub min_batch_size: usize,
    /// Waives the minimum batch check for deliberate small-data experiments.
    pub allow_small_batch: bool,
    /// Batches per epoch; `None` means one pass over the smaller cloud.
    pub steps_per_epoch: Option<usize>,
    pub schedule: SigmaSchedule<F>,
    pub optimizer: OptimizerKind,
    pub seed: Seed,
    /// Standard deviation of the random weight initialization.
    pub init_std: F,
    /// Number of residual layers in the trained flow.
    pub layers: usize,
    pub use_bias: bool,
}

impl<F: Scalar> TrainConfig<F> {
    pub fn new(seed: Seed) -> Self {
        TrainConfig {
            alpha: F::from_f64_lossy(5e-5),
            learning_rate: F::from_f64_lossy(0.02),
            epochs: 2000,
            batch_size: 256,
            min_batch_size: 64,
            allow_small_batch: false,
            steps_per_epoch: None,
            schedule: SigmaSchedule::default(),
            optimizer: OptimizerKind::Adam,
            seed,
            init_std: F::from_f64_lossy(0.01),
            layers: 10,
            use_bias: false,
        }
    }

    pub fn with_alpha(mut self, alpha: F) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_learning_rate(mut self, learning_rate: F) -> Self {
        self.learning_rate = learning_rate;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn with_schedule(mut self, schedule: SigmaSchedule<F>) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_optimizer(mut self, optimizer: OptimizerKind) -> Self {
        self.optimizer = optimizer;
        self
    }

    pub fn with_layers(mut self, layers: usize) -> Self {
        self.layers = layers;
        self
    }

    /// Checks the configuration against the data sizes.
    pub fn validate(&self, n_template: usize, n_reference: usize) -> Result<()> {
        self.schedule.validate()?;
        if self.layers == 0 {
            return Err(Error::InvalidArgument(
                "flow needs at least one layer".to_string(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch size must be positive".to_string(),
            ));
        }
        if !(self.learning_rate > F::zero()) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if !(self.alpha >= F::zero()) || !self.alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "energy weight must be nonnegative and finite, got {}",
                self.alpha
            )));
        }
        if !(self.init_std >= F::zero()) || !self.init_std.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "init std must be nonnegative and finite, got {}",
                self.init_std
            )));
        }
        if self.steps_per_epoch == Some(0) {
            return Err(Error::InvalidArgument(
                "steps per epoch must be positive when set".to_string(),
            ));
        }
        let effective = self.batch_size.min(n_template).min(n_reference);
        if effective < self.min_batch_size && !self.allow_small_batch {
            return Err(Error::InvalidArgument(format!(
                "effective batch size {effective} is below the minimum {}: the misfit \
                 compares batch mixture densities, and batches this small do not \
                 represent either distribution, so its value is mostly sampling noise. \
                 Increase the batch or data size, or set allow_small_batch to proceed \
                 anyway",
                self.min_batch_size
            )));
        }
        Ok(())
    }
}

/// Full-data objective snapshot taken after each epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord<F> {
    pub epoch: usize,
    pub sigma: F,
    pub misfit: F,
    pub energy: F,
    pub total: F,
    /// Mean norm of the preconditioned batch gradients consumed this epoch.
    pub grad_norm: F,
}

/// Per-epoch records in order.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainHistory<F> {
    pub records: Vec<EpochRecord<F>>,
}

impl<F> Default for TrainHistory<F> {
    fn default() -> Self {
        TrainHistory {
            records: Vec::new(),
        }
    }
}

impl<F: Scalar> TrainHistory<F> {
    pub fn last(&self) -> Option<&EpochRecord<F>> {
        self.records.last()
    }
}

/// Trained parameters plus the epoch history.
#[derive(Clone, Debug)]
pub struct TrainOutcome<F> {
    pub params: FlowParams<F>,
    pub history: TrainHistory<F>,
}

/// Draws index batches from a repeatedly shuffled cloud, without replacement
/// inside one shuffle. A tail shorter than `min_batch` is folded into the
/// preceding batch rather than emitted on its own.
struct BatchStream {
    indices: Vec<usize>,
    cursor: usize,
}

impl BatchStream {
    fn new(n: usize) -> Self {
        BatchStream {
            indices: (0..n).collect(),
            cursor: 0,
        }
    }

    fn reset(&mut self, rng: &mut SeededRng) {
        rng.shuffle(&mut self.indices);
        self.cursor = 0;
    }

    fn next_batch(&mut self, rng: &mut SeededRng, batch: usize, min_batch: usize) -> &[usize] {
        let n = self.indices.len();
        if self.cursor >= n {
            self.reset(rng);
        }
        let remaining = n - self.cursor;
        let take = if remaining <= batch || remaining - batch < min_batch {
            remaining
        } else {
            batch
        };
        let start = self.cursor;
        self.cursor += take;
        &self.indices[start..start + take]
    }
}

/// Batches in one pass over `n` points, under the tail-folding rule.
fn natural_steps(n: usize, batch: usize, min_batch: usize) -> usize {
    let full = n / batch;
    let rem = n % batch;
    if rem == 0 {
        full.max(1)
    } else if rem < min_batch && full >= 1 {
        full
    } else {
        full + 1
    }
}

struct Optimizer<F> {
    kind: OptimizerKind,
    learning_rate: F,
    m: Vec<F>,
    v: Vec<F>,
    t: i32,
}

impl<F: Scalar> Optimizer<F> {
    fn new(kind: OptimizerKind, learning_rate: F, len: usize) -> Self {
        Optimizer {
            kind,
            learning_rate,
            m: vec![F::zero(); len],
            v: vec![F::zero(); len],
            t: 0,
        }
    }

    /// Clears all moment estimates; called at every bandwidth change.
    fn reset(&mut self) {
        self.m.iter_mut().for_each(|x| *x = F::zero());
        self.v.iter_mut().for_each(|x| *x = F::zero());
        self.t = 0;
    }

    fn step(&mut self, params: &mut [F], grad: &[F]) {
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Descent => {
                for (p, &g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                let b1 = F::from_f64_lossy(0.9);
                let b2 = F::from_f64_lossy(0.999);
                let eps = F::from_f64_lossy(1e-8);
                self.t += 1;
                let bc1 = F::one() - b1.powi(self.t);
                let bc2 = F::one() - b2.powi(self.t);
                for ((p, &g), (m, v)) in params
                    .iter_mut()
                    .zip(grad)
                    .zip(self.m.iter_mut().zip(self.v.iter_mut()))
                {
                    *m = b1 * *m + (F::one() - b1) * g;
                    *v = b2 * *v + (F::one() - b2) * g * g;
                    let mhat = *m / bc1;
                    let vhat = *v / bc2;
                    *p -= lr * mhat / (vhat.sqrt() + eps);
                }
            }
        }
    }
}

/// Unscaled full-data objective at an explicit bandwidth; this is what the
/// epoch history records and what evaluation tools report.
pub fn evaluate_full<F: Scalar>(
    cfg: &TrainConfig<F>,
    params: &FlowParams<F>,
    template: &Matrix<F>,
    reference: &Matrix<F>,
    sigma: F,
) -> Result<ObjectiveValue<F>> {
    let kernel = KernelConfig::new(sigma, template.cols())?;
    let obj = ObjectiveConfig::new(kernel).with_alpha(cfg.alpha);
    objective::evaluate(&obj, params, template, reference)
}

/// Trains a flow that transports `template` onto `reference`.
pub fn train<F: Scalar>(
    cfg: &TrainConfig<F>,
    template: &Matrix<F>,
    reference: &Matrix<F>,
) -> Result<TrainOutcome<F>> {
    if template.cols() != reference.cols() {
        return Err(Error::DimensionMismatch {
            expected: template.cols(),
            got: reference.cols(),
        });
    }
    if template.rows() == 0 || reference.rows() == 0 {
        return Err(Error::InvalidArgument(
            "training needs non-empty template and reference clouds".to_string(),
        ));
    }
    cfg.validate(template.rows(), reference.rows())?;

    let d = template.cols();
    let n_t = template.rows();
    let n_r = reference.rows();
    let batch = cfg.batch_size.min(n_t).min(n_r);
    let min_batch = cfg.min_batch_size.min(batch);
    let steps = cfg
        .steps_per_epoch
        .unwrap_or_else(|| natural_steps(n_t.min(n_r), batch, min_batch));

    let params = FlowParams::random_init(
        d,
        cfg.layers,
        cfg.init_std,
        cfg.use_bias,
        cfg.seed.stream(1),
    )?;
    let mut flat = params.flatten();
    let mut shuffle_rng = SeededRng::new(cfg.seed.stream(2));
    let mut stream_t = BatchStream::new(n_t);
    let mut stream_r = BatchStream::new(n_r);
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, flat.len());

    let mut history = TrainHistory::default();
    let mut sigma = cfg.schedule.sigma_at(0);
    let mut obj_cfg =
        ObjectiveConfig::new(KernelConfig::new(sigma, d)?).with_alpha(cfg.alpha);
    // Inverse of the squared mixture coefficient: the per-block gradient
    // preconditioner.
    let mut precondition = {
        let c = obj_cfg.kernel.coefficient();
        F::one() / (c * c)
    };

    for epoch in 0..cfg.epochs {
        let sigma_now = cfg.schedule.sigma_at(epoch);
        if sigma_now != sigma {
            sigma = sigma_now;
            obj_cfg = ObjectiveConfig::new(KernelConfig::new(sigma, d)?).with_alpha(cfg.alpha);
            let c = obj_cfg.kernel.coefficient();
            precondition = F::one() / (c * c);
            optimizer.reset();
        }

        stream_t.reset(&mut shuffle_rng);
        stream_r.reset(&mut shuffle_rng);
        let mut grad_norm_sum = F::zero();
        for _ in 0..steps {
            let idx_t = stream_t
                .next_batch(&mut shuffle_rng, batch, min_batch)
                .to_vec();
            let idx_r = stream_r
                .next_batch(&mut shuffle_rng, batch, min_batch)
                .to_vec();
            let batch_t = template.gather_rows(&idx_t);
            let batch_r = reference.gather_rows(&idx_r);
            let params_now = FlowParams::from_flat(d, cfg.layers, cfg.use_bias, &flat)?;
            let (_, grad) = objective::gradient(&obj_cfg, &params_now, &batch_t, &batch_r)?;
            let scaled = scale_grad(&grad, precondition);
            let mut norm = F::zero();
            for &g in &scaled {
                norm += g * g;
            }
            grad_norm_sum += norm.sqrt();
            optimizer.step(&mut flat, &scaled);
        }

        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "flow parameters after epoch {epoch}"
            )));
        }
        let params_now = FlowParams::from_flat(d, cfg.layers, cfg.use_bias, &flat)?;
        let value = evaluate_full(cfg, &params_now, template, reference, sigma)?;
        if !value.total.is_finite() {
            return Err(Error::NonFinite(format!("objective after epoch {epoch}")));
        }
        history.records.push(EpochRecord {
            epoch,
            sigma,
            misfit: value.misfit,
            energy: value.energy,
            total: value.total,
            grad_norm: grad_norm_sum / F::from_usize(steps).expect("step count fits in a float"),
        });
    }

    let params = FlowParams::from_flat(d, cfg.layers, cfg.use_bias, &flat)?;
    Ok(TrainOutcome { params, history })
}

fn scale_grad<F: Scalar>(grad: &FlowGrad<F>, factor: F) -> Vec<F> {
    grad.flatten().into_iter().map(|g| g * factor).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::gaussian_sample;
    use proptest::prelude::*;

    fn small_task(n: usize, d: usize, seed: u64) -> (Matrix<f64>, Matrix<f64>) {
        let t = gaussian_sample(n, d, Seed(seed)).unwrap();
        let r = gaussian_sample(n, d, Seed(seed + 1)).unwrap();
        (t, r)
    }

    fn quick_config(seed: u64) -> TrainConfig<f64> {
        TrainConfig::new(Seed(seed))
            .with_epochs(3)
            .with_batch_size(64)
            .with_layers(2)
    }

    #[test]
    fn sigma_schedule_matches_hand_values() {
        let schedule = SigmaSchedule::<f64>::default();
        assert_eq!(schedule.sigma_at(0), 50.0);
        assert_eq!(schedule.sigma_at(29), 50.0);
        assert_eq!(schedule.sigma_at(30), 25.0);
        assert_eq!(schedule.sigma_at(199), 0.78125, "50 / 2^6");
    }

    #[test]
    fn sigma_schedule_clamps_at_the_floor() {
        let schedule = SigmaSchedule::<f64>::default();
        // 50 / 2^7 = 0.390625 < 0.78, so epoch 210 onward stays at the floor
        assert_eq!(schedule.sigma_at(210), 0.78);
        assert_eq!(schedule.sigma_at(100_000), 0.78);
    }

    #[test]
    fn natural_steps_cover_one_pass() {
        assert_eq!(natural_steps(1000, 256, 64), 4, "256+256+256+232");
        assert_eq!(natural_steps(512, 256, 64), 2);
        assert_eq!(natural_steps(300, 256, 64), 1, "tail 44 folds into batch 1");
        assert_eq!(natural_steps(100, 256, 64), 1);
        assert_eq!(natural_steps(256, 256, 64), 1);
    }

    #[test]
    fn batch_stream_emits_each_index_once_per_pass() {
        let mut rng = SeededRng::new(Seed(5));
        let mut stream = BatchStream::new(1000);
        stream.reset(&mut rng);
        let mut seen = vec![false; 1000];
        let mut sizes = Vec::new();
        for _ in 0..natural_steps(1000, 256, 64) {
            let batch = stream.next_batch(&mut rng, 256, 64).to_vec();
            sizes.push(batch.len());
            for i in batch {
                assert!(!seen[i], "index {i} drawn twice in one pass");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s), "every index appears in the pass");
        assert_eq!(sizes, vec![256, 256, 256, 232]);
    }

    #[test]
    fn small_batches_are_rejected_with_a_rationale() {
        let (t, r) = small_task(40, 2, 1);
        let cfg = quick_config(2);
        let err = train(&cfg, &t, &r).unwrap_err();
        let message = err.to_string();
        assert!(
            message.contains("sampling noise"),
            "the error should explain why tiny batches are refused: {message}"
        );
        let mut relaxed = quick_config(2);
        relaxed.allow_small_batch = true;
        assert!(train(&relaxed, &t, &r).is_ok());
    }

    #[test]
    fn training_is_bit_identical_across_reruns() {
        let (t, r) = small_task(96, 2, 3);
        let cfg = quick_config(4).with_batch_size(48).with_epochs(4);
        let mut cfg = cfg;
        cfg.min_batch_size = 32;
        let a = train(&cfg, &t, &r).unwrap();
        let b = train(&cfg, &t, &r).unwrap();
        let fa = a.params.flatten();
        let fb = b.params.flatten();
        assert_eq!(fa.len(), fb.len());
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(x.to_bits(), y.to_bits(), "reruns must agree bitwise");
        }
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn different_seeds_give_different_parameters() {
        let (t, r) = small_task(80, 2, 6);
        let mut cfg_a = quick_config(7).with_batch_size(80);
        cfg_a.min_batch_size = 64;
        let mut cfg_b = cfg_a.clone();
        cfg_b.seed = Seed(8);
        let a = train(&cfg_a, &t, &r).unwrap();
        let b = train(&cfg_b, &t, &r).unwrap();
        assert_ne!(a.params.flatten(), b.params.flatten());
    }

    #[test]
    fn gradient_descent_descends_monotonically_at_fixed_sigma() {
        // Full-batch descent on a smooth objective with a small step must
        // reduce the total every epoch; this guards sign errors end to end.
        let (t, r) = small_task(64, 2, 9);
        let mut cfg = TrainConfig::new(Seed(10))
            .with_epochs(10)
            .with_batch_size(64)
            .with_layers(3)
            .with_alpha(0.0)
            .with_learning_rate(1e-3)
            .with_optimizer(OptimizerKind::Descent)
            .with_schedule(SigmaSchedule::constant(1.0).unwrap());
        cfg.init_std = 0.05;
        let outcome = train(&cfg, &t, &r).unwrap();
        let totals: Vec<f64> = outcome.history.records.iter().map(|e| e.total).collect();
        for w in totals.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-15,
                "full-batch descent must not increase the objective: {totals:?}"
            );
        }
    }

    #[test]
    fn identical_clouds_with_zero_init_stay_near_zero() {
        // Template and reference batches are shuffled independently, so the
        // batch misfit of two copies of one cloud is floating-point dust
        // rather than an exact zero; plain descent must not amplify it.
        let t = gaussian_sample::<f64>(64, 2, Seed(11)).unwrap();
        let mut cfg = quick_config(12)
            .with_batch_size(64)
            .with_epochs(3)
            .with_optimizer(OptimizerKind::Descent);
        cfg.init_std = 0.0;
        let outcome = train(&cfg, &t, &t.clone()).unwrap();
        for record in &outcome.history.records {
            assert!(
                record.misfit < 1e-20,
                "matched clouds must stay matched, misfit {}",
                record.misfit
            );
            assert!(record.energy < 1e-20);
        }
        assert!(outcome.params.flatten().iter().all(|&v| v.abs() < 1e-10));
    }

    #[test]
    fn evaluate_full_matches_the_objective_module() {
        let (t, r) = small_task(30, 2, 13);
        let cfg = TrainConfig::new(Seed(14)).with_alpha(0.25);
        let params = FlowParams::random_init(2, 4, 0.3, false, Seed(15)).unwrap();
        let via_trainer = evaluate_full(&cfg, &params, &t, &r, 1.3).unwrap();
        let obj = ObjectiveConfig::new(KernelConfig::new(1.3, 2).unwrap()).with_alpha(0.25);
        let direct = objective::evaluate(&obj, &params, &t, &r).unwrap();
        assert_eq!(via_trainer, direct);
    }

    #[test]
    fn history_has_one_record_per_epoch_with_schedule_sigmas() {
        let (t, r) = small_task(70, 2, 16);
        let mut cfg = quick_config(17).with_batch_size(70).with_epochs(5);
        cfg.min_batch_size = 64;
        cfg.schedule = SigmaSchedule::new(4.0, 2.0, 2, 0.5).unwrap();
        let outcome = train(&cfg, &t, &r).unwrap();
        assert_eq!(outcome.history.records.len(), 5);
        let sigmas: Vec<f64> = outcome.history.records.iter().map(|e| e.sigma).collect();
        assert_eq!(sigmas, vec![4.0, 4.0, 2.0, 2.0, 1.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sigma_schedule_is_nonincreasing(
            initial in 0.5f64..100.0,
            factor in 1.0f64..4.0,
            period in 1usize..10,
            floor in 0.01f64..0.5,
        ) {
            let schedule = SigmaSchedule::new(initial, factor, period, floor).unwrap();
            let mut prev = schedule.sigma_at(0);
            for epoch in 1..200 {
                let sigma = schedule.sigma_at(epoch);
                prop_assert!(sigma <= prev, "bandwidth must never grow");
                prop_assert!(sigma >= floor);
                prev = sigma;
            }
        }

        #[test]
        fn natural_steps_counts_match_stream_exhaustion(
            n in 1usize..2000,
            batch in 1usize..512,
            min_batch in 1usize..128,
        ) {
            let batch = batch.min(n);
            let min_batch = min_batch.min(batch);
            let mut rng = SeededRng::new(Seed(42));
            let mut stream = BatchStream::new(n);
            stream.reset(&mut rng);
            let steps = natural_steps(n, batch, min_batch);
            let mut drawn = 0usize;
            for _ in 0..steps {
                drawn += stream.next_batch(&mut rng, batch, min_batch).len();
            }
            prop_assert_eq!(drawn, n, "one pass must cover the cloud exactly");
        }
    }
}
