//! Gaussian mixture densities and the density-matching misfit.
//!
//! A point cloud B defines the mixture
//! `p(x; B) = nu_B * sum_i (2 pi sigma^2)^(-d/2) * exp(-|x - B_i|^2 / sigma^2)`
//! where `nu_B = 1/|B|` when the mixture is normalized and 1 otherwise. Note
//! the exponent divides by `sigma^2`, not `2 sigma^2`; this convention is part
//! of the numeric contract and every frozen value in the tests bakes it in.
//!
//! The misfit between a template cloud T (n points) and a reference cloud R
//! (m points) compares the two mixtures on both clouds:
//!
//! ```text
//! a_l = p(T_l; T) - p(T_l; R)      b_k = p(R_k; T) - p(R_k; R)
//! M(T, R) = 1/(2n) * sum_l a_l^2 + 1/(2m) * sum_k b_k^2
//! ```
//!
//! Exponents beyond 700 are treated as exact zeros (exp(-700) is around
//! 1e-304, the edge of f64 range); the same floor applies inside gradients so
//! value and derivative stay consistent.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::float::Scalar;
use crate::matrix::Matrix;

/// Largest exponent `|x - p|^2 / sigma^2` that still contributes a term.
const EXPONENT_FLOOR: f64 = 700.0;

/// Bandwidth, dimension, and normalization convention of the mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelConfig<F> {
    sigma: F,
    dim: usize,
    normalized: bool,
}

impl<F: Scalar> KernelConfig<F> {
    /// A normalized mixture with bandwidth `sigma` in dimension `dim`.
    pub fn new(sigma: F, dim: usize) -> Result<Self> {
        if !(sigma > F::zero()) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "kernel bandwidth must be positive and finite, got {sigma}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "kernel dimension must be positive".to_string(),
            ));
        }
        Ok(KernelConfig {
            sigma,
            dim,
            normalized: true,
        })
    }

    /// Toggles the `1/|B|` mixture normalization.
    pub fn with_normalized(mut self, normalized: bool) -> Self {
        self.normalized = normalized;
        self
    }

    /// Same configuration at a different bandwidth.
    pub fn with_sigma(&self, sigma: F) -> Result<Self> {
        let mut out = KernelConfig::new(sigma, self.dim)?;
        out.normalized = self.normalized;
        Ok(out)
    }

    pub fn sigma(&self) -> F {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    /// The per-component coefficient `(2 pi sigma^2)^(-d/2)`.
    pub fn coefficient(&self) -> F {
        let two_pi_s2 = F::PI() * F::from_f64_lossy(2.0) * self.sigma * self.sigma;
        let half_d = F::from_usize(self.dim).expect("dimension fits in a float")
            * F::from_f64_lossy(0.5);
        two_pi_s2.powf(-half_d)
    }

    fn weight(&self, count: usize) -> F {
        if self.normalized {
            F::one() / F::from_usize(count).expect("cloud size fits in a float")
        } else {
            F::one()
        }
    }

    fn check_cloud(&self, name: &str, cloud: &Matrix<F>) -> Result<()> {
        if cloud.cols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: cloud.cols(),
            });
        }
        if cloud.rows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "{name} cloud must contain at least one point"
            )));
        }
        Ok(())
    }
}

#[inline]
fn squared_distance<F: Scalar>(x: &[F], y: &[F]) -> F {
    let mut acc = F::zero();
    for (&a, &b) in x.iter().zip(y) {
        let diff = a - b;
        acc += diff * diff;
    }
    acc
}

/// Mixture density induced by `basis`, evaluated at one point.
pub fn density_at<F: Scalar>(cfg: &KernelConfig<F>, basis: &Matrix<F>, x: &[F]) -> Result<F> {
    cfg.check_cloud("basis", basis)?;
    if x.len() != cfg.dim {
        return Err(Error::DimensionMismatch {
            expected: cfg.dim,
            got: x.len(),
        });
    }
    let inv_s2 = F::one() / (cfg.sigma * cfg.sigma);
    let floor = F::from_f64_lossy(EXPONENT_FLOOR);
    let mut sum = F::zero();
    for i in 0..basis.rows() {
        let q = squared_distance(x, basis.row(i)) * inv_s2;
        if q <= floor {
            sum += (-q).exp();
        }
    }
    Ok(cfg.weight(basis.rows()) * cfg.coefficient() * sum)
}

/// Mixture density induced by `basis`, evaluated at every row of `eval`.
///
/// Rows are processed in parallel and collected in order, so the result is
/// bit-identical for any rayon worker count.
pub fn density_vector<F: Scalar>(
    cfg: &KernelConfig<F>,
    basis: &Matrix<F>,
    eval: &Matrix<F>,
) -> Result<Vec<F>> {
    cfg.check_cloud("basis", basis)?;
    cfg.check_cloud("evaluation", eval)?;
    let inv_s2 = F::one() / (cfg.sigma * cfg.sigma);
    let floor = F::from_f64_lossy(EXPONENT_FLOOR);
    let scale = cfg.weight(basis.rows()) * cfg.coefficient();
    let out = (0..eval.rows())
        .into_par_iter()
        .map(|l| {
            let x = eval.row(l);
            let mut sum = F::zero();
            for i in 0..basis.rows() {
                let q = squared_distance(x, basis.row(i)) * inv_s2;
                if q <= floor {
                    sum += (-q).exp();
                }
            }
            scale * sum
        })
        .collect();
    Ok(out)
}

fn residuals<F: Scalar>(
    cfg: &KernelConfig<F>,
    template: &Matrix<F>,
    reference: &Matrix<F>,
) -> Result<(Vec<F>, Vec<F>)> {
    let p_tt = density_vector(cfg, template, template)?;
    let p_tr = density_vector(cfg, reference, template)?;
    let p_rt = density_vector(cfg, template, reference)?;
    let p_rr = density_vector(cfg, reference, reference)?;
    let a = p_tt.iter().zip(&p_tr).map(|(&x, &y)| x - y).collect();
    let b = p_rt.iter().zip(&p_rr).map(|(&x, &y)| x - y).collect();
    Ok((a, b))
}

fn misfit_from_residuals<F: Scalar>(a: &[F], b: &[F]) -> F {
    let half = F::from_f64_lossy(0.5);
    let n = F::from_usize(a.len()).expect("cloud size fits in a float");
    let m = F::from_usize(b.len()).expect("cloud size fits in a float");
    let sum_a = a.iter().fold(F::zero(), |acc, &v| acc + v * v);
    let sum_b = b.iter().fold(F::zero(), |acc, &v| acc + v * v);
    half / n * sum_a + half / m * sum_b
}

/// Density-matching misfit between a template and a reference cloud.
pub fn misfit<F: Scalar>(
    cfg: &KernelConfig<F>,
    template: &Matrix<F>,
    reference: &Matrix<F>,
) -> Result<F> {
    let (a, b) = residuals(cfg, template, reference)?;
    Ok(misfit_from_residuals(&a, &b))
}

/// Misfit together with its gradient with respect to the template rows.
///
/// The gradient accounts for both dependency paths of a template point: as an
/// evaluation point of the residual `a_l` and as a mixture component inside
/// every other residual (including the `b_k` on the reference side).
pub fn misfit_with_grad<F: Scalar>(
    cfg: &KernelConfig<F>,
    template: &Matrix<F>,
    reference: &Matrix<F>,
) -> Result<(F, Matrix<F>)> {
    let (a, b) = residuals(cfg, template, reference)?;
    let value = misfit_from_residuals(&a, &b);

    let d = cfg.dim;
    let n = template.rows();
    let m = reference.rows();
    let inv_s2 = F::one() / (cfg.sigma * cfg.sigma);
    let floor = F::from_f64_lossy(EXPONENT_FLOOR);
    let coeff = cfg.coefficient();
    let nu_t = cfg.weight(n);
    let nu_r = cfg.weight(m);
    let w = F::from_f64_lossy(2.0) * inv_s2;
    let inv_n = F::one() / F::from_usize(n).expect("cloud size fits in a float");
    let inv_m = F::one() / F::from_usize(m).expect("cloud size fits in a float");

    let rows: Vec<Vec<F>> = (0..n)
        .into_par_iter()
        .map(|l| {
            let tl = template.row(l);
            // s1 = sum_j g_lj (T_l - T_j), s2 = sum_j a_j g_lj (T_j - T_l)
            let mut s1 = vec![F::zero(); d];
            let mut s2 = vec![F::zero(); d];
            for j in 0..n {
                let tj = template.row(j);
                let q = squared_distance(tl, tj) * inv_s2;
                if q > floor {
                    continue;
                }
                let g = coeff * (-q).exp();
                let ag = a[j] * g;
                for c in 0..d {
                    let diff = tl[c] - tj[c];
                    s1[c] += g * diff;
                    s2[c] -= ag * diff;
                }
            }
            // s3 = sum_k h_lk (T_l - R_k), s4 = sum_k b_k h_lk (R_k - T_l)
            let mut s3 = vec![F::zero(); d];
            let mut s4 = vec![F::zero(); d];
            for k in 0..m {
                let rk = reference.row(k);
                let q = squared_distance(tl, rk) * inv_s2;
                if q > floor {
                    continue;
                }
                let h = coeff * (-q).exp();
                let bh = b[k] * h;
                for c in 0..d {
                    let diff = tl[c] - rk[c];
                    s3[c] += h * diff;
                    s4[c] -= bh * diff;
                }
            }
            let al = a[l];
            let mut row = vec![F::zero(); d];
            for c in 0..d {
                let eval_path = -al * (nu_t * s1[c] - nu_r * s3[c]) + nu_t * s2[c];
                row[c] = w * inv_n * eval_path + nu_t * w * inv_m * s4[c];
            }
            row
        })
        .collect();

    let mut grad = Matrix::zeros(n, d);
    for (l, row) in rows.into_iter().enumerate() {
        grad.row_mut(l).copy_from_slice(&row);
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numdiff::finite_diff;
    use crate::rng::{gaussian_sample, Seed};

    fn cloud(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn density_at_single_center_peak() {
        // One component in d=2 with sigma=1 evaluated at its own center:
        // (2 pi)^(-1) = 0.15915494309189535.
        let cfg = KernelConfig::new(1.0f64, 2).unwrap();
        let basis = cloud(&[&[0.3, -0.7]]);
        let p = density_at(&cfg, &basis, &[0.3, -0.7]).unwrap();
        assert!((p - 0.159_154_943_091_895_35).abs() < 1e-15);
    }

    #[test]
    fn density_at_two_centers_midpoint() {
        // Centers at -1 and 1 in d=1 with sigma=1, evaluated at 0:
        // (2 pi)^(-1/2) * e^(-1) = 0.14676266317373993 after the 1/2 weight.
        let cfg = KernelConfig::new(1.0f64, 1).unwrap();
        let basis = cloud(&[&[-1.0], &[1.0]]);
        let p = density_at(&cfg, &basis, &[0.0]).unwrap();
        assert!((p - 0.146_762_663_173_739_93).abs() < 1e-15);
    }

    #[test]
    fn unnormalized_density_drops_the_count_weight() {
        let cfg = KernelConfig::new(1.0f64, 1).unwrap().with_normalized(false);
        let basis = cloud(&[&[-1.0], &[1.0]]);
        let p = density_at(&cfg, &basis, &[0.0]).unwrap();
        assert!((p - 2.0 * 0.146_762_663_173_739_93).abs() < 1e-15);
    }

    #[test]
    fn misfit_hand_value_two_singleton_clouds() {
        // T = {0}, R = {1} in d=1 with sigma=1. Here b = -a, so the misfit is
        // a^2 = (1 - e^(-1))^2 / (2 pi), verified by brute force beforehand.
        let cfg = KernelConfig::new(1.0f64, 1).unwrap();
        let t = cloud(&[&[0.0]]);
        let r = cloud(&[&[1.0]]);
        let m = misfit(&cfg, &t, &r).unwrap();
        assert!(
            (m - 0.063_594_559_345_105_65).abs() < 1e-9,
            "misfit {m} deviates from the frozen brute-force value"
        );
    }

    #[test]
    fn misfit_of_identical_clouds_is_exactly_zero() {
        let cfg = KernelConfig::new(0.8f64, 3).unwrap();
        let t = gaussian_sample::<f64>(20, 3, Seed(7)).unwrap();
        let m = misfit(&cfg, &t, &t.clone()).unwrap();
        assert_eq!(m, 0.0, "identical clouds must give a bitwise-zero misfit");
    }

    #[test]
    fn misfit_is_bitwise_symmetric() {
        let cfg = KernelConfig::new(1.3f64, 2).unwrap();
        let t = gaussian_sample::<f64>(15, 2, Seed(1)).unwrap();
        let r = gaussian_sample::<f64>(9, 2, Seed(2)).unwrap();
        let forward = misfit(&cfg, &t, &r).unwrap();
        let backward = misfit(&cfg, &r, &t).unwrap();
        assert_eq!(
            forward.to_bits(),
            backward.to_bits(),
            "swapping the clouds swaps the two residual sums term for term"
        );
    }

    #[test]
    fn misfit_ignores_row_permutations() {
        let cfg = KernelConfig::new(0.9f64, 2).unwrap();
        let t = gaussian_sample::<f64>(12, 2, Seed(3)).unwrap();
        let r = gaussian_sample::<f64>(10, 2, Seed(4)).unwrap();
        let perm: Vec<usize> = (0..12).rev().collect();
        let t_perm = t.gather_rows(&perm);
        let m1 = misfit(&cfg, &t, &r).unwrap();
        let m2 = misfit(&cfg, &t_perm, &r).unwrap();
        assert!(
            (m1 - m2).abs() <= 1e-12 * m1.abs().max(1.0),
            "clouds are sets; row order must not matter beyond rounding"
        );
    }

    #[test]
    fn gradient_vanishes_for_huge_bandwidth() {
        // As sigma grows, both mixtures flatten toward the same constant and
        // the misfit surface goes flat.
        let cfg = KernelConfig::new(1e6f64, 2).unwrap();
        let t = gaussian_sample::<f64>(8, 2, Seed(5)).unwrap();
        let r = gaussian_sample::<f64>(6, 2, Seed(6)).unwrap();
        let (_, grad) = misfit_with_grad(&cfg, &t, &r).unwrap();
        assert!(grad.frobenius_norm() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let configs = [
            (1.0f64, 2, 5, 4, true),
            (0.6, 1, 6, 6, true),
            (1.7, 3, 4, 7, true),
            (1.1, 2, 5, 5, false),
        ];
        for (trial, &(sigma, d, n, m, normalized)) in configs.iter().enumerate() {
            let cfg = KernelConfig::new(sigma, d).unwrap().with_normalized(normalized);
            let t = gaussian_sample::<f64>(n, d, Seed(100 + trial as u64)).unwrap();
            let r = gaussian_sample::<f64>(m, d, Seed(200 + trial as u64)).unwrap();
            let (_, grad) = misfit_with_grad(&cfg, &t, &r).unwrap();
            let flat: Vec<f64> = t.data().to_vec();
            let fd = finite_diff(
                |v| {
                    let tt = Matrix::from_vec(n, d, v.to_vec()).unwrap();
                    misfit(&cfg, &tt, &r).unwrap()
                },
                &flat,
                1e-6,
            )
            .unwrap();
            let num: f64 = grad
                .data()
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let den: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-30);
            assert!(
                num / den < 1e-6,
                "misfit gradient relative error {} in config {trial}",
                num / den
            );
        }
    }

    #[test]
    fn empty_clouds_are_rejected() {
        let cfg = KernelConfig::new(1.0f64, 2).unwrap();
        let empty = Matrix::<f64>::zeros(0, 2);
        let ok = cloud(&[&[0.0, 0.0]]);
        assert!(misfit(&cfg, &empty, &ok).is_err());
        assert!(misfit(&cfg, &ok, &empty).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let cfg = KernelConfig::new(1.0f64, 2).unwrap();
        let t = cloud(&[&[0.0, 0.0]]);
        let r = cloud(&[&[1.0]]);
        assert!(matches!(
            misfit(&cfg, &t, &r),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn nonpositive_bandwidth_is_rejected() {
        assert!(KernelConfig::new(0.0f64, 2).is_err());
        assert!(KernelConfig::new(-1.0f64, 2).is_err());
        assert!(KernelConfig::new(f64::NAN, 2).is_err());
    }
}
