//! Fernández–Steel skew-normal distribution.
//!
//! With `z = (x - mu) / sigma` the density is
//!
//! ```text
//! (1/sigma) * 2 / (xi + 1/xi) * [ phi(z / xi) H(z) + phi(z xi) H(-z) ]
//! ```
//!
//! `(mu, sigma, xi)` are location, scale and shape (not moments). The
//! boundary `z = 0` is assigned to the left branch; the density is
//! continuous there.

mod surface;

pub use surface::{fit_parameter_surfaces, CellFit, SurfaceModel, SurfaceParam, SurfacePrediction, SurfaceSet};

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::optim::{self, Options};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal quantile; `p` must lie in `(0, 1)`.
#[inline]
pub fn normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SkewNormalParams {
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
}

impl SkewNormalParams {
    pub fn new(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma > 0.0) || !sigma.is_finite() || !(xi > 0.0) || !xi.is_finite() {
            return Err(Error::Domain(format!(
                "invalid skew-normal parameters (mu={mu}, sigma={sigma}, xi={xi})"
            )));
        }
        Ok(Self { mu, sigma, xi })
    }

    pub fn is_symmetric(&self) -> bool {
        self.xi == 1.0
    }

    /// Mass at or below the location `mu`.
    pub fn left_mass(&self) -> f64 {
        1.0 / (1.0 + self.xi * self.xi)
    }

    #[inline]
    fn log_density_std(&self, z: f64) -> f64 {
        let a = if z > 0.0 { z / self.xi } else { z * self.xi };
        std::f64::consts::LN_2 - (self.xi + 1.0 / self.xi).ln() - self.sigma.ln() - LN_SQRT_2PI
            - 0.5 * a * a
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.log_density_std((x - self.mu) / self.sigma)
    }
}

pub fn sn_density(params: &SkewNormalParams, x: f64) -> f64 {
    let z = (x - params.mu) / params.sigma;
    let xi = params.xi;
    let branch = if z > 0.0 {
        normal_pdf(z / xi)
    } else {
        normal_pdf(z * xi)
    };
    2.0 / (xi + 1.0 / xi) * branch / params.sigma
}

pub fn sn_cdf(params: &SkewNormalParams, x: f64) -> f64 {
    let z = (x - params.mu) / params.sigma;
    let xi2 = params.xi * params.xi;
    if z <= 0.0 {
        2.0 / (1.0 + xi2) * normal_cdf(z * params.xi)
    } else {
        1.0 - 2.0 * xi2 / (1.0 + xi2) * normal_cdf(-z / params.xi)
    }
}

/// Exact inverse of [`sn_cdf`].
pub fn sn_quantile(params: &SkewNormalParams, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("quantile level {u} outside (0, 1)")));
    }
    Ok(sn_quantile_unchecked(params, u))
}

#[inline]
pub(crate) fn sn_quantile_unchecked(params: &SkewNormalParams, u: f64) -> f64 {
    let xi = params.xi;
    let xi2 = xi * xi;
    let z = if u <= 1.0 / (1.0 + xi2) {
        normal_quantile(u * (1.0 + xi2) / 2.0) / xi
    } else {
        -xi * normal_quantile((1.0 - u) * (1.0 + xi2) / (2.0 * xi2))
    };
    params.mu + params.sigma * z
}

/// Average log-likelihood of `samples`.
pub fn sn_mean_loglik(params: &SkewNormalParams, samples: &[f64]) -> f64 {
    samples.iter().map(|&x| params.ln_pdf(x)).sum::<f64>() / samples.len() as f64
}

/// Negative mean log-likelihood over `theta = (mu, ln sigma, ln xi)`, with
/// gradient.
fn neg_loglik(samples: &[f64], theta: &[f64], grad: &mut [f64]) -> f64 {
    let (mu, ls, lx) = (theta[0], theta[1], theta[2]);
    let sigma = ls.exp();
    let xi = lx.exp();
    let m = samples.len() as f64;
    let mut sum_a2 = 0.0;
    let mut g_mu = 0.0;
    let mut g_ls = 0.0;
    let mut g_lx = 0.0;
    for &x in samples {
        let z = (x - mu) / sigma;
        if z > 0.0 {
            let a = z / xi;
            sum_a2 += a * a;
            g_mu += a / (sigma * xi);
            g_lx += a * a;
        } else {
            let a = z * xi;
            sum_a2 += a * a;
            g_mu += a * xi / sigma;
            g_lx -= a * a;
        }
        g_ls += -1.0 + (if z > 0.0 { z / xi } else { z * xi }).powi(2);
    }
    let shape = (xi - 1.0 / xi) / (xi + 1.0 / xi);
    grad[0] = -g_mu / m;
    grad[1] = -g_ls / m;
    grad[2] = -(g_lx / m - shape);
    let ll = std::f64::consts::LN_2 - (xi + 1.0 / xi).ln() - ls - LN_SQRT_2PI - 0.5 * sum_a2 / m;
    -ll
}

/// Maximum-likelihood fit over `(mu, ln sigma, ln xi)`, started from the
/// moment-matched normal.
pub fn sn_fit(samples: &[f64]) -> Result<SkewNormalParams> {
    if samples.len() < 50 {
        return Err(Error::Domain(format!(
            "skew-normal fit needs at least 50 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite sample".into()));
    }
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    if !(var > 0.0) {
        return Err(Error::DegenerateSeries("samples have zero variance".into()));
    }
    let start = [mean, 0.5 * var.ln(), 0.0];
    let opts = Options {
        max_iter: 500,
        grad_tol: 1e-9,
        f_tol: 1e-14,
    };
    let mut best = optim::bfgs(|t, g| neg_loglik(samples, t, g), &start, &opts);
    if !best.converged {
        let mut scratch = [0.0; 3];
        let nm = optim::nelder_mead(
            |t| neg_loglik(samples, t, &mut scratch),
            &best.x,
            0.1,
            &Options {
                max_iter: 2000,
                f_tol: 1e-13,
                ..opts
            },
        );
        if nm.value <= best.value {
            best.converged = nm.converged;
            best.x = nm.x;
            best.value = nm.value;
        }
    }
    if !best.converged {
        return Err(Error::Convergence {
            best: best.x,
            objective: best.value,
            grad_norm: best.grad_norm,
            iterations: best.iterations,
        });
    }
    SkewNormalParams::new(best.x[0], best.x[1].exp(), best.x[2].exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn p(mu: f64, sigma: f64, xi: f64) -> SkewNormalParams {
        SkewNormalParams::new(mu, sigma, xi).unwrap()
    }

    /// Composite Gauss-Legendre (5-point) on [a, b] split into `pieces`.
    fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
        const X: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const W: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_47,
            0.478_628_670_499_366_47,
            0.236_926_885_056_189_08,
            0.236_926_885_056_189_08,
        ];
        let h = (b - a) / pieces as f64;
        (0..pieces)
            .map(|i| {
                let lo = a + i as f64 * h;
                let mid = lo + 0.5 * h;
                X.iter().zip(&W).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
            })
            .sum()
    }

    #[test]
    fn symmetric_case_is_normal() {
        let q = p(0.3, 1.7, 1.0);
        for i in 0..50 {
            let x = -5.0 + 0.2 * i as f64;
            let z = (x - 0.3) / 1.7;
            assert_abs_diff_eq!(sn_density(&q, x), normal_pdf(z) / 1.7, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(sn_cdf(&q, 0.3), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn density_normalizes() {
        let q = p(0.0, 1.0, 2.0);
        // split at the kink so each piece is smooth
        let total = integrate(|x| sn_density(&q, x), -40.0, 0.0, 400)
            + integrate(|x| sn_density(&q, x), 0.0, 40.0, 400);
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn density_continuous_at_location() {
        let q = p(1.0, 0.5, 2.5);
        let peak = 2.0 / (0.5 * (2.5 + 1.0 / 2.5)) * normal_pdf(0.0);
        assert_abs_diff_eq!(sn_density(&q, 1.0 - 1e-12), peak, epsilon = 1e-9);
        assert_abs_diff_eq!(sn_density(&q, 1.0 + 1e-12), peak, epsilon = 1e-9);
        assert_abs_diff_eq!(sn_density(&q, 1.0), peak, epsilon = 1e-15);
    }

    #[test]
    fn cdf_at_location() {
        let q = p(0.0, 1.0, 2.0);
        assert_abs_diff_eq!(sn_cdf(&q, 0.0), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(q.left_mass(), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn quantile_round_trip_examples() {
        for q in [p(0.0, 1.0, 2.0), p(-1.0, 0.3, 0.4), p(2.0, 3.0, 1.0)] {
            for u in [0.001, 0.5, 0.999] {
                let x = sn_quantile(&q, u).unwrap();
                assert_abs_diff_eq!(sn_cdf(&q, x), u, epsilon = 1e-10);
            }
        }
        assert!(sn_quantile(&p(0.0, 1.0, 1.0), 0.0).is_err());
        assert!(sn_quantile(&p(0.0, 1.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn fit_recovers_normal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let f = sn_fit(&x).unwrap();
        assert!((0.97..=1.03).contains(&f.xi), "{f:?}");
        assert!(f.mu.abs() <= 0.02, "{f:?}");
    }

    #[test]
    fn fit_recovers_skewed_draws() {
        let truth = p(0.0, 1.0, 2.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let x: Vec<f64> = (0..100_000)
            .map(|_| sn_quantile(&truth, rng.random_range(f64::EPSILON..1.0)).unwrap())
            .collect();
        let f = sn_fit(&x).unwrap();
        assert!((1.9..=2.1).contains(&f.xi), "{f:?}");
        // location equivariance
        let shifted: Vec<f64> = x.iter().map(|v| v + 3.25).collect();
        let g = sn_fit(&shifted).unwrap();
        assert_abs_diff_eq!(g.mu, f.mu + 3.25, epsilon = 1e-3);
        // never worse than the moment-matched normal
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
        assert!(sn_mean_loglik(&f, &x) >= sn_mean_loglik(&p(m, sd, 1.0), &x));
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(sn_fit(&[1.0; 20]).is_err());
        assert!(sn_fit(&[1.0; 60]).is_err());
    }

    #[test]
    fn loglik_gradient_matches_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..500).map(|_| rng.sample::<f64, _>(StandardNormal) * 1.5 + 0.2).collect();
        for theta in [[0.1, 0.3, 0.2], [-0.4, -0.1, -0.5]] {
            let mut g = [0.0; 3];
            neg_loglik(&x, &theta, &mut g);
            let num = crate::optim::central_gradient(|t| neg_loglik(&x, t, &mut [0.0; 3]), &theta, 1e-6);
            for (a, b) in g.iter().zip(&num) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-6);
            }
        }
    }

    proptest! {
        #[test]
        fn density_normalizes_random(mu in -3.0f64..3.0, ls in -2.0f64..1.5, lx in -1.2f64..1.2) {
            let q = p(mu, ls.exp(), lx.exp());
            let span = 40.0 * q.sigma * q.xi.max(1.0 / q.xi);
            let total = integrate(|x| sn_density(&q, x), mu - span, mu, 800)
                + integrate(|x| sn_density(&q, x), mu, mu + span, 800);
            prop_assert!((total - 1.0).abs() < 1e-8, "{}", total);
        }

        #[test]
        fn quantile_inverts_cdf(u in 1e-6f64..(1.0 - 1e-6), lx in -1.2f64..1.2, mu in -2.0f64..2.0) {
            let q = p(mu, 0.7, lx.exp());
            let x = sn_quantile(&q, u).unwrap();
            prop_assert!((sn_cdf(&q, x) - u).abs() < 1e-10);
        }

        #[test]
        fn cdf_nondecreasing(a in -10.0f64..10.0, d in 0.0f64..5.0, lx in -1.2f64..1.2) {
            let q = p(0.0, 1.3, lx.exp());
            prop_assert!(sn_cdf(&q, a + d) >= sn_cdf(&q, a));
        }
    }
}
