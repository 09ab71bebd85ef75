use rayon::prelude::*;

use crate::ar::{inverse_logit_transform, logit_unchecked, phi_from_psi, ArCoefficients, PartialAutocorrelations};
use crate::error::{Error, Result};
use crate::estimators::EstimationMethod;
use crate::hermite::{HermiteBasis, MAX_ORDER};
use crate::optim::{bfgs, Options};

use super::GridSample;

/// Points of `(-0.999, 0.999)` on which an AR(1) map must be increasing.
const MONOTONE_POINTS: usize = 200;
const MONOTONE_EDGE: f64 = 0.999;

/// Fitted correction `f_i(psi_hat) = g^-1(beta_i . row(g(psi_hat)))`, one
/// coefficient vector per partial autocorrelation.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionModel {
    pub order: usize,
    pub method: EstimationMethod,
    pub n: usize,
    pub basis: HermiteBasis,
    pub beta: Vec<Vec<f64>>,
}

impl CorrectionModel {
    /// The map that leaves every estimate unchanged.
    pub fn identity(order: usize, method: EstimationMethod, n: usize, degree: usize) -> Result<Self> {
        let basis = HermiteBasis::for_order(order, degree)?;
        let terms = basis.terms();
        let beta = (0..order)
            .map(|i| {
                let target = if i == 0 { (1, 0) } else { (0, 1) };
                terms
                    .iter()
                    .map(|&t| if t == target { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        Ok(Self {
            order,
            method,
            n,
            basis,
            beta,
        })
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    /// Linear predictor `eta_i` at logit-scale input `z`.
    pub fn linear_predictor(&self, i: usize, z: &[f64]) -> f64 {
        let row = self.basis.row(z);
        dot(&self.beta[i], &row)
    }

    /// Corrected partial autocorrelations, each strictly inside `(-1, 1)`.
    pub fn correct_psi(&self, psi: &[f64]) -> [f64; 2] {
        let mut z = [0.0; 2];
        for (zi, &v) in z.iter_mut().zip(psi) {
            *zi = logit_unchecked(v);
        }
        self.correct_logit(&z[..psi.len()])
    }

    /// As [`correct_psi`](Self::correct_psi) for logit-scale input.
    pub fn correct_logit(&self, z: &[f64]) -> [f64; 2] {
        let mut row = [0.0; (MAX_ORDER + 1) * (MAX_ORDER + 2) / 2];
        let row = &mut row[..self.basis.len()];
        self.basis.row_into(z, row);
        let mut out = [0.0; 2];
        for (o, b) in out.iter_mut().zip(&self.beta) {
            *o = inverse_logit_transform(dot(b, row));
        }
        out
    }

    /// `d eta_1 / dz` for an AR(1) model.
    pub fn slope_ar1(&self, z: f64) -> f64 {
        self.basis.gradient_of(&self.beta[0], &[z], 0)
    }

    /// Confirms an AR(1) linear predictor is strictly increasing on the
    /// check grid.
    pub fn check_monotone(&self) -> Result<()> {
        if self.order != 1 {
            return Ok(());
        }
        let mut prev = f64::NEG_INFINITY;
        for v in monotone_grid() {
            let eta = self.linear_predictor(0, &[logit_unchecked(v)]);
            if !(eta > prev) {
                return Err(Error::NotMonotone { at: v });
            }
            prev = eta;
        }
        Ok(())
    }

    fn flat_beta(&self) -> Vec<f64> {
        self.beta.concat()
    }

    fn with_flat_beta(&self, flat: &[f64]) -> Self {
        let p = self.basis.len();
        Self {
            beta: flat.chunks(p).map(<[f64]>::to_vec).collect(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    /// Objective at the identity map.
    pub initial_objective: f64,
    pub objective: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Weight of the monotonicity penalty in the accepted fit (0 when the
    /// unconstrained minimizer was already monotone).
    pub slope_penalty: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn tanh_half(eta: f64) -> f64 {
    (0.5 * eta).tanh()
}

/// Weighted objective over one method's draws; `beta` is flat
/// (`beta_1` then `beta_2`).
struct Objective<'a> {
    sample: &'a GridSample,
    logit: &'a [f64],
    weights: Vec<[f64; 2]>,
    basis: HermiteBasis,
}

impl<'a> Objective<'a> {
    fn new(sample: &'a GridSample, method: EstimationMethod, basis: HermiteBasis) -> Result<Self> {
        if basis.inputs() != sample.order {
            return Err(Error::Mismatch(format!(
                "order-{} model for an order-{} grid",
                basis.inputs(),
                sample.order
            )));
        }
        let draws = sample.draws(method)?;
        let order = sample.order;
        let weights = draws
            .variances
            .iter()
            .map(|v| {
                let mut w = [0.0; 2];
                for i in 0..order {
                    w[i] = 1.0 / v[i];
                }
                w
            })
            .collect();
        Ok(Self {
            sample,
            logit: &draws.logit,
            weights,
            basis,
        })
    }

    /// Contribution of one cell, writing its gradient into `grad`.
    fn cell(&self, r: usize, beta: &[f64], grad: &mut [f64]) -> f64 {
        let order = self.sample.order;
        let m = self.sample.replicates;
        let p = self.basis.len();
        let z = self.sample.cell_slice(self.logit, r);
        let mut row = [0.0; (MAX_ORDER + 1) * (MAX_ORDER + 2) / 2];
        let row = &mut row[..p];
        let mut mean = [0.0; 2];
        grad.iter_mut().for_each(|g| *g = 0.0);
        for j in 0..m {
            self.basis.row_into(&z[j * order..(j + 1) * order], row);
            for i in 0..order {
                let t = tanh_half(dot(&beta[i * p..(i + 1) * p], row));
                mean[i] += t;
                let dt = 0.5 * (1.0 - t * t);
                for (g, h) in grad[i * p..(i + 1) * p].iter_mut().zip(row.iter()) {
                    *g += dt * h;
                }
            }
        }
        let mut value = 0.0;
        for i in 0..order {
            let e = mean[i] / m as f64 - self.sample.truths[r][i];
            let w = self.weights[r][i];
            value += w * e * e;
            let scale = 2.0 * w * e / m as f64;
            grad[i * p..(i + 1) * p].iter_mut().for_each(|g| *g *= scale);
        }
        value
    }

    fn eval(&self, beta: &[f64], grad: &mut [f64]) -> f64 {
        let k = beta.len();
        let parts: Vec<(f64, Vec<f64>)> = (0..self.sample.cells())
            .into_par_iter()
            .map(|r| {
                let mut g = vec![0.0; k];
                let v = self.cell(r, beta, &mut g);
                (v, g)
            })
            .collect();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for (v, g) in &parts {
            total += v;
            grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        total
    }
}

/// Objective value of `model` on the sample's draws for `model.method`.
pub fn correction_objective(sample: &GridSample, model: &CorrectionModel) -> Result<f64> {
    let obj = Objective::new(sample, model.method, model.basis)?;
    let beta = model.flat_beta();
    let mut g = vec![0.0; beta.len()];
    Ok(obj.eval(&beta, &mut g))
}

/// Analytic gradient of [`correction_objective`] with respect to the flat
/// coefficient vector (`beta_1` then `beta_2`).
pub fn correction_gradient(sample: &GridSample, model: &CorrectionModel) -> Result<Vec<f64>> {
    let obj = Objective::new(sample, model.method, model.basis)?;
    let beta = model.flat_beta();
    let mut g = vec![0.0; beta.len()];
    obj.eval(&beta, &mut g);
    Ok(g)
}

/// Squared-hinge penalty `sum_k max(0, MIN_SLOPE - eta'(z_k))^2` over the
/// monotonicity check grid, for an AR(1) model.
struct SlopePenalty {
    /// `d eta'(z_k) / d beta` per check point.
    rows: Vec<Vec<f64>>,
}

const MIN_SLOPE: f64 = 1e-3;

impl SlopePenalty {
    fn new(basis: &HermiteBasis) -> Self {
        let p = basis.len();
        let rows = monotone_grid()
            .map(|v| {
                let z = logit_unchecked(v);
                let mut h = vec![0.0; p];
                crate::hermite::hermite_all(z, &mut h);
                (0..p).map(|k| if k == 0 { 0.0 } else { k as f64 * h[k - 1] }).collect()
            })
            .collect();
        Self { rows }
    }

    fn eval(&self, beta: &[f64], grad: &mut [f64]) -> f64 {
        let mut total = 0.0;
        for row in &self.rows {
            let gap = MIN_SLOPE - dot(beta, row);
            if gap > 0.0 {
                total += gap * gap;
                grad.iter_mut().zip(row).for_each(|(g, r)| *g -= 2.0 * gap * r);
            }
        }
        total
    }
}

fn monotone_grid() -> impl Iterator<Item = f64> {
    (0..MONOTONE_POINTS)
        .map(|k| -MONOTONE_EDGE + 2.0 * MONOTONE_EDGE * k as f64 / (MONOTONE_POINTS - 1) as f64)
}

/// Minimizes the weighted objective from the identity map by BFGS.
///
/// An AR(1) minimizer whose linear predictor is not increasing on the check
/// grid is refitted with a slope penalty of growing weight; the first
/// monotone solution is returned.
pub fn fit_correction(
    sample: &GridSample,
    method: EstimationMethod,
    degree: usize,
) -> Result<(CorrectionModel, FitReport)> {
    let start = CorrectionModel::identity(sample.order, method, sample.n, degree)?;
    let obj = Objective::new(sample, method, start.basis)?;
    let x0 = start.flat_beta();
    let mut g0 = vec![0.0; x0.len()];
    let initial = obj.eval(&x0, &mut g0);
    // rescale so the optimizer sees an O(1) problem
    let scale = 1.0 / obj.weights.iter().map(|w| w[0] + w[1]).sum::<f64>();
    let opts = Options {
        max_iter: 3000,
        grad_tol: 1e-10,
        f_tol: 1e-14,
    };
    let penalty = SlopePenalty::new(&start.basis);
    let mut pg = vec![0.0; x0.len()];

    let mut x = x0.clone();
    let mut weight = 0.0;
    loop {
        let min = bfgs(
            |b, g| {
                let mut v = obj.eval(b, g) * scale;
                g.iter_mut().for_each(|x| *x *= scale);
                if weight > 0.0 {
                    pg.iter_mut().for_each(|x| *x = 0.0);
                    v += weight * penalty.eval(b, &mut pg);
                    g.iter_mut().zip(&pg).for_each(|(a, b)| *a += weight * b);
                }
                v
            },
            &x,
            &opts,
        );
        let objective = obj.eval(&min.x, &mut g0);
        let acceptable = min.converged || min.grad_norm <= 1e-7;
        if !acceptable || !(objective <= initial) {
            return Err(Error::Convergence {
                best: min.x,
                objective,
                grad_norm: min.grad_norm / scale,
                iterations: min.iterations,
            });
        }
        let model = start.with_flat_beta(&min.x);
        match model.check_monotone() {
            Ok(()) => {
                return Ok((
                    model,
                    FitReport {
                        initial_objective: initial,
                        objective,
                        iterations: min.iterations,
                        grad_norm: min.grad_norm / scale,
                        slope_penalty: weight,
                    },
                ))
            }
            Err(e) if weight >= 1e8 => return Err(e),
            Err(_) => {
                weight = if weight == 0.0 { 1e-2 } else { weight * 10.0 };
                x = min.x;
            }
        }
    }
}

pub fn fit_correction_ar1(
    sample: &GridSample,
    method: EstimationMethod,
    degree: usize,
) -> Result<CorrectionModel> {
    if sample.order != 1 {
        return Err(Error::Mismatch("AR(1) fit requested on an AR(2) grid".into()));
    }
    fit_correction(sample, method, degree).map(|(m, _)| m)
}

pub fn fit_correction_ar2(
    sample: &GridSample,
    method: EstimationMethod,
    degree: usize,
) -> Result<CorrectionModel> {
    if sample.order != 2 {
        return Err(Error::Mismatch("AR(2) fit requested on an AR(1) grid".into()));
    }
    fit_correction(sample, method, degree).map(|(m, _)| m)
}

/// Applies the correction to an estimate inside the open square; the
/// result is in the closed stationary region.
pub fn evaluate_correction(
    model: &CorrectionModel,
    estimate: &PartialAutocorrelations,
) -> Result<ArCoefficients> {
    if estimate.order() != model.order {
        return Err(Error::Mismatch(format!(
            "order-{} estimate given to an order-{} correction",
            estimate.order(),
            model.order
        )));
    }
    let psi = model.correct_psi(estimate.psi());
    let phi = phi_from_psi(&psi[..model.order]);
    ArCoefficients::standard(&phi[..model.order])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{GridSpec, MethodDraws};
    use crate::optim::central_gradient;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Grid sample whose logit draws are the truth plus a tiny symmetric
    /// perturbation.
    fn synthetic(order: usize, step: f64, shift: f64) -> GridSample {
        let grid = GridSpec::new(-0.9, 0.9, step).unwrap();
        let axis = grid.values();
        let truths: Vec<[f64; 2]> = if order == 1 {
            axis.iter().map(|&v| [v, 0.0]).collect()
        } else {
            axis.iter()
                .flat_map(|&a| axis.iter().map(move |&b| [a, b]))
                .collect()
        };
        let m = 100;
        let mut psi = Vec::new();
        for t in &truths {
            for j in 0..m {
                let eps = if j % 2 == 0 { 1e-3 } else { -1e-3 };
                for c in 0..order {
                    psi.push(inverse_logit_transform(logit_unchecked(t[c]) + eps + shift));
                }
            }
        }
        let logit = psi.iter().map(|&v| logit_unchecked(v)).collect();
        let cells = truths.len();
        GridSample {
            order,
            n: 20,
            replicates: m,
            grid,
            seed: 1,
            truths,
            draws: vec![MethodDraws {
                method: EstimationMethod::Burg,
                psi,
                logit,
                variances: vec![[0.01, 0.02]; cells],
            }],
            resimulated: vec![0; cells],
        }
    }

    #[test]
    fn identity_model_is_identity() {
        for order in [1, 2] {
            for degree in [3, 5, 7] {
                let m = CorrectionModel::identity(order, EstimationMethod::Burg, 20, degree).unwrap();
                let est = [0.31, -0.72];
                let psi = PartialAutocorrelations::new(&est[..order]).unwrap();
                let out = m.correct_psi(psi.psi());
                for c in 0..order {
                    assert!((out[c] - est[c]).abs() < 1e-12);
                }
                let ar = evaluate_correction(&m, &psi).unwrap();
                let expected = crate::ar::from_partial(&psi);
                for (a, b) in ar.phi().iter().zip(expected.phi()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unbiased_data_fits_near_identity() {
        let s = synthetic(1, 0.05, 0.0);
        let m = fit_correction_ar1(&s, EstimationMethod::Burg, 3).unwrap();
        for v in GridSpec::new(-0.9, 0.9, 0.05).unwrap().values() {
            assert!((m.correct_psi(&[v])[0] - v).abs() < 0.02);
        }
        let s2 = synthetic(2, 0.2, 0.0);
        let m2 = fit_correction_ar2(&s2, EstimationMethod::Burg, 3).unwrap();
        for a in s2.grid.values() {
            for b in s2.grid.values() {
                let out = m2.correct_psi(&[a, b]);
                assert!((out[0] - a).abs() < 0.03 && (out[1] - b).abs() < 0.03);
            }
        }
    }

    #[test]
    fn fit_removes_a_constant_logit_shift() {
        let s = synthetic(1, 0.05, -0.2);
        let (m, report) = fit_correction(&s, EstimationMethod::Burg, 3).unwrap();
        assert!(report.objective < 1e-3 * report.initial_objective);
        // intercept absorbs the shift
        assert!((m.beta[0][0] - 0.2).abs() < 0.01, "{:?}", m.beta);
        assert!(m.check_monotone().is_ok());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for order in [1, 2] {
            let s = synthetic(order, 0.3, -0.1);
            let base = CorrectionModel::identity(order, EstimationMethod::Burg, 20, 3).unwrap();
            for _ in 0..10 {
                let flat: Vec<f64> = base
                    .flat_beta()
                    .iter()
                    .map(|b| b + rng.random_range(-0.1..0.1))
                    .collect();
                let model = base.with_flat_beta(&flat);
                let g = correction_gradient(&s, &model).unwrap();
                let num = central_gradient(
                    |b| correction_objective(&s, &base.with_flat_beta(b)).unwrap(),
                    &flat,
                    1e-6,
                );
                let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                for (a, b) in g.iter().zip(&num) {
                    assert!((a - b).abs() <= 1e-5 * scale, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn non_monotone_map_is_rejected() {
        let mut m = CorrectionModel::identity(1, EstimationMethod::Burg, 20, 3).unwrap();
        m.beta[0] = vec![0.0, 1.0, 0.0, -0.5];
        assert!(matches!(m.check_monotone(), Err(Error::NotMonotone { .. })));
    }

    #[test]
    fn output_stays_inside_the_square() {
        let mut m = CorrectionModel::identity(2, EstimationMethod::Burg, 20, 3).unwrap();
        m.beta[0] = vec![5.0, -3.0, 2.0, 1.0, 4.0, 0.0, 1.0, -2.0, 3.0, 7.0];
        m.beta[1] = vec![-5.0, 3.0, 2.0, -1.0, 4.0, 0.0, -1.0, 2.0, 3.0, -7.0];
        for a in [-0.999999, -0.5, 0.0, 0.9, 0.999999] {
            for b in [-0.999999, 0.3, 0.999999] {
                let out = m.correct_psi(&[a, b]);
                assert!(out.iter().all(|v| v.abs() < 1.0));
            }
        }
    }

    #[test]
    fn objective_is_independent_of_thread_count() {
        let s = synthetic(2, 0.3, -0.1);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| fit_correction(&s, EstimationMethod::Burg, 3).unwrap().1.objective)
        };
        assert_eq!(run(1).to_bits(), run(4).to_bits());
    }
}
