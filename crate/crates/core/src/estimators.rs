//! The four original coefficient estimators.
//!
//! Every estimator subtracts the sample mean first and fits a zero-mean
//! AR(p). Estimates are reported on both the `phi` and the partial
//! autocorrelation scale; the latter is what the correction map consumes.

use std::fmt;
use std::str::FromStr;

use crate::ar::{
    logit_unchecked, phi_from_psi, to_partial, ArCoefficients, PartialAutocorrelations,
    TimeSeries,
};
use crate::error::{Error, Result};
use crate::optim::{self, Options};

/// Partial autocorrelations of projected conditional-MLE estimates are
/// clamped to `±(1 - CMLE_CLAMP)`.
pub const CMLE_CLAMP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimationMethod {
    ExactMle,
    ConditionalMle,
    Burg,
    YuleWalker,
}

impl EstimationMethod {
    pub const ALL: [EstimationMethod; 4] = [
        EstimationMethod::ExactMle,
        EstimationMethod::ConditionalMle,
        EstimationMethod::Burg,
        EstimationMethod::YuleWalker,
    ];

    pub fn code(self) -> &'static str {
        match self {
            EstimationMethod::ExactMle => "mle",
            EstimationMethod::ConditionalMle => "cmle",
            EstimationMethod::Burg => "burg",
            EstimationMethod::YuleWalker => "yw",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EstimationMethod::ExactMle => "Exact MLE",
            EstimationMethod::ConditionalMle => "Conditional MLE",
            EstimationMethod::Burg => "Burg's method",
            EstimationMethod::YuleWalker => "Yule-Walker",
        }
    }

    /// Applies this estimator to a raw slice.
    pub fn estimate(self, x: &[f64], order: usize) -> Result<EstimateRecord> {
        match self {
            EstimationMethod::ExactMle => exact_mle_slice(x, order),
            EstimationMethod::ConditionalMle => conditional_mle_slice(x, order),
            EstimationMethod::Burg => burg_slice(x, order),
            EstimationMethod::YuleWalker => yule_walker_slice(x, order),
        }
    }
}

impl fmt::Display for EstimationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for EstimationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mle" | "exact-mle" => Ok(EstimationMethod::ExactMle),
            "cmle" | "conditional-mle" => Ok(EstimationMethod::ConditionalMle),
            "burg" => Ok(EstimationMethod::Burg),
            "yw" | "yule-walker" => Ok(EstimationMethod::YuleWalker),
            other => Err(Error::Domain(format!(
                "unknown estimation method '{other}' (expected mle, cmle, burg or yw)"
            ))),
        }
    }
}

/// One fitted estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateRecord {
    pub method: EstimationMethod,
    /// Length of the series the estimate came from.
    pub n: usize,
    phi: [f64; 2],
    psi: PartialAutocorrelations,
    pub clamped: bool,
}

impl EstimateRecord {
    /// Wraps an externally supplied estimate. Non-stationary input is an
    /// error; partial autocorrelations within `eps` of `±1` are clamped.
    pub fn from_phi(method: EstimationMethod, phi: &[f64], n: usize, eps: f64) -> Result<Self> {
        let coeffs = ArCoefficients::standard(phi)?;
        if !crate::ar::is_stationary(&coeffs) {
            return Err(Error::Domain(format!(
                "estimate {phi:?} is outside the stationary region"
            )));
        }
        let psi = to_partial(&coeffs)?;
        let (psi, clamped) = PartialAutocorrelations::clamped(psi.psi(), eps)?;
        Ok(Self::from_psi(method, psi, n, clamped))
    }

    pub(crate) fn from_psi(
        method: EstimationMethod,
        psi: PartialAutocorrelations,
        n: usize,
        clamped: bool,
    ) -> Self {
        Self {
            method,
            n,
            phi: phi_from_psi(psi.psi()),
            psi,
            clamped,
        }
    }

    pub fn order(&self) -> usize {
        self.psi.order()
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi[..self.order()]
    }

    pub fn psi(&self) -> &PartialAutocorrelations {
        &self.psi
    }
}

fn check_input(x: &[f64], order: usize) -> Result<()> {
    if order != 1 && order != 2 {
        return Err(Error::Order(order));
    }
    if x.len() < order + 2 {
        return Err(Error::Domain(format!(
            "order {order} needs at least {} observations, got {}",
            order + 2,
            x.len()
        )));
    }
    Ok(())
}

/// Deviations from the sample mean, rejecting constant series.
fn demeaned(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let y: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let ss: f64 = y.iter().map(|v| v * v).sum();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(ss > 1e-24 * n * scale.max(1e-300).powi(2)) {
        return Err(Error::DegenerateSeries("series has zero variance".into()));
    }
    Ok(y)
}

/// Biased autocovariance `(1/n) sum (x_t - mean)(x_{t+k} - mean)`.
fn autocovariance(y: &[f64], lag: usize) -> f64 {
    let n = y.len();
    y[..n - lag]
        .iter()
        .zip(&y[lag..])
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / n as f64
}

fn open_psi(psi: &[f64], what: &str) -> Result<PartialAutocorrelations> {
    PartialAutocorrelations::new(psi)
        .map_err(|_| Error::DegenerateSeries(format!("{what} hit the stationarity boundary")))
}

fn yule_walker_slice(x: &[f64], order: usize) -> Result<EstimateRecord> {
    check_input(x, order)?;
    let y = demeaned(x)?;
    let c0 = autocovariance(&y, 0);
    let r1 = autocovariance(&y, 1) / c0;
    let psi = if order == 1 {
        open_psi(&[r1], "Yule-Walker")?
    } else {
        let r2 = autocovariance(&y, 2) / c0;
        // Durbin-Levinson step for the order-2 Toeplitz system
        let psi2 = (r2 - r1 * r1) / (1.0 - r1 * r1);
        open_psi(&[r1, psi2], "Yule-Walker")?
    };
    Ok(EstimateRecord::from_psi(
        EstimationMethod::YuleWalker,
        psi,
        x.len(),
        false,
    ))
}

/// Yule-Walker: solves the order-p Toeplitz system of biased
/// autocovariances.
pub fn yule_walker(x: &TimeSeries, order: usize) -> Result<EstimateRecord> {
    yule_walker_slice(x.values(), order)
}

/// Burg reflection coefficients from demeaned data.
fn burg_reflections(y: &[f64], order: usize) -> Result<[f64; 2]> {
    let mut f = y.to_vec();
    let mut b = y.to_vec();
    let mut k = [0.0; 2];
    for stage in 0..order {
        let m = f.len();
        let mut num = 0.0;
        let mut den = 0.0;
        for t in 1..m {
            num += f[t] * b[t - 1];
            den += f[t] * f[t] + b[t - 1] * b[t - 1];
        }
        if !(den > 0.0) {
            return Err(Error::DegenerateSeries(
                "zero prediction error energy in Burg recursion".into(),
            ));
        }
        let kk = 2.0 * num / den;
        if !(kk.abs() < 1.0) {
            return Err(Error::DegenerateSeries(
                "Burg reflection coefficient reached ±1".into(),
            ));
        }
        k[stage] = kk;
        let nf: Vec<f64> = (1..m).map(|t| f[t] - kk * b[t - 1]).collect();
        let nb: Vec<f64> = (1..m).map(|t| b[t - 1] - kk * f[t]).collect();
        f = nf;
        b = nb;
    }
    Ok(k)
}

fn burg_slice(x: &[f64], order: usize) -> Result<EstimateRecord> {
    check_input(x, order)?;
    let y = demeaned(x)?;
    let k = burg_reflections(&y, order)?;
    let psi = open_psi(&k[..order], "Burg")?;
    Ok(EstimateRecord::from_psi(
        EstimationMethod::Burg,
        psi,
        x.len(),
        false,
    ))
}

/// Burg's lattice method. The reflection coefficients are the partial
/// autocorrelation estimates; `phi` follows from the Levinson update.
pub fn burg(x: &TimeSeries, order: usize) -> Result<EstimateRecord> {
    burg_slice(x.values(), order)
}

/// Partial autocorrelations of (possibly non-stationary) `phi`, projected
/// into `[-(1 - eps), 1 - eps]^p`.
fn project_to_square(phi: &[f64], eps: f64) -> Result<(PartialAutocorrelations, bool)> {
    let limit = 1.0 - eps;
    match *phi {
        [p] => PartialAutocorrelations::clamped(&[p], eps),
        [p1, p2] => {
            let psi2 = p2.clamp(-limit, limit);
            let psi1 = p1 / (1.0 - psi2);
            let (psi, clamped) = PartialAutocorrelations::clamped(&[psi1, psi2], eps)?;
            Ok((psi, clamped || psi2 != p2))
        }
        _ => Err(Error::Order(phi.len())),
    }
}

fn conditional_mle_slice(x: &[f64], order: usize) -> Result<EstimateRecord> {
    check_input(x, order)?;
    let y = demeaned(x)?;
    let n = y.len();
    let phi: Vec<f64> = if order == 1 {
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for t in 1..n {
            sxy += y[t] * y[t - 1];
            sxx += y[t - 1] * y[t - 1];
        }
        if !(sxx > 0.0) {
            return Err(Error::DegenerateSeries("collinear lag design".into()));
        }
        vec![sxy / sxx]
    } else {
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for t in 2..n {
            let (l1, l2) = (y[t - 1], y[t - 2]);
            a11 += l1 * l1;
            a12 += l1 * l2;
            a22 += l2 * l2;
            b1 += y[t] * l1;
            b2 += y[t] * l2;
        }
        let det = a11 * a22 - a12 * a12;
        if !(det > 1e-12 * a11 * a22) {
            return Err(Error::DegenerateSeries("collinear lag design".into()));
        }
        vec![(b1 * a22 - b2 * a12) / det, (a11 * b2 - a12 * b1) / det]
    };
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSeries("non-finite least-squares solution".into()));
    }
    let (psi, clamped) = project_to_square(&phi, CMLE_CLAMP)?;
    Ok(EstimateRecord::from_psi(
        EstimationMethod::ConditionalMle,
        psi,
        x.len(),
        clamped,
    ))
}

/// Gaussian conditional MLE: least squares of the demeaned series on its
/// demeaned lags. Estimates outside the stationary region are projected
/// and flagged as clamped.
pub fn conditional_mle(x: &TimeSeries, order: usize) -> Result<EstimateRecord> {
    conditional_mle_slice(x.values(), order)
}

/// Sufficient statistics of the exact Gaussian likelihood of a demeaned
/// series.
struct ExactLikelihood {
    n: f64,
    y1: f64,
    y2: f64,
    // sum_t y_t^2, y_t y_{t-1}, y_t y_{t-2}, y_{t-1}^2, y_{t-1} y_{t-2},
    // y_{t-2}^2 over the conditional range
    a: f64,
    b1: f64,
    b2: f64,
    c11: f64,
    c12: f64,
    c22: f64,
    order: usize,
}

/// `ln(1 - tanh(u)^2) = -2 ln cosh(u)`, stable for large `|u|`.
fn log_sech2(u: f64) -> f64 {
    let a = u.abs();
    -2.0 * (a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2)
}

impl ExactLikelihood {
    fn new(y: &[f64], order: usize) -> Self {
        let n = y.len();
        let start = order;
        let mut s = Self {
            n: n as f64,
            y1: y[0],
            y2: y[1],
            a: 0.0,
            b1: 0.0,
            b2: 0.0,
            c11: 0.0,
            c12: 0.0,
            c22: 0.0,
            order,
        };
        for t in start..n {
            let l1 = y[t - 1];
            s.a += y[t] * y[t];
            s.b1 += y[t] * l1;
            s.c11 += l1 * l1;
            if order == 2 {
                let l2 = y[t - 2];
                s.b2 += y[t] * l2;
                s.c12 += l1 * l2;
                s.c22 += l2 * l2;
            }
        }
        s
    }

    /// Profiled `-2 log L` (up to constants) and its gradient with respect
    /// to the logit-scale parameters `z`, where `psi = tanh(z / 2)`.
    fn objective(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.n;
        if self.order == 1 {
            let psi = (0.5 * z[0]).tanh();
            let om = 1.0 - psi * psi;
            let s = self.y1 * self.y1 * om + self.a - 2.0 * psi * self.b1 + psi * psi * self.c11;
            let ds = -2.0 * psi * self.y1 * self.y1 - 2.0 * self.b1 + 2.0 * psi * self.c11;
            grad[0] = n * ds * om / (2.0 * s) + psi;
            n * s.ln() - log_sech2(0.5 * z[0])
        } else {
            let p1 = (0.5 * z[0]).tanh();
            let p2 = (0.5 * z[1]).tanh();
            let om1 = 1.0 - p1 * p1;
            let om2 = 1.0 - p2 * p2;
            let phi1 = p1 * (1.0 - p2);
            let phi2 = p2;
            let q = self.a - 2.0 * phi1 * self.b1 - 2.0 * phi2 * self.b2
                + phi1 * phi1 * self.c11
                + 2.0 * phi1 * phi2 * self.c12
                + phi2 * phi2 * self.c22;
            let dq1 = -2.0 * self.b1 + 2.0 * phi1 * self.c11 + 2.0 * phi2 * self.c12;
            let dq2 = -2.0 * self.b2 + 2.0 * phi1 * self.c12 + 2.0 * phi2 * self.c22;
            let e2 = self.y2 - p1 * self.y1;
            let y1s = self.y1 * self.y1;
            let s = y1s * om1 * om2 + e2 * e2 * om2 + q;
            let ds1 = -2.0 * p1 * y1s * om2 - 2.0 * self.y1 * e2 * om2 + dq1 * (1.0 - p2);
            let ds2 = -2.0 * p2 * y1s * om1 - 2.0 * p2 * e2 * e2 - dq1 * p1 + dq2;
            grad[0] = n * ds1 * om1 / (2.0 * s) + p1;
            grad[1] = n * ds2 * om2 / (2.0 * s) + 2.0 * p2;
            n * s.ln() - log_sech2(0.5 * z[0]) - 2.0 * log_sech2(0.5 * z[1])
        }
    }
}

fn exact_mle_slice(x: &[f64], order: usize) -> Result<EstimateRecord> {
    check_input(x, order)?;
    let y = demeaned(x)?;
    let start = burg_reflections(&y, order)?;
    let lik = ExactLikelihood::new(&y, order);
    let z0: Vec<f64> = start[..order]
        .iter()
        .map(|&k| logit_unchecked(crate::ar::clamp_open(k)))
        .collect();

    let opts = Options {
        max_iter: 200,
        grad_tol: 1e-9,
        f_tol: 1e-12,
    };
    let mut best = optim::bfgs(|z, g| lik.objective(z, g), &z0, &opts);
    if !best.converged {
        // retry from the origin, then simplex
        let retry = optim::bfgs(|z, g| lik.objective(z, g), &vec![0.0; order], &opts);
        if retry.value < best.value || (retry.converged && !best.converged) {
            best = retry;
        }
        if !best.converged {
            let mut scratch = [0.0; 2];
            let nm = optim::nelder_mead(
                |z| lik.objective(z, &mut scratch[..order]),
                &best.x,
                0.5,
                &Options {
                    max_iter: 400,
                    f_tol: 1e-12,
                    ..opts
                },
            );
            if nm.converged && nm.value <= best.value {
                best = nm;
                best.converged = true;
            }
        }
    }
    if !best.converged {
        return Err(Error::Convergence {
            best: best.x.clone(),
            objective: best.value,
            grad_norm: best.grad_norm,
            iterations: best.iterations,
        });
    }
    let psi: Vec<f64> = best
        .x
        .iter()
        .map(|&z| crate::ar::inverse_logit_transform(z))
        .collect();
    let (psi, clamped) = PartialAutocorrelations::clamped(&psi, crate::ar::LOGIT_CLAMP)?;
    Ok(EstimateRecord::from_psi(
        EstimationMethod::ExactMle,
        psi,
        x.len(),
        clamped,
    ))
}

/// Exact stationary Gaussian MLE with the mean fixed at the sample mean and
/// the noise variance profiled out, searched on the logit partial
/// autocorrelation scale from Burg's estimate.
pub fn exact_mle(x: &TimeSeries, order: usize) -> Result<EstimateRecord> {
    exact_mle_slice(x.values(), order)
}

/// First-order asymptotic bias of the AR(1) exact MLE, `-(1 + 3 phi) / n`.
pub fn asymptotic_bias_ar1(phi: f64, n: usize) -> f64 {
    -(1.0 + 3.0 * phi) / n as f64
}
