//! AR(1)/AR(2) domain types, stationarity geometry and exact simulation.
//!
//! The process is `x_t - mu = sum_j phi_j (x_{t-j} - mu) + w_t` with
//! Gaussian `w_t ~ N(0, sigma^2)`. AR(2) coefficients are also handled in
//! partial-autocorrelation form `psi_1 = phi_1 / (1 - phi_2)`,
//! `psi_2 = phi_2`, which maps the stationary triangle onto the open square.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::Seed;

/// Callers clamp values at `±1` to `±(1 - LOGIT_CLAMP)` before
/// [`logit_transform`].
pub const LOGIT_CLAMP: f64 = 1e-9;

/// Largest magnitude [`inverse_logit_transform`] returns: `1 - 2^-53`.
const OPEN_UNIT: f64 = 1.0 - f64::EPSILON / 2.0;

fn check_order(order: usize) -> Result<()> {
    match order {
        1 | 2 => Ok(()),
        other => Err(Error::Order(other)),
    }
}

/// Coefficients of a zero- or nonzero-mean AR(1)/AR(2) process.
///
/// Construction checks the order, finiteness and `sigma > 0`, but not
/// stationarity: use [`is_stationary`] (or an operation that requires it).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArCoefficients {
    order: usize,
    phi: [f64; 2],
    mu: f64,
    sigma: f64,
}

impl ArCoefficients {
    pub fn new(phi: &[f64], mu: f64, sigma: f64) -> Result<Self> {
        check_order(phi.len())?;
        if phi.iter().any(|v| !v.is_finite()) || !mu.is_finite() {
            return Err(Error::Domain("coefficients must be finite".into()));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be > 0, got {sigma}")));
        }
        let mut buf = [0.0; 2];
        buf[..phi.len()].copy_from_slice(phi);
        Ok(Self {
            order: phi.len(),
            phi: buf,
            mu,
            sigma,
        })
    }

    /// Zero-mean, unit-noise coefficients.
    pub fn standard(phi: &[f64]) -> Result<Self> {
        Self::new(phi, 0.0, 1.0)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi[..self.order]
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn with_mean_and_scale(mut self, mu: f64, sigma: f64) -> Result<Self> {
        let checked = Self::new(self.phi(), mu, sigma)?;
        self.mu = checked.mu;
        self.sigma = checked.sigma;
        Ok(self)
    }
}

/// Strict stationarity: `|phi_1| < 1` for AR(1), the open triangle
/// `phi_2 + |phi_1| < 1, |phi_2| < 1` for AR(2).
pub fn is_stationary(coeffs: &ArCoefficients) -> bool {
    match coeffs.phi() {
        [p] => p.abs() < 1.0,
        [p1, p2] => p2 + p1.abs() < 1.0 && p2.abs() < 1.0,
        _ => unreachable!("order validated at construction"),
    }
}

/// Partial autocorrelations; every component lies in `(-1, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartialAutocorrelations {
    order: usize,
    psi: [f64; 2],
}

impl PartialAutocorrelations {
    pub fn new(psi: &[f64]) -> Result<Self> {
        check_order(psi.len())?;
        if let Some(v) = psi.iter().find(|v| !(v.abs() < 1.0)) {
            return Err(Error::Domain(format!(
                "partial autocorrelation {v} outside (-1, 1)"
            )));
        }
        let mut buf = [0.0; 2];
        buf[..psi.len()].copy_from_slice(psi);
        Ok(Self {
            order: psi.len(),
            psi: buf,
        })
    }

    /// Clamps each component into `[-(1 - eps), 1 - eps]` first.
    pub fn clamped(psi: &[f64], eps: f64) -> Result<(Self, bool)> {
        let limit = 1.0 - eps;
        let mut clamped = false;
        let mut buf = [0.0; 2];
        for (dst, &v) in buf.iter_mut().zip(psi) {
            if v.is_nan() {
                return Err(Error::Domain("NaN partial autocorrelation".into()));
            }
            *dst = if v > limit {
                clamped = true;
                limit
            } else if v < -limit {
                clamped = true;
                -limit
            } else {
                v
            };
        }
        Ok((Self::new(&buf[..psi.len()])?, clamped))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi[..self.order]
    }
}

/// `psi_1 = phi_1 / (1 - phi_2)`, `psi_2 = phi_2`; identity for AR(1).
pub fn to_partial(coeffs: &ArCoefficients) -> Result<PartialAutocorrelations> {
    match coeffs.phi() {
        [p] => PartialAutocorrelations::new(&[*p]),
        [p1, p2] => {
            let denom = 1.0 - p2;
            if denom == 0.0 {
                return Err(Error::Singularity("phi_2 = 1".into()));
            }
            PartialAutocorrelations::new(&[p1 / denom, *p2])
        }
        _ => unreachable!(),
    }
}

/// Inverse of [`to_partial`]: `phi_1 = psi_1 (1 - psi_2)`, `phi_2 = psi_2`.
pub fn from_partial(psi: &PartialAutocorrelations) -> ArCoefficients {
    let phi = phi_from_psi(psi.psi());
    ArCoefficients {
        order: psi.order,
        phi,
        mu: 0.0,
        sigma: 1.0,
    }
}

#[inline]
pub(crate) fn phi_from_psi(psi: &[f64]) -> [f64; 2] {
    match *psi {
        [a] => [a, 0.0],
        [a, b] => [a * (1.0 - b), b],
        _ => unreachable!(),
    }
}

/// `g(v) = logit((v + 1) / 2)`, defined on the open interval `(-1, 1)`.
pub fn logit_transform(v: f64) -> Result<f64> {
    if !(v.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "logit transform needs |v| < 1, got {v}"
        )));
    }
    Ok(logit_unchecked(v))
}

#[inline]
pub(crate) fn logit_unchecked(v: f64) -> f64 {
    v.ln_1p() - (-v).ln_1p()
}

/// `g^{-1}(z) = 2 / (1 + e^{-z}) - 1`, kept strictly inside `(-1, 1)`.
#[inline]
pub fn inverse_logit_transform(z: f64) -> f64 {
    (0.5 * z).tanh().clamp(-OPEN_UNIT, OPEN_UNIT)
}

/// Clamps into `[-(1 - LOGIT_CLAMP), 1 - LOGIT_CLAMP]`.
#[inline]
pub fn clamp_open(v: f64) -> f64 {
    v.clamp(-(1.0 - LOGIT_CLAMP), 1.0 - LOGIT_CLAMP)
}

/// Complex characteristic roots: `psi_1^2 (1 - psi_2)^2 + 4 psi_2 < 0`.
pub fn is_pseudo_periodic(psi: &PartialAutocorrelations) -> Result<bool> {
    match psi.psi() {
        [a, b] => Ok(a * a * (1.0 - b) * (1.0 - b) + 4.0 * b < 0.0),
        _ => Err(Error::Domain(
            "pseudo-periodicity is defined for AR(2) only".into(),
        )),
    }
}

/// A finite series of at least three observations.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::Domain(format!(
                "a series needs at least 3 values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at index {i}")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Stationary lag-0 variance and lag-1 autocorrelation, in units of sigma^2.
fn stationary_moments(phi: &[f64]) -> (f64, f64) {
    match *phi {
        [p] => (1.0 / (1.0 - p * p), p),
        [p1, p2] => {
            let psi1 = p1 / (1.0 - p2);
            (1.0 / ((1.0 - psi1 * psi1) * (1.0 - p2 * p2)), psi1)
        }
        _ => unreachable!(),
    }
}

/// Fills `out` with a stationary path started from the exact stationary
/// distribution. Coefficients must already be known stationary.
pub(crate) fn simulate_into<R: Rng + ?Sized>(coeffs: &ArCoefficients, rng: &mut R, out: &mut [f64]) {
    let n = out.len();
    let sigma = coeffs.sigma;
    let (gamma0, rho1) = stationary_moments(coeffs.phi());
    let sd0 = sigma * gamma0.sqrt();
    let mut draw = || -> f64 { rng.sample(StandardNormal) };
    match *coeffs.phi() {
        [p] => {
            out[0] = sd0 * draw();
            for t in 1..n {
                out[t] = p * out[t - 1] + sigma * draw();
            }
        }
        [p1, p2] => {
            out[0] = sd0 * draw();
            if n > 1 {
                out[1] = rho1 * out[0] + sd0 * (1.0 - rho1 * rho1).sqrt() * draw();
            }
            for t in 2..n {
                out[t] = p1 * out[t - 1] + p2 * out[t - 2] + sigma * draw();
            }
        }
        _ => unreachable!(),
    }
    if coeffs.mu != 0.0 {
        for v in out.iter_mut() {
            *v += coeffs.mu;
        }
    }
}

/// Simulates `n` values of the stationary Gaussian process.
pub fn simulate(coeffs: &ArCoefficients, n: usize, seed: Seed) -> Result<TimeSeries> {
    if !is_stationary(coeffs) {
        return Err(Error::Domain(format!(
            "cannot simulate non-stationary coefficients {:?}",
            coeffs.phi()
        )));
    }
    if n < 3 {
        return Err(Error::Domain(format!("n must be >= 3, got {n}")));
    }
    let mut values = vec![0.0; n];
    simulate_into(coeffs, &mut seed.rng(), &mut values);
    TimeSeries::new(values)
}
