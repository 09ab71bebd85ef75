use crate::ar::logit_unchecked;
use crate::calibration::CalibrationTable;
use crate::error::{Error, Result};
use crate::skewnormal::{sn_density, sn_quantile, SkewNormalParams};

use super::predict_at;

/// Knots of the monotone interpolant behind [`CorrectedDensity`].
pub const DENSITY_KNOTS: usize = 512;
const TAIL: f64 = 1e-10;

fn require_ar1(table: &CalibrationTable) -> Result<()> {
    if table.meta.order != 1 {
        return Err(Error::Mismatch(format!(
            "sampling densities are for AR(1) tables, got order {}",
            table.meta.order
        )));
    }
    Ok(())
}

fn ar1_params(table: &CalibrationTable, plug_in: f64) -> Result<SkewNormalParams> {
    require_ar1(table)?;
    Ok(predict_at(table, &[plug_in])?.marginals[0])
}

/// Approximate density of the original estimator at `at`, with skew-normal
/// parameters predicted at `plug_in`.
pub fn original_sampling_density(table: &CalibrationTable, plug_in: f64, at: f64) -> Result<f64> {
    if !(at.abs() < 1.0) {
        return Err(Error::Domain(format!("density argument {at} outside (-1, 1)")));
    }
    let params = ar1_params(table, plug_in)?;
    Ok(sn_density(&params, logit_unchecked(at)) * (1.0 / (1.0 + at) + 1.0 / (1.0 - at)))
}

/// Density of the corrected AR(1) estimator via a monotone cubic Hermite
/// interpolant `s` of the inverse correction map (corrected value to
/// `g(phi_hat)`), built once per plug-in value.
#[derive(Clone, Debug)]
pub struct CorrectedDensity {
    params: SkewNormalParams,
    c: Vec<f64>,
    z: Vec<f64>,
    slope: Vec<f64>,
}

impl CorrectedDensity {
    pub fn new(table: &CalibrationTable, plug_in: f64) -> Result<Self> {
        let params = ar1_params(table, plug_in)?;
        let model = &table.correction;
        model.check_monotone()?;
        let lo = sn_quantile(&params, TAIL)?;
        let hi = sn_quantile(&params, 1.0 - TAIL)?;
        let mut c = Vec::with_capacity(DENSITY_KNOTS);
        let mut z = Vec::with_capacity(DENSITY_KNOTS);
        let mut slope = Vec::with_capacity(DENSITY_KNOTS);
        for k in 0..DENSITY_KNOTS {
            let zk = lo + (hi - lo) * k as f64 / (DENSITY_KNOTS - 1) as f64;
            let eta = model.linear_predictor(0, &[zk]);
            let ck = (0.5 * eta).tanh();
            let dcdz = 0.5 * model.slope_ar1(zk) / (0.5 * eta).cosh().powi(2);
            // saturated or flat knots carry no resolvable mass
            if !(dcdz > 0.0) || c.last().is_some_and(|&prev| ck <= prev) {
                continue;
            }
            c.push(ck);
            z.push(zk);
            slope.push(1.0 / dcdz);
        }
        if c.len() < 2 {
            return Err(Error::DegenerateSeries(
                "corrected distribution collapses to a point".into(),
            ));
        }
        // Fritsch-Carlson limiter
        for k in 0..c.len() - 1 {
            let delta = (z[k + 1] - z[k]) / (c[k + 1] - c[k]);
            let a = slope[k] / delta;
            let b = slope[k + 1] / delta;
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                slope[k] = tau * a * delta;
                slope[k + 1] = tau * b * delta;
            }
        }
        Ok(Self { params, c, z, slope })
    }

    /// Range of corrected values the interpolant covers.
    pub fn support(&self) -> (f64, f64) {
        (self.c[0], *self.c.last().unwrap())
    }

    /// `s(at)` and `s'(at)`, or `None` outside the support.
    pub fn inverse_map(&self, at: f64) -> Option<(f64, f64)> {
        let (lo, hi) = self.support();
        if !(at >= lo && at <= hi) {
            return None;
        }
        let k = self.c.partition_point(|&v| v <= at).clamp(1, self.c.len() - 1) - 1;
        let h = self.c[k + 1] - self.c[k];
        let t = (at - self.c[k]) / h;
        let (z0, z1) = (self.z[k], self.z[k + 1]);
        let (d0, d1) = (self.slope[k] * h, self.slope[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let s = (2.0 * t3 - 3.0 * t2 + 1.0) * z0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * z1
            + (t3 - t2) * d1;
        let ds = ((6.0 * t2 - 6.0 * t) * z0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * z1
            + (3.0 * t2 - 2.0 * t) * d1)
            / h;
        Some((s, ds))
    }

    pub fn density(&self, at: f64) -> f64 {
        match self.inverse_map(at) {
            Some((s, ds)) => sn_density(&self.params, s) * ds.abs(),
            None => 0.0,
        }
    }
}

/// One-shot form of [`CorrectedDensity::density`].
pub fn corrected_sampling_density(table: &CalibrationTable, plug_in: f64, at: f64) -> Result<f64> {
    Ok(CorrectedDensity::new(table, plug_in)?.density(at))
}
