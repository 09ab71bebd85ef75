use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::ar::{inverse_logit_transform, phi_from_psi, PartialAutocorrelations};
use crate::calibration::CalibrationTable;
use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::skewnormal::{normal_cdf, sn_quantile_unchecked, SkewNormalParams};

use super::predict_at;

/// Fewer draws than this produce a warning.
pub const MIN_RECOMMENDED_DRAWS: usize = 1000;

const U_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub level: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Per-coefficient equi-tailed intervals for the original and corrected
/// estimators, from one shared set of draws.
#[derive(Clone, Debug, PartialEq)]
pub struct McIntervals {
    pub original: Vec<Interval>,
    pub corrected: Vec<Interval>,
    pub draws: usize,
    pub warnings: Vec<String>,
}

/// Equi-tailed interval: at most `ceil(alpha / 2 * N) - 1` values lie
/// strictly below `lo`, and likewise above `hi`. Sorts `values`.
pub fn equi_tailed(values: &mut [f64], level: f64) -> Interval {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let k = (((1.0 - level) / 2.0 * n as f64).ceil() as usize).saturating_sub(1).min(n - 1);
    Interval {
        level,
        lo: values[k],
        hi: values[n - 1 - k],
    }
}

fn check(level: f64, draws: usize) -> Result<Vec<String>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level {level} outside (0, 1)")));
    }
    if draws == 0 {
        return Err(Error::Domain("at least one Monte Carlo draw is required".into()));
    }
    let mut warnings = Vec::new();
    if draws < MIN_RECOMMENDED_DRAWS {
        warnings.push(format!(
            "only {draws} Monte Carlo draws; at least {MIN_RECOMMENDED_DRAWS} are recommended"
        ));
    }
    Ok(warnings)
}

/// Intervals for AR(1): skew-normal draws of `g(phi_hat)` at the plug-in,
/// mapped through `g^-1` (original) and the correction map (corrected).
pub fn mc_confidence_interval_ar1(
    table: &CalibrationTable,
    plug_in: f64,
    level: f64,
    draws: usize,
    seed: Seed,
) -> Result<McIntervals> {
    let warnings = check(level, draws)?;
    if table.meta.order != 1 {
        return Err(Error::Mismatch("AR(1) interval requested from an AR(2) table".into()));
    }
    let params = predict_at(table, &[plug_in])?.marginals[0];
    let mut rng = seed.rng();
    let mut orig = Vec::with_capacity(draws);
    let mut corr = Vec::with_capacity(draws);
    for _ in 0..draws {
        let u: f64 = rng.sample(Open01);
        let z = sn_quantile_unchecked(&params, u);
        orig.push(inverse_logit_transform(z));
        corr.push(table.correction.correct_logit(&[z])[0]);
    }
    Ok(McIntervals {
        original: vec![equi_tailed(&mut orig, level)],
        corrected: vec![equi_tailed(&mut corr, level)],
        draws,
        warnings,
    })
}

/// Logit-scale pairs from a Gaussian copula with skew-normal marginals.
pub fn copula_sample_ar2(
    params1: &SkewNormalParams,
    params2: &SkewNormalParams,
    rho: f64,
    draws: usize,
    seed: Seed,
) -> Result<Vec<[f64; 2]>> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!("copula correlation {rho} outside (-1, 1)")));
    }
    let mut rng = seed.rng();
    let tail = (1.0 - rho * rho).sqrt();
    let to_u = |x: f64| normal_cdf(x).clamp(f64::MIN_POSITIVE, U_MAX);
    Ok((0..draws)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let z2 = rho * a + tail * b;
            [
                sn_quantile_unchecked(params1, to_u(a)),
                sn_quantile_unchecked(params2, to_u(z2)),
            ]
        })
        .collect())
}

/// Intervals for `(phi_1, phi_2)` from copula draws at the plug-in partial
/// autocorrelations.
pub fn mc_confidence_interval_ar2(
    table: &CalibrationTable,
    plug_in: &PartialAutocorrelations,
    level: f64,
    draws: usize,
    seed: Seed,
) -> Result<McIntervals> {
    let warnings = check(level, draws)?;
    if table.meta.order != 2 || plug_in.order() != 2 {
        return Err(Error::Mismatch("AR(2) interval needs an AR(2) table and plug-in".into()));
    }
    let pred = predict_at(table, plug_in.psi())?;
    let rho = pred.rho.unwrap_or(0.0);
    let pairs = copula_sample_ar2(&pred.marginals[0], &pred.marginals[1], rho, draws, seed)?;
    let mut orig = [Vec::with_capacity(draws), Vec::with_capacity(draws)];
    let mut corr = [Vec::with_capacity(draws), Vec::with_capacity(draws)];
    for z in &pairs {
        let psi = [inverse_logit_transform(z[0]), inverse_logit_transform(z[1])];
        let phi = phi_from_psi(&psi);
        let cphi = phi_from_psi(&table.correction.correct_logit(z));
        for i in 0..2 {
            orig[i].push(phi[i]);
            corr[i].push(cphi[i]);
        }
    }
    let [o1, o2] = &mut orig;
    let [c1, c2] = &mut corr;
    Ok(McIntervals {
        original: vec![equi_tailed(o1, level), equi_tailed(o2, level)],
        corrected: vec![equi_tailed(c1, level), equi_tailed(c2, level)],
        draws,
        warnings,
    })
}
