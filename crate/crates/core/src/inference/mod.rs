//! Applying a calibration table to a new estimate: corrected point values,
//! approximate sampling densities and Monte Carlo confidence intervals.

mod coverage;
mod density;
mod interval;

pub use coverage::{load_table_set, run_coverage_experiment, CoverageConfig, CoverageReport, CoverageRow};
pub use density::{corrected_sampling_density, original_sampling_density, CorrectedDensity, DENSITY_KNOTS};
pub use interval::{
    copula_sample_ar2, equi_tailed, mc_confidence_interval_ar1, mc_confidence_interval_ar2, Interval,
    McIntervals, MIN_RECOMMENDED_DRAWS,
};

use std::fmt;
use std::str::FromStr;

use crate::ar::{clamp_open, PartialAutocorrelations};
use crate::calibration::{evaluate_correction, CalibrationTable, N_RANGE};
use crate::error::{Error, Result};
use crate::estimators::{EstimateRecord, EstimationMethod};
use crate::rng::Seed;
use crate::skewnormal::SurfacePrediction;

/// Which value is plugged into the distribution surfaces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum PlugIn {
    #[default]
    Original,
    Corrected,
}

impl PlugIn {
    pub fn code(self) -> &'static str {
        match self {
            PlugIn::Original => "original",
            PlugIn::Corrected => "corrected",
        }
    }
}

impl fmt::Display for PlugIn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for PlugIn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(PlugIn::Original),
            "corrected" => Ok(PlugIn::Corrected),
            other => Err(Error::Domain(format!("unknown plug-in mode '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectionOptions {
    pub level: f64,
    pub draws: usize,
    pub plug_in: PlugIn,
    pub seed: Seed,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        Self {
            level: 0.95,
            draws: 10_000,
            plug_in: PlugIn::Original,
            seed: Seed::new(1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionResult {
    pub method: EstimationMethod,
    pub n: usize,
    pub phi_hat: Vec<f64>,
    pub phi_corrected: Vec<f64>,
    pub ci_original: Vec<Interval>,
    pub ci_corrected: Vec<Interval>,
    /// The estimate was projected into the stationary region.
    pub clamped: bool,
    pub draws: usize,
    pub plug_in: PlugIn,
    pub warnings: Vec<String>,
}

/// Surface prediction at partial autocorrelations pulled just inside the
/// open square.
pub(crate) fn predict_at(table: &CalibrationTable, psi: &[f64]) -> Result<SurfacePrediction> {
    let inside: Vec<f64> = psi.iter().map(|&v| clamp_open(v)).collect();
    table.surfaces.predict(&PartialAutocorrelations::new(&inside)?)
}

/// Checks that `table` was calibrated for this order, method and length.
pub fn check_table(table: &CalibrationTable, order: usize, method: EstimationMethod, n: usize) -> Result<()> {
    if !N_RANGE.contains(&n) {
        return Err(Error::Config(format!(
            "n = {n} outside [{}, {}]",
            N_RANGE.start(),
            N_RANGE.end()
        )));
    }
    let m = &table.meta;
    if m.order != order || m.method != method || m.n != n {
        return Err(Error::Mismatch(format!(
            "table is for AR({}) {} n={}, estimate is AR({order}) {method} n={n}",
            m.order, m.method, m.n
        )));
    }
    Ok(())
}

/// Corrected point estimate and Monte Carlo intervals for one estimate.
pub fn correct_estimate(
    table: &CalibrationTable,
    estimate: &EstimateRecord,
    options: &CorrectionOptions,
) -> Result<CorrectionResult> {
    let order = estimate.order();
    check_table(table, order, estimate.method, estimate.n)?;
    let corrected = evaluate_correction(&table.correction, estimate.psi())?;
    let corrected_psi = table.correction.correct_psi(estimate.psi().psi());
    let plug: Vec<f64> = match options.plug_in {
        PlugIn::Original => estimate.psi().psi().to_vec(),
        PlugIn::Corrected => corrected_psi[..order].to_vec(),
    };
    let ci = if order == 1 {
        mc_confidence_interval_ar1(table, plug[0], options.level, options.draws, options.seed)?
    } else {
        let inside: Vec<f64> = plug.iter().map(|&v| clamp_open(v)).collect();
        mc_confidence_interval_ar2(
            table,
            &PartialAutocorrelations::new(&inside)?,
            options.level,
            options.draws,
            options.seed,
        )?
    };
    Ok(CorrectionResult {
        method: estimate.method,
        n: estimate.n,
        phi_hat: estimate.phi().to_vec(),
        phi_corrected: corrected.phi().to_vec(),
        ci_original: ci.original,
        ci_corrected: ci.corrected,
        clamped: estimate.clamped,
        draws: ci.draws,
        plug_in: options.plug_in,
        warnings: ci.warnings,
    })
}
