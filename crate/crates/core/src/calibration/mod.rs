//! Brute-force calibration: simulate estimator draws over a grid of true
//! coefficients, fit the weighted Hermite correction map, summarize, and
//! persist everything as a [`CalibrationTable`].

mod fit;
mod grid;
mod summary;
mod table;

pub use fit::{
    correction_gradient, correction_objective, evaluate_correction, fit_correction, fit_correction_ar1,
    fit_correction_ar2, CorrectionModel, FitReport,
};
pub use grid::{run_grid_simulation, run_grid_simulation_with_progress, GridSample, MethodDraws};
pub use summary::{summarize_grid, CellSummary, GridSummary, ErrorStats};
pub use table::{
    build_table, calibrate, fit_cell_distributions, load_table, load_table_expecting, save_table,
    table_file_name, CalibrationTable, TableMeta, FORMAT_VERSION,
};

use crate::error::{Error, Result};
use crate::estimators::EstimationMethod;

/// Smallest and largest series length the calibration supports.
pub const N_RANGE: std::ops::RangeInclusive<usize> = 10..=50;

/// Weights `1 / s^2` use `max(s^2, VARIANCE_FLOOR)`.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Arithmetic grid `lo, lo + step, ..., hi` of true coefficient values (per
/// axis; AR(2) uses the product of two copies on the partial
/// autocorrelation scale).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let g = Self { lo, hi, step };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !(self.lo <= self.hi) {
            return Err(Error::Config(format!("invalid grid {self:?}")));
        }
        if !(self.lo > -1.0 && self.hi < 1.0) {
            return Err(Error::Config(format!(
                "grid [{}, {}] must lie strictly inside (-1, 1)",
                self.lo, self.hi
            )));
        }
        let count = (self.hi - self.lo) / self.step;
        if (count - count.round()).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "grid step {} does not divide [{}, {}]",
                self.step, self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.hi - self.lo) / self.step).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.lo + i as f64 * self.step)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationConfig {
    pub order: usize,
    pub n: usize,
    pub methods: Vec<EstimationMethod>,
    /// Replicates per grid cell.
    pub replicates: usize,
    pub grid: GridSpec,
    /// Hermite total-degree cap.
    pub degree: usize,
    pub seed: u64,
}

impl CalibrationConfig {
    /// Laptop-sized defaults: `m = 2000`, step 0.05 for AR(1);
    /// `m = 1000`, step 0.10 for AR(2); `K = 3`.
    pub fn desk(order: usize, n: usize, methods: &[EstimationMethod]) -> Self {
        let (replicates, step) = if order == 1 { (2000, 0.05) } else { (1000, 0.10) };
        Self {
            order,
            n,
            methods: methods.to_vec(),
            replicates,
            grid: GridSpec {
                lo: -0.95,
                hi: 0.95,
                step,
            },
            degree: 3,
            seed: 20_240_601,
        }
    }

    /// Full-size settings: `m = 10000`, step 0.01 (AR(1)) / 0.025 (AR(2)).
    pub fn full_scale(order: usize, n: usize, methods: &[EstimationMethod]) -> Self {
        let step = if order == 1 { 0.01 } else { 0.025 };
        Self {
            replicates: 10_000,
            grid: GridSpec {
                lo: -0.95,
                hi: 0.95,
                step,
            },
            ..Self::desk(order, n, methods)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order != 1 && self.order != 2 {
            return Err(Error::Order(self.order));
        }
        if !N_RANGE.contains(&self.n) {
            return Err(Error::Config(format!(
                "n = {} outside [{}, {}]",
                self.n,
                N_RANGE.start(),
                N_RANGE.end()
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no estimation method selected".into()));
        }
        if self.replicates < 100 {
            return Err(Error::Config(format!(
                "at least 100 replicates per cell are required, got {}",
                self.replicates
            )));
        }
        if ![3, 5, 7].contains(&self.degree) {
            return Err(Error::Config(format!(
                "K must be 3, 5 or 7, got {}",
                self.degree
            )));
        }
        self.grid.validate()
    }

    /// Number of grid cells (`l`).
    pub fn cells(&self) -> usize {
        self.grid.len().pow(self.order as u32)
    }

    /// Total simulated series.
    pub fn total_series(&self) -> usize {
        self.cells() * self.replicates
    }

    /// True partial autocorrelations of every cell, row-major in
    /// `(psi_1, psi_2)`.
    pub fn cell_truths(&self) -> Vec<[f64; 2]> {
        let axis = self.grid.values();
        if self.order == 1 {
            axis.iter().map(|&v| [v, 0.0]).collect()
        } else {
            axis.iter()
                .flat_map(|&a| axis.iter().map(move |&b| [a, b]))
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        let c = CalibrationConfig::desk(1, 15, &[EstimationMethod::ExactMle]);
        assert_eq!(c.grid.len(), 39);
        assert_eq!(c.cells(), 39);
        let p = CalibrationConfig::full_scale(1, 15, &[EstimationMethod::ExactMle]);
        assert_eq!(p.cells(), 191);
        let p2 = CalibrationConfig::full_scale(2, 15, &[EstimationMethod::ExactMle]);
        assert_eq!(p2.cells(), 5929);
        let d2 = CalibrationConfig::desk(2, 15, &[EstimationMethod::ExactMle]);
        assert_eq!(d2.cells(), 400);
        let truths = d2.cell_truths();
        assert_eq!(truths[1], [-0.95, -0.85]);
        assert!(c.validate().is_ok() && d2.validate().is_ok());
    }

    #[test]
    fn invalid_configs() {
        let base = CalibrationConfig::desk(1, 15, &[EstimationMethod::Burg]);
        let mut c = base.clone();
        c.n = 9;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.replicates = 50;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.degree = 4;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.grid.hi = 1.0;
        assert!(c.validate().is_err());
        let mut c = base;
        c.methods.clear();
        assert!(c.validate().is_err());
        assert!(GridSpec::new(-0.5, 0.5, 0.3).is_err());
    }
}
