use crate::ar::phi_from_psi;
use crate::error::{Error, Result};
use crate::estimators::EstimationMethod;

use super::{CorrectionModel, GridSample};

/// Overall error statistics on the coefficient (`phi`) scale, averaged over
/// cells, replicates and (for AR(2)) both coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorStats {
    pub bias: f64,
    /// Mean of the per-cell sample variances.
    pub variance: f64,
    pub rmse: f64,
}

/// Mean estimates in one cell, on both the `phi` and `psi` scales.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub truth_psi: [f64; 2],
    pub truth_phi: [f64; 2],
    pub mean_phi: [f64; 2],
    pub mean_psi: [f64; 2],
    pub corrected_mean_phi: Option<[f64; 2]>,
    pub corrected_mean_psi: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSummary {
    pub order: usize,
    pub method: EstimationMethod,
    pub n: usize,
    pub original: ErrorStats,
    pub corrected: Option<ErrorStats>,
    pub cells: Vec<CellSummary>,
}

#[derive(Default)]
struct Accumulator {
    sum_err: f64,
    sum_sq: f64,
    sum_var: f64,
    count: usize,
    var_terms: usize,
}

impl Accumulator {
    /// Adds one cell-coefficient's estimates and returns their mean.
    fn add(&mut self, values: &[f64], truth: f64) -> f64 {
        let m = values.len() as f64;
        let mean = values.iter().sum::<f64>() / m;
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        self.sum_err += values.iter().map(|v| v - truth).sum::<f64>();
        self.sum_sq += values.iter().map(|v| (v - truth).powi(2)).sum::<f64>();
        self.sum_var += ss / (m - 1.0);
        self.count += values.len();
        self.var_terms += 1;
        mean
    }

    fn finish(&self) -> ErrorStats {
        ErrorStats {
            bias: self.sum_err / self.count as f64,
            variance: self.sum_var / self.var_terms as f64,
            rmse: (self.sum_sq / self.count as f64).sqrt(),
        }
    }
}

/// Bias, variance and RMSE of the original (and, given a model, corrected)
/// estimates, plus per-cell mean-estimate grids.
pub fn summarize_grid(
    sample: &GridSample,
    method: EstimationMethod,
    model: Option<&CorrectionModel>,
) -> Result<GridSummary> {
    if let Some(m) = model {
        if m.order != sample.order || m.method != method {
            return Err(Error::Mismatch(format!(
                "correction for AR({}) {} applied to AR({}) {} draws",
                m.order, m.method, sample.order, method
            )));
        }
    }
    let draws = sample.draws(method)?;
    let order = sample.order;
    let m = sample.replicates;
    let mut orig = Accumulator::default();
    let mut corr = Accumulator::default();
    let mut cells = Vec::with_capacity(sample.cells());
    let mut phi = vec![vec![0.0; m]; order];
    let mut psi = vec![vec![0.0; m]; order];
    let mut cphi = vec![vec![0.0; m]; order];
    let mut cpsi = vec![vec![0.0; m]; order];

    for (r, truth) in sample.truths.iter().enumerate() {
        let truth_phi = phi_from_psi(&truth[..order]);
        let slice = sample.cell_slice(&draws.psi, r);
        for j in 0..m {
            let p = &slice[j * order..(j + 1) * order];
            let f = phi_from_psi(p);
            for i in 0..order {
                psi[i][j] = p[i];
                phi[i][j] = f[i];
            }
            if let Some(model) = model {
                let c = model.correct_psi(p);
                let cf = phi_from_psi(&c[..order]);
                for i in 0..order {
                    cpsi[i][j] = c[i];
                    cphi[i][j] = cf[i];
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mut cell = CellSummary {
            truth_psi: *truth,
            truth_phi,
            mean_phi: [0.0; 2],
            mean_psi: [0.0; 2],
            corrected_mean_phi: model.map(|_| [0.0; 2]),
            corrected_mean_psi: model.map(|_| [0.0; 2]),
        };
        for i in 0..order {
            cell.mean_phi[i] = orig.add(&phi[i], truth_phi[i]);
            cell.mean_psi[i] = mean(&psi[i]);
            if model.is_some() {
                cell.corrected_mean_phi.as_mut().unwrap()[i] = corr.add(&cphi[i], truth_phi[i]);
                cell.corrected_mean_psi.as_mut().unwrap()[i] = mean(&cpsi[i]);
            }
        }
        cells.push(cell);
    }

    Ok(GridSummary {
        order,
        method,
        n: sample.n,
        original: orig.finish(),
        corrected: model.map(|_| corr.finish()),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar::logit_unchecked;
    use crate::calibration::{GridSpec, MethodDraws};

    fn constant_sample(order: usize, offset: f64) -> GridSample {
        let grid = GridSpec::new(-0.5, 0.5, 0.5).unwrap();
        let axis = grid.values();
        let truths: Vec<[f64; 2]> = if order == 1 {
            axis.iter().map(|&v| [v, 0.0]).collect()
        } else {
            axis.iter().flat_map(|&a| axis.iter().map(move |&b| [a, b])).collect()
        };
        let m = 10;
        let psi: Vec<f64> = truths
            .iter()
            .flat_map(|t| (0..m).flat_map(move |_| (0..order).map(move |c| t[c] + offset)))
            .collect();
        let logit = psi.iter().map(|&v| logit_unchecked(v)).collect();
        let cells = truths.len();
        GridSample {
            order,
            n: 15,
            replicates: m,
            grid,
            seed: 0,
            truths,
            draws: vec![MethodDraws {
                method: EstimationMethod::YuleWalker,
                psi,
                logit,
                variances: vec![[1e-6; 2]; cells],
            }],
            resimulated: vec![0; cells],
        }
    }

    #[test]
    fn noiseless_rmse_equals_abs_bias() {
        let s = constant_sample(1, -0.04);
        let sum = summarize_grid(&s, EstimationMethod::YuleWalker, None).unwrap();
        assert!((sum.original.bias + 0.04).abs() < 1e-12);
        assert!(sum.original.variance.abs() < 1e-20);
        assert!((sum.original.rmse - sum.original.bias.abs()).abs() < 1e-12);
        assert!(sum.corrected.is_none());
        assert_eq!(sum.cells.len(), 3);
    }

    #[test]
    fn identity_correction_reproduces_original() {
        let s = constant_sample(2, 0.03);
        let id = CorrectionModel::identity(2, EstimationMethod::YuleWalker, 15, 3).unwrap();
        let sum = summarize_grid(&s, EstimationMethod::YuleWalker, Some(&id)).unwrap();
        let c = sum.corrected.unwrap();
        assert!((c.bias - sum.original.bias).abs() < 1e-12);
        assert!((c.rmse - sum.original.rmse).abs() < 1e-12);
        for cell in &sum.cells {
            let cp = cell.corrected_mean_psi.unwrap();
            assert!((cp[0] - cell.mean_psi[0]).abs() < 1e-12);
            assert!((cell.mean_psi[1] - cell.truth_psi[1] - 0.03).abs() < 1e-12);
        }
        let wrong = CorrectionModel::identity(1, EstimationMethod::YuleWalker, 15, 3).unwrap();
        assert!(summarize_grid(&s, EstimationMethod::YuleWalker, Some(&wrong)).is_err());
    }
}
