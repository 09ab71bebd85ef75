use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::ar::{from_partial, logit_unchecked, simulate_into, PartialAutocorrelations};
use crate::error::{Error, Result};
use crate::estimators::EstimationMethod;
use crate::rng::Seed;

use super::{CalibrationConfig, GridSpec, VARIANCE_FLOOR};

const MAX_ATTEMPTS: u64 = 64;

/// Estimates from one method over the whole grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodDraws {
    pub method: EstimationMethod,
    /// `psi_hat`, laid out `[cell][replicate][component]`.
    pub psi: Vec<f64>,
    /// `g(psi_hat)` with the same layout.
    pub logit: Vec<f64>,
    /// Per-cell sample variance of each `psi_hat` component, floored at
    /// [`VARIANCE_FLOOR`].
    pub variances: Vec<[f64; 2]>,
}

/// Simulated estimator draws for every grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSample {
    pub order: usize,
    pub n: usize,
    pub replicates: usize,
    pub grid: GridSpec,
    pub seed: u64,
    /// True partial autocorrelations per cell.
    pub truths: Vec<[f64; 2]>,
    pub draws: Vec<MethodDraws>,
    /// Replicates per cell that had to be resimulated.
    pub resimulated: Vec<usize>,
}

impl GridSample {
    pub fn cells(&self) -> usize {
        self.truths.len()
    }

    pub fn draws(&self, method: EstimationMethod) -> Result<&MethodDraws> {
        self.draws
            .iter()
            .find(|d| d.method == method)
            .ok_or_else(|| Error::Mismatch(format!("grid sample has no {method} draws")))
    }

    /// Slice of `psi_hat` (or its logit) for one cell: `replicates * order`
    /// values.
    pub fn cell_slice<'a>(&self, values: &'a [f64], cell: usize) -> &'a [f64] {
        let w = self.replicates * self.order;
        &values[cell * w..(cell + 1) * w]
    }
}

struct CellResult {
    psi: Vec<Vec<f64>>,
    resimulated: usize,
}

fn simulate_cell(cfg: &CalibrationConfig, cell: usize, truth: &[f64; 2]) -> Result<CellResult> {
    let psi = PartialAutocorrelations::new(&truth[..cfg.order])?;
    let coeffs = from_partial(&psi);
    let root = Seed::new(cfg.seed);
    let mut out: Vec<Vec<f64>> = cfg
        .methods
        .iter()
        .map(|_| Vec::with_capacity(cfg.replicates * cfg.order))
        .collect();
    let mut buf = vec![0.0; cfg.n];
    let mut resimulated = 0;
    let mut estimates = Vec::with_capacity(cfg.methods.len());

    for j in 0..cfg.replicates {
        let base = root.at(cell as u64, j as u64);
        let mut attempt = 0u64;
        loop {
            let seed = if attempt == 0 { base } else { base.child(attempt) };
            simulate_into(&coeffs, &mut seed.rng(), &mut buf);
            estimates.clear();
            let ok = cfg.methods.iter().all(|m| match m.estimate(&buf, cfg.order) {
                Ok(e) => {
                    estimates.push(e);
                    true
                }
                Err(_) => false,
            });
            if ok {
                break;
            }
            attempt += 1;
            if attempt >= MAX_ATTEMPTS {
                return Err(Error::CellFailure {
                    cell,
                    failures: resimulated + 1,
                    replicates: cfg.replicates,
                });
            }
        }
        if attempt > 0 {
            resimulated += 1;
        }
        for (dst, e) in out.iter_mut().zip(&estimates) {
            dst.extend_from_slice(e.psi().psi());
        }
    }

    if resimulated * 100 > cfg.replicates {
        return Err(Error::CellFailure {
            cell,
            failures: resimulated,
            replicates: cfg.replicates,
        });
    }
    Ok(CellResult {
        psi: out,
        resimulated,
    })
}

fn cell_variances(values: &[f64], order: usize) -> [f64; 2] {
    let m = values.len() / order;
    let mut out = [0.0; 2];
    for (c, slot) in out.iter_mut().enumerate().take(order) {
        let mean = values.iter().skip(c).step_by(order).sum::<f64>() / m as f64;
        let ss: f64 = values
            .iter()
            .skip(c)
            .step_by(order)
            .map(|v| (v - mean).powi(2))
            .sum();
        *slot = (ss / (m as f64 - 1.0)).max(VARIANCE_FLOOR);
    }
    out
}

/// Simulates `replicates` series per cell and applies every requested
/// estimator to the same series. Deterministic in the config alone.
pub fn run_grid_simulation(config: &CalibrationConfig) -> Result<GridSample> {
    run_grid_simulation_with_progress(config, &|_, _| {})
}

/// As [`run_grid_simulation`], calling `progress(done, total)` as cells
/// complete (from worker threads, in completion order).
pub fn run_grid_simulation_with_progress(
    config: &CalibrationConfig,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<GridSample> {
    config.validate()?;
    let truths = config.cell_truths();
    let total = truths.len();
    let done = AtomicUsize::new(0);
    let cells: Vec<CellResult> = truths
        .par_iter()
        .enumerate()
        .map(|(r, truth)| {
            let res = simulate_cell(config, r, truth);
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
            res
        })
        .collect::<Result<_>>()?;

    let order = config.order;
    let draws = config
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let psi: Vec<f64> = cells.iter().flat_map(|c| c.psi[k].iter().copied()).collect();
            let logit = psi.iter().map(|&v| logit_unchecked(v)).collect();
            let variances = cells
                .iter()
                .map(|c| cell_variances(&c.psi[k], order))
                .collect();
            MethodDraws {
                method,
                psi,
                logit,
                variances,
            }
        })
        .collect();

    Ok(GridSample {
        order,
        n: config.n,
        replicates: config.replicates,
        grid: config.grid,
        seed: config.seed,
        truths,
        draws,
        resimulated: cells.iter().map(|c| c.resimulated).collect(),
    })
}
