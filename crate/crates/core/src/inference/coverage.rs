use std::path::Path;

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;

use crate::ar::{from_partial, simulate_into, PartialAutocorrelations};
use crate::calibration::{load_table_expecting, table_file_name, CalibrationTable};
use crate::error::{Error, Result};
use crate::estimators::{EstimateRecord, EstimationMethod};
use crate::rng::Seed;

use super::{check_table, correct_estimate, CorrectionOptions, PlugIn};

const MAX_ATTEMPTS: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverageConfig {
    pub order: usize,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub level: f64,
    pub draws: usize,
    pub plug_in: PlugIn,
}

impl CoverageConfig {
    pub fn new(order: usize, n: usize, replications: usize, seed: u64) -> Self {
        Self {
            order,
            n,
            replications,
            seed,
            level: 0.95,
            draws: 10_000,
            plug_in: PlugIn::Original,
        }
    }
}

/// Fraction of intervals containing the truth, per coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageRow {
    pub method: EstimationMethod,
    pub original: Vec<f64>,
    pub corrected: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    pub order: usize,
    pub n: usize,
    pub replications: usize,
    pub level: f64,
    pub rows: Vec<CoverageRow>,
    /// Replications whose series had to be redrawn because an estimator
    /// failed.
    pub resimulated: usize,
}

/// Loads the tables for `methods`, failing with the missing file's name.
pub fn load_table_set(
    dir: &Path,
    order: usize,
    n: usize,
    methods: &[EstimationMethod],
) -> Result<Vec<CalibrationTable>> {
    methods
        .iter()
        .map(|&m| load_table_expecting(&dir.join(table_file_name(order, m, n)), order, m, n))
        .collect()
}

/// Hits for one replication: per table, `[original, corrected]` per
/// coefficient.
struct Outcome {
    hits: Vec<[[bool; 2]; 2]>,
    resimulated: bool,
}

fn replicate(tables: &[CalibrationTable], cfg: &CoverageConfig, j: usize) -> Result<Outcome> {
    let root = Seed::new(cfg.seed);
    let order = cfg.order;
    let mut rng = root.at(0, j as u64).rng();
    let mut truth = [0.0; 2];
    for t in truth.iter_mut().take(order) {
        let u: f64 = rng.sample(Open01);
        *t = 2.0 * u - 1.0;
    }
    let psi = PartialAutocorrelations::new(&truth[..order])?;
    let coeffs = from_partial(&psi);
    let true_phi = coeffs.phi().to_vec();

    let mut buf = vec![0.0; cfg.n];
    let mut estimates: Vec<EstimateRecord> = Vec::with_capacity(tables.len());
    let mut attempt = 0;
    loop {
        let seed = root.at(1, j as u64);
        let seed = if attempt == 0 { seed } else { seed.child(attempt) };
        simulate_into(&coeffs, &mut seed.rng(), &mut buf);
        estimates.clear();
        let ok = tables
            .iter()
            .all(|t| match t.meta.method.estimate(&buf, order) {
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
            return Err(Error::DegenerateSeries(format!(
                "coverage replication {j}: estimators failed on {MAX_ATTEMPTS} series"
            )));
        }
    }

    let hits = tables
        .iter()
        .zip(&estimates)
        .enumerate()
        .map(|(k, (table, est))| {
            let opts = CorrectionOptions {
                level: cfg.level,
                draws: cfg.draws,
                plug_in: cfg.plug_in,
                seed: root.at(2 + k as u64, j as u64),
            };
            let res = correct_estimate(table, est, &opts)?;
            let mut h = [[false; 2]; 2];
            for i in 0..order {
                h[0][i] = res.ci_original[i].contains(true_phi[i]);
                h[1][i] = res.ci_corrected[i].contains(true_phi[i]);
            }
            Ok(h)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Outcome {
        hits,
        resimulated: attempt > 0,
    })
}

/// Draws uniform true partial autocorrelations, simulates one series per
/// replication, and tallies how often each method's original and corrected
/// intervals contain the true coefficients. All tables see the same series.
pub fn run_coverage_experiment(tables: &[CalibrationTable], cfg: &CoverageConfig) -> Result<CoverageReport> {
    if tables.is_empty() {
        return Err(Error::Config("no calibration tables given".into()));
    }
    if cfg.replications == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    for t in tables {
        check_table(t, cfg.order, t.meta.method, cfg.n)?;
    }
    let outcomes = (0..cfg.replications)
        .into_par_iter()
        .map(|j| replicate(tables, cfg, j))
        .collect::<Result<Vec<_>>>()?;

    let reps = cfg.replications as f64;
    let rows = tables
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let rate = |kind: usize, i: usize| {
                outcomes.iter().filter(|o| o.hits[k][kind][i]).count() as f64 / reps
            };
            CoverageRow {
                method: t.meta.method,
                original: (0..cfg.order).map(|i| rate(0, i)).collect(),
                corrected: (0..cfg.order).map(|i| rate(1, i)).collect(),
            }
        })
        .collect();
    Ok(CoverageReport {
        order: cfg.order,
        n: cfg.n,
        replications: cfg.replications,
        level: cfg.level,
        rows,
        resimulated: outcomes.iter().filter(|o| o.resimulated).count(),
    })
}
