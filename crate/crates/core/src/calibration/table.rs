use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::EstimationMethod;
use crate::hermite::HermiteBasis;
use crate::skewnormal::{fit_parameter_surfaces, sn_fit, CellFit, SurfaceModel, SurfaceParam, SurfaceSet};
use crate::ar::logit_unchecked;

use super::{
    fit_correction, run_grid_simulation, summarize_grid, CalibrationConfig, CorrectionModel,
    ErrorStats, GridSample, GridSpec,
};

pub const FORMAT_VERSION: u32 = 1;

const CHECKSUM_KEY: &str = "checksum = sha256:";

#[derive(Clone, Debug, PartialEq)]
pub struct TableMeta {
    pub order: usize,
    pub method: EstimationMethod,
    pub n: usize,
    pub degree: usize,
    pub grid: GridSpec,
    pub replicates: usize,
    pub seed: u64,
    pub original: ErrorStats,
    pub corrected: ErrorStats,
}

/// Everything needed to correct and interval-estimate one
/// `(order, method, n)`: the correction map and the skew-normal surfaces.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationTable {
    pub meta: TableMeta,
    pub correction: CorrectionModel,
    pub surfaces: SurfaceSet,
}

pub fn table_file_name(order: usize, method: EstimationMethod, n: usize) -> String {
    format!("ar{order}_{}_n{n}.table", method.code())
}

/// Skew-normal fit of each logit-scale coefficient per cell, plus the
/// logit-scale Pearson correlation for AR(2).
pub fn fit_cell_distributions(sample: &GridSample, method: EstimationMethod) -> Result<Vec<CellFit>> {
    let draws = sample.draws(method)?;
    let order = sample.order;
    (0..sample.cells())
        .into_par_iter()
        .map(|r| {
            let z = sample.cell_slice(&draws.logit, r);
            let comp = |i: usize| -> Vec<f64> { z.iter().skip(i).step_by(order).copied().collect() };
            let cols: Vec<Vec<f64>> = (0..order).map(comp).collect();
            let marginals = cols.iter().map(|c| sn_fit(c)).collect::<Result<Vec<_>>>()?;
            let rho = (order == 2).then(|| pearson(&cols[0], &cols[1]));
            Ok(CellFit { marginals, rho })
        })
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa > 0.0 && sbb > 0.0 {
        sab / (saa * sbb).sqrt()
    } else {
        0.0
    }
}

/// Fits the correction map, summary and distribution surfaces for one
/// method of a simulated grid.
pub fn build_table(sample: &GridSample, method: EstimationMethod, degree: usize) -> Result<CalibrationTable> {
    let (correction, _) = fit_correction(sample, method, degree)?;
    let summary = summarize_grid(sample, method, Some(&correction))?;
    let fits = fit_cell_distributions(sample, method)?;
    let inputs: Vec<[f64; 2]> = sample
        .truths
        .iter()
        .map(|t| [logit_unchecked(t[0]), logit_unchecked(t[1])])
        .collect();
    let surfaces = fit_parameter_surfaces(sample.order, &inputs, &fits, degree)?;
    Ok(CalibrationTable {
        meta: TableMeta {
            order: sample.order,
            method,
            n: sample.n,
            degree,
            grid: sample.grid,
            replicates: sample.replicates,
            seed: sample.seed,
            original: summary.original,
            corrected: summary.corrected.expect("summary was given a model"),
        },
        correction,
        surfaces,
    })
}

/// Simulates the grid once and builds a table for every configured method.
pub fn calibrate(config: &CalibrationConfig) -> Result<Vec<CalibrationTable>> {
    let sample = run_grid_simulation(config)?;
    config
        .methods
        .iter()
        .map(|&m| build_table(&sample, m, config.degree))
        .collect()
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_array(out: &mut String, name: &str, values: &[f64]) {
    let _ = writeln!(out, "[{name}] {}", values.len());
    for v in values {
        let _ = writeln!(out, "{}", fmt_f64(*v));
    }
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl CalibrationTable {
    pub fn to_text(&self) -> String {
        let m = &self.meta;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("format_version", FORMAT_VERSION.to_string());
        kv("order", m.order.to_string());
        kv("method", m.method.code().to_string());
        kv("n", m.n.to_string());
        kv("K", m.degree.to_string());
        kv("basis", self.correction.basis.id().to_string());
        kv("grid_lo", fmt_f64(m.grid.lo));
        kv("grid_hi", fmt_f64(m.grid.hi));
        kv("grid_step", fmt_f64(m.grid.step));
        kv("grid_points", m.grid.len().to_string());
        kv("replicates", m.replicates.to_string());
        kv("seed", m.seed.to_string());
        for (prefix, s) in [("original", &m.original), ("corrected", &m.corrected)] {
            kv(&format!("{prefix}_bias"), fmt_f64(s.bias));
            kv(&format!("{prefix}_variance"), fmt_f64(s.variance));
            kv(&format!("{prefix}_rmse"), fmt_f64(s.rmse));
        }
        for (i, b) in self.correction.beta.iter().enumerate() {
            push_array(&mut out, &format!("beta_{}", i + 1), b);
        }
        for s in &self.surfaces.surfaces {
            push_array(&mut out, &format!("surface {}", s.param.code()), &s.coef);
        }
        out.push_str("end\n");
        let sum = digest(out.as_bytes());
        let _ = writeln!(out, "{CHECKSUM_KEY}{sum}");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let body_end = text
            .rfind("end\n")
            .filter(|&i| i == 0 || text.as_bytes()[i - 1] == b'\n')
            .ok_or_else(|| Error::Truncated("missing end marker".into()))?
            + 4;
        let (body, tail) = text.split_at(body_end);
        let stored = tail
            .strip_prefix(CHECKSUM_KEY)
            .and_then(|s| s.strip_suffix('\n'))
            .filter(|s| s.len() == 64)
            .ok_or_else(|| Error::Truncated("missing or incomplete checksum line".into()))?;

        let first = body.lines().next().unwrap_or_default();
        let version = first
            .strip_prefix("format_version = ")
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or_else(|| Error::TableParse {
                line: 1,
                msg: "expected format_version".into(),
            })?;
        if version != FORMAT_VERSION {
            return Err(Error::TableVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let computed = digest(body.as_bytes());
        if computed != stored {
            return Err(Error::Checksum {
                stored: stored.to_string(),
                computed,
            });
        }
        Parser::new(body).parse()
    }
}

struct Parser<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Parser<'a> {
    fn new(body: &'a str) -> Self {
        Self {
            lines: body.lines().enumerate().peekable(),
        }
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::Truncated("unexpected end of table".into()))
    }

    fn value(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (line, text) = self.next_line()?;
        let v = text
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(" = "))
            .ok_or_else(|| Error::TableParse {
                line,
                msg: format!("expected key '{key}'"),
            })?;
        Ok((line, v))
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (line, v) = self.value(key)?;
        v.parse().map_err(|_| Error::TableParse {
            line,
            msg: format!("bad value '{v}' for '{key}'"),
        })
    }

    fn array(&mut self, name: &str, len: usize) -> Result<Vec<f64>> {
        let (line, header) = self.next_line()?;
        let expected = format!("[{name}] {len}");
        if header != expected {
            return Err(Error::TableParse {
                line,
                msg: format!("expected '{expected}', found '{header}'"),
            });
        }
        (0..len)
            .map(|_| {
                let (line, v) = self.next_line()?;
                v.parse::<f64>().map_err(|_| Error::TableParse {
                    line,
                    msg: format!("bad coefficient '{v}'"),
                })
            })
            .collect()
    }

    fn stats(&mut self, prefix: &str) -> Result<ErrorStats> {
        Ok(ErrorStats {
            bias: self.parsed(&format!("{prefix}_bias"))?,
            variance: self.parsed(&format!("{prefix}_variance"))?,
            rmse: self.parsed(&format!("{prefix}_rmse"))?,
        })
    }

    fn parse(mut self) -> Result<CalibrationTable> {
        let _: u32 = self.parsed("format_version")?;
        let order: usize = self.parsed("order")?;
        let (line, code) = self.value("method")?;
        let method: EstimationMethod = code.parse().map_err(|_| Error::TableParse {
            line,
            msg: format!("unknown method '{code}'"),
        })?;
        let n: usize = self.parsed("n")?;
        let degree: usize = self.parsed("K")?;
        let basis = HermiteBasis::for_order(order, degree)?;
        let (line, id) = self.value("basis")?;
        if id != basis.id() {
            return Err(Error::TableParse {
                line,
                msg: format!("basis '{id}' does not match order {order}"),
            });
        }
        let grid = GridSpec {
            lo: self.parsed("grid_lo")?,
            hi: self.parsed("grid_hi")?,
            step: self.parsed("grid_step")?,
        };
        let _: usize = self.parsed("grid_points")?;
        let replicates = self.parsed("replicates")?;
        let seed = self.parsed("seed")?;
        let original = self.stats("original")?;
        let corrected = self.stats("corrected")?;
        let p = basis.len();
        let beta = (1..=order)
            .map(|i| self.array(&format!("beta_{i}"), p))
            .collect::<Result<Vec<_>>>()?;
        let surfaces = SurfaceParam::for_order(order)
            .iter()
            .map(|&param| {
                Ok(SurfaceModel {
                    param,
                    coef: self.array(&format!("surface {}", param.code()), p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (line, end) = self.next_line()?;
        if end != "end" {
            return Err(Error::TableParse {
                line,
                msg: format!("expected 'end', found '{end}'"),
            });
        }
        Ok(CalibrationTable {
            meta: TableMeta {
                order,
                method,
                n,
                degree,
                grid,
                replicates,
                seed,
                original,
                corrected,
            },
            correction: CorrectionModel {
                order,
                method,
                n,
                basis,
                beta,
            },
            surfaces: SurfaceSet { basis, surfaces },
        })
    }
}

pub fn save_table(table: &CalibrationTable, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, table.to_text())?;
    Ok(())
}

pub fn load_table(path: &Path) -> Result<CalibrationTable> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingTable(path.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };
    let text = String::from_utf8(bytes).map_err(|e| {
        let line = 1 + e.as_bytes()[..e.utf8_error().valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count();
        Error::TableParse {
            line,
            msg: "invalid UTF-8".into(),
        }
    })?;
    CalibrationTable::from_text(&text)
}

/// Loads a table and checks it is for the requested configuration.
pub fn load_table_expecting(
    path: &Path,
    order: usize,
    method: EstimationMethod,
    n: usize,
) -> Result<CalibrationTable> {
    let t = load_table(path)?;
    let m = &t.meta;
    if m.order != order || m.method != method || m.n != n {
        return Err(Error::Mismatch(format!(
            "table {} holds AR({}) {} n={}, expected AR({order}) {method} n={n}",
            path.display(),
            m.order,
            m.method,
            m.n
        )));
    }
    Ok(t)
}
