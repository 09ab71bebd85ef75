use std::io::{self, Write};

use clap::ValueEnum;
use shortar::calibration::TableMeta;
use shortar::inference::{CorrectionResult, CoverageReport};

use crate::error::CliResult;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Human,
    Csv,
    /// `key=value` lines for scripting.
    #[value(alias = "structured-text")]
    Kv,
}

fn coef_names(order: usize) -> Vec<String> {
    if order == 1 {
        vec!["phi".into()]
    } else {
        (1..=order).map(|i| format!("phi{i}")).collect()
    }
}

pub fn correction(res: &CorrectionResult, format: Format) -> CliResult {
    let order = res.phi_hat.len();
    let names = coef_names(order);
    let out = io::stdout();
    let mut out = out.lock();
    match format {
        Format::Human => {
            let pct = res.ci_original[0].level * 100.0;
            writeln!(
                out,
                "AR({order}) {}, n = {}, {} draws, plug-in {}",
                res.method.label(),
                res.n,
                res.draws,
                res.plug_in
            )?;
            writeln!(out, "{:<6} {:>11} {:>11}   {pct:.0}% ci.hat        {pct:.0}% ci.correct", "", "phi.hat", "phi.correct")?;
            for i in 0..order {
                let (o, c) = (res.ci_original[i], res.ci_corrected[i]);
                writeln!(
                    out,
                    "{:<6} {:>11.4} {:>11.4}   [{:.4}, {:.4}]  [{:.4}, {:.4}]",
                    names[i], res.phi_hat[i], res.phi_corrected[i], o.lo, o.hi, c.lo, c.hi
                )?;
            }
            if res.clamped {
                writeln!(out, "note: the estimate was pulled inside the stationary region")?;
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record([
                "coef", "phi.hat", "phi.correct", "ci.hat.lo", "ci.hat.hi", "ci.correct.lo", "ci.correct.hi",
            ])?;
            for i in 0..order {
                let (o, c) = (res.ci_original[i], res.ci_corrected[i]);
                w.write_record([
                    names[i].clone(),
                    res.phi_hat[i].to_string(),
                    res.phi_corrected[i].to_string(),
                    o.lo.to_string(),
                    o.hi.to_string(),
                    c.lo.to_string(),
                    c.hi.to_string(),
                ])?;
            }
            w.flush()?;
        }
        Format::Kv => {
            writeln!(out, "order={order}")?;
            writeln!(out, "method={}", res.method)?;
            writeln!(out, "n={}", res.n)?;
            writeln!(out, "level={}", res.ci_original[0].level)?;
            writeln!(out, "draws={}", res.draws)?;
            writeln!(out, "plug_in={}", res.plug_in)?;
            writeln!(out, "clamped={}", res.clamped)?;
            for i in 0..order {
                let k = i + 1;
                let (o, c) = (res.ci_original[i], res.ci_corrected[i]);
                writeln!(out, "phi.hat.{k}={}", res.phi_hat[i])?;
                writeln!(out, "phi.correct.{k}={}", res.phi_corrected[i])?;
                writeln!(out, "ci.hat.{k}.lo={}", o.lo)?;
                writeln!(out, "ci.hat.{k}.hi={}", o.hi)?;
                writeln!(out, "ci.correct.{k}.lo={}", c.lo)?;
                writeln!(out, "ci.correct.{k}.hi={}", c.hi)?;
            }
        }
    }
    Ok(())
}

pub fn coverage(rep: &CoverageReport, format: Format) -> CliResult {
    let names = coef_names(rep.order);
    let out = io::stdout();
    let mut out = out.lock();
    match format {
        Format::Human => {
            writeln!(
                out,
                "AR({}) coverage of {:.0}% intervals, n = {}, {} replications",
                rep.order,
                rep.level * 100.0,
                rep.n,
                rep.replications
            )?;
            writeln!(out, "{:<6} {:<6} {:>9} {:>10}", "method", "coef", "original", "corrected")?;
            for row in &rep.rows {
                for (i, name) in names.iter().enumerate() {
                    writeln!(
                        out,
                        "{:<6} {:<6} {:>9.4} {:>10.4}",
                        row.method.code(),
                        name,
                        row.original[i],
                        row.corrected[i]
                    )?;
                }
            }
            if rep.resimulated > 0 {
                writeln!(out, "{} replications were redrawn after estimator failures", rep.resimulated)?;
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["method", "coef", "original", "corrected"])?;
            for row in &rep.rows {
                for (i, name) in names.iter().enumerate() {
                    w.write_record([
                        row.method.code(),
                        name,
                        &row.original[i].to_string(),
                        &row.corrected[i].to_string(),
                    ])?;
                }
            }
            w.flush()?;
        }
        Format::Kv => {
            writeln!(out, "order={}", rep.order)?;
            writeln!(out, "n={}", rep.n)?;
            writeln!(out, "replications={}", rep.replications)?;
            writeln!(out, "level={}", rep.level)?;
            writeln!(out, "resimulated={}", rep.resimulated)?;
            for row in &rep.rows {
                for (i, name) in names.iter().enumerate() {
                    writeln!(out, "coverage.{}.{name}.original={}", row.method, row.original[i])?;
                    writeln!(out, "coverage.{}.{name}.corrected={}", row.method, row.corrected[i])?;
                }
            }
        }
    }
    Ok(())
}

pub fn report(metas: &[TableMeta], format: Format) -> CliResult {
    let out = io::stdout();
    let mut out = out.lock();
    match format {
        Format::Human => {
            writeln!(
                out,
                "{:<5} {:<6} {:>3} {:>6}  {:>9} {:>9} {:>9}  {:>9} {:>9} {:>9}",
                "order", "method", "n", "m", "bias", "variance", "rmse", "bias.c", "var.c", "rmse.c"
            )?;
            for m in metas {
                let (o, c) = (m.original, m.corrected);
                writeln!(
                    out,
                    "{:<5} {:<6} {:>3} {:>6}  {:>9.4} {:>9.4} {:>9.4}  {:>9.4} {:>9.4} {:>9.4}",
                    m.order, m.method.code(), m.n, m.replicates, o.bias, o.variance, o.rmse, c.bias, c.variance, c.rmse
                )?;
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record([
                "order",
                "method",
                "n",
                "replicates",
                "original_bias",
                "original_variance",
                "original_rmse",
                "corrected_bias",
                "corrected_variance",
                "corrected_rmse",
            ])?;
            for m in metas {
                let (o, c) = (m.original, m.corrected);
                w.write_record([
                    m.order.to_string(),
                    m.method.to_string(),
                    m.n.to_string(),
                    m.replicates.to_string(),
                    o.bias.to_string(),
                    o.variance.to_string(),
                    o.rmse.to_string(),
                    c.bias.to_string(),
                    c.variance.to_string(),
                    c.rmse.to_string(),
                ])?;
            }
            w.flush()?;
        }
        Format::Kv => {
            for m in metas {
                let key = format!("ar{}.{}.n{}", m.order, m.method, m.n);
                for (kind, s) in [("original", m.original), ("corrected", m.corrected)] {
                    writeln!(out, "{key}.{kind}.bias={}", s.bias)?;
                    writeln!(out, "{key}.{kind}.variance={}", s.variance)?;
                    writeln!(out, "{key}.{kind}.rmse={}", s.rmse)?;
                }
            }
        }
    }
    Ok(())
}
