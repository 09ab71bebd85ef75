mod error;
mod input;
mod output;

use std::fs::File;
use std::io::{self, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use shortar::ar::{simulate, ArCoefficients, PartialAutocorrelations, from_partial, is_stationary};
use shortar::calibration::{
    build_table, load_table_expecting, run_grid_simulation_with_progress, save_table, table_file_name,
    CalibrationConfig, CalibrationTable, GridSpec, TableMeta,
};
use shortar::estimators::{EstimateRecord, EstimationMethod, CMLE_CLAMP};
use shortar::inference::{correct_estimate, run_coverage_experiment, CorrectionOptions, CoverageConfig, PlugIn};
use shortar::rng::Seed;

use error::{CliError, CliResult};
use input::{parse_n, parse_n_range, parse_order, read_series};
use output::Format;

/// Simulation-calibrated bias correction for short AR(1)/AR(2) series.
#[derive(Parser)]
#[command(name = "shortar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate estimator samples and write calibration tables.
    Calibrate(CalibrateArgs),
    /// Bias-correct an estimate (or a series) with Monte Carlo intervals.
    Correct(CorrectArgs),
    /// Interval coverage study on uniformly drawn coefficients.
    Coverage(CoverageArgs),
    /// Write a simulated AR series as CSV.
    Simulate(SimulateArgs),
    /// Bias, variance and RMSE stored in calibration tables.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Mle,
    Cmle,
    Burg,
    Yw,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<EstimationMethod> {
        match self {
            MethodArg::Mle => vec![EstimationMethod::ExactMle],
            MethodArg::Cmle => vec![EstimationMethod::ConditionalMle],
            MethodArg::Burg => vec![EstimationMethod::Burg],
            MethodArg::Yw => vec![EstimationMethod::YuleWalker],
            MethodArg::All => EstimationMethod::ALL.to_vec(),
        }
    }

    fn single(self) -> CliResult<EstimationMethod> {
        match self.methods().as_slice() {
            [m] => Ok(*m),
            _ => Err(CliError::Usage("choose a single estimation method".into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PlugInArg {
    Original,
    Corrected,
}

impl From<PlugInArg> for PlugIn {
    fn from(p: PlugInArg) -> Self {
        match p {
            PlugInArg::Original => PlugIn::Original,
            PlugInArg::Corrected => PlugIn::Corrected,
        }
    }
}

#[derive(Args)]
struct TableDir {
    /// Directory holding calibration tables [default: ./tables, else the
    /// tables shipped with the source tree]
    #[arg(long)]
    tables: Option<PathBuf>,
}

impl TableDir {
    fn path(&self) -> PathBuf {
        if let Some(p) = &self.tables {
            return p.clone();
        }
        let local = PathBuf::from("tables");
        if local.is_dir() {
            local
        } else {
            Path::new(env!("CARGO_MANIFEST_DIR")).join("../../tables")
        }
    }

    fn load(&self, order: usize, method: EstimationMethod, n: usize) -> CliResult<CalibrationTable> {
        let path = self.path().join(table_file_name(order, method, n));
        load_table_expecting(&path, order, method, n).map_err(|e| CliError::from_table(&path, e))
    }
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, value_parser = parse_order)]
    order: usize,
    /// Series length or inclusive range, e.g. 15 or 10:50.
    #[arg(long, value_parser = parse_n_range)]
    n: RangeInclusive<usize>,
    #[arg(long, value_enum, default_value = "all")]
    method: MethodArg,
    /// Replicates per grid cell [default: 2000 for AR(1), 1000 for AR(2)].
    #[arg(long)]
    m: Option<usize>,
    /// Grid spacing [default: 0.05 for AR(1), 0.10 for AR(2)].
    #[arg(long)]
    grid_step: Option<f64>,
    /// Use the full-size defaults (m = 10000, step 0.01 / 0.025).
    #[arg(long)]
    full_scale: bool,
    /// Hermite degree cap.
    #[arg(short = 'K', long = "K", default_value_t = 3)]
    degree: usize,
    #[arg(long, default_value_t = 20_240_601)]
    seed: u64,
    #[arg(long, default_value = "tables")]
    out: PathBuf,
}

#[derive(Args)]
struct CorrectArgs {
    /// Estimated coefficients, comma separated (one per order).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "input", requires = "n")]
    phi: Option<Vec<f64>>,
    /// Length of the series the estimate came from.
    #[arg(long, value_parser = parse_n)]
    n: Option<usize>,
    #[arg(long, value_parser = parse_order)]
    order: usize,
    /// CSV file with the series ('-' for stdin).
    #[arg(long, required_unless_present = "phi")]
    input: Option<PathBuf>,
    /// CSV column holding the series.
    #[arg(long, requires = "input")]
    column: Option<String>,
    #[arg(long, value_enum, default_value = "mle")]
    method: MethodArg,
    /// Value plugged into the distribution surfaces.
    #[arg(long, value_enum, default_value = "original")]
    plug_in: PlugInArg,
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    tables: TableDir,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long, value_parser = parse_order)]
    order: usize,
    #[arg(long, value_parser = parse_n)]
    n: usize,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    #[arg(long, value_enum, default_value = "all")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "original")]
    plug_in: PlugInArg,
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 20_240_601)]
    seed: u64,
    #[command(flatten)]
    tables: TableDir,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_order)]
    order: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    phi: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, value_parser = parse_order)]
    order: usize,
    #[arg(long, value_parser = parse_n_range)]
    n: RangeInclusive<usize>,
    #[arg(long, value_enum, default_value = "all")]
    method: MethodArg,
    #[command(flatten)]
    tables: TableDir,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
}

fn check_phi(phi: &[f64], order: usize) -> CliResult<ArCoefficients> {
    if phi.len() != order {
        return Err(CliError::Usage(format!(
            "--phi has {} value(s) but the order is {order}",
            phi.len()
        )));
    }
    let coeffs = ArCoefficients::standard(phi).map_err(|e| CliError::Usage(e.to_string()))?;
    if !is_stationary(&coeffs) {
        return Err(CliError::Usage(format!("phi = {phi:?} is not stationary")));
    }
    Ok(coeffs)
}

fn human_duration(d: Duration) -> String {
    let s = d.as_secs_f64();
    match s {
        s if s < 90.0 => format!("{s:.0} s"),
        s if s < 5400.0 => format!("{:.0} min", s / 60.0),
        s if s < 172_800.0 => format!("{:.1} h", s / 3600.0),
        s if s < 2.0 * 31_557_600.0 => format!("{:.1} days", s / 86_400.0),
        s => format!("{:.1} years", s / 31_557_600.0),
    }
}

/// Times the chosen estimators on a few series and scales up.
fn estimate_compute(cfg: &CalibrationConfig, ns: &RangeInclusive<usize>) -> Duration {
    const PILOT: usize = 40;
    let psi = if cfg.order == 1 { vec![0.5] } else { vec![0.5, -0.3] };
    let coeffs = from_partial(&PartialAutocorrelations::new(&psi).expect("valid pilot"));
    let n = (ns.start() + ns.end()) / 2;
    let start = Instant::now();
    for j in 0..PILOT {
        if let Ok(x) = simulate(&coeffs, n, Seed::new(cfg.seed).at(u64::MAX, j as u64)) {
            for m in &cfg.methods {
                let _ = m.estimate(x.values(), cfg.order);
            }
        }
    }
    let per_series = start.elapsed().as_secs_f64() / PILOT as f64;
    let threads = std::thread::available_parallelism().map_or(1, |t| t.get()) as f64;
    let series = cfg.total_series() as f64 * ns.clone().count() as f64;
    Duration::from_secs_f64(per_series * series / threads)
}

fn cmd_calibrate(args: CalibrateArgs) -> CliResult {
    let methods = args.method.methods();
    let base = |n| {
        let mut cfg = if args.full_scale {
            CalibrationConfig::full_scale(args.order, n, &methods)
        } else {
            CalibrationConfig::desk(args.order, n, &methods)
        };
        cfg.degree = args.degree;
        cfg.seed = args.seed;
        if let Some(m) = args.m {
            cfg.replicates = m;
        }
        cfg
    };
    let mut probe = base(*args.n.start());
    if let Some(step) = args.grid_step {
        probe.grid = GridSpec::new(probe.grid.lo, probe.grid.hi, step)?;
    }
    probe.validate()?;
    let grid = probe.grid;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Other(format!("cannot create {}: {e}", args.out.display())))?;

    let nvals = args.n.clone().count();
    eprintln!(
        "calibrating AR({}) for n = {}..={} with {} method(s): {} cells x {} replicates x {} lengths = {} series",
        args.order,
        args.n.start(),
        args.n.end(),
        methods.len(),
        probe.cells(),
        probe.replicates,
        nvals,
        probe.total_series() * nvals
    );
    eprintln!(
        "estimated simulation time: about {} on this machine",
        human_duration(estimate_compute(&probe, &args.n))
    );

    let mut failures = 0;
    for n in args.n.clone() {
        let mut cfg = base(n);
        cfg.grid = grid;
        let started = Instant::now();
        let reported = AtomicUsize::new(0);
        let progress = |done: usize, total: usize| {
            let quarter = done * 4 / total;
            if reported.fetch_max(quarter, Ordering::Relaxed) < quarter {
                eprintln!("  n = {n}: {done}/{total} cells simulated");
            }
        };
        let sample = run_grid_simulation_with_progress(&cfg, &progress)?;
        let redrawn: usize = sample.resimulated.iter().sum();
        if redrawn > 0 {
            eprintln!("  n = {n}: {redrawn} replicates redrawn after estimator failures");
        }
        for &m in &methods {
            match build_table(&sample, m, cfg.degree) {
                Ok(table) => {
                    let path = args.out.join(table_file_name(cfg.order, m, n));
                    save_table(&table, &path)?;
                    eprintln!(
                        "  n = {n} {m:<4}: bias {:+.4} -> {:+.4}, wrote {}",
                        table.meta.original.bias,
                        table.meta.corrected.bias,
                        path.display()
                    );
                }
                Err(e) => {
                    failures += 1;
                    eprintln!("  n = {n} {m:<4}: FAILED: {e}");
                }
            }
        }
        eprintln!("  n = {n}: done in {}", human_duration(started.elapsed()));
    }
    if failures > 0 {
        return Err(CliError::Numerical(format!("{failures} table(s) could not be built")));
    }
    Ok(())
}

fn cmd_correct(args: CorrectArgs) -> CliResult {
    let method = args.method.single()?;
    let estimate = match (&args.phi, &args.input) {
        (Some(phi), _) => {
            check_phi(phi, args.order)?;
            let n = args.n.expect("clap requires --n with --phi");
            EstimateRecord::from_phi(method, phi, n, CMLE_CLAMP).map_err(|e| CliError::Usage(e.to_string()))?
        }
        (None, Some(path)) => {
            let values = if path.as_os_str() == "-" {
                read_series(io::stdin().lock(), args.column.as_deref())?
            } else {
                let file = File::open(path)
                    .map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))?;
                read_series(file, args.column.as_deref())?
            };
            parse_n(&values.len().to_string())
                .map_err(|e| CliError::Usage(format!("input series: {e}")))?;
            if let Some(n) = args.n {
                if n != values.len() {
                    return Err(CliError::Usage(format!(
                        "--n {n} does not match the {} values read",
                        values.len()
                    )));
                }
            }
            method.estimate(&values, args.order)?
        }
        (None, None) => unreachable!("clap requires --phi or --input"),
    };
    let table = args.tables.load(args.order, method, estimate.n)?;
    let options = CorrectionOptions {
        level: args.level,
        draws: args.draws,
        plug_in: args.plug_in.into(),
        seed: Seed::new(args.seed),
    };
    if !(args.level > 0.0 && args.level < 1.0) || args.draws == 0 {
        return Err(CliError::Usage("--level must be in (0, 1) and --draws positive".into()));
    }
    let res = correct_estimate(&table, &estimate, &options)?;
    for w in &res.warnings {
        eprintln!("warning: {w}");
    }
    output::correction(&res, args.format)
}

fn cmd_coverage(args: CoverageArgs) -> CliResult {
    if !(args.level > 0.0 && args.level < 1.0) || args.draws == 0 || args.reps == 0 {
        return Err(CliError::Usage(
            "--level must be in (0, 1); --draws and --reps positive".into(),
        ));
    }
    let tables = args
        .method
        .methods()
        .into_iter()
        .map(|m| args.tables.load(args.order, m, args.n))
        .collect::<CliResult<Vec<_>>>()?;
    let cfg = CoverageConfig {
        level: args.level,
        draws: args.draws,
        plug_in: args.plug_in.into(),
        ..CoverageConfig::new(args.order, args.n, args.reps, args.seed)
    };
    let report = run_coverage_experiment(&tables, &cfg)?;
    output::coverage(&report, args.format)
}

fn cmd_simulate(args: SimulateArgs) -> CliResult {
    let order = args.order.unwrap_or(args.phi.len());
    check_phi(&args.phi, order)?;
    let coeffs = ArCoefficients::new(&args.phi, args.mu, args.sigma).map_err(|e| CliError::Usage(e.to_string()))?;
    if args.n < 3 {
        return Err(CliError::Usage(format!("--n must be at least 3, got {}", args.n)));
    }
    let series = simulate(&coeffs, args.n, Seed::new(args.seed))?;
    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["x"])?;
    for v in series.values() {
        w.write_record([v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_report(args: ReportArgs) -> CliResult {
    let mut metas: Vec<TableMeta> = Vec::new();
    for n in args.n.clone() {
        for m in args.method.methods() {
            metas.push(args.tables.load(args.order, m, n)?.meta);
        }
    }
    output::report(&metas, args.format)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Correct(a) => cmd_correct(a),
        Command::Coverage(a) => cmd_coverage(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
