//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::process::ExitCode;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shortar::ar::{
    from_partial, inverse_logit_transform, logit_transform, simulate, to_partial, ArCoefficients,
    PartialAutocorrelations,
};
use shortar::calibration::{
    build_table, calibrate, correction_gradient, correction_objective, evaluate_correction, run_grid_simulation,
    CalibrationConfig, CalibrationTable, GridSample, GridSpec,
};
use shortar::estimators::{conditional_mle, yule_walker, EstimationMethod};
use shortar::hermite::hermite_eval;
use shortar::inference::{copula_sample_ar2, run_coverage_experiment, CoverageConfig};
use shortar::optim::central_gradient;
use shortar::rng::Seed;
use shortar::skewnormal::{sn_cdf, sn_density, sn_quantile, SkewNormalParams};

const SEED: u64 = 20_240_601;

struct Check {
    ok: bool,
    detail: String,
}

impl Check {
    fn new() -> Self {
        Check { ok: true, detail: String::new() }
    }

    fn expect(&mut self, ok: bool, what: String) {
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        if !ok {
            self.detail.push_str("FAILED ");
        }
        self.detail.push_str(&what);
        self.ok &= ok;
    }

    fn within(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        self.expect(
            (value - target).abs() <= tol,
            format!("{name} = {value:.4} (want {target} ± {tol})"),
        );
    }

    fn at_most(&mut self, name: &str, value: f64, bound: f64) {
        self.expect(value <= bound, format!("{name} = {value:.2e} (want <= {bound:.0e})"));
    }
}

fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> f64 {
    let h = (hi - lo) / steps as f64;
    let inner: f64 = (1..steps).map(|i| f(lo + i as f64 * h)).sum();
    h * (inner + 0.5 * (f(lo) + f(hi)))
}

fn ar1_desk(n: usize, method: EstimationMethod) -> (GridSample, CalibrationTable) {
    let sample = run_grid_simulation(&CalibrationConfig::desk(1, n, &[method])).unwrap();
    let table = build_table(&sample, method, 3).unwrap();
    (sample, table)
}

fn criterion_1(c: &mut Check) -> CalibrationTable {
    let (_, t) = ar1_desk(15, EstimationMethod::ExactMle);
    let (o, k) = (t.meta.original, t.meta.corrected);
    c.within("original bias", o.bias, -0.080, 0.010);
    c.at_most("|corrected bias|", k.bias.abs(), 0.010);
    c.expect(
        k.variance > o.variance,
        format!("variance {:.4} -> {:.4}", o.variance, k.variance),
    );
    t
}

fn criterion_2(c: &mut Check) {
    let (_, t) = ar1_desk(30, EstimationMethod::YuleWalker);
    c.within("original bias", t.meta.original.bias, -0.038, 0.008);
    c.at_most("|corrected bias|", t.meta.corrected.bias.abs(), 0.008);
}

fn criterion_3(c: &mut Check) -> CalibrationTable {
    let cfg = CalibrationConfig::desk(2, 15, &[EstimationMethod::ExactMle]);
    let t = calibrate(&cfg).unwrap().remove(0);
    let (o, k) = (t.meta.original, t.meta.corrected);
    c.within("original bias", o.bias, -0.127, 0.020);
    c.at_most("|corrected bias|", k.bias.abs(), 0.030);
    let ratio = k.rmse / o.rmse;
    c.expect(
        (ratio - 1.0).abs() <= 0.10,
        format!("rmse {:.4} -> {:.4} (ratio {ratio:.3}, want within 10%)", o.rmse, k.rmse),
    );
    t
}

fn coverage(table: CalibrationTable, order: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let cfg = CoverageConfig::new(order, n, 2000, SEED);
    let mut rep = run_coverage_experiment(&[table], &cfg).unwrap();
    let row = rep.rows.remove(0);
    (row.original, row.corrected)
}

fn criterion_4(c: &mut Check, mle30: CalibrationTable, yw10: CalibrationTable) {
    let (o, k) = coverage(mle30, 1, 30);
    c.within("mle n=30 original", o[0], 0.862, 0.020);
    c.within("mle n=30 corrected", k[0], 0.953, 0.020);
    let (o, k) = coverage(yw10, 1, 10);
    c.within("yw n=10 original", o[0], 0.669, 0.025);
    c.expect(k[0] >= 0.97, format!("yw n=10 corrected = {:.4} (want >= 0.97)", k[0]));
}

fn criterion_5(c: &mut Check, ar2: CalibrationTable) {
    let (o, k) = coverage(ar2, 2, 15);
    c.within("phi2 original", o[1], 0.745, 0.025);
    c.within("phi2 corrected", k[1], 0.964, 0.020);
}

fn criterion_6(c: &mut Check, ar1: &CalibrationTable, ar2: &CalibrationTable) {
    // Hermite orthogonality under the standard normal weight
    let mut worst: f64 = 0.0;
    let mut fact = 1.0;
    for j in 0..=7usize {
        if j > 0 {
            fact *= j as f64;
        }
        for k in 0..=7usize {
            let w = |x: f64| {
                (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
                    * hermite_eval(j, x).unwrap()
                    * hermite_eval(k, x).unwrap()
            };
            let v = trapezoid(w, -16.0, 16.0, 8000);
            worst = worst.max((v - if j == k { fact } else { 0.0 }).abs());
        }
    }
    c.at_most("hermite orthogonality", worst, 1e-8);

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut logit_err: f64 = 0.0;
    let mut psi_err: f64 = 0.0;
    for _ in 0..10_000 {
        let v: f64 = rng.random_range(-0.999..0.999);
        logit_err = logit_err.max((inverse_logit_transform(logit_transform(v).unwrap()) - v).abs());
        let p = [rng.random_range(-0.99..0.99), rng.random_range(-0.99..0.99)];
        let back = to_partial(&from_partial(&PartialAutocorrelations::new(&p).unwrap())).unwrap();
        psi_err = psi_err.max((back.psi()[0] - p[0]).abs().max((back.psi()[1] - p[1]).abs()));
    }
    c.at_most("logit round trip", logit_err, 1e-12);
    c.at_most("psi round trip", psi_err, 1e-12);

    let mut norm_err: f64 = 0.0;
    let mut inv_err: f64 = 0.0;
    for (mu, sigma, xi) in [(0.0, 1.0, 1.0), (0.3, 0.4, 4.0), (-1.0, 2.0, 0.3), (0.5, 0.2, 0.1)] {
        let p = SkewNormalParams::new(mu, sigma, xi).unwrap();
        // split at the mode, where the density has a kink in curvature
        let (left, right) = (14.0 * sigma / xi, 14.0 * sigma * xi);
        let mass = trapezoid(|x| sn_density(&p, x), mu - left, mu, 20_000)
            + trapezoid(|x| sn_density(&p, x), mu, mu + right, 20_000);
        norm_err = norm_err.max((mass - 1.0).abs());
        for i in 1..1000 {
            let u = i as f64 / 1000.0;
            inv_err = inv_err.max((sn_cdf(&p, sn_quantile(&p, u).unwrap()) - u).abs());
        }
    }
    c.at_most("skew-normal normalization", norm_err, 1e-8);
    c.at_most("cdf/quantile inversion", inv_err, 1e-10);

    let p1 = SkewNormalParams::new(0.2, 0.5, 3.0).unwrap();
    let p2 = SkewNormalParams::new(-0.4, 0.8, 0.5).unwrap();
    let pairs = copula_sample_ar2(&p1, &p2, 0.6, 10_000, Seed::new(SEED)).unwrap();
    let mut ks: f64 = 0.0;
    for (i, p) in [p1, p2].iter().enumerate() {
        let mut xs: Vec<f64> = pairs.iter().map(|z| z[i]).collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        for (j, x) in xs.iter().enumerate() {
            let f = sn_cdf(p, *x);
            ks = ks.max((f - j as f64 / n).abs()).max((f - (j + 1) as f64 / n).abs());
        }
    }
    c.at_most("copula marginal KS", ks, 0.02);

    // objective gradient on a real grid sample
    let mut cfg = CalibrationConfig::desk(2, 20, &[EstimationMethod::Burg]);
    cfg.replicates = 100;
    cfg.grid = GridSpec::new(-0.9, 0.9, 0.3).unwrap();
    let sample = run_grid_simulation(&cfg).unwrap();
    let mut model = ar2.correction.clone();
    model.method = EstimationMethod::Burg;
    model.n = 20;
    let flat: Vec<f64> = model.beta.concat();
    let rebuild = |b: &[f64]| {
        let mut m = model.clone();
        let k = m.beta[0].len();
        m.beta = vec![b[..k].to_vec(), b[k..].to_vec()];
        m
    };
    let g = correction_gradient(&sample, &model).unwrap();
    let num = central_gradient(|b| correction_objective(&sample, &rebuild(b)).unwrap(), &flat, 1e-6);
    let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let rel = g.iter().zip(&num).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / scale;
    c.at_most("objective gradient (relative)", rel, 1e-5);

    c.expect(
        ar1.correction.check_monotone().is_ok(),
        "AR(1) correction map increasing".into(),
    );

    let mut outside = 0;
    for _ in 0..20_000 {
        let p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let psi = PartialAutocorrelations::new(&p).unwrap();
        let phi = evaluate_correction(&ar2.correction, &psi).unwrap();
        let [a, b] = [phi.phi()[0], phi.phi()[1]];
        if !(b + a.abs() <= 1.0 && b.abs() <= 1.0) {
            outside += 1;
        }
        let one = PartialAutocorrelations::new(&p[..1]).unwrap();
        if evaluate_correction(&ar1.correction, &one).unwrap().phi()[0].abs() > 1.0 {
            outside += 1;
        }
    }
    c.expect(outside == 0, format!("{outside} corrected estimates outside the stationary region"));

    let round = [ar1, ar2]
        .iter()
        .all(|t| CalibrationTable::from_text(&t.to_text()).is_ok_and(|b| &b == *t));
    c.expect(round, "bit-exact table round trip".into());

    let mut small = CalibrationConfig::desk(1, 12, &EstimationMethod::ALL);
    small.replicates = 300;
    let threads = |n: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        pool.install(|| {
            let tables = calibrate(&small).unwrap();
            let text: Vec<String> = tables.iter().map(|t| t.to_text()).collect();
            let cov = run_coverage_experiment(&tables, &CoverageConfig { draws: 500, ..CoverageConfig::new(1, 12, 200, 3) })
                .unwrap();
            (text, cov)
        })
    };
    c.expect(threads(1) == threads(4), "reruns identical on 1 and 4 threads".into());
}

fn criterion_7(c: &mut Check) {
    let x = [1.0, 2.0, 3.0, 2.0, 1.0];
    let ts = shortar::ar::TimeSeries::new(x.to_vec()).unwrap();
    // demeaned: [-0.8, 0.2, 1.2, 0.2, -0.8]; lag-1 sum 0.16, lag-0 sum 2.8
    let yw = yule_walker(&ts, 1).unwrap().phi()[0];
    c.at_most("yule-walker vs 0.16/2.8", (yw - 0.16 / 2.8).abs(), 1e-12);
    let d: Vec<f64> = x.iter().map(|v| v - 1.8).collect();
    let ols = (1..5).map(|t| d[t - 1] * d[t]).sum::<f64>() / (0..4).map(|t| d[t] * d[t]).sum::<f64>();
    let cm = conditional_mle(&ts, 1).unwrap().phi()[0];
    c.at_most("conditional MLE vs OLS", (cm - ols).abs(), 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut spread: f64 = 0.0;
    for k in 0..20 {
        let order = 1 + k % 2;
        let psi: Vec<f64> = (0..order).map(|_| rng.random_range(-0.9..0.9)).collect();
        let truth = from_partial(&PartialAutocorrelations::new(&psi).unwrap());
        let coeffs = ArCoefficients::standard(truth.phi()).unwrap();
        let series = simulate(&coeffs, 100_000, Seed::new(SEED).at(7, k as u64)).unwrap();
        let fits: Vec<Vec<f64>> = EstimationMethod::ALL
            .iter()
            .map(|m| m.estimate(series.values(), order).unwrap().phi().to_vec())
            .collect();
        for a in &fits {
            for b in &fits {
                for i in 0..order {
                    spread = spread.max((a[i] - b[i]).abs());
                }
            }
        }
    }
    c.at_most("max estimator disagreement at n=1e5", spread, 0.01);
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Check)> = Vec::new();
    let mut run = |k: usize, title: &'static str, f: &mut dyn FnMut(&mut Check)| {
        let mut c = Check::new();
        f(&mut c);
        println!(
            "{} criterion {k}: {title}: {}",
            if c.ok { "PASS" } else { "FAIL" },
            c.detail
        );
        results.push((k, title, c));
    };

    let mut ar1 = None;
    let mut ar2 = None;
    run(1, "AR(1) n=15 exact MLE calibration", &mut |c| ar1 = Some(criterion_1(c)));
    run(2, "AR(1) n=30 Yule-Walker calibration", &mut |c| criterion_2(c));
    run(3, "AR(2) n=15 exact MLE calibration", &mut |c| ar2 = Some(criterion_3(c)));
    let (ar1, ar2) = (ar1.unwrap(), ar2.unwrap());
    run(4, "AR(1) interval coverage", &mut |c| {
        let (_, mle30) = ar1_desk(30, EstimationMethod::ExactMle);
        let (_, yw10) = ar1_desk(10, EstimationMethod::YuleWalker);
        criterion_4(c, mle30, yw10)
    });
    run(5, "AR(2) interval coverage", &mut |c| criterion_5(c, ar2.clone()));
    run(6, "property suite", &mut |c| criterion_6(c, &ar1, &ar2));
    run(7, "estimator oracles", &mut |c| criterion_7(c));

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.ok).map(|r| r.0).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
