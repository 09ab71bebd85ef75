//! Small dense unconstrained minimizers.
//!
//! [`bfgs`] is the workhorse (inverse-Hessian BFGS with Armijo backtracking);
//! [`nelder_mead`] is the derivative-free fallback. Problem sizes here are
//! tiny (at most a few dozen parameters), so everything is plain `Vec<f64>`.

#[derive(Clone, Copy, Debug)]
pub struct Options {
    pub max_iter: usize,
    /// Stop when the gradient infinity norm falls below this.
    pub grad_tol: f64,
    /// Stop when the objective changes by less than `f_tol * (1 + |f|)`
    /// over an accepted step.
    pub f_tol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-8,
            f_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f`, which returns the objective and writes the gradient into
/// its second argument.
pub fn bfgs<F>(mut f: F, x0: &[f64], opts: &Options) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    // inverse Hessian, row-major
    let mut h = vec![0.0; n * n];
    let reset = |h: &mut [f64]| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
    };
    reset(&mut h);

    let mut dir = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut hy = vec![0.0; n];
    let mut small_steps = 0;
    let mut iterations = 0;
    let mut first = true;

    if !fx.is_finite() {
        return Minimum {
            x,
            value: fx,
            grad_norm: f64::INFINITY,
            iterations: 0,
            converged: false,
        };
    }

    while iterations < opts.max_iter {
        if inf_norm(&g) <= opts.grad_tol {
            return Minimum {
                grad_norm: inf_norm(&g),
                x,
                value: fx,
                iterations,
                converged: true,
            };
        }
        iterations += 1;

        for i in 0..n {
            dir[i] = -dot(&h[i * n..(i + 1) * n], &g);
        }
        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            reset(&mut h);
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = dot(&dir, &g);
        }

        // first step: keep the initial move modest
        let mut step = if first {
            (1.0 / inf_norm(&g).max(1e-300)).min(1.0)
        } else {
            1.0
        };
        let mut accepted = false;
        let mut f_new = fx;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if first {
                break;
            }
            // stale curvature: restart from steepest descent once
            reset(&mut h);
            first = true;
            continue;
        }
        first = false;

        for i in 0..n {
            s[i] = x_new[i] - x[i];
            y[i] = g_new[i] - g[i];
        }
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            for i in 0..n {
                hy[i] = dot(&h[i * n..(i + 1) * n], &y);
            }
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            let coef = (1.0 + yhy * rho) * rho;
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }

        let change = (fx - f_new).abs();
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        if change <= opts.f_tol * (1.0 + fx.abs()) {
            small_steps += 1;
            if small_steps >= 2 {
                return Minimum {
                    grad_norm: inf_norm(&g),
                    x,
                    value: fx,
                    iterations,
                    converged: true,
                };
            }
        } else {
            small_steps = 0;
        }
    }

    Minimum {
        grad_norm: inf_norm(&g),
        converged: inf_norm(&g) <= opts.grad_tol,
        x,
        value: fx,
        iterations,
    }
}

/// Central-difference gradient with per-coordinate step `h * max(1, |x_i|)`.
pub fn central_gradient<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let step = h * x[i].abs().max(1.0);
            xp[i] = x[i] + step;
            let up = f(&xp);
            xp[i] = x[i] - step;
            let down = f(&xp);
            xp[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// BFGS on a value-only objective, with central-difference gradients.
pub fn bfgs_numeric<F>(mut f: F, x0: &[f64], opts: &Options) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    bfgs(
        |x, g| {
            let grad = central_gradient(&mut f, x, 1e-6);
            g.copy_from_slice(&grad);
            f(x)
        },
        x0,
        opts,
    )
}

/// Nelder-Mead simplex search. Converges when the spread of simplex values
/// drops below `f_tol * (1 + |f_best|)`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], initial_step: f64, opts: &Options) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += initial_step;
        simplex.push(v);
    }
    let eval = |f: &mut F, x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(&mut f, x)).collect();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter * (n + 1) {
        iterations += 1;
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[n];
        if (worst - best).abs() <= opts.f_tol * (1.0 + best.abs()) {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|j| centroid[j] + t * (simplex[n][j] - centroid[j]))
                .collect()
        };

        let xr = along(-1.0);
        let fr = eval(&mut f, &xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = eval(&mut f, &xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = along(-0.5);
                let fc = eval(&mut f, &xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&mut f, &xc);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    }
                    values[i] = eval(&mut f, &simplex[i]);
                }
            }
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        grad_norm: f64::NAN,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
    }

    #[test]
    fn bfgs_rosenbrock() {
        let m = bfgs(rosenbrock, &[-1.2, 1.0], &Options::default());
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn bfgs_quadratic_many_dims() {
        let target: Vec<f64> = (0..20).map(|i| i as f64 * 0.1 - 1.0).collect();
        let m = bfgs(
            |x, g| {
                let mut f = 0.0;
                for i in 0..x.len() {
                    let w = 1.0 + i as f64;
                    let d = x[i] - target[i];
                    f += w * d * d;
                    g[i] = 2.0 * w * d;
                }
                f
            },
            &vec![0.0; 20],
            &Options::default(),
        );
        assert!(m.converged);
        for (a, b) in m.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn numeric_gradient_matches_analytic() {
        let x = [0.3, -0.7];
        let mut g = [0.0; 2];
        rosenbrock(&x, &mut g);
        let num = central_gradient(|x| rosenbrock(x, &mut [0.0; 2]), &x, 1e-6);
        for (a, b) in g.iter().zip(&num) {
            assert!((a - b).abs() < 1e-5 * a.abs().max(1.0));
        }
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let opts = Options {
            max_iter: 2000,
            f_tol: 1e-16,
            ..Options::default()
        };
        let m = nelder_mead(|x| rosenbrock(x, &mut [0.0; 2]), &[-1.2, 1.0], 0.5, &opts);
        assert!((m.x[0] - 1.0).abs() < 1e-3, "{:?}", m.x);
    }
}
