//! Derivative-free minimization for the low-dimensional variance-ratio
//! search.

#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
}

/// Nelder-Mead with standard coefficients. Stops when the spread of
/// simplex values falls below `ftol * (1 + |f_best|)` and either the simplex diameter is
/// below `xtol` or the best value has not moved by more than `ftol` in
/// [`STALL_ITERS`] iterations (the simplex is crawling along a flat valley,
/// typically toward a zero variance ratio).
pub const STALL_ITERS: usize = 100;

pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    ftol: f64,
    xtol: f64,
    max_iter: usize,
) -> NmResult {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        trace.push(values[0]);

        let spread = values[n] - values[0];
        let diam = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let stalled =
            trace.len() > STALL_ITERS && trace[trace.len() - 1 - STALL_ITERS] - values[0] <= ftol;
        if spread.abs() <= ftol * (1.0 + values[0].abs()) && (diam <= xtol || stalled) {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
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
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    let v: Vec<f64> = simplex[0]
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, x)| b + 0.5 * (x - b))
                        .collect();
                    values[i] = f(&v);
                    simplex[i] = v;
                }
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    NmResult {
        x: simplex[best].clone(),
        fx: values[best],
        iterations,
        converged,
        trace,
    }
}

/// Newton refinement with central-difference derivatives. Each step is
/// accepted only if it lowers `f`.
pub fn newton_polish<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    h: f64,
    steps: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    for _ in 0..steps {
        let mut g = vec![0.0; n];
        let mut hess = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut p = x.clone();
            p[i] += h;
            let fp = f(&p);
            p[i] -= 2.0 * h;
            let fm = f(&p);
            g[i] = (fp - fm) / (2.0 * h);
            hess[(i, i)] = (fp - 2.0 * fx + fm) / (h * h);
            for j in 0..i {
                let mut q = x.clone();
                let mut e = |di: f64, dj: f64| {
                    q.clone_from(&x);
                    q[i] += di;
                    q[j] += dj;
                    f(&q)
                };
                let v = (e(h, h) - e(h, -h) - e(-h, h) + e(-h, -h)) / (4.0 * h * h);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        let Some(chol) = hess.clone().cholesky() else {
            break;
        };
        let d = chol.solve(&nalgebra::DVector::from_vec(g));
        let cand: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a - b).collect();
        let fc = f(&cand);
        if fc < fx {
            let moved = d.amax();
            x = cand;
            fx = fc;
            if moved < 1e-10 {
                break;
            }
        } else {
            break;
        }
    }
    (x, fx)
}
