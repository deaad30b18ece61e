//! Derivative-free simplex (Nelder–Mead) minimizer used by the tomography
//! and calibration fitters. Deterministic: no internal randomness; callers
//! supply their own multi-start points.

/// Minimize `f` over R^n starting from `x0`; `scale[i]` sets the initial
/// simplex edge along axis i. Returns (argmin, min value).
pub fn nelder_mead<F>(f: F, x0: &[f64], scale: &[f64], max_iter: usize, tol: f64) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(scale.len(), n, "scale length must match dimension");
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if scale[i] != 0.0 { scale[i] } else { 1e-3 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap_or(std::cmp::Ordering::Equal));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if (values[n] - values[0]).abs() <= tol * (1.0 + values[0].abs()) {
            break;
        }

        // centroid of all but the worst
        let mut c = vec![0.0; n];
        for v in simplex.iter().take(n) {
            for i in 0..n {
                c[i] += v[i] / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let refl: Vec<f64> = (0..n).map(|i| c[i] + alpha * (c[i] - worst[i])).collect();
        let f_refl = f(&refl);

        if f_refl < values[0] {
            let exp: Vec<f64> = (0..n).map(|i| c[i] + gamma * (refl[i] - c[i])).collect();
            let f_exp = f(&exp);
            if f_exp < f_refl {
                simplex[n] = exp;
                values[n] = f_exp;
            } else {
                simplex[n] = refl;
                values[n] = f_refl;
            }
        } else if f_refl < values[n - 1] {
            simplex[n] = refl;
            values[n] = f_refl;
        } else {
            let contr: Vec<f64> = if f_refl < values[n] {
                (0..n).map(|i| c[i] + rho * (refl[i] - c[i])).collect()
            } else {
                (0..n).map(|i| c[i] + rho * (worst[i] - c[i])).collect()
            };
            let f_contr = f(&contr);
            if f_contr < values[n].min(f_refl) {
                simplex[n] = contr;
                values[n] = f_contr;
            } else {
                // shrink toward the best vertex
                let best = simplex[0].clone();
                for k in 1..=n {
                    for i in 0..n {
                        simplex[k][i] = best[i] + sigma * (simplex[k][i] - best[i]);
                    }
                    values[k] = f(&simplex[k]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if values[i] < values[best] {
            best = i;
        }
    }
    (simplex[best].clone(), values[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 1.5).powi(2) + 3.0 * (x[1] + 0.7).powi(2);
        let (x, v) = nelder_mead(f, &[0.0, 0.0], &[0.5, 0.5], 500, 1e-14);
        assert_abs_diff_eq!(x[0], 1.5, epsilon = 1e-5);
        assert_abs_diff_eq!(x[1], -0.7, epsilon = 1e-5);
        assert!(v < 1e-9);
    }

    #[test]
    fn rosenbrock_two_dim() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let (x, v) = nelder_mead(f, &[-1.2, 1.0], &[0.5, 0.5], 5000, 1e-16);
        assert!(v < 1e-8, "f = {v:e} at {x:?}");
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-3);
    }
}
