//! Entropically regularized transport: log-domain Sinkhorn iterations, a
//! feasibility rounding step, and a certified bracket around the exact cost
//! (rounded-plan cost above, c-transform dual value below).

use crate::error::{Error, Result};

pub struct EntropicSolution {
    pub plan: Vec<(usize, usize, f64)>,
    /// Cost of the rounded (exactly feasible) plan: an upper bound for the
    /// unregularized optimum.
    pub upper_bound: f64,
    /// Value of a feasible dual pair: a lower bound.
    pub lower_bound: f64,
    pub iterations: usize,
}

impl EntropicSolution {
    pub fn duality_gap(&self) -> f64 {
        self.upper_bound - self.lower_bound
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Sinkhorn in the log domain with marginal-error stopping.
pub fn solve_entropic(
    a: &[f64],
    b: &[f64],
    cost: &dyn Fn(usize, usize) -> f64,
    epsilon: f64,
    max_iters: usize,
    marginal_tol: f64,
) -> Result<EntropicSolution> {
    let m = a.len();
    let n = b.len();
    let ta: f64 = a.iter().sum();
    let tb: f64 = b.iter().sum();
    if (ta - tb).abs() > 1e-8 * ta.max(1e-300) {
        return Err(Error::InfeasibleMarginals {
            gap: (ta - tb).abs(),
            tol: 1e-8 * ta,
        });
    }
    if epsilon <= 0.0 {
        return Err(Error::invalid("entropic regularization must be positive"));
    }
    let la: Vec<f64> = a.iter().map(|&x| x.max(1e-300).ln()).collect();
    let lb: Vec<f64> = b.iter().map(|&x| x.max(1e-300).ln()).collect();
    let mut f = vec![0.0_f64; m];
    let mut g = vec![0.0_f64; n];
    let mut iterations = 0;
    let mut err = f64::INFINITY;
    while iterations < max_iters {
        iterations += 1;
        for i in 0..m {
            let lse = log_sum_exp((0..n).map(|j| (g[j] - cost(i, j)) / epsilon));
            f[i] = epsilon * (la[i] - lse);
        }
        for j in 0..n {
            let lse = log_sum_exp((0..m).map(|i| (f[i] - cost(i, j)) / epsilon));
            g[j] = epsilon * (lb[j] - lse);
        }
        // row marginals are exact right after the f update; check columns
        err = 0.0;
        for i in 0..m {
            let row: f64 = (0..n)
                .map(|j| ((f[i] + g[j] - cost(i, j)) / epsilon).exp())
                .sum();
            err += (row - a[i]).abs();
        }
        if err < marginal_tol {
            break;
        }
    }
    if err >= marginal_tol {
        return Err(Error::EntropicNonConvergence {
            iters: iterations,
            err,
        });
    }
    // dense plan, then round to exact feasibility
    let mut p = vec![0.0_f64; m * n];
    for i in 0..m {
        for j in 0..n {
            p[i * n + j] = ((f[i] + g[j] - cost(i, j)) / epsilon).exp();
        }
    }
    round_to_feasible(&mut p, a, b);
    let mut upper = 0.0;
    let mut plan = Vec::new();
    for i in 0..m {
        for j in 0..n {
            let v = p[i * n + j];
            if v > 1e-15 * ta {
                upper += v * cost(i, j);
                plan.push((i, j, v));
            }
        }
    }
    // feasible dual from the c-transform of g
    let mut lower = 0.0;
    for i in 0..m {
        let fi = (0..n)
            .map(|j| cost(i, j) - g[j])
            .fold(f64::INFINITY, f64::min);
        lower += fi * a[i];
    }
    for j in 0..n {
        lower += g[j] * b[j];
    }
    Ok(EntropicSolution {
        plan,
        upper_bound: upper,
        lower_bound: lower,
        iterations,
    })
}

/// Scale rows then columns down to their targets and spread the residual as
/// a rank-one correction; the result has exactly the requested marginals.
fn round_to_feasible(p: &mut [f64], a: &[f64], b: &[f64]) {
    let m = a.len();
    let n = b.len();
    for i in 0..m {
        let row: f64 = p[i * n..(i + 1) * n].iter().sum();
        if row > a[i] && row > 0.0 {
            let s = a[i] / row;
            p[i * n..(i + 1) * n].iter_mut().for_each(|x| *x *= s);
        }
    }
    for j in 0..n {
        let col: f64 = (0..m).map(|i| p[i * n + j]).sum();
        if col > b[j] && col > 0.0 {
            let s = b[j] / col;
            for i in 0..m {
                p[i * n + j] *= s;
            }
        }
    }
    let mut row_err = vec![0.0; m];
    let mut col_err = vec![0.0; n];
    let mut missing = 0.0;
    for i in 0..m {
        let row: f64 = p[i * n..(i + 1) * n].iter().sum();
        row_err[i] = a[i] - row;
        missing += row_err[i];
    }
    for j in 0..n {
        let col: f64 = (0..m).map(|i| p[i * n + j]).sum();
        col_err[j] = b[j] - col;
    }
    if missing > 0.0 {
        for i in 0..m {
            for j in 0..n {
                p[i * n + j] += row_err[i] * col_err[j] / missing;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::exact::solve_transport;

    #[test]
    fn entropic_brackets_the_exact_cost() {
        let n = 12;
        let a = vec![1.0 / n as f64; n];
        let b: Vec<f64> = (0..n).map(|j| (j + 1) as f64).collect();
        let tb: f64 = b.iter().sum();
        let b: Vec<f64> = b.iter().map(|x| x / tb).collect();
        let cost = |i: usize, j: usize| ((i as f64 - j as f64) / n as f64).powi(2);
        let exact = solve_transport(&a, &b, &cost).unwrap().cost;
        let mut prev_upper = f64::INFINITY;
        for eps in [0.05, 0.02, 0.01, 0.005] {
            let sol = solve_entropic(&a, &b, &cost, eps, 20_000, 1e-10).unwrap();
            assert!(
                sol.upper_bound >= exact - 1e-9,
                "upper bound dipped below exact"
            );
            assert!(sol.lower_bound <= exact + 1e-9);
            assert!(sol.duality_gap() >= -1e-12);
            // upper bounds tighten as the regularization vanishes
            assert!(sol.upper_bound <= prev_upper + 1e-9);
            prev_upper = sol.upper_bound;
        }
        let tight = solve_entropic(&a, &b, &cost, 0.002, 60_000, 1e-10).unwrap();
        assert!((tight.upper_bound - exact).abs() < 2e-3);
    }

    #[test]
    fn non_convergence_is_reported() {
        let a = vec![0.7, 0.2, 0.1];
        let b = vec![0.1, 0.2, 0.7];
        let cost = |i: usize, j: usize| ((i * 2 + j * 5) % 7) as f64 / 3.0;
        assert!(matches!(
            solve_entropic(&a, &b, &cost, 5e-3, 2, 1e-13),
            Err(Error::EntropicNonConvergence { .. })
        ));
    }
}
