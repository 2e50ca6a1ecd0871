//! Exact discrete optimal transport by successive shortest paths with node
//! potentials on the dense bipartite network (the transportation problem's
//! network-flow form). Real-valued masses; optimality is certified by the
//! returned dual potentials.

use crate::error::{Error, Result};

pub struct ExactSolution {
    /// Sparse plan entries `(i, j, mass)`.
    pub plan: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// Dual potentials: `alpha[i] + beta[j] <= c[i][j]` up to float dust,
    /// with equality on support.
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

const RC_TOL: f64 = 1e-9;

/// Solve `min <C, P>` over couplings of `supply` and `demand`.
///
/// `cost(i, j)` must be finite and nonnegative. Masses may carry float dust;
/// anything below `1e-15 * total` is dropped up front.
pub fn solve_transport(
    supply: &[f64],
    demand: &[f64],
    cost: &dyn Fn(usize, usize) -> f64,
) -> Result<ExactSolution> {
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    if (total_s - total_d).abs() > 1e-8 * total_s.max(1e-300) {
        return Err(Error::InfeasibleMarginals {
            gap: (total_s - total_d).abs(),
            tol: 1e-8 * total_s.max(1e-300),
        });
    }
    // mass below the floor is dropped and the rest rescaled; the marginal
    // contract (1e-8) has plenty of headroom over n * floor
    let floor = 1e-12 * total_s;
    let src: Vec<usize> = (0..supply.len()).filter(|&i| supply[i] > floor).collect();
    let dst: Vec<usize> = (0..demand.len()).filter(|&j| demand[j] > floor).collect();
    let m = src.len();
    let n = dst.len();
    if m == 0 || n == 0 {
        return Ok(ExactSolution {
            plan: vec![],
            cost: 0.0,
            alpha: vec![0.0; supply.len()],
            beta: vec![0.0; demand.len()],
        });
    }
    // rescale demand so the two sides match exactly
    let mut rem_s: Vec<f64> = src.iter().map(|&i| supply[i]).collect();
    let kept_d: f64 = dst.iter().map(|&j| demand[j]).sum();
    let kept_s: f64 = rem_s.iter().sum();
    let mut rem_d: Vec<f64> = dst.iter().map(|&j| demand[j] * kept_s / kept_d).collect();

    let c = |a: usize, b: usize| cost(src[a], dst[b]);
    let mut flow = vec![0.0_f64; m * n];
    // node potentials: suppliers 0..m, consumers m..m+n
    let mut pot = vec![0.0_f64; m + n];
    let inf = f64::INFINITY;
    let mut remaining = kept_s;
    let stop = 1e-11 * kept_s;
    // backward arcs carrying only dust are invisible to the search so they
    // cannot bottleneck an augmentation
    let arc_floor = 1e-13 * kept_s;
    let max_pulls = 32 * (m + n) + 16;
    let mut pulls = 0;

    while remaining > stop {
        pulls += 1;
        if pulls > max_pulls {
            return Err(Error::invalid(format!(
                "transport solver exceeded its augmentation budget ({remaining:e} mass left)"
            )));
        }
        // dense Dijkstra over the residual network with reduced costs
        let mut dist = vec![inf; m + n];
        let mut parent = vec![usize::MAX; m + n];
        let mut done = vec![false; m + n];
        for (a, &rs) in rem_s.iter().enumerate() {
            if rs > 0.0 {
                dist[a] = 0.0;
            }
        }
        let target = loop {
            let mut u = usize::MAX;
            let mut best = inf;
            for v in 0..m + n {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break None;
            }
            done[u] = true;
            if u >= m && rem_d[u - m] > 0.0 {
                break Some(u);
            }
            if u < m {
                // forward arcs supplier u -> consumer b
                for b in 0..n {
                    let v = m + b;
                    if done[v] {
                        continue;
                    }
                    let rc = (c(u, b) + pot[u] - pot[v]).max(0.0);
                    if dist[u] + rc < dist[v] {
                        dist[v] = dist[u] + rc;
                        parent[v] = u;
                    }
                }
            } else {
                // backward arcs consumer u -> supplier a where flow > 0
                let b = u - m;
                for a in 0..m {
                    if done[a] || flow[a * n + b] <= arc_floor {
                        continue;
                    }
                    let rc = (-c(a, b) + pot[u] - pot[a]).max(0.0);
                    if dist[u] + rc < dist[a] {
                        dist[a] = dist[u] + rc;
                        parent[a] = u;
                    }
                }
            }
        };
        let t = target.ok_or_else(|| {
            Error::invalid("transport network disconnected; this cannot happen with dense costs")
        })?;
        // bottleneck along the augmenting path
        let mut delta = rem_d[t - m];
        let mut v = t;
        while parent[v] != usize::MAX {
            let p = parent[v];
            if v >= m {
                // arrived via forward arc p -> v
            } else {
                // arrived via backward arc p(consumer) -> v(supplier)
                delta = delta.min(flow[v * n + (p - m)]);
            }
            v = p;
        }
        delta = delta.min(rem_s[v]);
        let source = v;
        // apply
        let mut v = t;
        while parent[v] != usize::MAX {
            let p = parent[v];
            if v >= m {
                flow[p * n + (v - m)] += delta;
            } else {
                flow[v * n + (p - m)] -= delta;
            }
            v = p;
        }
        rem_s[source] -= delta;
        rem_d[t - m] -= delta;
        remaining -= delta;
        // potential update keeps reduced costs nonnegative; unreached nodes
        // are capped at the target distance so their arcs stay feasible
        let d_t = dist[t];
        for v in 0..m + n {
            pot[v] += dist[v].min(d_t);
        }
        if delta <= 0.0 {
            return Err(Error::invalid(
                "transport augmentation stalled at zero mass",
            ));
        }
    }

    let mut plan = Vec::new();
    let mut total_cost = 0.0;
    for a in 0..m {
        for b in 0..n {
            let f = flow[a * n + b];
            if f > floor {
                total_cost += f * c(a, b);
                plan.push((src[a], dst[b], f));
            }
        }
    }
    let mut alpha = vec![0.0; supply.len()];
    let mut beta = vec![0.0; demand.len()];
    for (a, &i) in src.iter().enumerate() {
        alpha[i] = -pot[a];
    }
    for (b, &j) in dst.iter().enumerate() {
        beta[j] = pot[m + b];
    }
    // shift so dual feasibility holds including zero-mass rows
    for i in 0..supply.len() {
        if supply[i] <= floor {
            let mut best = f64::INFINITY;
            for j in 0..demand.len() {
                best = best.min(cost(i, j) - beta[j]);
            }
            alpha[i] = best.min(0.0);
        }
    }
    Ok(ExactSolution {
        plan,
        cost: total_cost,
        alpha,
        beta,
    })
}

/// Optimality certificate: primal feasibility of the plan, dual feasibility
/// of the potentials, complementary slackness, and primal/dual agreement.
/// Returns the worst violation found (tests assert it is tiny).
pub fn certificate_violation(
    supply: &[f64],
    demand: &[f64],
    cost: &dyn Fn(usize, usize) -> f64,
    sol: &ExactSolution,
) -> f64 {
    let mut worst: f64 = 0.0;
    let mut row = vec![0.0; supply.len()];
    let mut col = vec![0.0; demand.len()];
    for &(i, j, f) in &sol.plan {
        worst = worst.max(-f);
        row[i] += f;
        col[j] += f;
        // support must be dually tight
        worst = worst.max((cost(i, j) - sol.alpha[i] - sol.beta[j]).abs());
    }
    for i in 0..supply.len() {
        worst = worst.max((row[i] - supply[i]).abs());
        for j in 0..demand.len() {
            worst = worst.max(sol.alpha[i] + sol.beta[j] - cost(i, j) - RC_TOL);
        }
    }
    for j in 0..demand.len() {
        worst = worst.max((col[j] - demand[j]).abs());
    }
    let dual: f64 = sol
        .alpha
        .iter()
        .zip(supply)
        .map(|(a, s)| a * s)
        .chain(sol.beta.iter().zip(demand).map(|(b, d)| b * d))
        .sum();
    worst.max((dual - sol.cost).abs())
}
