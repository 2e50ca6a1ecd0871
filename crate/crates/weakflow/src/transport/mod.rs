//! Formal dynamic diffusions and optimal-transport total costs between them.
//!
//! Diffusions are probability densities against the slice weights, pushed
//! from slice to slice by the dynamic conjugate propagator and renormalized
//! (the factors are logged). Costs are monotone convex functions of the
//! slice distance, evaluated with the distance at the same backward time as
//! the measures being compared.

pub mod entropic;
pub mod exact;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::propagators::{delta_density, dynamic_conjugate, ChernoffSchedule};
use crate::spaces::{Orientation, Site, Space};

pub use entropic::EntropicSolution;
pub use exact::{certificate_violation, solve_transport, ExactSolution};

/// Exact mode is capped: contraction verdicts need exactness and desk scale
/// permits small N.
pub const EXACT_MAX_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CostKind {
    Distance,
    DistanceSquared,
    /// `sum_k coeffs[k] * d^(k+1)` with nonnegative coefficients: monotone
    /// and convex for free.
    ConvexPoly {
        coeffs: Vec<f64>,
    },
    /// Piecewise-linear monotone description through the given knots,
    /// extended by the last slope; must pass the convexity probe.
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    #[serde(flatten)]
    pub kind: CostKind,
}

impl CostSpec {
    pub fn distance() -> Self {
        CostSpec {
            kind: CostKind::Distance,
        }
    }

    pub fn distance_squared() -> Self {
        CostSpec {
            kind: CostKind::DistanceSquared,
        }
    }

    pub fn evaluate(&self, d: f64) -> f64 {
        match &self.kind {
            CostKind::Distance => d,
            CostKind::DistanceSquared => d * d,
            CostKind::ConvexPoly { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c * d.powi(k as i32 + 1))
                .sum(),
            CostKind::PiecewiseLinear { knots } => {
                if knots.is_empty() {
                    return 0.0;
                }
                if d <= knots[0].0 {
                    // anchored at c(0) = 0
                    return knots[0].1
                        * if knots[0].0 > 0.0 {
                            d / knots[0].0
                        } else {
                            1.0
                        };
                }
                for w in knots.windows(2) {
                    if d <= w[1].0 {
                        let s = (d - w[0].0) / (w[1].0 - w[0].0);
                        return w[0].1 + s * (w[1].1 - w[0].1);
                    }
                }
                let last = knots.len() - 1;
                let slope = if knots.len() >= 2 {
                    (knots[last].1 - knots[last - 1].1) / (knots[last].0 - knots[last - 1].0)
                } else if knots[last].0 > 0.0 {
                    knots[last].1 / knots[last].0
                } else {
                    0.0
                };
                knots[last].1 + slope * (d - knots[last].0)
            }
        }
    }

    /// `c(0) = 0`, nondecreasing, midpoint-convex on a probe grid.
    pub fn validate(&self, probe_max: f64) -> Result<()> {
        if let CostKind::ConvexPoly { coeffs } = &self.kind {
            if coeffs.iter().any(|&c| c < 0.0) {
                return Err(Error::invalid(
                    "convex-poly cost needs nonnegative coefficients",
                ));
            }
        }
        if let CostKind::PiecewiseLinear { knots } = &self.kind {
            if knots.is_empty() || knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::invalid(
                    "piecewise cost needs increasing knot abscissae",
                ));
            }
        }
        if self.evaluate(0.0).abs() > 1e-12 {
            return Err(Error::invalid("cost must vanish at zero distance"));
        }
        let k = 64;
        let mut prev = 0.0;
        for i in 1..=k {
            let d = probe_max * i as f64 / k as f64;
            let v = self.evaluate(d);
            if v < prev - 1e-12 {
                return Err(Error::invalid(format!("cost decreases near d = {d}")));
            }
            prev = v;
        }
        for i in 1..k {
            let d0 = probe_max * (i - 1) as f64 / k as f64;
            let d2 = probe_max * (i + 1) as f64 / k as f64;
            let mid = self.evaluate(0.5 * (d0 + d2));
            let avg = 0.5 * (self.evaluate(d0) + self.evaluate(d2));
            if mid > avg + 1e-9 * (1.0 + avg.abs()) {
                return Err(Error::invalid(format!(
                    "cost fails midpoint convexity near d = {}",
                    0.5 * (d0 + d2)
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "solver")]
pub enum OtSolver {
    Exact,
    Entropic {
        epsilon: f64,
        max_iters: usize,
        tol: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransportPlan {
    /// Sparse triplets `(i, j, mass)`.
    pub entries: Vec<(usize, usize, f64)>,
    pub row_residual: f64,
    pub col_residual: f64,
    pub total_cost: f64,
    /// Entropic runs report their certified bracket width here.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duality_gap: Option<f64>,
}

impl TransportPlan {
    pub fn csv_header() -> &'static str {
        "i,j,mass"
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,mass\n");
        for &(i, j, m) in &self.entries {
            out.push_str(&format!("{i},{j},{m}\n"));
        }
        out
    }
}

fn plan_residuals(entries: &[(usize, usize, f64)], mu1: &[f64], mu2: &[f64]) -> (f64, f64) {
    let mut row = vec![0.0; mu1.len()];
    let mut col = vec![0.0; mu2.len()];
    for &(i, j, m) in entries {
        row[i] += m;
        col[j] += m;
    }
    let r = row
        .iter()
        .zip(mu1)
        .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
    let c = col
        .iter()
        .zip(mu2)
        .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
    (r, c)
}

/// Cost matrix of one slice (row-major), assembled in parallel.
pub fn cost_matrix(space: &Space, tau: f64, cost: &CostSpec) -> Result<Vec<f64>> {
    let s = space.sampled()?;
    let n = s.len();
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                row.push(cost.evaluate(space.distance(tau, Site::Index(i), Site::Index(j))?));
            }
            Ok(row)
        })
        .collect();
    let mut flat = Vec::with_capacity(n * n);
    for r in rows {
        flat.extend(r?);
    }
    Ok(flat)
}

/// Optimal total transport cost between two mass vectors living on the same
/// slice. Exact mode solves the transportation LP; entropic mode returns a
/// certified upper bound and its duality gap.
pub fn ot_cost(
    space: &Space,
    tau: f64,
    mu1: &[f64],
    mu2: &[f64],
    cost: &CostSpec,
    solver: OtSolver,
) -> Result<(f64, TransportPlan)> {
    let s = space.sampled()?;
    let n = s.len();
    if mu1.len() != n || mu2.len() != n {
        return Err(Error::invalid("measures must live on the sample points"));
    }
    cost.validate(space.diameter(tau)?.max(1e-12))?;
    if matches!(solver, OtSolver::Exact) && n > EXACT_MAX_POINTS {
        return Err(Error::invalid(format!(
            "exact transport is capped at {EXACT_MAX_POINTS} points; use the entropic solver"
        )));
    }
    if space.is_pseudo_metric() {
        log::info!("pseudo-metric slice: transport cost is a pseudo-distance");
    }
    let c = cost_matrix(space, tau, cost)?;
    let eval = |i: usize, j: usize| c[i * n + j];
    match solver {
        OtSolver::Exact => {
            let sol = solve_transport(mu1, mu2, &eval)?;
            let (rr, cr) = plan_residuals(&sol.plan, mu1, mu2);
            if rr.max(cr) > 1e-8 {
                return Err(Error::invalid(format!(
                    "transport plan missed its marginals by {:.3e}",
                    rr.max(cr)
                )));
            }
            Ok((
                sol.cost,
                TransportPlan {
                    entries: sol.plan,
                    row_residual: rr,
                    col_residual: cr,
                    total_cost: sol.cost,
                    duality_gap: None,
                },
            ))
        }
        OtSolver::Entropic {
            epsilon,
            max_iters,
            tol,
        } => {
            let sol = entropic::solve_entropic(mu1, mu2, &eval, epsilon, max_iters, tol)?;
            let (rr, cr) = plan_residuals(&sol.plan, mu1, mu2);
            let gap = sol.duality_gap();
            Ok((
                sol.upper_bound,
                TransportPlan {
                    entries: sol.plan,
                    row_residual: rr,
                    col_residual: cr,
                    total_cost: sol.upper_bound,
                    duality_gap: Some(gap),
                },
            ))
        }
    }
}

/// `W_p` for `p` in {1, 2}: the p-th root of the optimal `d^p` cost.
pub fn wasserstein(space: &Space, tau: f64, mu1: &[f64], mu2: &[f64], p: u32) -> Result<f64> {
    let cost = match p {
        1 => CostSpec::distance(),
        2 => CostSpec::distance_squared(),
        _ => return Err(Error::invalid("wasserstein supports p = 1 or 2")),
    };
    let (total, _) = ot_cost(space, tau, mu1, mu2, &cost, OtSolver::Exact)?;
    Ok(match p {
        1 => total,
        _ => total.max(0.0).sqrt(),
    })
}

#[derive(Debug, Clone)]
pub enum DiffusionInit {
    Density(Vec<f64>),
    Delta(usize),
}

/// A formal dynamic diffusion: a probability density per backward-time
/// slice, consecutive slices related by the dynamic conjugate propagator.
#[derive(Debug, Clone)]
pub struct Diffusion {
    pub tau_grid: Vec<f64>,
    pub densities: Vec<Vec<f64>>,
    /// Log of the renormalization factor applied after each step.
    pub renorm_log: Vec<f64>,
    pub space_id: u64,
}

impl Diffusion {
    /// Mass vector (density times weight) at slice `k`.
    pub fn measure_at(&self, space: &Space, k: usize) -> Result<Vec<f64>> {
        let tau = self.tau_grid[k];
        self.densities[k]
            .iter()
            .enumerate()
            .map(|(i, &u)| Ok(u * space.weight(tau, i)?))
            .collect()
    }
}

const NEGATIVE_DENSITY_FLOOR: f64 = -1e-10;

fn normalize_density(space: &Space, tau: f64, mut u: Vec<f64>) -> Result<(Vec<f64>, f64)> {
    let mut clipped = 0usize;
    for (i, v) in u.iter_mut().enumerate() {
        if *v < NEGATIVE_DENSITY_FLOOR {
            return Err(Error::NegativeDensity {
                point: i,
                value: *v,
                floor: NEGATIVE_DENSITY_FLOOR,
            });
        }
        if *v < 0.0 {
            *v = 0.0;
            clipped += 1;
        }
    }
    if clipped > 0 {
        log::warn!("clipped {clipped} slightly negative density values at tau = {tau}");
    }
    let mut total = 0.0;
    for (i, &v) in u.iter().enumerate() {
        total += v * space.weight(tau, i)?;
    }
    if total <= 0.0 {
        return Err(Error::invalid("density has no mass"));
    }
    let factor = 1.0 / total;
    u.iter_mut().for_each(|v| *v *= factor);
    Ok((u, factor.ln()))
}

/// Propagate an initial density (or a delta) along the backward-time grid by
/// the dynamic conjugate propagator, renormalizing each slice to a
/// probability measure.
pub fn make_diffusion(
    space: &Space,
    init: DiffusionInit,
    tau_grid: &[f64],
    sched: &ChernoffSchedule,
) -> Result<Diffusion> {
    if space.orientation() != Orientation::Backward {
        return Err(Error::invalid("diffusions run on backward-oriented spaces"));
    }
    if tau_grid.is_empty() || tau_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("tau grid must be nonempty and increasing"));
    }
    let n = space.sampled()?.len();
    let tau0 = tau_grid[0];
    let first = match init {
        DiffusionInit::Delta(idx) => delta_density(space, tau0, idx)?.to_values(n)?,
        DiffusionInit::Density(v) => {
            if v.len() != n {
                return Err(Error::invalid("initial density length mismatch"));
            }
            v
        }
    };
    let (first, log0) = normalize_density(space, tau0, first)?;
    let mut densities = vec![first];
    let mut renorm_log = vec![log0];
    for w in tau_grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let f = ScalarField::from_samples(space, a, densities.last().unwrap().clone())?;
        let out = dynamic_conjugate(space, a, b, sched, &f)?;
        let (u, lg) = normalize_density(space, b, out.field.to_values(n)?)?;
        densities.push(u);
        renorm_log.push(lg);
    }
    Ok(Diffusion {
        tau_grid: tau_grid.to_vec(),
        densities,
        renorm_log,
        space_id: space.id(),
    })
}
