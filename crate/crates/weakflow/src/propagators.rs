//! Finite-stage Trotter-Chernoff products: static and dynamic heat
//! propagators built from ball/sphere averages, static and dynamic conjugate
//! propagators built from their ratio mixtures, the discrete heat kernel,
//! and the heat/conjugate duality residual.
//!
//! Stage radii are derived from the schedule, never stored: a heat stage of
//! increment `dt` with `j` inner applications uses `sqrt(2(n+2) dt / j)` for
//! the ball kernel (`sqrt(2n dt / j)` for the sphere kernel); conjugate
//! stages use `sqrt(8(n+2) dt / j)` resp. `sqrt(8n dt / j)`. Products apply
//! the earliest frozen time first.

use serde::{Deserialize, Serialize};

use crate::averaging::{apply_counted, OperatorKind};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::spaces::{Orientation, Space};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffSchedule {
    /// Outer stage count m (frozen-time stages of the dynamic product).
    pub outer: usize,
    /// Inner product length j; `None` selects the single-limit formula
    /// (one application per outer stage).
    pub inner: Option<usize>,
    pub kernel: OperatorKind,
}

impl ChernoffSchedule {
    pub fn double_limit(outer: usize, inner: usize, kernel: OperatorKind) -> Self {
        ChernoffSchedule {
            outer,
            inner: Some(inner),
            kernel,
        }
    }

    pub fn single_limit(outer: usize, kernel: OperatorKind) -> Self {
        ChernoffSchedule {
            outer,
            inner: None,
            kernel,
        }
    }

    pub fn validate_heat(&self) -> Result<()> {
        self.validate_counts()?;
        match self.kernel {
            OperatorKind::Nu | OperatorKind::Sigma => Ok(()),
            k => Err(Error::invalid(format!(
                "heat propagation takes the nu or sigma kernel, not {}",
                k.name()
            ))),
        }
    }

    pub fn validate_conjugate(&self) -> Result<()> {
        self.validate_counts()?;
        match self.kernel {
            OperatorKind::Beta | OperatorKind::Alpha => Ok(()),
            k => Err(Error::invalid(format!(
                "conjugate propagation takes the beta or alpha kernel, not {}",
                k.name()
            ))),
        }
    }

    fn validate_counts(&self) -> Result<()> {
        if self.outer < 1 || self.inner.is_some_and(|j| j < 1) {
            return Err(Error::invalid("stage counts must be at least 1"));
        }
        Ok(())
    }

    /// Inner product length for a dynamic stage.
    fn inner_dynamic(&self) -> usize {
        self.inner.unwrap_or(1)
    }

    /// Product length for a static propagation (single-limit schedules fall
    /// back to the outer count).
    fn inner_static(&self) -> usize {
        self.inner.unwrap_or(self.outer)
    }

    /// Both counts doubled; a single-limit schedule doubles its outer count.
    pub fn doubled(&self) -> Self {
        ChernoffSchedule {
            outer: self.outer * 2,
            inner: self.inner.map(|j| j * 2),
            kernel: self.kernel,
        }
    }

    fn radius(&self, dim: usize, dt: f64, j: usize) -> f64 {
        let n = dim as f64;
        let scale = match self.kernel {
            OperatorKind::Nu => 2.0 * (n + 2.0),
            OperatorKind::Sigma => 2.0 * n,
            OperatorKind::Beta => 8.0 * (n + 2.0),
            OperatorKind::Alpha => 8.0 * n,
            _ => unreachable!("schedules only carry product kernels"),
        };
        (scale * dt / j as f64).sqrt()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub time: f64,
    pub radius: f64,
    pub sup_norm: f64,
    pub degenerate: usize,
}

#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub field: ScalarField,
    pub stages: Vec<StageRecord>,
}

impl PropagationResult {
    pub fn to_json(&self) -> Result<serde_json::Value> {
        Ok(serde_json::json!({
            "field": self.field.to_json()?,
            "stage_log": self.stages,
        }))
    }
}

fn product(
    space: &Space,
    frozen_times: &[f64],
    radius_per_time: &[f64],
    apps_per_time: usize,
    kernel: OperatorKind,
    f: &ScalarField,
    final_tag: f64,
) -> Result<PropagationResult> {
    let mut field = f.clone();
    let mut stages = Vec::with_capacity(frozen_times.len() * apps_per_time);
    for (&t, &r) in frozen_times.iter().zip(radius_per_time) {
        field = field.retagged(t);
        for _ in 0..apps_per_time {
            let out = apply_counted(kernel, space, t, r, &field)?;
            field = out.field;
            stages.push(StageRecord {
                time: t,
                radius: r,
                sup_norm: field.sup_norm(),
                degenerate: out.degenerate,
            });
        }
    }
    if stages.iter().map(|s| s.degenerate).sum::<usize>() > 0 {
        log::warn!(
            "{} product had center-only balls in {} of {} applications",
            kernel.name(),
            stages.iter().filter(|s| s.degenerate > 0).count(),
            stages.len()
        );
    }
    Ok(PropagationResult {
        field: field.retagged(final_tag),
        stages,
    })
}

/// Heat propagation over `[s1, s2]` with the geometry frozen at `t_fixed`.
pub fn static_heat(
    space: &Space,
    t_fixed: f64,
    s1: f64,
    s2: f64,
    sched: &ChernoffSchedule,
    f: &ScalarField,
) -> Result<PropagationResult> {
    sched.validate_heat()?;
    if s2 < s1 {
        return Err(Error::invalid("static heat needs s1 <= s2"));
    }
    if s2 == s1 {
        return Ok(PropagationResult {
            field: f.clone().retagged(s2),
            stages: vec![],
        });
    }
    let j = sched.inner_static();
    let r = sched.radius(space.dim(), s2 - s1, j);
    product(space, &[t_fixed], &[r], j, sched.kernel, f, s2)
}

/// Dynamic heat propagation: m frozen-time stages over `[s1, s2]`, each a
/// j-fold product (single-limit schedules use one application per stage).
pub fn dynamic_heat(
    space: &Space,
    s1: f64,
    s2: f64,
    sched: &ChernoffSchedule,
    f: &ScalarField,
) -> Result<PropagationResult> {
    sched.validate_heat()?;
    if space.orientation() != Orientation::Forward {
        return Err(Error::invalid(
            "dynamic heat runs on forward-oriented spaces (reorient the space first)",
        ));
    }
    if s2 < s1 {
        return Err(Error::invalid("dynamic heat needs s1 <= s2"));
    }
    if s2 == s1 {
        return Ok(PropagationResult {
            field: f.clone().retagged(s2),
            stages: vec![],
        });
    }
    let m = sched.outer;
    let j = sched.inner_dynamic();
    let dt = (s2 - s1) / m as f64;
    let times: Vec<f64> = (0..m).map(|l| s1 + l as f64 * dt).collect();
    let r = sched.radius(space.dim(), dt, j);
    let radii = vec![r; m];
    product(space, &times, &radii, j, sched.kernel, f, s2)
}

/// Conjugate-heat propagation over `[tau1, tau2]` frozen at `tau_fixed`.
pub fn static_conjugate(
    space: &Space,
    tau_fixed: f64,
    tau1: f64,
    tau2: f64,
    sched: &ChernoffSchedule,
    f: &ScalarField,
) -> Result<PropagationResult> {
    sched.validate_conjugate()?;
    if tau2 < tau1 {
        return Err(Error::invalid("static conjugate needs tau1 <= tau2"));
    }
    if space.virtually_psc() != Some(true) {
        log::warn!(
            "conjugate propagation without a virtually-psc flag: operator norms are not guaranteed"
        );
    }
    if tau2 == tau1 {
        return Ok(PropagationResult {
            field: f.clone().retagged(tau2),
            stages: vec![],
        });
    }
    let j = sched.inner_static();
    let r = sched.radius(space.dim(), tau2 - tau1, j);
    product(space, &[tau_fixed], &[r], j, sched.kernel, f, tau2)
}

/// Dynamic conjugate propagation: m static-conjugate stages at frozen
/// backward times, earliest first. This is the formal dynamic conjugate
/// propagator on sampled spaces.
pub fn dynamic_conjugate(
    space: &Space,
    tau1: f64,
    tau2: f64,
    sched: &ChernoffSchedule,
    f: &ScalarField,
) -> Result<PropagationResult> {
    sched.validate_conjugate()?;
    if space.orientation() != Orientation::Backward {
        return Err(Error::invalid(
            "dynamic conjugate runs on backward-oriented spaces",
        ));
    }
    if tau2 < tau1 {
        return Err(Error::invalid("dynamic conjugate needs tau1 <= tau2"));
    }
    if tau2 == tau1 {
        return Ok(PropagationResult {
            field: f.clone().retagged(tau2),
            stages: vec![],
        });
    }
    if space.virtually_psc() != Some(true) {
        log::warn!(
            "conjugate propagation without a virtually-psc flag: operator norms are not guaranteed"
        );
    }
    let m = sched.outer;
    let j = sched.inner_dynamic();
    let dt = (tau2 - tau1) / m as f64;
    let times: Vec<f64> = (0..m).map(|l| tau1 + l as f64 * dt).collect();
    let r = sched.radius(space.dim(), dt, j);
    let radii = vec![r; m];
    product(space, &times, &radii, j, sched.kernel, f, tau2)
}

/// Discrete delta density at sample point `y`: `1 / weight(t, y)` at `y`.
pub fn delta_density(space: &Space, t: f64, y: usize) -> Result<ScalarField> {
    let n = space.sampled()?.len();
    if y >= n {
        return Err(Error::invalid("delta index out of range"));
    }
    let mut v = vec![0.0; n];
    v[y] = 1.0 / space.weight(t, y)?;
    ScalarField::from_samples(space, t, v)
}

/// Propagated discrete delta: the heat transition kernel row for `y`.
pub fn heat_kernel(
    space: &Space,
    s1: f64,
    s2: f64,
    y: usize,
    sched: &ChernoffSchedule,
) -> Result<ScalarField> {
    let delta = delta_density(space, s1, y)?;
    if s2 == s1 {
        return Ok(delta);
    }
    let out = dynamic_heat(space, s1, s2, sched, &delta)?;
    Ok(out.field)
}

/// Heat product on a backward-oriented space, walking the frozen backward
/// times from `tau_hi` down to `tau_lo` (forward in physical time).
fn heat_product_backward(
    space: &Space,
    tau_hi: f64,
    tau_lo: f64,
    sched: &ChernoffSchedule,
    f: &ScalarField,
) -> Result<PropagationResult> {
    sched.validate_heat()?;
    if tau_hi < tau_lo {
        return Err(Error::invalid(
            "backward heat product needs tau_hi >= tau_lo",
        ));
    }
    if tau_hi == tau_lo {
        return Ok(PropagationResult {
            field: f.clone().retagged(tau_lo),
            stages: vec![],
        });
    }
    let m = sched.outer;
    let j = sched.inner_dynamic();
    let dt = (tau_hi - tau_lo) / m as f64;
    let times: Vec<f64> = (0..m).map(|l| tau_hi - l as f64 * dt).collect();
    let r = sched.radius(space.dim(), dt, j);
    let radii = vec![r; m];
    product(space, &times, &radii, j, sched.kernel, f, tau_lo)
}

/// Weighted total `sum_x f(x) weight_t(x)` of a sample field at slice `t`.
pub fn weighted_total(space: &Space, t: f64, f: &ScalarField) -> Result<f64> {
    let n = space.sampled()?.len();
    let vals = f.to_values(n)?;
    let mut s = 0.0;
    for (i, v) in vals.iter().enumerate() {
        s += v * space.weight(t, i)?;
    }
    Ok(s)
}

/// Residual of the heat/conjugate duality pairing at one point:
/// `| (dynamic-conjugate g)(y)  -  sum_x kernel(x) g(x) weight_{tau0}(x) |`
/// where the kernel is the delta at `y` created at `tau` and heat-propagated
/// down to `tau0`. The conjugate side uses the schedule as given; the heat
/// side uses the matching averaging kernel (beta -> nu, alpha -> sigma).
pub fn duality_gap(
    space: &Space,
    tau0: f64,
    tau: f64,
    g: &ScalarField,
    y: usize,
    sched: &ChernoffSchedule,
) -> Result<f64> {
    sched.validate_conjugate()?;
    if space.orientation() != Orientation::Backward {
        return Err(Error::invalid(
            "duality gap is evaluated on backward-oriented spaces",
        ));
    }
    if tau < tau0 {
        return Err(Error::invalid("duality gap needs tau0 <= tau"));
    }
    let n = space.sampled()?.len();
    let conj = dynamic_conjugate(space, tau0, tau, sched, g)?;
    let lhs = conj.field.to_values(n)?[y];
    if tau == tau0 {
        let rhs = g.to_values(n)?[y];
        return Ok((lhs - rhs).abs());
    }
    let heat_kernel_kind = match sched.kernel {
        OperatorKind::Beta => OperatorKind::Nu,
        OperatorKind::Alpha => OperatorKind::Sigma,
        _ => unreachable!(),
    };
    let heat_sched = ChernoffSchedule {
        kernel: heat_kernel_kind,
        ..*sched
    };
    let delta = delta_density(space, tau, y)?;
    let kernel = heat_product_backward(space, tau, tau0, &heat_sched, &delta)?.field;
    let kv = kernel.to_values(n)?;
    let gv = g.to_values(n)?;
    let mut rhs = 0.0;
    for i in 0..n {
        rhs += kv[i] * gv[i] * space.weight(tau0, i)?;
    }
    Ok((lhs - rhs).abs())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementRow {
    pub m: usize,
    pub j: usize,
    pub sup_change: f64,
    pub wall_seconds: f64,
}

impl RefinementRow {
    pub fn csv_header() -> &'static str {
        "m,j,sup_change,wall_time"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.m, self.j, self.sup_change, self.wall_seconds
        )
    }
}

/// Double the schedule until successive results differ by less than `tol`
/// in sup norm, or `max_rounds` is exhausted. Returns the last result, the
/// study rows, and whether the tolerance was met.
pub fn refine<F>(
    mut run: F,
    sched0: ChernoffSchedule,
    tol: f64,
    max_rounds: usize,
) -> Result<(ScalarField, Vec<RefinementRow>, bool)>
where
    F: FnMut(&ChernoffSchedule) -> Result<ScalarField>,
{
    let mut sched = sched0;
    let start = std::time::Instant::now();
    let mut prev = run(&sched)?;
    let mut rows = vec![RefinementRow {
        m: sched.outer,
        j: sched.inner.unwrap_or(1),
        sup_change: f64::NAN,
        wall_seconds: start.elapsed().as_secs_f64(),
    }];
    let mut converged = false;
    for _ in 0..max_rounds {
        sched = sched.doubled();
        let t0 = std::time::Instant::now();
        let next = run(&sched)?;
        let change = next.sup_distance(&prev)?;
        rows.push(RefinementRow {
            m: sched.outer,
            j: sched.inner.unwrap_or(1),
            sup_change: change,
            wall_seconds: t0.elapsed().as_secs_f64(),
        });
        prev = next;
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok((prev, rows, converged))
}

/// Sup-norm log of a result must never exceed the input for Markov kernels;
/// convenience accessor used by verdicts and tests.
pub fn sup_norms(result: &PropagationResult) -> Vec<f64> {
    result.stages.iter().map(|s| s.sup_norm).collect()
}
