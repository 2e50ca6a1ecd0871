//! Markov averaging operators over metric balls and spheres, the
//! volume/area ratio multipliers, their conjugate-heat mixtures, and the
//! small-radius expansion fitter.
//!
//! On sampled backends the ball and shell operators average sample values
//! against the slice weights. The ratio multipliers take their areas and
//! volumes from the attached model oracle when one exists (spaces sampled
//! from a model), and fall back to shell-weight / ball-weight estimates on
//! external data.
//!
//! On analytic backends single applications are evaluated by quadrature, and
//! trigonometric fields on the flat circle are mapped mode-by-mode, which
//! keeps long product formulas exact.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldData, ScalarField, TrigMode};
use crate::geom;
use crate::spaces::{Backend, ModelKind, Site, Space};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    /// Average over the geodesic sphere (shell) of radius r.
    Sigma,
    /// Average over the closed metric ball of radius r.
    Nu,
    /// Multiplication by area(∂B_r) / (a_{n-1} r^{n-1}).
    Theta,
    /// Multiplication by vol(B_r) / (omega_n r^n).
    Eta,
    /// 1/4 sigma + 3/4 theta.
    Alpha,
    /// 1/4 nu + 3/4 eta.
    Beta,
}

impl OperatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::Sigma => "sigma",
            OperatorKind::Nu => "nu",
            OperatorKind::Theta => "theta",
            OperatorKind::Eta => "eta",
            OperatorKind::Alpha => "alpha",
            OperatorKind::Beta => "beta",
        }
    }

    /// Leading expansion coefficient of `(op_r f - f) / r^2` predicted for a
    /// slice with the given Laplacian of f, scalar curvature, and f value.
    pub fn expected_c2(&self, n: usize, laplacian_f: f64, scal: f64, f_value: f64) -> f64 {
        let n = n as f64;
        match self {
            OperatorKind::Sigma => laplacian_f / (2.0 * n),
            OperatorKind::Nu => laplacian_f / (2.0 * (n + 2.0)),
            OperatorKind::Theta => -scal * f_value / (6.0 * n),
            OperatorKind::Eta => -scal * f_value / (6.0 * (n + 2.0)),
            OperatorKind::Alpha => (laplacian_f - scal * f_value) / (8.0 * n),
            OperatorKind::Beta => (laplacian_f - scal * f_value) / (8.0 * (n + 2.0)),
        }
    }
}

/// Shell half-width for discrete sphere averages:
/// `max(r / 10, 2 * expected nearest-neighbor spacing)`.
pub fn shell_half_width(space: &Space, t: f64, r: f64) -> Result<f64> {
    Ok((r / 10.0).max(2.0 * space.nn_spacing(t)?))
}

/// Result of one operator application together with how many ball averages
/// degenerated to the identity (center-only balls).
pub struct Applied {
    pub field: ScalarField,
    pub degenerate: usize,
}

/// Apply an averaging operator at radius `r` to a field tagged at time `t`.
///
/// `r = 0` is the identity by convention.
pub fn apply(
    kind: OperatorKind,
    space: &Space,
    t: f64,
    r: f64,
    f: &ScalarField,
) -> Result<ScalarField> {
    let out = apply_counted(kind, space, t, r, f)?;
    if out.degenerate > 0 {
        log::warn!(
            "{} averaging at r = {r} fell back to identity at {} center-only balls",
            kind.name(),
            out.degenerate
        );
    }
    Ok(out.field)
}

pub fn apply_counted(
    kind: OperatorKind,
    space: &Space,
    t: f64,
    r: f64,
    f: &ScalarField,
) -> Result<Applied> {
    if r < 0.0 {
        return Err(Error::invalid("operator radius must be nonnegative"));
    }
    if (f.time_tag - t).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "field is tagged at {} but the operator acts at {t}",
            f.time_tag
        )));
    }
    if f.space_id != space.id() {
        return Err(Error::invalid("field does not belong to this space"));
    }
    if r == 0.0 {
        return Ok(Applied {
            field: f.clone(),
            degenerate: 0,
        });
    }
    match kind {
        OperatorKind::Alpha => {
            return mix(space, t, r, f, OperatorKind::Sigma, OperatorKind::Theta);
        }
        OperatorKind::Beta => {
            return mix(space, t, r, f, OperatorKind::Nu, OperatorKind::Eta);
        }
        _ => {}
    }
    match (&space.backend(), &f.data) {
        (_, FieldData::Uniform(c)) => apply_uniform(kind, space, t, r, *c, f),
        (Backend::Sampled(_), FieldData::Samples(values)) => {
            apply_sampled(kind, space, t, r, values, f)
        }
        (Backend::Analytic(_), FieldData::Trig { .. }) => apply_trig(kind, space, t, r, f),
        (Backend::Analytic(_), FieldData::Samples(_)) => Err(Error::invalid(
            "sample fields cannot be applied on an analytic backend",
        )),
        (Backend::Sampled(_), FieldData::Trig { .. }) => {
            Err(Error::invalid("trig fields live on the analytic circle"))
        }
    }
}

fn mix(
    space: &Space,
    t: f64,
    r: f64,
    f: &ScalarField,
    avg: OperatorKind,
    ratio: OperatorKind,
) -> Result<Applied> {
    let a = apply_counted(avg, space, t, r, f)?;
    let b = apply_counted(ratio, space, t, r, f)?;
    let field = combine(&a.field, 0.25, &b.field, 0.75)?;
    Ok(Applied {
        field,
        degenerate: a.degenerate,
    })
}

fn combine(a: &ScalarField, wa: f64, b: &ScalarField, wb: f64) -> Result<ScalarField> {
    let data = match (&a.data, &b.data) {
        (FieldData::Samples(x), FieldData::Samples(y)) => {
            FieldData::Samples(x.iter().zip(y).map(|(p, q)| wa * p + wb * q).collect())
        }
        (FieldData::Uniform(x), FieldData::Uniform(y)) => FieldData::Uniform(wa * x + wb * y),
        (FieldData::Samples(x), FieldData::Uniform(y)) => {
            FieldData::Samples(x.iter().map(|p| wa * p + wb * y).collect())
        }
        (FieldData::Uniform(x), FieldData::Samples(y)) => {
            FieldData::Samples(y.iter().map(|q| wa * x + wb * q).collect())
        }
        (
            FieldData::Trig {
                period,
                mean: m1,
                modes: mo1,
            },
            FieldData::Trig {
                period: p2,
                mean: m2,
                modes: mo2,
            },
        ) => {
            if (period - p2).abs() > 1e-12 {
                return Err(Error::invalid("trig fields with different periods"));
            }
            let mut modes = mo1.clone();
            for (k, m) in modes.iter_mut() {
                let other = mo2
                    .get(k)
                    .copied()
                    .unwrap_or(TrigMode { cos: 0.0, sin: 0.0 });
                m.cos = wa * m.cos + wb * other.cos;
                m.sin = wa * m.sin + wb * other.sin;
            }
            for (k, m) in mo2 {
                modes.entry(*k).or_insert(TrigMode {
                    cos: wb * m.cos,
                    sin: wb * m.sin,
                });
            }
            FieldData::Trig {
                period: *period,
                mean: wa * m1 + wb * m2,
                modes,
            }
        }
        _ => return Err(Error::invalid("incompatible field representations")),
    };
    Ok(ScalarField {
        data,
        time_tag: a.time_tag,
        space_id: a.space_id,
    })
}

fn apply_uniform(
    kind: OperatorKind,
    space: &Space,
    t: f64,
    r: f64,
    c: f64,
    f: &ScalarField,
) -> Result<Applied> {
    match kind {
        // averaging fixes constants
        OperatorKind::Sigma | OperatorKind::Nu => Ok(Applied {
            field: f.clone(),
            degenerate: 0,
        }),
        OperatorKind::Theta => {
            let ratio = theta_ratio_oracle(space, t, r)?;
            Ok(Applied {
                field: ScalarField {
                    data: FieldData::Uniform(ratio * c),
                    ..f.clone()
                },
                degenerate: 0,
            })
        }
        OperatorKind::Eta => {
            let ratio = eta_ratio_oracle(space, t, r)?;
            Ok(Applied {
                field: ScalarField {
                    data: FieldData::Uniform(ratio * c),
                    ..f.clone()
                },
                degenerate: 0,
            })
        }
        OperatorKind::Alpha | OperatorKind::Beta => unreachable!("mixtures handled by caller"),
    }
}

/// Area ratio from the model oracle (errors when no oracle is attached,
/// which callers turn into the shell-weight estimate on sampled data).
fn theta_ratio_oracle(space: &Space, t: f64, r: f64) -> Result<f64> {
    let area = space.sphere_area_oracle(t, r).ok_or_else(|| {
        Error::UnsupportedOracle("theta on this space needs a model oracle or sample data".into())
    })?;
    let n = space.dim();
    Ok(area / (geom::unit_sphere_area(n) * r.powi(n as i32 - 1)))
}

fn eta_ratio_oracle(space: &Space, t: f64, r: f64) -> Result<f64> {
    let vol = space.ball_volume_oracle(t, r).ok_or_else(|| {
        Error::UnsupportedOracle("eta on this space needs a model oracle or sample data".into())
    })?;
    let n = space.dim();
    Ok(vol / (geom::unit_ball_volume(n) * r.powi(n as i32)))
}

fn apply_sampled(
    kind: OperatorKind,
    space: &Space,
    t: f64,
    r: f64,
    values: &[f64],
    f: &ScalarField,
) -> Result<Applied> {
    let s = space.sampled()?;
    let n_pts = s.len();
    if values.len() != n_pts {
        return Err(Error::invalid("field length mismatch"));
    }
    let tm_weights: Vec<f64> = (0..n_pts)
        .map(|i| space.weight(t, i))
        .collect::<Result<Vec<_>>>()?;
    let has_oracle = space.oracle().is_some();
    let delta = shell_half_width(space, t, r)?;

    let per_point = |i: usize| -> Result<(f64, usize)> {
        match kind {
            OperatorKind::Nu => {
                let ball = space.ball_indices(t, i, r)?;
                if ball.len() <= 1 {
                    // center-only ball: identity by the r -> 0 convention
                    return Ok((values[i], 1));
                }
                let mut num = 0.0;
                let mut den = 0.0;
                for &j in &ball {
                    num += tm_weights[j] * values[j];
                    den += tm_weights[j];
                }
                Ok((num / den, 0))
            }
            OperatorKind::Sigma => {
                let shell = space.shell_indices(t, i, r, delta)?;
                if shell.is_empty() {
                    return Err(Error::DegenerateSupport {
                        point: i,
                        time: t,
                        radius: r,
                        what: "empty shell for sigma",
                    });
                }
                let mut num = 0.0;
                let mut den = 0.0;
                for &j in &shell {
                    num += tm_weights[j] * values[j];
                    den += tm_weights[j];
                }
                Ok((num / den, 0))
            }
            OperatorKind::Theta => {
                let n = space.dim();
                let area = if has_oracle {
                    space.sphere_area_oracle(t, r).unwrap()
                } else {
                    let shell = space.shell_indices(t, i, r, delta)?;
                    if shell.is_empty() {
                        return Err(Error::DegenerateSupport {
                            point: i,
                            time: t,
                            radius: r,
                            what: "empty shell for theta area estimate",
                        });
                    }
                    shell.iter().map(|&j| tm_weights[j]).sum::<f64>() / (2.0 * delta)
                };
                let ratio = area / (geom::unit_sphere_area(n) * r.powi(n as i32 - 1));
                Ok((ratio * values[i], 0))
            }
            OperatorKind::Eta => {
                let n = space.dim();
                let vol = if has_oracle {
                    space.ball_volume_oracle(t, r).unwrap()
                } else {
                    space.ball_measure(t, Site::Index(i), r)?
                };
                let ratio = vol / (geom::unit_ball_volume(n) * r.powi(n as i32));
                Ok((ratio * values[i], 0))
            }
            _ => unreachable!(),
        }
    };

    let results: Vec<Result<(f64, usize)>> = (0..n_pts).into_par_iter().map(per_point).collect();
    let mut out = Vec::with_capacity(n_pts);
    let mut degenerate = 0;
    for r in results {
        let (v, d) = r?;
        out.push(v);
        degenerate += d;
    }
    Ok(Applied {
        field: ScalarField {
            data: FieldData::Samples(out),
            time_tag: f.time_tag,
            space_id: f.space_id,
        },
        degenerate,
    })
}

/// Mode multipliers on the analytic flat circle.
fn apply_trig(
    kind: OperatorKind,
    space: &Space,
    t: f64,
    r: f64,
    f: &ScalarField,
) -> Result<Applied> {
    let model = space.analytic()?;
    let side = match model.kind {
        ModelKind::FlatTorus { side } if model.dim == 1 => side,
        _ => {
            return Err(Error::UnsupportedOracle(
                "trig fields are supported on flat tori of dimension 1".into(),
            ))
        }
    };
    let rho = model.rho(space.model_time(t))?;
    // base-coordinate half-width of the metric ball
    let u = (r / rho).min(side / 2.0);
    let (period, mean, modes) = match &f.data {
        FieldData::Trig {
            period,
            mean,
            modes,
        } => (*period, *mean, modes),
        _ => unreachable!(),
    };
    if (period - side).abs() > 1e-12 {
        return Err(Error::invalid(
            "trig field period does not match the torus side",
        ));
    }
    let multiplier = |k: u32| -> f64 {
        let w = 2.0 * std::f64::consts::PI * k as f64 / side;
        match kind {
            OperatorKind::Nu => {
                let x = w * u;
                if x.abs() < 1e-12 {
                    1.0
                } else {
                    x.sin() / x
                }
            }
            OperatorKind::Sigma => (w * u).cos(),
            // flat circle: both normalizer ratios are identically 1 below
            // the injectivity radius
            OperatorKind::Theta | OperatorKind::Eta => 1.0,
            _ => unreachable!(),
        }
    };
    let ratio0 = match kind {
        OperatorKind::Theta => theta_ratio_oracle(space, t, r)?,
        OperatorKind::Eta => eta_ratio_oracle(space, t, r)?,
        _ => 1.0,
    };
    let new_modes = modes
        .iter()
        .map(|(&k, m)| {
            let mul = match kind {
                OperatorKind::Theta | OperatorKind::Eta => ratio0,
                _ => multiplier(k),
            };
            (
                k,
                TrigMode {
                    cos: m.cos * mul,
                    sin: m.sin * mul,
                },
            )
        })
        .collect();
    let new_mean = match kind {
        OperatorKind::Theta | OperatorKind::Eta => mean * ratio0,
        _ => mean,
    };
    Ok(Applied {
        field: ScalarField {
            data: FieldData::Trig {
                period,
                mean: new_mean,
                modes: new_modes,
            },
            time_tag: f.time_tag,
            space_id: f.space_id,
        },
        degenerate: 0,
    })
}

/// Pointwise application on an analytic backend by quadrature: the value of
/// `(op_r f)(x)` for a callable field.
pub fn apply_at(
    kind: OperatorKind,
    space: &Space,
    t: f64,
    r: f64,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
) -> Result<f64> {
    if r < 0.0 {
        return Err(Error::invalid("operator radius must be nonnegative"));
    }
    if r == 0.0 {
        return Ok(f(x));
    }
    match kind {
        OperatorKind::Alpha => {
            let s = apply_at(OperatorKind::Sigma, space, t, r, f, x)?;
            let th = apply_at(OperatorKind::Theta, space, t, r, f, x)?;
            return Ok(0.25 * s + 0.75 * th);
        }
        OperatorKind::Beta => {
            let nu = apply_at(OperatorKind::Nu, space, t, r, f, x)?;
            let et = apply_at(OperatorKind::Eta, space, t, r, f, x)?;
            return Ok(0.25 * nu + 0.75 * et);
        }
        OperatorKind::Theta => return Ok(theta_ratio_oracle(space, t, r)? * f(x)),
        OperatorKind::Eta => return Ok(eta_ratio_oracle(space, t, r)? * f(x)),
        _ => {}
    }
    let model = space.analytic()?;
    let rho = model.rho(space.model_time(t))?;
    match (model.kind, model.dim) {
        (ModelKind::RoundSphere { .. }, 1) => {
            let alpha = r / rho;
            if alpha > std::f64::consts::PI {
                return Err(Error::UnsupportedOracle(
                    "quadrature beyond the sphere diameter".into(),
                ));
            }
            let phi0 = x[1].atan2(x[0]);
            let eval = |s: f64| f(&[(phi0 + s).cos(), (phi0 + s).sin()]);
            match kind {
                OperatorKind::Nu => Ok(geom::integrate(eval, -alpha, alpha, 48) / (2.0 * alpha)),
                OperatorKind::Sigma => Ok(0.5 * (eval(alpha) + eval(-alpha))),
                _ => unreachable!(),
            }
        }
        (ModelKind::RoundSphere { .. }, 2) => {
            let alpha = r / rho;
            if alpha > std::f64::consts::PI {
                return Err(Error::UnsupportedOracle(
                    "quadrature beyond the sphere diameter".into(),
                ));
            }
            let frame = orthonormal_frame(x)?;
            let point = |theta: f64, phi: f64| -> Vec<f64> {
                let (ct, st) = (theta.cos(), theta.sin());
                let (cp, sp) = (phi.cos(), phi.sin());
                (0..3)
                    .map(|i| ct * frame.0[i] + st * (cp * frame.1[i] + sp * frame.2[i]))
                    .collect()
            };
            let ring_mean = |theta: f64| -> f64 {
                geom::integrate(
                    |phi| f(&point(theta, phi)),
                    0.0,
                    2.0 * std::f64::consts::PI,
                    48,
                ) / (2.0 * std::f64::consts::PI)
            };
            match kind {
                OperatorKind::Sigma => Ok(ring_mean(alpha)),
                OperatorKind::Nu => {
                    let num = geom::integrate(|th| ring_mean(th) * th.sin(), 0.0, alpha, 48);
                    Ok(num / (1.0 - alpha.cos()))
                }
                _ => unreachable!(),
            }
        }
        (ModelKind::FlatTorus { side }, 1) => {
            let u = r / rho;
            if u > side / 2.0 {
                return Err(Error::UnsupportedOracle(
                    "quadrature beyond the torus injectivity radius".into(),
                ));
            }
            let eval = |s: f64| f(&[(x[0] + s).rem_euclid(side)]);
            match kind {
                OperatorKind::Nu => Ok(geom::integrate(eval, -u, u, 48) / (2.0 * u)),
                OperatorKind::Sigma => Ok(0.5 * (eval(u) + eval(-u))),
                _ => unreachable!(),
            }
        }
        (ModelKind::FlatTorus { side }, 2) => {
            let u_max = r / rho;
            if u_max > side / 2.0 {
                return Err(Error::UnsupportedOracle(
                    "quadrature beyond the torus injectivity radius".into(),
                ));
            }
            let eval = |u: f64, psi: f64| {
                let y = [
                    (x[0] + u * psi.cos()).rem_euclid(side),
                    (x[1] + u * psi.sin()).rem_euclid(side),
                ];
                f(&y)
            };
            let ring_mean = |u: f64| {
                geom::integrate(|psi| eval(u, psi), 0.0, 2.0 * std::f64::consts::PI, 48)
                    / (2.0 * std::f64::consts::PI)
            };
            match kind {
                OperatorKind::Sigma => Ok(ring_mean(u_max)),
                OperatorKind::Nu => {
                    let num = geom::integrate(|u| ring_mean(u) * u, 0.0, u_max, 48);
                    Ok(num / (0.5 * u_max * u_max))
                }
                _ => unreachable!(),
            }
        }
        _ => Err(Error::UnsupportedOracle(format!(
            "analytic quadrature is implemented for dimensions 1 and 2, not {}",
            model.dim
        ))),
    }
}

fn orthonormal_frame(x: &[f64]) -> Result<([f64; 3], [f64; 3], [f64; 3])> {
    if x.len() != 3 {
        return Err(Error::invalid("expected a point on S^2 in R^3"));
    }
    let norm = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let e0 = [x[0] / norm, x[1] / norm, x[2] / norm];
    let pick = if e0[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let dot = pick[0] * e0[0] + pick[1] * e0[1] + pick[2] * e0[2];
    let mut e1 = [
        pick[0] - dot * e0[0],
        pick[1] - dot * e0[1],
        pick[2] - dot * e0[2],
    ];
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1 = [e1[0] / n1, e1[1] / n1, e1[2] / n1];
    let e2 = [
        e0[1] * e1[2] - e0[2] * e1[1],
        e0[2] * e1[0] - e0[0] * e1[2],
        e0[0] * e1[1] - e0[1] * e1[0],
    ];
    Ok((e0, e1, e2))
}

/// Extrapolation of `r -> (op_r f)(x)` by least squares against
/// `c0 + c2 r^2` (plus an `r^4` term when the ladder has at least 6 rungs).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitFit {
    pub c0: f64,
    pub c2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c4: Option<f64>,
    /// Root-mean-square misfit over the ladder.
    pub residual: f64,
    pub ladder: Vec<f64>,
}

impl LimitFit {
    pub fn csv_row(&self, kind: &str, site: &str) -> String {
        format!("{kind},{site},{},{},{}", self.c0, self.c2, self.residual)
    }
}

/// Fit `values[k] ~ c0 + c2 ladder[k]^2 (+ c4 ladder[k]^4)`.
pub fn fit_even_powers(ladder: &[f64], values: &[f64]) -> Result<LimitFit> {
    if ladder.len() < 4 {
        return Err(Error::invalid(
            "extrapolation ladder needs at least 4 rungs",
        ));
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("ladder must be strictly decreasing"));
    }
    if ladder.len() != values.len() {
        return Err(Error::invalid("ladder/value length mismatch"));
    }
    let use_quartic = ladder.len() >= 6;
    let r_max = ladder[0];
    let cols = if use_quartic { 3 } else { 2 };
    // normalized design matrix in z = (r / r_max)^2
    let design: Vec<[f64; 3]> = ladder
        .iter()
        .map(|&r| {
            let z = (r / r_max).powi(2);
            [1.0, z, z * z]
        })
        .collect();
    let mut gram = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (row, &v) in design.iter().zip(values) {
        for a in 0..cols {
            for b in 0..cols {
                gram[a][b] += row[a] * row[b];
            }
            rhs[a] += row[a] * v;
        }
    }
    let sol = solve_small(&mut gram, &mut rhs, cols)
        .ok_or_else(|| Error::UnstableFit("singular normal equations".into()))?;
    // condition guard on the scaled normal matrix
    let mut g2 = [[0.0; 3]; 3];
    for (row, _) in design.iter().zip(values) {
        for a in 0..cols {
            for b in 0..cols {
                g2[a][b] += row[a] * row[b];
            }
        }
    }
    let cond = condition_estimate(&g2, cols);
    if cond > 1e10 {
        return Err(Error::UnstableFit(format!(
            "normal-equation condition ~ {cond:e}"
        )));
    }
    let c0 = sol[0];
    let c2 = sol[1] / (r_max * r_max);
    let c4 = if use_quartic {
        Some(sol[2] / r_max.powi(4))
    } else {
        None
    };
    let mut ss = 0.0;
    for (k, &r) in ladder.iter().enumerate() {
        let model = c0 + c2 * r * r + c4.unwrap_or(0.0) * r.powi(4);
        ss += (values[k] - model).powi(2);
    }
    Ok(LimitFit {
        c0,
        c2,
        c4,
        residual: (ss / ladder.len() as f64).sqrt(),
        ladder: ladder.to_vec(),
    })
}

fn solve_small(a: &mut [[f64; 3]; 3], b: &mut [f64; 3], n: usize) -> Option<[f64; 3]> {
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in (col + 1)..n {
            let factor = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in (r + 1)..n {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    Some(x)
}

fn condition_estimate(g: &[[f64; 3]; 3], n: usize) -> f64 {
    // eigenvalue ratio of the small symmetric normal matrix (Jacobi sweeps)
    let mut a = *g;
    for _ in 0..32 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-18 {
                    continue;
                }
                let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    for i in 0..n {
        hi = hi.max(a[i][i].abs());
        lo = lo.min(a[i][i].abs());
    }
    hi / lo.max(1e-300)
}

/// Field input for [`expansion_fit`]: per-point samples on a sampled space or
/// a callable on an analytic one.
pub enum FieldInput<'a> {
    Sampled(&'a ScalarField),
    Analytic(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
}

/// Default fit ladder: `r_max * 2^-k` for `k = 0..rungs`.
pub fn geometric_ladder(r_max: f64, rungs: usize) -> Vec<f64> {
    (0..rungs).map(|k| r_max / 2.0_f64.powi(k as i32)).collect()
}

/// Evaluate an operator across a radius ladder at one point and extrapolate
/// `r -> 0`. The constant term must come back close to `f(x)`.
pub fn expansion_fit(
    kind: OperatorKind,
    space: &Space,
    t: f64,
    site: Site,
    field: &FieldInput,
    ladder: &[f64],
) -> Result<LimitFit> {
    let mut values = Vec::with_capacity(ladder.len());
    let f_at_x;
    match (field, site) {
        (FieldInput::Analytic(f), Site::Coords(x)) => {
            f_at_x = f(x);
            for &r in ladder {
                values.push(apply_at(kind, space, t, r, *f, x)?);
            }
        }
        (FieldInput::Sampled(f), Site::Index(i)) => {
            let n = space.sampled()?.len();
            f_at_x = f.to_values(n)?[i];
            for &r in ladder {
                let support = space.ball_indices(t, i, r)?.len();
                if support < 30 {
                    return Err(Error::invalid(format!(
                        "rung r = {r} has {support} support points; need at least 30"
                    )));
                }
                let applied = apply_counted(kind, space, t, r, f)?;
                values.push(applied.field.to_values(n)?[i]);
            }
        }
        _ => return Err(Error::invalid("site kind does not match the field input")),
    }
    let fit = fit_even_powers(ladder, &values)?;
    let scale = f_at_x.abs().max(1.0);
    if (fit.c0 - f_at_x).abs() > 0.1 * scale + 20.0 * fit.residual {
        return Err(Error::UnstableFit(format!(
            "extrapolated constant {} is far from f(x) = {f_at_x}",
            fit.c0
        )));
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{make_flat_torus, make_round_sphere, FlowLaw, SamplingStrategy};
    use approx::assert_relative_eq;

    #[test]
    fn flat_ball_average_of_squared_distance() {
        // nu of f(y) = |y - x|^2 at the center is n r^2 / (n + 2)
        for (dim, r) in [(1usize, 0.2_f64), (2, 0.2), (2, 0.35)] {
            let t = make_flat_torus(dim, 1.0, FlowLaw::Static).unwrap();
            let x = vec![0.5; dim];
            let xc = x.clone();
            let model = *t.analytic().unwrap();
            let f = move |y: &[f64]| model.base_distance(&xc, y).unwrap().powi(2);
            let v = apply_at(OperatorKind::Nu, &t, 0.0, r, &f, &x).unwrap();
            assert_relative_eq!(
                v,
                dim as f64 * r * r / (dim as f64 + 2.0),
                max_relative = 1e-10
            );
            let v = apply_at(OperatorKind::Sigma, &t, 0.0, r, &f, &x).unwrap();
            assert_relative_eq!(v, r * r, max_relative = 1e-10);
        }
    }

    #[test]
    fn sphere_ratio_values() {
        let s = make_round_sphere(2, 1.0, FlowLaw::Static).unwrap();
        let one = |_: &[f64]| 1.0;
        let x = [0.0, 0.0, 1.0];
        let th = apply_at(OperatorKind::Theta, &s, 0.0, 0.3, &one, &x).unwrap();
        assert_relative_eq!(th, 0.3_f64.sin() / 0.3, max_relative = 1e-12);
        assert_relative_eq!(th, 0.98507, max_relative = 1e-4);
        let et = apply_at(OperatorKind::Eta, &s, 0.0, 0.3, &one, &x).unwrap();
        assert_relative_eq!(et, 2.0 * (1.0 - 0.3_f64.cos()) / 0.09, max_relative = 1e-12);
        assert_relative_eq!(et, 0.99252, max_relative = 1e-4);
    }

    #[test]
    fn constants_on_flat_torus() {
        let t = make_flat_torus(2, 1.0, FlowLaw::Static).unwrap();
        let one = |_: &[f64]| 2.5;
        let x = [0.25, 0.75];
        for kind in [
            OperatorKind::Sigma,
            OperatorKind::Nu,
            OperatorKind::Theta,
            OperatorKind::Eta,
            OperatorKind::Alpha,
            OperatorKind::Beta,
        ] {
            let v = apply_at(kind, &t, 0.0, 0.2, &one, &x).unwrap();
            assert_relative_eq!(v, 2.5, max_relative = 1e-10);
        }
    }

    #[test]
    fn markov_and_positivity_on_samples() {
        let s = make_round_sphere(2, 1.0, FlowLaw::Static)
            .unwrap()
            .sample(400, 9, SamplingStrategy::UniformRandom)
            .unwrap();
        let vals: Vec<f64> = (0..400)
            .map(|i| ((i * 37) % 100) as f64 / 50.0 - 1.0)
            .collect();
        let f = ScalarField::from_samples(&s, 0.0, vals.clone()).unwrap();
        let (lo, hi) = f.min_max().unwrap();
        for kind in [OperatorKind::Nu, OperatorKind::Sigma] {
            let g = apply(kind, &s, 0.0, 0.5, &f).unwrap();
            let (glo, ghi) = g.min_max().unwrap();
            assert!(
                glo >= lo - 1e-12 && ghi <= hi + 1e-12,
                "{kind:?} broke the Markov bound"
            );
        }
        // positivity
        let pos: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
        let f = ScalarField::from_samples(&s, 0.0, pos).unwrap();
        for kind in [
            OperatorKind::Nu,
            OperatorKind::Sigma,
            OperatorKind::Theta,
            OperatorKind::Eta,
        ] {
            let g = apply(kind, &s, 0.0, 0.5, &f).unwrap();
            assert!(g.min_max().unwrap().0 >= -1e-15);
        }
    }

    #[test]
    fn linearity_and_mixture_identity() {
        let s = make_flat_torus(2, 1.0, FlowLaw::Static)
            .unwrap()
            .sample(300, 4, SamplingStrategy::QuasiUniform)
            .unwrap();
        let fa: Vec<f64> = (0..300).map(|i| (i as f64 * 0.13).sin()).collect();
        let fb: Vec<f64> = (0..300).map(|i| (i as f64 * 0.07).cos()).collect();
        let a = ScalarField::from_samples(&s, 0.0, fa.clone()).unwrap();
        let b = ScalarField::from_samples(&s, 0.0, fb.clone()).unwrap();
        let comb = ScalarField::from_samples(
            &s,
            0.0,
            fa.iter().zip(&fb).map(|(x, y)| 2.0 * x - 0.5 * y).collect(),
        )
        .unwrap();
        for kind in [
            OperatorKind::Nu,
            OperatorKind::Sigma,
            OperatorKind::Alpha,
            OperatorKind::Beta,
        ] {
            let ga = apply(kind, &s, 0.0, 0.2, &a).unwrap();
            let gb = apply(kind, &s, 0.0, 0.2, &b).unwrap();
            let gc = apply(kind, &s, 0.0, 0.2, &comb).unwrap();
            let (va, vb, vc) = (
                ga.values().unwrap(),
                gb.values().unwrap(),
                gc.values().unwrap(),
            );
            for i in 0..300 {
                assert_relative_eq!(
                    vc[i],
                    2.0 * va[i] - 0.5 * vb[i],
                    epsilon = 1e-12,
                    max_relative = 1e-12
                );
            }
        }
        // alpha = 0.25 sigma + 0.75 theta, exactly
        let sal = apply(OperatorKind::Alpha, &s, 0.0, 0.2, &a).unwrap();
        let sg = apply(OperatorKind::Sigma, &s, 0.0, 0.2, &a).unwrap();
        let th = apply(OperatorKind::Theta, &s, 0.0, 0.2, &a).unwrap();
        for i in 0..300 {
            assert_relative_eq!(
                sal.values().unwrap()[i],
                0.25 * sg.values().unwrap()[i] + 0.75 * th.values().unwrap()[i],
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn expansion_fits_on_the_sphere() {
        let s = make_round_sphere(2, 1.0, FlowLaw::Static).unwrap();
        let one = |_: &[f64]| 1.0;
        let x = [0.0, 0.0, 1.0];
        let ladder = geometric_ladder(0.2, 6);
        let fits = [
            (OperatorKind::Theta, -1.0 / 6.0),
            (OperatorKind::Eta, -1.0 / 12.0),
            (OperatorKind::Beta, -1.0 / 16.0),
            (OperatorKind::Alpha, -1.0 / 8.0),
        ];
        for (kind, expect) in fits {
            let fit = expansion_fit(
                kind,
                &s,
                0.0,
                Site::Coords(&x),
                &FieldInput::Analytic(&one),
                &ladder,
            )
            .unwrap();
            assert_relative_eq!(fit.c0, 1.0, max_relative = 1e-6);
            assert_relative_eq!(fit.c2, expect, max_relative = 5e-3);
            // matches the slice-data prediction
            assert_relative_eq!(
                kind.expected_c2(2, 0.0, 2.0, 1.0),
                expect,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn expansion_fit_nu_on_torus_trig_field() {
        let t = make_flat_torus(2, 1.0, FlowLaw::Static).unwrap();
        let f = |y: &[f64]| (2.0 * std::f64::consts::PI * y[0]).cos();
        let x = [0.0, 0.0];
        let ladder = geometric_ladder(0.2, 6);
        let fit = expansion_fit(
            OperatorKind::Nu,
            &t,
            0.0,
            Site::Coords(&x),
            &FieldInput::Analytic(&f),
            &ladder,
        )
        .unwrap();
        let target = -std::f64::consts::PI.powi(2) / 2.0;
        assert_relative_eq!(fit.c2, target, max_relative = 0.02);
        assert_relative_eq!(fit.c0, 1.0, max_relative = 1e-4);
    }

    #[test]
    fn sampled_fit_matches_discrete_laplacian() {
        // trig field on a sampled flat torus; c2 within 2% of the
        // central-difference Laplacian prediction
        let t = make_flat_torus(2, 1.0, FlowLaw::Static)
            .unwrap()
            .sample(4096, 13, SamplingStrategy::QuasiUniform)
            .unwrap();
        let n = 4096;
        let coords: Vec<Vec<f64>> = (0..n).map(|i| t.coords_of(i).unwrap().to_vec()).collect();
        // single low mode: the expansion regime 2 pi r << 1 and the lattice
        // resolution r >> spacing can both hold on the same ladder
        let field_fn = |y: &[f64]| (2.0 * std::f64::consts::PI * y[0]).cos();
        let vals: Vec<f64> = coords.iter().map(|c| field_fn(c)).collect();
        let f = ScalarField::from_samples(&t, 0.0, vals).unwrap();
        // probe at the extremum: the Laplacian signal dominates sampling noise
        let probe = (0..n)
            .min_by(|&a, &b| {
                let da = coords[a][0].powi(2) + coords[a][1].powi(2);
                let db = coords[b][0].powi(2) + coords[b][1].powi(2);
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        let ladder = vec![0.30, 0.26, 0.22, 0.19, 0.16, 0.14];
        let fit = expansion_fit(
            OperatorKind::Nu,
            &t,
            0.0,
            Site::Index(probe),
            &FieldInput::Sampled(&f),
            &ladder,
        )
        .unwrap();
        // central-difference Laplacian at the probe coordinates
        let h = 1e-4;
        let c = &coords[probe];
        let mut lap = 0.0;
        for ax in 0..2 {
            let mut hi = c.clone();
            let mut lo = c.clone();
            hi[ax] += h;
            lo[ax] -= h;
            lap += (field_fn(&hi) - 2.0 * field_fn(c) + field_fn(&lo)) / (h * h);
        }
        let predicted = OperatorKind::Nu.expected_c2(2, lap, 0.0, field_fn(c));
        assert_relative_eq!(fit.c2, predicted, max_relative = 0.02);
    }

    #[test]
    fn degenerate_ball_is_identity_with_warning() {
        let s = make_round_sphere(2, 1.0, FlowLaw::Static)
            .unwrap()
            .sample(50, 2, SamplingStrategy::UniformRandom)
            .unwrap();
        let f = ScalarField::from_samples(&s, 0.0, (0..50).map(|i| i as f64).collect()).unwrap();
        // radius far below the sample spacing: every ball is center-only
        let out = apply_counted(OperatorKind::Nu, &s, 0.0, 1e-4, &f).unwrap();
        assert_eq!(out.degenerate, 50);
        assert_eq!(out.field.values().unwrap(), f.values().unwrap());
        // a shell far beyond the diameter is genuinely empty
        assert!(matches!(
            apply_counted(OperatorKind::Sigma, &s, 0.0, 20.0, &f),
            Err(Error::DegenerateSupport { .. })
        ));
    }

    #[test]
    fn ladder_validation() {
        assert!(fit_even_powers(&[0.2, 0.1, 0.05], &[1.0, 1.0, 1.0]).is_err());
        assert!(fit_even_powers(&[0.1, 0.2, 0.05, 0.01], &[1.0; 4]).is_err());
    }
}
