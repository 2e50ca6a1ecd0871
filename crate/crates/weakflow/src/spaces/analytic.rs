//! Closed-form model geometries: round spheres and flat tori carrying a
//! conformal flow of metrics.
//!
//! Both models are homogeneous, so ball volumes, sphere areas and scalar
//! curvature do not depend on the basepoint; a flow only rescales the base
//! distance by a factor `rho(t)`. That one fact is what makes the closed-form
//! oracles below possible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    RoundSphere { radius0: f64 },
    FlatTorus { side: f64 },
}

/// Parametric scale factors for `FlowLaw::CustomScale`. The derivative is
/// part of the definition so time derivatives of distances stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleLaw {
    /// `phi(t) = exp(rate * t)`
    Exponential { rate: f64 },
    /// `phi(t) = 1 + rate * t` (must stay positive on the time interval)
    Linear { rate: f64 },
}

impl ScaleLaw {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            ScaleLaw::Exponential { rate } => (rate * t).exp(),
            ScaleLaw::Linear { rate } => 1.0 + rate * t,
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            ScaleLaw::Exponential { rate } => rate * (rate * t).exp(),
            ScaleLaw::Linear { rate } => rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "law")]
pub enum FlowLaw {
    /// Time-independent metric.
    Static,
    /// Backward Ricci flow in the law's native (backward) time: on the
    /// sphere `R(tau)^2 = R0^2 + 2 (n-1) tau`; on the flat torus it
    /// coincides with `Static`.
    RicciBackward,
    /// Conformal rescaling by a supplied scale factor in native time.
    CustomScale(ScaleLaw),
}

/// A model space: its kind, flow law, and dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticModel {
    pub kind: ModelKind,
    pub flow: FlowLaw,
    pub dim: usize,
}

impl AnalyticModel {
    /// Conformal factor multiplying the base distance at native time `t`.
    ///
    /// Base distances are unit-sphere angles for the sphere and side-`L`
    /// wrap distances for the torus, so `rho` is `R(t)` resp. `phi(t)`.
    pub fn rho(&self, t: f64) -> Result<f64> {
        let n = self.dim as f64;
        match (self.kind, &self.flow) {
            (ModelKind::RoundSphere { radius0 }, FlowLaw::Static) => Ok(radius0),
            (ModelKind::RoundSphere { radius0 }, FlowLaw::RicciBackward) => {
                let r2 = radius0 * radius0 + 2.0 * (n - 1.0) * t;
                if r2 <= 0.0 {
                    return Err(Error::invalid(format!(
                        "Ricci-backward sphere has R^2 = {r2} <= 0 at t = {t}"
                    )));
                }
                Ok(r2.sqrt())
            }
            (ModelKind::RoundSphere { radius0 }, FlowLaw::CustomScale(law)) => {
                let v = radius0 * law.value(t);
                if v <= 0.0 {
                    return Err(Error::invalid(format!("scale factor {v} <= 0 at t = {t}")));
                }
                Ok(v)
            }
            (ModelKind::FlatTorus { .. }, FlowLaw::Static) => Ok(1.0),
            (ModelKind::FlatTorus { .. }, FlowLaw::RicciBackward) => Ok(1.0),
            (ModelKind::FlatTorus { .. }, FlowLaw::CustomScale(law)) => {
                let v = law.value(t);
                if v <= 0.0 {
                    return Err(Error::invalid(format!("scale factor {v} <= 0 at t = {t}")));
                }
                Ok(v)
            }
        }
    }

    /// Native-time derivative of `rho`.
    pub fn rho_derivative(&self, t: f64) -> Result<f64> {
        let n = self.dim as f64;
        match (self.kind, &self.flow) {
            (_, FlowLaw::Static) => Ok(0.0),
            (ModelKind::RoundSphere { .. }, FlowLaw::RicciBackward) => {
                // d/dt sqrt(R0^2 + 2(n-1)t) = (n-1)/R
                Ok((n - 1.0) / self.rho(t)?)
            }
            (ModelKind::FlatTorus { .. }, FlowLaw::RicciBackward) => Ok(0.0),
            (ModelKind::RoundSphere { radius0 }, FlowLaw::CustomScale(law)) => {
                Ok(radius0 * law.derivative(t))
            }
            (ModelKind::FlatTorus { .. }, FlowLaw::CustomScale(law)) => Ok(law.derivative(t)),
        }
    }

    /// Base (rho = 1) distance between two points in model coordinates:
    /// the angle between unit vectors on the sphere, the wrap metric on the
    /// torus.
    pub fn base_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self.kind {
            ModelKind::RoundSphere { .. } => {
                if x.len() != self.dim + 1 || y.len() != self.dim + 1 {
                    return Err(Error::invalid(
                        "sphere points are unit vectors of length dim + 1",
                    ));
                }
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                let nx: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                let ny: f64 = y.iter().map(|a| a * a).sum::<f64>().sqrt();
                Ok((dot / (nx * ny)).clamp(-1.0, 1.0).acos())
            }
            ModelKind::FlatTorus { side } => {
                if x.len() != self.dim || y.len() != self.dim {
                    return Err(Error::invalid("torus points have length dim"));
                }
                let mut s = 0.0;
                for (a, b) in x.iter().zip(y) {
                    let mut d = (a - b).abs() % side;
                    if d > side / 2.0 {
                        d = side - d;
                    }
                    s += d * d;
                }
                Ok(s.sqrt())
            }
        }
    }

    pub fn distance(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.rho(t)? * self.base_distance(x, y)?)
    }

    /// Total volume of the slice at native time `t`.
    pub fn total_volume(&self, t: f64) -> Result<f64> {
        let rho = self.rho(t)?;
        let v = match self.kind {
            ModelKind::RoundSphere { .. } => geom::unit_sphere_area(self.dim + 1),
            ModelKind::FlatTorus { side } => side.powi(self.dim as i32),
        };
        Ok(v * rho.powi(self.dim as i32))
    }

    /// Diameter of the slice at native time `t`.
    pub fn diameter(&self, t: f64) -> Result<f64> {
        let rho = self.rho(t)?;
        Ok(match self.kind {
            ModelKind::RoundSphere { .. } => std::f64::consts::PI * rho,
            ModelKind::FlatTorus { side } => rho * side / 2.0 * (self.dim as f64).sqrt(),
        })
    }

    /// Exact volume of a metric ball of radius `r` at native time `t`
    /// (basepoint-independent by homogeneity).
    pub fn ball_volume(&self, t: f64, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Ok(0.0);
        }
        let rho = self.rho(t)?;
        let n = self.dim;
        match self.kind {
            ModelKind::RoundSphere { .. } => {
                let theta = (r / rho).min(std::f64::consts::PI);
                Ok(rho.powi(n as i32)
                    * geom::unit_sphere_area(n)
                    * geom::sin_power_integral(n - 1, theta))
            }
            ModelKind::FlatTorus { side } => {
                Ok(rho.powi(n as i32) * geom::ball_box_volume(n, r / rho, side / 2.0))
            }
        }
    }

    /// Exact area of the geodesic sphere of radius `r` at native time `t`.
    pub fn sphere_area(&self, t: f64, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Ok(0.0);
        }
        let rho = self.rho(t)?;
        let n = self.dim;
        match self.kind {
            ModelKind::RoundSphere { .. } => {
                let theta = r / rho;
                if theta >= std::f64::consts::PI {
                    return Ok(0.0);
                }
                Ok(geom::unit_sphere_area(n) * (rho * theta.sin()).powi(n as i32 - 1))
            }
            ModelKind::FlatTorus { side } => {
                Ok(rho.powi(n as i32 - 1) * geom::sphere_box_area(n, r / rho, side / 2.0))
            }
        }
    }

    /// Scalar curvature of the slice at native time `t` (constant over the
    /// slice for both models).
    pub fn scalar_curvature(&self, t: f64) -> Result<f64> {
        let n = self.dim as f64;
        match self.kind {
            ModelKind::RoundSphere { .. } => {
                let rho = self.rho(t)?;
                Ok(n * (n - 1.0) / (rho * rho))
            }
            ModelKind::FlatTorus { .. } => Ok(0.0),
        }
    }

    /// Exact `d/dt d_t^2(x, y)` given the base distance of the pair.
    pub fn d2_derivative_from_base(&self, t: f64, base_dist: f64) -> Result<f64> {
        let rho = self.rho(t)?;
        let drho = self.rho_derivative(t)?;
        Ok(2.0 * rho * drho * base_dist * base_dist)
    }

    /// Injectivity radius of the slice (quadrature over balls is only exact
    /// below it on the torus).
    pub fn injectivity_radius(&self, t: f64) -> Result<f64> {
        let rho = self.rho(t)?;
        Ok(match self.kind {
            ModelKind::RoundSphere { .. } => std::f64::consts::PI * rho,
            ModelKind::FlatTorus { side } => rho * side / 2.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn sphere2() -> AnalyticModel {
        AnalyticModel {
            kind: ModelKind::RoundSphere { radius0: 1.0 },
            flow: FlowLaw::RicciBackward,
            dim: 2,
        }
    }

    #[test]
    fn ricci_backward_radius_law() {
        let m = sphere2();
        assert_relative_eq!(m.rho(0.0).unwrap(), 1.0);
        // R(1.5)^2 = 1 + 2 * 1 * 1.5 = 4
        assert_relative_eq!(m.rho(1.5).unwrap(), 2.0);
        let x = [0.0, 0.0, 1.0];
        let y = [0.0, 0.0, -1.0];
        assert_relative_eq!(m.distance(1.5, &x, &y).unwrap(), 2.0 * PI);
    }

    #[test]
    fn sphere_cap_volume_and_area() {
        let m = AnalyticModel {
            kind: ModelKind::RoundSphere { radius0: 1.0 },
            flow: FlowLaw::Static,
            dim: 2,
        };
        assert_relative_eq!(
            m.ball_volume(0.0, 1.0).unwrap(),
            2.0 * PI * (1.0 - 1.0_f64.cos()),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            m.ball_volume(0.0, PI).unwrap(),
            4.0 * PI,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            m.sphere_area(0.0, 0.3).unwrap(),
            2.0 * PI * 0.3_f64.sin(),
            max_relative = 1e-14
        );
        assert_relative_eq!(m.scalar_curvature(0.0).unwrap(), 2.0);
    }

    #[test]
    fn shrinking_sphere_scal_drops() {
        let m = sphere2();
        // R(1.5) = 2 so scal = 2 / 4 = 0.5
        assert_relative_eq!(m.scalar_curvature(1.5).unwrap(), 0.5);
    }

    #[test]
    fn torus_wrap_distance() {
        let m = AnalyticModel {
            kind: ModelKind::FlatTorus { side: 1.0 },
            flow: FlowLaw::Static,
            dim: 2,
        };
        let d = m.distance(0.0, &[0.0, 0.0], &[0.5, 0.5]).unwrap();
        assert_relative_eq!(d, 0.5 * 2.0_f64.sqrt(), max_relative = 1e-14);
        let m1 = AnalyticModel {
            kind: ModelKind::FlatTorus { side: 1.0 },
            flow: FlowLaw::Static,
            dim: 1,
        };
        assert_relative_eq!(m1.distance(0.0, &[0.0], &[0.75]).unwrap(), 0.25);
        assert_relative_eq!(m1.distance(0.0, &[0.3], &[0.3]).unwrap(), 0.0);
    }

    #[test]
    fn d2_derivative_matches_difference_quotient() {
        let m = sphere2();
        let base = 0.7; // pair at angle 0.7
        let t = 0.2;
        let exact = m.d2_derivative_from_base(t, base).unwrap();
        // d^2(t) = R(t)^2 theta^2, so d/dt = 2(n-1) theta^2 = 2 theta^2
        assert_relative_eq!(exact, 2.0 * base * base, max_relative = 1e-12);
        let h = 1e-6;
        let f = |tt: f64| {
            let r = m.rho(tt).unwrap();
            (r * base).powi(2)
        };
        let fd = (f(t + h) - f(t - h)) / (2.0 * h);
        assert_relative_eq!(exact, fd, max_relative = 1e-8);
    }
}
