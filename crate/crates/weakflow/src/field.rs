//! Scalar fields over a space at one time slice.
//!
//! Three representations:
//! - `Samples`: one value per sample point (sampled backends);
//! - `Uniform`: a constant, valid on either backend;
//! - `Trig`: a finite Fourier sum on a flat circle (analytic torus, n = 1).
//!   The averaging operators act diagonally on trigonometric modes, so
//!   Chernoff products on the analytic circle can be evaluated exactly in
//!   this representation.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::spaces::Space;

/// One Fourier mode `a cos(2 pi k x / l) + b sin(2 pi k x / l)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigMode {
    pub cos: f64,
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Samples(Vec<f64>),
    Uniform(f64),
    /// Fourier sum on a circle of circumference `period` (base coordinate).
    Trig {
        period: f64,
        mean: f64,
        modes: BTreeMap<u32, TrigMode>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub data: FieldData,
    pub time_tag: f64,
    pub space_id: u64,
}

impl ScalarField {
    pub fn from_samples(space: &Space, t: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.sampled()?.len() {
            return Err(Error::invalid(
                "field length does not match the sample count",
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("field values must be finite"));
        }
        Ok(ScalarField {
            data: FieldData::Samples(values),
            time_tag: t,
            space_id: space.id(),
        })
    }

    pub fn uniform(space: &Space, t: f64, value: f64) -> Self {
        ScalarField {
            data: FieldData::Uniform(value),
            time_tag: t,
            space_id: space.id(),
        }
    }

    /// `sum_k a_k cos(2 pi k x / period) + b_k sin(...)` plus a mean term.
    pub fn trig(
        space: &Space,
        t: f64,
        period: f64,
        mean: f64,
        modes: Vec<(u32, f64, f64)>,
    ) -> Self {
        let mut map = BTreeMap::new();
        for (k, a, b) in modes {
            if k > 0 {
                map.insert(k, TrigMode { cos: a, sin: b });
            }
        }
        ScalarField {
            data: FieldData::Trig {
                period,
                mean,
                modes: map,
            },
            time_tag: t,
            space_id: space.id(),
        }
    }

    pub fn retagged(mut self, t: f64) -> Self {
        self.time_tag = t;
        self
    }

    pub fn values(&self) -> Result<&[f64]> {
        match &self.data {
            FieldData::Samples(v) => Ok(v),
            _ => Err(Error::invalid("field is not in sample representation")),
        }
    }

    /// Materialize per-point values on a sampled space of `n` points.
    pub fn to_values(&self, n: usize) -> Result<Vec<f64>> {
        match &self.data {
            FieldData::Samples(v) => {
                if v.len() != n {
                    return Err(Error::invalid("field length mismatch"));
                }
                Ok(v.clone())
            }
            FieldData::Uniform(c) => Ok(vec![*c; n]),
            FieldData::Trig { .. } => Err(Error::invalid(
                "trig fields live on the analytic circle; evaluate them with eval_trig",
            )),
        }
    }

    pub fn eval_trig(&self, x: f64) -> Result<f64> {
        match &self.data {
            FieldData::Trig {
                period,
                mean,
                modes,
            } => {
                let mut v = *mean;
                for (k, m) in modes {
                    let arg = 2.0 * std::f64::consts::PI * (*k as f64) * x / period;
                    v += m.cos * arg.cos() + m.sin * arg.sin();
                }
                Ok(v)
            }
            FieldData::Uniform(c) => Ok(*c),
            FieldData::Samples(_) => {
                Err(Error::invalid("sample fields are indexed, not evaluated"))
            }
        }
    }

    /// Sup norm. Trig fields are probed on a fixed 1024-point grid.
    pub fn sup_norm(&self) -> f64 {
        match &self.data {
            FieldData::Samples(v) => v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
            FieldData::Uniform(c) => c.abs(),
            FieldData::Trig { period, .. } => {
                let mut m = 0.0_f64;
                for i in 0..1024 {
                    let x = period * i as f64 / 1024.0;
                    m = m.max(self.eval_trig(x).unwrap().abs());
                }
                m
            }
        }
    }

    pub fn min_max(&self) -> Result<(f64, f64)> {
        match &self.data {
            FieldData::Samples(v) => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &x in v {
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
                Ok((lo, hi))
            }
            FieldData::Uniform(c) => Ok((*c, *c)),
            FieldData::Trig { period, .. } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for i in 0..1024 {
                    let x = period * i as f64 / 1024.0;
                    let v = self.eval_trig(x)?;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                Ok((lo, hi))
            }
        }
    }

    /// Sup distance between two fields in compatible representations.
    pub fn sup_distance(&self, other: &ScalarField) -> Result<f64> {
        match (&self.data, &other.data) {
            (FieldData::Samples(a), FieldData::Samples(b)) => {
                if a.len() != b.len() {
                    return Err(Error::invalid("field length mismatch"));
                }
                Ok(a.iter()
                    .zip(b)
                    .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())))
            }
            (FieldData::Uniform(a), FieldData::Uniform(b)) => Ok((a - b).abs()),
            (FieldData::Samples(a), FieldData::Uniform(c))
            | (FieldData::Uniform(c), FieldData::Samples(a)) => {
                Ok(a.iter().fold(0.0_f64, |m, x| m.max((x - c).abs())))
            }
            (FieldData::Trig { period, .. }, _) | (_, FieldData::Trig { period, .. }) => {
                let mut m = 0.0_f64;
                for i in 0..1024 {
                    let x = period * i as f64 / 1024.0;
                    m = m.max((self.eval_trig(x)? - other.eval_trig(x)?).abs());
                }
                Ok(m)
            }
        }
    }

    /// JSON export: values paired with the time tag.
    pub fn to_json(&self) -> Result<serde_json::Value> {
        let values = match &self.data {
            FieldData::Samples(v) => v.clone(),
            FieldData::Uniform(c) => vec![*c],
            FieldData::Trig { period, .. } => (0..256)
                .map(|i| self.eval_trig(period * i as f64 / 256.0))
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(serde_json::json!({ "time": self.time_tag, "values": values }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{make_flat_torus, FlowLaw};
    use approx::assert_relative_eq;

    #[test]
    fn trig_eval_and_norms() {
        let c = make_flat_torus(1, 1.0, FlowLaw::Static).unwrap();
        let f = ScalarField::trig(&c, 0.0, 1.0, 0.5, vec![(1, 1.0, 0.0), (3, 0.0, 0.25)]);
        let x = 0.2;
        let expected = 0.5
            + (2.0 * std::f64::consts::PI * x).cos()
            + 0.25 * (6.0 * std::f64::consts::PI * x).sin();
        assert_relative_eq!(f.eval_trig(x).unwrap(), expected, max_relative = 1e-14);
        assert!(f.sup_norm() >= 1.0);
    }

    #[test]
    fn fields_export_values_with_time_tags() {
        let c = make_flat_torus(1, 1.0, FlowLaw::Static).unwrap();
        let s = c
            .sample(8, 0, crate::spaces::SamplingStrategy::QuasiUniform)
            .unwrap();
        let f = ScalarField::from_samples(&s, 0.25, vec![1.0; 8]).unwrap();
        let json = f.to_json().unwrap();
        assert_eq!(json["time"], 0.25);
        assert_eq!(json["values"].as_array().unwrap().len(), 8);
    }

    #[test]
    fn sample_field_checks_length() {
        let c = make_flat_torus(1, 1.0, FlowLaw::Static).unwrap();
        let s = c
            .sample(16, 0, crate::spaces::SamplingStrategy::QuasiUniform)
            .unwrap();
        assert!(ScalarField::from_samples(&s, 0.0, vec![0.0; 5]).is_err());
        let f = ScalarField::from_samples(&s, 0.0, vec![1.0; 16]).unwrap();
        assert_relative_eq!(
            f.sup_distance(&ScalarField::uniform(&s, 0.0, 1.0)).unwrap(),
            0.0
        );
    }
}
