//! Time-dependent metric-measure spaces.
//!
//! A [`Space`] is a dimension, a time interval with an orientation, and a
//! backend: either a closed-form [`AnalyticModel`] (round sphere, flat torus,
//! with a conformal flow law) or a [`SampledSpace`] (point set with per-slice
//! distances and measure weights). Spaces sampled from a model keep the model
//! around as an oracle for volumes, areas, curvature and exact distance
//! derivatives.

mod analytic;
mod sampled;

pub use analytic::{AnalyticModel, FlowLaw, ModelKind, ScaleLaw};
pub use sampled::{
    base_matrix, sample_points, Provenance, SampledData, SampledSpace, SampledSpaceJson,
    SamplingStrategy, SymMat,
};

use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::geom;

static NEXT_SPACE_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    Forward,
    Backward,
}

/// A point of a space: an index into the sample set, or model coordinates
/// (unit vectors for spheres, `[0, side)^n` vectors for tori).
#[derive(Debug, Clone, Copy)]
pub enum Site<'a> {
    Index(usize),
    Coords(&'a [f64]),
}

#[derive(Debug, Clone)]
pub enum Backend {
    Analytic(AnalyticModel),
    Sampled(SampledSpace),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivSide {
    Upper,
    Lower,
}

/// How `d/dt d_t^2` is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum DerivMode {
    /// Closed form from the flow law (needs a model oracle).
    Exact,
    /// One-sided difference quotients over the given h-ladder, improved by
    /// first-order Richardson pairs; upper/lower are max/min over the pairs.
    Ladder { steps: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct Space {
    id: u64,
    dim: usize,
    orientation: Orientation,
    interval: (f64, f64),
    /// When set, space time `t` corresponds to native law time `flip_ref - t`.
    flip_ref: Option<f64>,
    backend: Backend,
    virtually_psc: Option<bool>,
}

/// Great-circle sphere of dimension `n` and initial radius `r0`.
///
/// `RicciBackward` spaces are backward-oriented (the radius law lives in
/// backward time); the other flows default to forward.
pub fn make_round_sphere(dim: usize, radius0: f64, flow: FlowLaw) -> Result<Space> {
    if dim < 1 {
        return Err(Error::invalid("sphere dimension must be >= 1"));
    }
    if radius0 <= 0.0 {
        return Err(Error::invalid("sphere radius must be positive"));
    }
    let orientation = match flow {
        FlowLaw::RicciBackward => Orientation::Backward,
        _ => Orientation::Forward,
    };
    let model = AnalyticModel {
        kind: ModelKind::RoundSphere { radius0 },
        flow,
        dim,
    };
    let space = Space {
        id: NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed),
        dim,
        orientation,
        interval: (0.0, 1.0),
        flip_ref: None,
        backend: Backend::Analytic(model),
        virtually_psc: Some(true),
    };
    space.validate_interval()?;
    Ok(space)
}

/// Flat torus `[0, side)^n` with the wrap metric.
pub fn make_flat_torus(dim: usize, side: f64, flow: FlowLaw) -> Result<Space> {
    if dim < 1 {
        return Err(Error::invalid("torus dimension must be >= 1"));
    }
    if side <= 0.0 {
        return Err(Error::invalid("torus side must be positive"));
    }
    let orientation = match flow {
        FlowLaw::RicciBackward => Orientation::Backward,
        _ => Orientation::Forward,
    };
    let model = AnalyticModel {
        kind: ModelKind::FlatTorus { side },
        flow,
        dim,
    };
    let space = Space {
        id: NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed),
        dim,
        orientation,
        interval: (0.0, 1.0),
        flip_ref: None,
        backend: Backend::Analytic(model),
        virtually_psc: Some(true),
    };
    space.validate_interval()?;
    Ok(space)
}

impl Space {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn is_pseudo_metric(&self) -> bool {
        match &self.backend {
            Backend::Analytic(_) => false,
            Backend::Sampled(s) => s.pseudo,
        }
    }

    pub fn virtually_psc(&self) -> Option<bool> {
        self.virtually_psc
    }

    pub fn set_virtually_psc(&mut self, flag: Option<bool>) {
        self.virtually_psc = flag;
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.backend, Backend::Sampled(_))
    }

    /// Number of sample points (1 for analytic backends, which are queried
    /// through coordinates instead).
    pub fn n_points(&self) -> usize {
        match &self.backend {
            Backend::Analytic(_) => 0,
            Backend::Sampled(s) => s.len(),
        }
    }

    /// The closed-form model behind this space, if any.
    pub fn oracle(&self) -> Option<&AnalyticModel> {
        match &self.backend {
            Backend::Analytic(m) => Some(m),
            Backend::Sampled(s) => s.model.as_ref(),
        }
    }

    pub fn sampled(&self) -> Result<&SampledSpace> {
        match &self.backend {
            Backend::Sampled(s) => Ok(s),
            Backend::Analytic(_) => Err(Error::UnsupportedOracle(
                "operation requires a sampled backend".into(),
            )),
        }
    }

    pub fn analytic(&self) -> Result<&AnalyticModel> {
        match &self.backend {
            Backend::Analytic(m) => Ok(m),
            Backend::Sampled(_) => Err(Error::UnsupportedOracle(
                "operation requires an analytic backend".into(),
            )),
        }
    }

    /// Translate space time to the flow law's native time.
    pub(crate) fn model_time(&self, t: f64) -> f64 {
        match self.flip_ref {
            Some(r) => r - t,
            None => t,
        }
    }

    fn validate_interval(&self) -> Result<()> {
        let (a, b) = self.interval;
        if a >= b || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid("time interval must satisfy t_min < t_max"));
        }
        if let Some(model) = self.oracle() {
            // probe the conformal factor across the interval; RicciBackward
            // rejects intervals where R^2 turns nonpositive
            for k in 0..=16 {
                let t = a + (b - a) * k as f64 / 16.0;
                model.rho(self.model_time(t))?;
            }
        }
        Ok(())
    }

    pub fn with_interval(mut self, t_min: f64, t_max: f64) -> Result<Space> {
        self.interval = (t_min, t_max);
        self.validate_interval()?;
        Ok(self)
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Space {
        self.orientation = orientation;
        self
    }

    /// Time-reflected view: same geometry with `t' = t_min + t_max - t` and
    /// the opposite orientation. A backward Ricci flow becomes the forward
    /// (shrinking) flow on the same interval.
    pub fn reoriented(&self) -> Space {
        let (a, b) = self.interval;
        let reference = a + b;
        let mut out = self.clone();
        out.id = NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed);
        out.orientation = match self.orientation {
            Orientation::Forward => Orientation::Backward,
            Orientation::Backward => Orientation::Forward,
        };
        out.flip_ref = match self.flip_ref {
            None => Some(reference),
            // flipping twice restores the native coordinate
            Some(_) => None,
        };
        out
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let (a, b) = self.interval;
        if t < a - 1e-12 || t > b + 1e-12 {
            return Err(Error::invalid(format!(
                "time {t} outside the space interval [{a}, {b}]"
            )));
        }
        Ok(())
    }

    /// Distance between two sites at space time `t`.
    pub fn distance(&self, t: f64, x: Site, y: Site) -> Result<f64> {
        self.check_time(t)?;
        let tm = self.model_time(t);
        match (&self.backend, x, y) {
            (Backend::Analytic(m), Site::Coords(a), Site::Coords(b)) => m.distance(tm, a, b),
            (Backend::Sampled(s), Site::Index(i), Site::Index(j)) => s.distance(tm, i, j),
            _ => Err(Error::invalid(
                "site kind does not match the space backend (indices for sampled, coords for analytic)",
            )),
        }
    }

    pub fn weight(&self, t: f64, i: usize) -> Result<f64> {
        self.check_time(t)?;
        self.sampled()?.weight(self.model_time(t), i)
    }

    pub fn total_measure(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let tm = self.model_time(t);
        match &self.backend {
            Backend::Analytic(m) => m.total_volume(tm),
            Backend::Sampled(s) => s.total_weight(tm),
        }
    }

    pub fn diameter(&self, t: f64) -> Result<f64> {
        let tm = self.model_time(t);
        match &self.backend {
            Backend::Analytic(m) => m.diameter(tm),
            Backend::Sampled(s) => {
                let n = s.len();
                let mut d = 0.0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        d = f64::max(d, s.distance(tm, i, j)?);
                    }
                }
                Ok(d)
            }
        }
    }

    /// Measure of the closed ball `B_r(x)` at time `t`: closed-form volume on
    /// analytic backends, sum of sample weights on sampled ones (the center's
    /// own weight counts).
    pub fn ball_measure(&self, t: f64, x: Site, r: f64) -> Result<f64> {
        self.check_time(t)?;
        if r < 0.0 {
            return Err(Error::invalid("ball radius must be nonnegative"));
        }
        let tm = self.model_time(t);
        match (&self.backend, x) {
            (Backend::Analytic(m), _) => m.ball_volume(tm, r),
            (Backend::Sampled(s), Site::Index(i)) => {
                let row = s.distance_row(tm, i)?;
                let mut total = 0.0;
                for (j, &d) in row.iter().enumerate() {
                    if d <= r {
                        total += s.weight(tm, j)?;
                    }
                }
                Ok(total)
            }
            _ => Err(Error::invalid("sampled ball_measure needs an index site")),
        }
    }

    /// Closed-form ball volume at time `t`, when a model oracle is attached.
    pub fn ball_volume_oracle(&self, t: f64, r: f64) -> Option<f64> {
        self.oracle()
            .and_then(|m| m.ball_volume(self.model_time(t), r).ok())
    }

    /// Closed-form geodesic-sphere area at time `t`, when available.
    pub fn sphere_area_oracle(&self, t: f64, r: f64) -> Option<f64> {
        self.oracle()
            .and_then(|m| m.sphere_area(self.model_time(t), r).ok())
    }

    /// Scalar curvature of the slice (model backends only; both models are
    /// homogeneous so the site argument is irrelevant).
    pub fn scalar_curvature(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        match self.oracle() {
            Some(m) => m.scalar_curvature(self.model_time(t)),
            None => Err(Error::UnsupportedOracle(
                "scalar curvature needs an analytic model".into(),
            )),
        }
    }

    /// Indices of sample points inside the closed ball around point `i`.
    pub fn ball_indices(&self, t: f64, i: usize, r: f64) -> Result<Vec<usize>> {
        let s = self.sampled()?;
        let tm = self.model_time(t);
        let row = s.distance_row(tm, i)?;
        Ok((0..s.len()).filter(|&j| row[j] <= r).collect())
    }

    /// Indices in the shell `{ r - delta <= d <= r + delta }` around `i`.
    pub fn shell_indices(&self, t: f64, i: usize, r: f64, delta: f64) -> Result<Vec<usize>> {
        let s = self.sampled()?;
        let tm = self.model_time(t);
        let row = s.distance_row(tm, i)?;
        Ok((0..s.len())
            .filter(|&j| (row[j] - r).abs() <= delta)
            .collect())
    }

    /// Poisson estimate of the expected nearest-neighbor spacing of the
    /// sample at time `t`: `(V / (N omega_n))^(1/n)`.
    pub fn nn_spacing(&self, t: f64) -> Result<f64> {
        let s = self.sampled()?;
        let v = self.total_measure(t)?;
        let n = self.dim as f64;
        Ok((v / (s.len() as f64 * geom::unit_ball_volume(self.dim))).powf(1.0 / n))
    }

    /// `d/dt rho(t)^2` in the space's own time coordinate, for conformal
    /// flows with a model oracle. `d/dt d_t^2 = conformal_rate * base^2`.
    pub fn conformal_rate(&self, t: f64) -> Result<f64> {
        let model = self.oracle().ok_or_else(|| {
            Error::UnsupportedOracle("conformal rate needs a model oracle".into())
        })?;
        let tm = self.model_time(t);
        let v = 2.0 * model.rho(tm)? * model.rho_derivative(tm)?;
        Ok(if self.flip_ref.is_some() { -v } else { v })
    }

    /// `d/dt d_t^2(x, y)` in the space's own time coordinate.
    pub fn d2_time_derivative(
        &self,
        t: f64,
        x: Site,
        y: Site,
        side: DerivSide,
        mode: &DerivMode,
    ) -> Result<f64> {
        self.check_time(t)?;
        match mode {
            DerivMode::Exact => {
                let model = self.oracle().ok_or_else(|| {
                    Error::UnsupportedOracle("exact distance derivative needs a model".into())
                })?;
                let base = match (&self.backend, x, y) {
                    (Backend::Analytic(m), Site::Coords(a), Site::Coords(b)) => {
                        m.base_distance(a, b)?
                    }
                    (Backend::Sampled(s), Site::Index(i), Site::Index(j)) => match &s.data {
                        SampledData::Conformal { base } => base.get(i, j),
                        SampledData::Grid { .. } => {
                            return Err(Error::UnsupportedOracle(
                                "exact derivative needs conformal slice data".into(),
                            ))
                        }
                    },
                    _ => return Err(Error::invalid("site kind does not match the backend")),
                };
                let v = model.d2_derivative_from_base(self.model_time(t), base)?;
                // reflected time coordinate flips the sign of d/dt
                Ok(if self.flip_ref.is_some() { -v } else { v })
            }
            DerivMode::Ladder { steps } => {
                if steps.is_empty() {
                    return Err(Error::invalid("empty derivative ladder"));
                }
                let (a, b) = self.interval;
                let d2 = |tt: f64| -> Result<f64> {
                    let d = self.distance(tt, x, y)?;
                    Ok(d * d)
                };
                let base = d2(t)?;
                let mut quotients = Vec::new();
                for &h in steps {
                    if h <= 0.0 {
                        return Err(Error::invalid("ladder steps must be positive"));
                    }
                    match side {
                        DerivSide::Upper => {
                            if t + h <= b + 1e-12 {
                                quotients.push((d2(t + h)? - base) / h);
                            }
                        }
                        DerivSide::Lower => {
                            if t - h >= a - 1e-12 {
                                quotients.push((base - d2(t - h)?) / h);
                            }
                        }
                    }
                }
                if quotients.is_empty() {
                    return Err(Error::invalid(
                        "no admissible ladder step at this time for the requested side",
                    ));
                }
                // first-order Richardson pairs; a single rung stands alone
                let improved: Vec<f64> = if quotients.len() == 1 {
                    quotients.clone()
                } else {
                    quotients
                        .windows(2)
                        .map(|w| {
                            let (q_coarse, q_fine) = (w[0], w[1]);
                            2.0 * q_fine - q_coarse
                        })
                        .collect()
                };
                let tail = &improved[improved.len().saturating_sub(2)..];
                Ok(match side {
                    DerivSide::Upper => tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    DerivSide::Lower => tail.iter().cloned().fold(f64::INFINITY, f64::min),
                })
            }
        }
    }

    /// Sample `count` points from an analytic model, producing a sampled
    /// space that keeps the model as its oracle. Deterministic in `seed`.
    pub fn sample(&self, count: usize, seed: u64, strategy: SamplingStrategy) -> Result<Space> {
        let model = *self.analytic()?;
        let coords = sample_points(&model, count, seed, strategy)?;
        let base = base_matrix(&model, &coords)?;
        let sampled = SampledSpace {
            data: SampledData::Conformal { base },
            pseudo: false,
            coords: Some(coords),
            model: Some(model),
            provenance: Provenance::FromModel { seed, strategy },
        };
        Ok(Space {
            id: NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed),
            dim: self.dim,
            orientation: self.orientation,
            interval: self.interval,
            flip_ref: self.flip_ref,
            backend: Backend::Sampled(sampled),
            virtually_psc: self.virtually_psc,
        })
    }

    /// Model coordinates of sample point `i`, when known.
    pub fn coords_of(&self, i: usize) -> Option<&[f64]> {
        match &self.backend {
            Backend::Sampled(s) => s.coords.as_ref().map(|c| c[i].as_slice()),
            Backend::Analytic(_) => None,
        }
    }

    /// Build a sampled space from explicit slice data (external provenance).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        dim: usize,
        orientation: Orientation,
        times: Vec<f64>,
        dists: Vec<SymMat>,
        weights: Vec<Vec<f64>>,
        pseudo: bool,
        points: Option<Vec<Vec<f64>>>,
    ) -> Result<Space> {
        if times.is_empty() || dists.len() != times.len() || weights.len() != times.len() {
            return Err(Error::invalid("slice counts do not line up"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) && times.len() > 1 {
            return Err(Error::invalid("time grid must be strictly increasing"));
        }
        let n = dists[0].n;
        for (mat, w) in dists.iter().zip(weights.iter()) {
            if mat.n != n || w.len() != n {
                return Err(Error::invalid("inconsistent slice sizes"));
            }
            if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                return Err(Error::invalid("weights must be nonnegative and finite"));
            }
            if w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::invalid("each slice needs positive total mass"));
            }
        }
        let (a, b) = if times.len() == 1 {
            (times[0], times[0] + 1.0)
        } else {
            (times[0], *times.last().unwrap())
        };
        let sampled = SampledSpace {
            data: SampledData::Grid {
                times,
                dists,
                weights,
            },
            pseudo,
            coords: points,
            model: None,
            provenance: Provenance::External,
        };
        Ok(Space {
            id: NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed),
            dim,
            orientation,
            interval: (a, b),
            flip_ref: None,
            backend: Backend::Sampled(sampled),
            virtually_psc: None,
        })
    }

    /// Serialize a sampled space to the JSON container, materializing slices
    /// at the given times.
    pub fn to_sampled_json(&self, grid: &[f64]) -> Result<SampledSpaceJson> {
        let s = self.sampled()?;
        if grid.is_empty() {
            return Err(Error::invalid("need at least one grid time"));
        }
        let n = s.len();
        let mut distances = Vec::with_capacity(grid.len());
        let mut weights = Vec::with_capacity(grid.len());
        for &t in grid {
            self.check_time(t)?;
            let tm = self.model_time(t);
            let mut flat = Vec::with_capacity(n * n);
            for i in 0..n {
                flat.extend(s.distance_row(tm, i)?);
            }
            distances.push(flat);
            weights.push(
                (0..n)
                    .map(|i| s.weight(tm, i))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Ok(SampledSpaceJson {
            n: self.dim,
            time_grid: grid.to_vec(),
            points: s.coords.clone(),
            distances,
            weights,
            pseudo_metric: s.pseudo,
            orientation: Some(match self.orientation {
                Orientation::Forward => "forward".into(),
                Orientation::Backward => "backward".into(),
            }),
        })
    }

    pub fn from_sampled_json(json: &SampledSpaceJson) -> Result<Space> {
        let count = json
            .weights
            .first()
            .map(|w| w.len())
            .ok_or_else(|| Error::invalid("sampled-space JSON needs at least one slice"))?;
        let dists = json
            .distances
            .iter()
            .map(|flat| SymMat::from_rows(count, flat.clone()))
            .collect::<Result<Vec<_>>>()?;
        let orientation = match json.orientation.as_deref() {
            Some("backward") => Orientation::Backward,
            _ => Orientation::Forward,
        };
        let mut space = Space::from_parts(
            json.n,
            orientation,
            json.time_grid.clone(),
            dists,
            json.weights.clone(),
            json.pseudo_metric,
            json.points.clone(),
        )?;
        space.mark_pseudo(json.pseudo_metric);
        Ok(space)
    }

    pub fn mark_pseudo(&mut self, pseudo: bool) {
        if let Backend::Sampled(s) = &mut self.backend {
            s.pseudo = pseudo;
        }
    }

    /// Audit symmetry, zero diagonal, nonnegativity and the triangle
    /// inequality on random triples of one slice. Returns the worst triangle
    /// defect found.
    pub fn audit_metric(&self, t: f64, triples: usize, seed: u64) -> Result<f64> {
        use rand::Rng;
        use rand::SeedableRng;
        let s = self.sampled()?;
        let tm = self.model_time(t);
        let n = s.len();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..triples {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            let k = rng.gen_range(0..n);
            let dij = s.distance(tm, i, j)?;
            let dji = s.distance(tm, j, i)?;
            let dik = s.distance(tm, i, k)?;
            let dkj = s.distance(tm, k, j)?;
            if (dij - dji).abs() > 1e-12 {
                return Err(Error::invalid(format!("asymmetric distance at ({i}, {j})")));
            }
            if dij < 0.0 {
                return Err(Error::invalid(format!("negative distance at ({i}, {j})")));
            }
            if s.distance(tm, i, i)?.abs() > 1e-12 {
                return Err(Error::invalid(format!("nonzero self-distance at {i}")));
            }
            if !s.pseudo && i != j && dij == 0.0 {
                return Err(Error::invalid(format!(
                    "zero distance between distinct points ({i}, {j}) in metric mode"
                )));
            }
            worst = worst.max(dij - dik - dkj);
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn sphere_constructor_examples() {
        let s = make_round_sphere(2, 1.0, FlowLaw::Static).unwrap();
        let x = [1.0, 0.0, 0.0];
        let y = [-1.0, 0.0, 0.0];
        assert_relative_eq!(
            s.distance(0.3, Site::Coords(&x), Site::Coords(&y)).unwrap(),
            PI
        );

        let s = make_round_sphere(2, 1.0, FlowLaw::RicciBackward)
            .unwrap()
            .with_interval(0.0, 2.0)
            .unwrap();
        assert_eq!(s.orientation(), Orientation::Backward);
        assert_relative_eq!(
            s.distance(1.5, Site::Coords(&x), Site::Coords(&y)).unwrap(),
            2.0 * PI
        );

        let s3 = make_round_sphere(3, 1.0, FlowLaw::RicciBackward).unwrap();
        assert_relative_eq!(s3.oracle().unwrap().rho(0.0).unwrap(), 1.0);

        assert!(make_round_sphere(2, -1.0, FlowLaw::Static).is_err());
        // interval pushing R^2 <= 0
        assert!(make_round_sphere(2, 1.0, FlowLaw::RicciBackward)
            .unwrap()
            .with_interval(-0.6, 0.0)
            .is_err());
    }

    #[test]
    fn torus_constructor_examples() {
        let t = make_flat_torus(2, 1.0, FlowLaw::Static).unwrap();
        let d = t
            .distance(0.0, Site::Coords(&[0.0, 0.0]), Site::Coords(&[0.5, 0.5]))
            .unwrap();
        assert_relative_eq!(d, 2.0_f64.sqrt() / 2.0, max_relative = 1e-14);
        assert!(make_flat_torus(1, 0.0, FlowLaw::Static).is_err());
    }

    #[test]
    fn ball_measure_examples() {
        let s = make_round_sphere(2, 1.0, FlowLaw::Static).unwrap();
        let x = [0.0, 0.0, 1.0];
        assert_relative_eq!(
            s.ball_measure(0.0, Site::Coords(&x), PI).unwrap(),
            4.0 * PI,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            s.ball_measure(0.0, Site::Coords(&x), 1.0).unwrap(),
            2.0 * PI * (1.0 - 1.0_f64.cos()),
            max_relative = 1e-13
        );
        let t = make_flat_torus(2, 1.0, FlowLaw::Static).unwrap();
        assert_relative_eq!(
            t.ball_measure(0.0, Site::Coords(&[0.0, 0.0]), 0.1).unwrap(),
            PI * 0.01,
            max_relative = 1e-13
        );
    }

    #[test]
    fn sampling_is_deterministic_and_weighted() {
        let s = make_round_sphere(2, 1.0, FlowLaw::Static).unwrap();
        let a = s.sample(1000, 42, SamplingStrategy::UniformRandom).unwrap();
        let b = s.sample(1000, 42, SamplingStrategy::UniformRandom).unwrap();
        assert_eq!(a.coords_of(137), b.coords_of(137));
        // total weight is exactly the model volume by construction
        assert_relative_eq!(
            a.total_measure(0.0).unwrap(),
            4.0 * PI,
            max_relative = 1e-12
        );
        let t = make_flat_torus(2, 1.0, FlowLaw::Static).unwrap();
        let ts = t.sample(100, 7, SamplingStrategy::QuasiUniform).unwrap();
        assert_relative_eq!(ts.total_measure(0.0).unwrap(), 1.0, max_relative = 1e-12);
        assert!(s.sample(1, 0, SamplingStrategy::UniformRandom).is_err());
    }

    #[test]
    fn metric_audit_on_samples() {
        for strat in [
            SamplingStrategy::UniformRandom,
            SamplingStrategy::QuasiUniform,
        ] {
            let s = make_round_sphere(2, 1.0, FlowLaw::Static)
                .unwrap()
                .sample(300, 5, strat)
                .unwrap();
            assert!(s.audit_metric(0.5, 4000, 1).unwrap() <= 1e-9);
            let t = make_flat_torus(2, 1.0, FlowLaw::Static)
                .unwrap()
                .sample(300, 5, strat)
                .unwrap();
            assert!(t.audit_metric(0.5, 4000, 1).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn d2_derivative_exact_and_ladder() {
        // static: zero
        let s = make_flat_torus(1, 1.0, FlowLaw::Static).unwrap();
        let v = s
            .d2_time_derivative(
                0.5,
                Site::Coords(&[0.0]),
                Site::Coords(&[0.3]),
                DerivSide::Upper,
                &DerivMode::Exact,
            )
            .unwrap();
        assert_relative_eq!(v, 0.0);

        // shrinking sphere: pair at angle theta has d/dtau d^2 = 2 theta^2
        let s = make_round_sphere(2, 1.0, FlowLaw::RicciBackward).unwrap();
        let x = [1.0, 0.0, 0.0];
        let th: f64 = 0.9;
        let y = [th.cos(), th.sin(), 0.0];
        let v = s
            .d2_time_derivative(
                0.2,
                Site::Coords(&x),
                Site::Coords(&y),
                DerivSide::Upper,
                &DerivMode::Exact,
            )
            .unwrap();
        assert_relative_eq!(v, 2.0 * th * th, max_relative = 1e-10);

        // sampled ladder converges to the analytic value within 1%
        let smp = s.sample(64, 3, SamplingStrategy::UniformRandom).unwrap();
        let exact = smp
            .d2_time_derivative(
                0.2,
                Site::Index(0),
                Site::Index(1),
                DerivSide::Upper,
                &DerivMode::Exact,
            )
            .unwrap();
        let ladder = DerivMode::Ladder {
            steps: vec![1e-2, 1e-3, 1e-4],
        };
        let fd = smp
            .d2_time_derivative(
                0.2,
                Site::Index(0),
                Site::Index(1),
                DerivSide::Upper,
                &ladder,
            )
            .unwrap();
        assert_relative_eq!(fd, exact, max_relative = 1e-2);
    }

    #[test]
    fn reorientation_reflects_the_flow() {
        let s = make_round_sphere(2, 1.0, FlowLaw::RicciBackward)
            .unwrap()
            .with_interval(0.0, 0.5)
            .unwrap();
        let f = s.reoriented();
        assert_eq!(f.orientation(), Orientation::Forward);
        // at forward time t the radius is R(0.5 - t): shrinking in t
        let x = [1.0, 0.0, 0.0];
        let y = [0.0, 1.0, 0.0];
        let d0 = f.distance(0.0, Site::Coords(&x), Site::Coords(&y)).unwrap();
        let d1 = f.distance(0.5, Site::Coords(&x), Site::Coords(&y)).unwrap();
        assert!(d0 > d1);
        assert_relative_eq!(d1, PI / 2.0, max_relative = 1e-12);
        // derivative flips sign under reflection
        let vb = s
            .d2_time_derivative(
                0.2,
                Site::Coords(&x),
                Site::Coords(&y),
                DerivSide::Upper,
                &DerivMode::Exact,
            )
            .unwrap();
        let vf = f
            .d2_time_derivative(
                0.3,
                Site::Coords(&x),
                Site::Coords(&y),
                DerivSide::Upper,
                &DerivMode::Exact,
            )
            .unwrap();
        assert_relative_eq!(vb, -vf, max_relative = 1e-12);
    }

    #[test]
    fn external_spaces_have_no_curvature_oracle() {
        let mut mat = SymMat::zeros(2);
        mat.set(0, 1, 1.0);
        let space = Space::from_parts(
            1,
            Orientation::Forward,
            vec![0.0, 1.0],
            vec![mat.clone(), mat],
            vec![vec![1.0; 2]; 2],
            false,
            None,
        )
        .unwrap();
        assert!(matches!(
            space.scalar_curvature(0.0),
            Err(crate::error::Error::UnsupportedOracle(_))
        ));
        assert!(space.ball_volume_oracle(0.0, 0.5).is_none());
    }

    #[test]
    fn sampled_json_round_trip() {
        let s = make_round_sphere(2, 1.0, FlowLaw::RicciBackward)
            .unwrap()
            .with_interval(0.0, 0.2)
            .unwrap()
            .sample(40, 11, SamplingStrategy::QuasiUniform)
            .unwrap();
        let json = s.to_sampled_json(&[0.0, 0.1, 0.2]).unwrap();
        let text = serde_json::to_string(&json).unwrap();
        let parsed: SampledSpaceJson = serde_json::from_str(&text).unwrap();
        let loaded = Space::from_sampled_json(&parsed).unwrap();
        assert_eq!(loaded.n_points(), 40);
        // interpolated distance at a grid time matches exactly
        let d0 = s.distance(0.1, Site::Index(3), Site::Index(17)).unwrap();
        let d1 = loaded
            .distance(0.1, Site::Index(3), Site::Index(17))
            .unwrap();
        assert_relative_eq!(d0, d1, max_relative = 1e-15);
    }
}
