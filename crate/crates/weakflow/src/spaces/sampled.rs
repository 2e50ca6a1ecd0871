//! Discrete carriers: point samples of a model space (conformal flows with a
//! closed-form oracle attached) or externally supplied per-slice distance
//! matrices and weights.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::analytic::{AnalyticModel, ModelKind};

/// Dense symmetric matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    pub n: usize,
    data: Vec<f64>,
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        SymMat {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::invalid("distance matrix has wrong length"));
        }
        Ok(SymMat { n, data })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingStrategy {
    UniformRandom,
    QuasiUniform,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    FromModel {
        seed: u64,
        strategy: SamplingStrategy,
    },
    External,
}

/// Slice data of a sampled space.
///
/// `Conformal` keeps one base distance matrix; every slice is a rescaling by
/// the attached model's `rho(t)` and the weights stay uniform at
/// `total_volume(t) / N`. `Grid` stores explicit slices and interpolates
/// distances and weights linearly between them.
#[derive(Debug, Clone)]
pub enum SampledData {
    Conformal {
        base: SymMat,
    },
    Grid {
        times: Vec<f64>,
        dists: Vec<SymMat>,
        weights: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone)]
pub struct SampledSpace {
    pub(crate) data: SampledData,
    pub(crate) pseudo: bool,
    /// Model coordinates of the sample points, when known.
    pub(crate) coords: Option<Vec<Vec<f64>>>,
    /// Closed-form oracle for volumes, areas, curvature and distance
    /// derivatives; present iff the space was sampled from a model.
    pub(crate) model: Option<AnalyticModel>,
    pub(crate) provenance: Provenance,
}

impl SampledSpace {
    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        match &self.data {
            SampledData::Conformal { base } => base.n,
            SampledData::Grid { dists, .. } => dists[0].n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distance between sample points at model time `t`.
    pub fn distance(&self, t: f64, i: usize, j: usize) -> Result<f64> {
        match &self.data {
            SampledData::Conformal { base } => {
                let model = self.model.as_ref().expect("conformal data carries a model");
                Ok(model.rho(t)? * base.get(i, j))
            }
            SampledData::Grid { times, dists, .. } => {
                let (k, s) = bracket(times, t)?;
                if s == 0.0 {
                    Ok(dists[k].get(i, j))
                } else {
                    Ok((1.0 - s) * dists[k].get(i, j) + s * dists[k + 1].get(i, j))
                }
            }
        }
    }

    pub fn weight(&self, t: f64, i: usize) -> Result<f64> {
        match &self.data {
            SampledData::Conformal { base } => {
                let model = self.model.as_ref().expect("conformal data carries a model");
                Ok(model.total_volume(t)? / base.n as f64)
            }
            SampledData::Grid { times, weights, .. } => {
                let (k, s) = bracket(times, t)?;
                if s == 0.0 {
                    Ok(weights[k][i])
                } else {
                    Ok((1.0 - s) * weights[k][i] + s * weights[k + 1][i])
                }
            }
        }
    }

    pub fn total_weight(&self, t: f64) -> Result<f64> {
        match &self.data {
            SampledData::Conformal { .. } => self.model.as_ref().unwrap().total_volume(t),
            SampledData::Grid { .. } => {
                let mut s = 0.0;
                for i in 0..self.len() {
                    s += self.weight(t, i)?;
                }
                Ok(s)
            }
        }
    }

    /// Row of distances from point `i` at model time `t`.
    pub fn distance_row(&self, t: f64, i: usize) -> Result<Vec<f64>> {
        let n = self.len();
        let mut out = Vec::with_capacity(n);
        match &self.data {
            SampledData::Conformal { base } => {
                let rho = self.model.as_ref().unwrap().rho(t)?;
                out.extend(base.row(i).iter().map(|&d| rho * d));
            }
            SampledData::Grid { .. } => {
                for j in 0..n {
                    out.push(self.distance(t, i, j)?);
                }
            }
        }
        Ok(out)
    }
}

fn bracket(times: &[f64], t: f64) -> Result<(usize, f64)> {
    let eps = 1e-12;
    if times.is_empty() {
        return Err(Error::invalid("empty time grid"));
    }
    if t <= times[0] + eps {
        if t < times[0] - eps {
            return Err(Error::invalid(format!(
                "time {t} below grid start {}",
                times[0]
            )));
        }
        return Ok((0, 0.0));
    }
    let last = *times.last().unwrap();
    if t >= last - eps {
        if t > last + eps {
            return Err(Error::invalid(format!("time {t} beyond grid end {last}")));
        }
        return Ok((times.len() - 1, 0.0));
    }
    let k = times.partition_point(|&u| u <= t) - 1;
    let s = (t - times[k]) / (times[k + 1] - times[k]);
    Ok((k, s))
}

/// Draw `count` points in model coordinates.
pub fn sample_points(
    model: &AnalyticModel,
    count: usize,
    seed: u64,
    strategy: SamplingStrategy,
) -> Result<Vec<Vec<f64>>> {
    if count < 2 {
        return Err(Error::invalid("need at least 2 sample points"));
    }
    let dim = model.dim;
    match (model.kind, strategy) {
        (ModelKind::RoundSphere { .. }, SamplingStrategy::UniformRandom) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pts = Vec::with_capacity(count);
            while pts.len() < count {
                let mut v: Vec<f64> = (0..=dim).map(|_| standard_normal(&mut rng)).collect();
                let norm: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    v.iter_mut().for_each(|a| *a /= norm);
                    pts.push(v);
                }
            }
            Ok(pts)
        }
        (ModelKind::RoundSphere { .. }, SamplingStrategy::QuasiUniform) => match dim {
            1 => Ok((0..count)
                .map(|i| {
                    let a = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect()),
            2 => {
                // Fibonacci sphere
                let golden = (5.0_f64.sqrt() - 1.0) / 2.0;
                Ok((0..count)
                    .map(|i| {
                        let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                        let phi = 2.0 * std::f64::consts::PI * i as f64 * golden;
                        let s = (1.0 - z * z).max(0.0).sqrt();
                        vec![s * phi.cos(), s * phi.sin(), z]
                    })
                    .collect())
            }
            _ => Err(Error::UnsupportedOracle(format!(
                "quasi-uniform sampling of S^{dim} is not implemented (use uniform-random)"
            ))),
        },
        (ModelKind::FlatTorus { side }, SamplingStrategy::UniformRandom) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..count)
                .map(|_| (0..dim).map(|_| rng.gen::<f64>() * side).collect())
                .collect())
        }
        (ModelKind::FlatTorus { side }, SamplingStrategy::QuasiUniform) => {
            if dim == 1 {
                return Ok((0..count)
                    .map(|i| vec![side * i as f64 / count as f64])
                    .collect());
            }
            // perfect lattice when the count allows it, Kronecker otherwise
            let per_axis = (count as f64).powf(1.0 / dim as f64).round() as usize;
            if per_axis.pow(dim as u32) == count {
                let mut pts = Vec::with_capacity(count);
                let mut idx = vec![0usize; dim];
                loop {
                    pts.push(
                        idx.iter()
                            .map(|&k| side * k as f64 / per_axis as f64)
                            .collect(),
                    );
                    let mut ax = 0;
                    loop {
                        idx[ax] += 1;
                        if idx[ax] < per_axis {
                            break;
                        }
                        idx[ax] = 0;
                        ax += 1;
                        if ax == dim {
                            return Ok(pts);
                        }
                    }
                }
            }
            // Kronecker sequence driven by square roots of primes
            let primes = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0];
            if dim > primes.len() {
                return Err(Error::UnsupportedOracle(
                    "quasi-uniform torus sampling supports dim <= 7".into(),
                ));
            }
            let alphas: Vec<f64> = primes[..dim]
                .iter()
                .map(|p: &f64| p.sqrt().fract())
                .collect();
            Ok((0..count)
                .map(|i| {
                    alphas
                        .iter()
                        .map(|a| side * ((i as f64 + 0.5) * a).fract())
                        .collect()
                })
                .collect())
        }
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; one draw per call keeps the stream layout simple.
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Build the base distance matrix for a coordinate set.
pub fn base_matrix(model: &AnalyticModel, coords: &[Vec<f64>]) -> Result<SymMat> {
    let n = coords.len();
    let mut m = SymMat::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            m.set(i, j, model.base_distance(&coords[i], &coords[j])?);
        }
    }
    Ok(m)
}

/// JSON container for sampled spaces.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledSpaceJson {
    pub n: usize,
    pub time_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    /// Row-major N x N matrix per slice.
    pub distances: Vec<Vec<f64>>,
    /// Per-slice weight vector.
    pub weights: Vec<Vec<f64>>,
    pub pseudo_metric: bool,
    #[serde(default)]
    pub orientation: Option<String>,
}
