//! Centred log-concave measure models.

mod affine;
mod descriptor;
mod factor;
mod marginal;

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

pub use affine::AffineMap;
pub use descriptor::ModelDescriptor;
pub use factor::{ln_sinhc, Factor, Jet};
pub use marginal::{DirectionalMarginal, Law, PhaseType, UniformSum};

use crate::error::{Error, Result};
use crate::rng::{SeedStream, StreamRng};

/// A point of R^n.
pub type Point = DVector<f64>;

/// Samples drawn per stream chunk; chunk `k` always uses stream `k`.
pub const SAMPLE_CHUNK: usize = 1024;

/// Sample budget of Monte-Carlo marginals.
pub const MC_MARGINAL_SAMPLES: usize = 200_000;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    IsotropicGaussian,
    UniformBall { radius: f64 },
    UniformCube { side: f64 },
    /// Product of Exp(1) - 1 coordinates.
    ProductExponentialCentered,
    ProductFactors(Vec<Factor>),
    AffinePushforward { base: Box<MeasureModel>, map: AffineMap },
}

/// `ln f(x) <= log_a - b |x|` for all x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub log_a: f64,
    pub b: f64,
}

/// Immutable model; cheap to clone and safe to share across threads.
#[derive(Debug, Clone)]
pub struct MeasureModel {
    dimension: usize,
    kind: ModelKind,
    factors: Option<Vec<Factor>>,
    log_density_at_zero: f64,
    /// Log of the total mass; models are probability measures.
    normalization: f64,
    mc_samples: Arc<OnceLock<Vec<Point>>>,
}

impl PartialEq for MeasureModel {
    fn eq(&self, other: &Self) -> bool {
        self.dimension == other.dimension && self.kind == other.kind
    }
}

fn ln_unit_ball_volume(n: usize) -> f64 {
    0.5 * n as f64 * std::f64::consts::PI.ln() - ln_gamma(0.5 * n as f64 + 1.0)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::input(format!("{name} must be positive and finite, got {v}")))
    }
}

impl MeasureModel {
    fn build(dimension: usize, kind: ModelKind) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::input("dimension must be at least 1"));
        }
        let factors = match &kind {
            ModelKind::IsotropicGaussian => Some(vec![Factor::Gaussian { scale: 1.0 }; dimension]),
            ModelKind::UniformCube { side } => Some(vec![Factor::Uniform { side: *side }; dimension]),
            ModelKind::ProductExponentialCentered => Some(vec![Factor::Exponential { rate: 1.0 }; dimension]),
            ModelKind::ProductFactors(f) => Some(f.clone()),
            _ => None,
        };
        let mut model = Self {
            dimension,
            kind,
            factors,
            log_density_at_zero: 0.0,
            normalization: 0.0,
            mc_samples: Arc::new(OnceLock::new()),
        };
        model.log_density_at_zero = model.ln_f(&DVector::zeros(dimension));
        Ok(model)
    }

    pub fn gaussian(n: usize) -> Result<Self> {
        Self::build(n, ModelKind::IsotropicGaussian)
    }

    pub fn ball(n: usize, radius: f64) -> Result<Self> {
        positive("radius", radius)?;
        Self::build(n, ModelKind::UniformBall { radius })
    }

    /// Uniform measure on the Euclidean ball of volume one.
    pub fn unit_volume_ball(n: usize) -> Result<Self> {
        Self::ball(n, (-ln_unit_ball_volume(n) / n as f64).exp())
    }

    pub fn cube(n: usize, side: f64) -> Result<Self> {
        positive("side", side)?;
        Self::build(n, ModelKind::UniformCube { side })
    }

    pub fn exponential(n: usize) -> Result<Self> {
        Self::build(n, ModelKind::ProductExponentialCentered)
    }

    pub fn product(factors: Vec<Factor>) -> Result<Self> {
        for f in &factors {
            f.validate()?;
        }
        Self::build(factors.len(), ModelKind::ProductFactors(factors))
    }

    /// Law of `T X + b` for `X ~ base`. Nested pushforwards are composed.
    pub fn pushforward(base: &MeasureModel, map: AffineMap) -> Result<Self> {
        if map.dimension() != base.dimension {
            return Err(Error::input(format!(
                "map dimension {} does not match model dimension {}",
                map.dimension(),
                base.dimension
            )));
        }
        let (base, map) = match &base.kind {
            ModelKind::AffinePushforward { base: inner, map: m } => ((**inner).clone(), map.compose(m)),
            _ => (base.clone(), map),
        };
        Self::build(base.dimension, ModelKind::AffinePushforward { base: Box::new(base), map })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Coordinate factors of product models.
    pub fn factors(&self) -> Option<&[Factor]> {
        self.factors.as_deref()
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Short human-readable label.
    pub fn name(&self) -> String {
        match &self.kind {
            ModelKind::IsotropicGaussian => "gaussian".into(),
            ModelKind::UniformBall { .. } => "ball".into(),
            ModelKind::UniformCube { .. } => "cube".into(),
            ModelKind::ProductExponentialCentered => "exponential".into(),
            ModelKind::ProductFactors(_) => "factors".into(),
            ModelKind::AffinePushforward { base, .. } => format!("{}-affine", base.name()),
        }
    }

    pub(crate) fn check_dim(&self, x: &Point) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::input(format!("point has length {}, model dimension is {}", x.len(), self.dimension)));
        }
        Ok(())
    }

    /// `ln f(x)`, `-inf` outside the support.
    pub fn log_density(&self, x: &Point) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.ln_f(x))
    }

    /// `ln f(x)` without the dimension check.
    pub fn ln_f(&self, x: &Point) -> f64 {
        match &self.kind {
            ModelKind::UniformBall { radius } => {
                if x.norm() <= *radius {
                    -self.ln_ball_volume(*radius)
                } else {
                    f64::NEG_INFINITY
                }
            }
            ModelKind::AffinePushforward { base, map } => base.ln_f(&map.invert(x)) - map.log_abs_det(),
            ModelKind::IsotropicGaussian => -0.5 * (x.norm_squared() + self.dimension as f64 * LN_2PI),
            _ => {
                let f = self.factors.as_ref().expect("product model");
                f.iter().zip(x.iter()).map(|(f, &xi)| f.log_density(xi)).sum()
            }
        }
    }

    fn ln_ball_volume(&self, radius: f64) -> f64 {
        ln_unit_ball_volume(self.dimension) + self.dimension as f64 * radius.ln()
    }

    pub fn log_density_at_zero(&self) -> f64 {
        self.log_density_at_zero
    }

    /// `ln ‖f‖_∞`.
    pub fn log_sup_density(&self) -> f64 {
        match &self.kind {
            ModelKind::UniformBall { radius } => -self.ln_ball_volume(*radius),
            ModelKind::AffinePushforward { base, map } => base.log_sup_density() - map.log_abs_det(),
            _ => self.factors.as_ref().expect("product model").iter().map(Factor::log_sup_density).sum(),
        }
    }

    pub fn envelope(&self) -> Envelope {
        match &self.kind {
            ModelKind::IsotropicGaussian => Envelope { log_a: 0.5 - 0.5 * self.dimension as f64 * LN_2PI, b: 1.0 },
            ModelKind::UniformBall { radius } => Envelope { log_a: 1.0 - self.ln_ball_volume(*radius), b: 1.0 / radius },
            ModelKind::AffinePushforward { base, map } => {
                let e = base.envelope();
                let norm = map.operator_norm();
                Envelope {
                    log_a: e.log_a + e.b * map.shift().norm() / norm - map.log_abs_det(),
                    b: e.b / norm,
                }
            }
            _ => {
                let f = self.factors.as_ref().expect("product model");
                let log_a = f.iter().map(|f| f.envelope().0).sum();
                let b = f.iter().map(|f| f.envelope().1).fold(f64::INFINITY, f64::min);
                Envelope { log_a, b }
            }
        }
    }

    pub fn is_even(&self) -> bool {
        match &self.kind {
            ModelKind::UniformBall { .. } => true,
            ModelKind::AffinePushforward { base, map } => base.is_even() && map.shift().iter().all(|&b| b == 0.0),
            _ => self.factors.as_ref().expect("product model").iter().all(Factor::is_even),
        }
    }

    /// Gaussian and ball models, whose depth and marginals depend on |x| only.
    pub fn is_rotation_invariant(&self) -> bool {
        matches!(self.kind, ModelKind::IsotropicGaussian | ModelKind::UniformBall { .. })
    }

    /// Candidate normals of flat pieces of the support boundary: the
    /// coordinate axes of product models, mapped through pushforwards.
    /// Half-space masses can peak sharply in these directions.
    pub fn facet_normals(&self) -> Vec<Point> {
        let n = self.dimension;
        match &self.kind {
            ModelKind::IsotropicGaussian | ModelKind::UniformBall { .. } => Vec::new(),
            ModelKind::AffinePushforward { base, map } => {
                base.facet_normals().iter().map(|v| map.inverse_matrix().tr_mul(v).normalize()).collect()
            }
            _ => (0..n)
                .flat_map(|i| {
                    [1.0, -1.0].map(|sign| {
                        let mut e = DVector::zeros(n);
                        e[i] = sign;
                        e
                    })
                })
                .collect(),
        }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match &self.kind {
            ModelKind::UniformBall { radius } => {
                let n = self.dimension;
                let g = loop {
                    let g: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
                    if g.norm() > 1e-12 {
                        break g;
                    }
                };
                let u: f64 = rng.random();
                let r = radius * u.powf(1.0 / n as f64);
                g.normalize() * r
            }
            ModelKind::AffinePushforward { base, map } => map.apply(&base.sample_one(rng)),
            _ => {
                let f = self.factors.as_ref().expect("product model");
                DVector::from_iterator(self.dimension, f.iter().map(|f| f.sample(rng)))
            }
        }
    }

    /// `count` i.i.d. draws. Chunk `k` of [`SAMPLE_CHUNK`] draws comes from
    /// stream `k` of `stream`, so the result does not depend on the thread count.
    pub fn sample(&self, stream: &SeedStream, count: usize) -> Vec<Point> {
        let chunks = count.div_ceil(SAMPLE_CHUNK);
        (0..chunks)
            .into_par_iter()
            .flat_map_iter(|k| {
                let mut rng: StreamRng = stream.derive(k as u64).rng();
                let len = SAMPLE_CHUNK.min(count - k * SAMPLE_CHUNK);
                (0..len).map(move |_| self.sample_one(&mut rng)).collect::<Vec<_>>()
            })
            .collect()
    }

    /// Convenience wrapper over [`MeasureModel::sample`] with a bare seed.
    pub fn sample_seeded(&self, seed: u64, count: usize) -> Result<Vec<Point>> {
        if count == 0 {
            return Err(Error::input("count must be at least 1"));
        }
        Ok(self.sample(&SeedStream::new(seed).derive_str("sample"), count))
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.dimension;
        match &self.kind {
            ModelKind::UniformBall { radius } => DMatrix::identity(n, n) * (radius * radius / (n as f64 + 2.0)),
            ModelKind::AffinePushforward { base, map } => {
                let t = map.matrix();
                t * base.covariance() * t.transpose()
            }
            _ => {
                let f = self.factors.as_ref().expect("product model");
                DMatrix::from_diagonal(&DVector::from_iterator(n, f.iter().map(Factor::variance)))
            }
        }
    }

    /// Affine map `T` with `T_* μ` isotropic, and that pushforward.
    pub fn isotropize(&self) -> Result<(AffineMap, MeasureModel)> {
        let n = self.dimension;
        let cov = self.covariance();
        if (&cov - DMatrix::<f64>::identity(n, n)).amax() < 1e-12 {
            return Ok((AffineMap::identity(n), self.clone()));
        }
        let eig = cov.symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| !(l > 1e-14 * eig.eigenvalues.amax())) {
            return Err(Error::numeric("covariance is singular"));
        }
        let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
        let t = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
        let t = (&t + t.transpose()) * 0.5;
        let map = AffineMap::linear(t)?;
        let model = MeasureModel::pushforward(self, map.clone())?;
        Ok((map, model))
    }

    /// `‖f‖_∞^{1/n} det(Cov)^{1/(2n)}`.
    pub fn isotropic_constant(&self) -> f64 {
        let n = self.dimension as f64;
        let log_det = self.covariance().cholesky().map_or(f64::NAN, |c| {
            2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>()
        });
        ((self.log_sup_density() + 0.5 * log_det) / n).exp()
    }

    /// Law of `⟨X, direction⟩`.
    pub fn marginal(&self, direction: &Point) -> Result<DirectionalMarginal> {
        self.check_dim(direction)?;
        if (direction.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::input("marginal direction must be a unit vector"));
        }
        Ok(self.marginal_unchecked(direction))
    }

    pub(crate) fn marginal_unchecked(&self, direction: &Point) -> DirectionalMarginal {
        let dir = direction.clone();
        match &self.kind {
            ModelKind::IsotropicGaussian => DirectionalMarginal::new(dir, Law::Normal { sd: 1.0 }),
            ModelKind::UniformBall { radius } => {
                DirectionalMarginal::new(dir, Law::Ball { radius: *radius, n: self.dimension })
            }
            ModelKind::AffinePushforward { base, map } => {
                let u = map.matrix().tr_mul(direction);
                let s = u.norm();
                let inner = base.marginal_unchecked(&(&u / s));
                DirectionalMarginal {
                    direction: dir,
                    law: inner.law,
                    scale: inner.scale * s,
                    shift: inner.shift * s + map.shift().dot(direction),
                }
            }
            _ => self.product_marginal(dir),
        }
    }

    fn product_marginal(&self, dir: Point) -> DirectionalMarginal {
        let factors = self.factors.as_ref().expect("product model");
        let cmax = dir.amax();
        let active: Vec<(f64, Factor)> = dir
            .iter()
            .zip(factors)
            .filter(|(c, _)| c.abs() > 1e-7 * cmax)
            .map(|(&c, &f)| (c, f))
            .collect();
        let all = |p: fn(&Factor) -> bool| active.iter().all(|(_, f)| p(f));
        let law = if all(|f| matches!(f, Factor::Gaussian { .. })) {
            let var: f64 = active.iter().map(|(c, f)| c * c * f.variance()).sum();
            Law::Normal { sd: var.sqrt() }
        } else if all(|f| matches!(f, Factor::Uniform { .. })) {
            let widths: Vec<f64> = active
                .iter()
                .map(|(c, f)| match f {
                    Factor::Uniform { side } => c.abs() * side,
                    _ => unreachable!(),
                })
                .collect();
            Law::UniformSum(UniformSum::new(&widths))
        } else if all(|f| matches!(f, Factor::Exponential { .. } | Factor::Laplace { .. })) {
            let (mut pos, mut neg, mut shift) = (Vec::new(), Vec::new(), 0.0);
            for (c, f) in &active {
                match *f {
                    Factor::Exponential { rate } => {
                        let r = rate / c.abs();
                        if *c > 0.0 {
                            pos.push(r);
                        } else {
                            neg.push(r);
                        }
                        shift -= c / rate;
                    }
                    Factor::Laplace { scale } => {
                        let r = 1.0 / (scale * c.abs());
                        pos.push(r);
                        neg.push(r);
                    }
                    _ => unreachable!(),
                }
            }
            Law::PhaseType(PhaseType::new(&pos, &neg, shift))
        } else {
            let samples = self.mc_samples.get_or_init(|| {
                self.sample(&SeedStream::new(0x4D43_4D41_5247).derive_str(&self.name()), MC_MARGINAL_SAMPLES)
            });
            let mut proj: Vec<f64> = samples.iter().map(|x| x.dot(&dir)).collect();
            proj.sort_by(f64::total_cmp);
            Law::Empirical { sorted: proj }
        };
        DirectionalMarginal::new(dir, law)
    }

    /// `true` when marginals are computed from samples rather than a closed form.
    pub fn has_mc_marginals(&self) -> bool {
        match &self.kind {
            ModelKind::AffinePushforward { base, .. } => base.has_mc_marginals(),
            _ => {
                self.factors.as_ref().is_some_and(|f| {
                    let g = f.iter().any(|f| matches!(f, Factor::Gaussian { .. }));
                    let u = f.iter().any(|f| matches!(f, Factor::Uniform { .. }));
                    let e = f.iter().any(|f| matches!(f, Factor::Exponential { .. } | Factor::Laplace { .. }));
                    (g as u8 + u as u8 + e as u8) > 1
                })
            }
        }
    }
}

/// The four reference families used across the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zoo {
    Gaussian,
    /// Uniform on the unit cube.
    Cube,
    /// Uniform on the ball of volume one.
    Ball,
    /// Product of centred exponentials.
    Exponential,
}

impl Zoo {
    pub const ALL: [Zoo; 4] = [Zoo::Gaussian, Zoo::Cube, Zoo::Ball, Zoo::Exponential];

    pub fn model(self, n: usize) -> Result<MeasureModel> {
        match self {
            Zoo::Gaussian => MeasureModel::gaussian(n),
            Zoo::Cube => MeasureModel::cube(n, 1.0),
            Zoo::Ball => MeasureModel::unit_volume_ball(n),
            Zoo::Exponential => MeasureModel::exponential(n),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Zoo::Gaussian => "gaussian",
            Zoo::Cube => "cube",
            Zoo::Ball => "ball",
            Zoo::Exponential => "exponential",
        }
    }
}

impl std::fmt::Display for Zoo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Zoo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Zoo::ALL
            .into_iter()
            .find(|z| z.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::input(format!("unknown model family `{s}`")))
    }
}
