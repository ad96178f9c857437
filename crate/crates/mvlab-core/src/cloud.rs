//! Particle configurations and the measure view.
//!
//! A [`ParticleCloud`] is the state of an `N`-particle system at one time
//! step: `N` points of `R^d` in row-major storage, tagged with the step
//! index.  Interaction kernels never see the raw cloud; they see a
//! [`Measure`], which is either an empirical measure (cloud plus its
//! precomputed mean, so a full update costs `O(Nd)` rather than `O(N²d)`
//! for mean-field kernels) or an exact Gaussian law for the limit dynamics.

use crate::error::{Error, Result};
use crate::law::GaussianLaw;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud<T: Real> {
    dim: usize,
    step: u64,
    data: Vec<T>,
}

impl<T: Real> ParticleCloud<T> {
    /// `data` holds the particles consecutively (`N·dim` scalars); every
    /// coordinate must be finite.
    pub fn new(dim: usize, step: u64, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::invalid(
                "data",
                format!("length {} is empty or not a multiple of dim {dim}", data.len()),
            ));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("data", "contains a non-finite coordinate"));
        }
        Ok(ParticleCloud { dim, step, data })
    }

    pub fn from_points(step: u64, points: &[Vec<T>]) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("points", "rows have unequal lengths"));
        }
        ParticleCloud::new(dim, step, points.concat())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        false // constructor rejects empty configurations
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn mean(&self) -> Vec<T> {
        let n = T::of(self.len() as f64);
        let mut m = vec![T::zero(); self.dim];
        for p in self.points() {
            for (mi, &pi) in m.iter_mut().zip(p) {
                *mi = *mi + pi;
            }
        }
        for mi in m.iter_mut() {
            *mi = *mi / n;
        }
        m
    }

    /// Average Euclidean norm `N⁻¹ Σ |X^i|` — the empirical first absolute
    /// moment.
    pub fn mean_abs(&self) -> T {
        let n = T::of(self.len() as f64);
        let mut acc = T::zero();
        for p in self.points() {
            let sq: T = p.iter().map(|&x| x * x).sum();
            acc = acc + sq.sqrt();
        }
        acc / n
    }

    /// Average of `|X^i|^p`.
    pub fn mean_abs_pow(&self, p: f64) -> T {
        let n = T::of(self.len() as f64);
        let mut acc = T::zero();
        for pt in self.points() {
            let sq: T = pt.iter().map(|&x| x * x).sum();
            acc = acc + sq.sqrt().powf(T::of(p));
        }
        acc / n
    }

    /// One coordinate axis, sorted ascending — the quantile function of the
    /// marginal empirical measure.
    pub fn sorted_axis(&self, axis: usize) -> Vec<T> {
        let mut v: Vec<T> = self.points().map(|p| p[axis]).collect();
        v.sort_by(|a, b| a.partial_cmp(b).expect("cloud coordinates are finite"));
        v
    }

    /// Same particles, advanced step tag.
    pub fn with_step(mut self, step: u64) -> Self {
        self.step = step;
        self
    }
}

/// What an interaction kernel integrates against: the empirical measure of
/// a cloud (with cached mean) or an exact Gaussian law.
#[derive(Debug, Clone, Copy)]
pub enum Measure<'a, T: Real> {
    Cloud {
        cloud: &'a ParticleCloud<T>,
        /// `cloud.mean()`, computed once per step by the driver.
        mean: &'a [T],
    },
    Gaussian(&'a GaussianLaw<T>),
}

impl<'a, T: Real> Measure<'a, T> {
    pub fn dim(&self) -> usize {
        match self {
            Measure::Cloud { cloud, .. } => cloud.dim(),
            Measure::Gaussian(law) => law.dim(),
        }
    }

    pub fn mean(&self) -> &[T] {
        match self {
            Measure::Cloud { mean, .. } => mean,
            Measure::Gaussian(law) => law.mean(),
        }
    }

    pub fn as_cloud(&self) -> Option<&'a ParticleCloud<T>> {
        match self {
            Measure::Cloud { cloud, .. } => Some(cloud),
            Measure::Gaussian(_) => None,
        }
    }
}
