//! Time stepping for the interacting system, its mean-field limit, and
//! couplings between the two.
//!
//! One update is `X^i_{n+1} = A X^i_n + δ f(X^i_n, μ_n, ε^i_{n+1})` where
//! `μ_n` is either the empirical measure of the current cloud (interacting
//! system) or an externally supplied law (auxiliary system — `N`
//! independent copies of the limit chain).  Innovations are addressed by
//! `(seed, stream, replicate, particle, step)`, so running the auxiliary
//! system under the *same* key frame as the interacting one realizes the
//! synchronous coupling: particle `i` consumes identical ε's in both.

use crate::cloud::{Measure, ParticleCloud};
use crate::error::{Error, Result};
use crate::keys::{NoiseKey, NoiseStream};
use crate::law::GaussianLaw;
use crate::model::{exact_law_linear, ModelSpec};
use crate::scalar::Real;

/// Names the slice of randomness a run consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyFrame {
    pub seed: u64,
    pub stream: NoiseStream,
    pub replicate: u64,
}

impl KeyFrame {
    pub fn system(seed: u64, replicate: u64) -> Self {
        KeyFrame { seed, stream: NoiseStream::System, replicate }
    }

    pub fn auxiliary(seed: u64, replicate: u64) -> Self {
        KeyFrame { seed, stream: NoiseStream::Auxiliary, replicate }
    }
}

/// Advance every particle one step against an explicit measure.
pub fn step_with_measure<T: Real>(
    spec: &ModelSpec<T>,
    cloud: &ParticleCloud<T>,
    measure: &Measure<'_, T>,
    frame: KeyFrame,
) -> Result<ParticleCloud<T>> {
    let d = spec.dim;
    if cloud.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "step",
            expected: d,
            found: cloud.dim(),
        });
    }
    let n = cloud.step();
    let next_step = n + 1;
    let delta = T::of(spec.delta);
    let mut data = vec![T::zero(); cloud.len() * d];
    let mut z = vec![T::zero(); d];
    let mut fx = vec![T::zero(); d];
    let mut ax = vec![T::zero(); d];
    for i in 0..cloud.len() {
        let mut draws =
            NoiseKey::new(frame.seed, frame.stream, frame.replicate, i as u64, next_step).draws();
        spec.noise.sample_into(&mut draws, &mut z);
        let x = cloud.point(i);
        spec.interaction.eval(x, measure, &z, &mut fx);
        spec.mat_a.mul_vec_into(x, &mut ax);
        let out = &mut data[i * d..(i + 1) * d];
        for k in 0..d {
            out[k] = ax[k] + delta * fx[k];
            if !out[k].is_finite() {
                return Err(Error::NumericOverflow { step: next_step, particle: i });
            }
        }
    }
    // Finiteness was checked entry-wise above.
    Ok(ParticleCloud::new(d, next_step, data).expect("finite by construction"))
}

/// Advance the interacting system: the measure is the cloud's own
/// empirical measure (mean computed once — `O(Nd)` for mean-field kernels).
pub fn step_interacting<T: Real>(
    spec: &ModelSpec<T>,
    cloud: &ParticleCloud<T>,
    frame: KeyFrame,
) -> Result<ParticleCloud<T>> {
    let mean = cloud.mean();
    let measure = Measure::Cloud { cloud, mean: &mean };
    step_with_measure(spec, cloud, &measure, frame)
}

/// Advance `N` independent copies of the limit chain against the law `mu_n`.
pub fn step_auxiliary<T: Real>(
    spec: &ModelSpec<T>,
    cloud: &ParticleCloud<T>,
    law: &GaussianLaw<T>,
    frame: KeyFrame,
) -> Result<ParticleCloud<T>> {
    let measure = Measure::Gaussian(law);
    step_with_measure(spec, cloud, &measure, frame)
}

/// Synchronous coupling: both systems advance under the same key frame, so
/// matched particles consume identical innovations.
pub fn step_coupled<'a, T: Real>(
    spec: &ModelSpec<T>,
    interacting: &ParticleCloud<T>,
    auxiliary: &ParticleCloud<T>,
    limit_measure: &Measure<'a, T>,
    frame: KeyFrame,
) -> Result<(ParticleCloud<T>, ParticleCloud<T>)> {
    let next_int = step_interacting(spec, interacting, frame)?;
    let next_aux = step_with_measure(spec, auxiliary, limit_measure, frame)?;
    Ok((next_int, next_aux))
}

/// A recorded trajectory: every `stride`-th cloud plus the final one.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub stride: u64,
    pub clouds: Vec<ParticleCloud<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn at_step(&self, step: u64) -> Option<&ParticleCloud<T>> {
        self.clouds.iter().find(|c| c.step() == step)
    }

    pub fn last(&self) -> &ParticleCloud<T> {
        self.clouds.last().expect("trajectories contain at least the initial cloud")
    }
}

/// Sample the initial cloud and run the interacting system for `horizon`
/// steps, recording every `stride`-th state (stride 0 is treated as
/// "record endpoints only").
pub fn simulate<T: Real>(
    spec: &ModelSpec<T>,
    n_particles: usize,
    horizon: u64,
    frame: KeyFrame,
    stride: u64,
) -> Result<Trajectory<T>> {
    if n_particles == 0 {
        return Err(Error::invalid("n_particles", "must be >= 1"));
    }
    let mut cloud = spec.initial.sample_replicate(n_particles, frame.seed, frame.replicate);
    let record = |c: &ParticleCloud<T>, out: &mut Vec<ParticleCloud<T>>| {
        if stride > 0 && c.step() % stride == 0 {
            out.push(c.clone());
        }
    };
    let mut clouds = Vec::new();
    record(&cloud, &mut clouds);
    if stride == 0 {
        clouds.push(cloud.clone());
    }
    for _ in 0..horizon {
        cloud = step_interacting(spec, &cloud, frame)?;
        record(&cloud, &mut clouds);
    }
    if clouds.last().map(|c| c.step()) != Some(cloud.step()) {
        clouds.push(cloud);
    }
    Ok(Trajectory { stride: stride.max(1), clouds })
}

/// The limit-law flow `μ_0, …, μ_horizon`: exact Gaussians for the linear
/// family, otherwise a large-`N` surrogate cloud whose empirical measure
/// stands in for `μ_n`.
#[derive(Debug, Clone)]
pub enum ReferenceTrack<T: Real> {
    Exact(Vec<GaussianLaw<T>>),
    Surrogate(Trajectory<T>),
}

impl<T: Real> ReferenceTrack<T> {
    pub fn law_at(&self, step: u64) -> Option<&GaussianLaw<T>> {
        match self {
            ReferenceTrack::Exact(laws) => laws.get(step as usize),
            ReferenceTrack::Surrogate(_) => None,
        }
    }

    pub fn cloud_at(&self, step: u64) -> Option<&ParticleCloud<T>> {
        match self {
            ReferenceTrack::Exact(_) => None,
            ReferenceTrack::Surrogate(t) => t.at_step(step),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, ReferenceTrack::Exact(_))
    }
}

/// Build the reference flow for a model.  Falls back to a surrogate only
/// when no closed form exists; other errors propagate.
pub fn propagate_reference<T: Real>(
    spec: &ModelSpec<T>,
    horizon: u64,
    surrogate_particles: usize,
    seed: u64,
) -> Result<ReferenceTrack<T>> {
    match exact_law_linear(spec, horizon as usize) {
        Ok(laws) => Ok(ReferenceTrack::Exact(laws)),
        Err(Error::UnsupportedOracle(_)) => {
            let frame = KeyFrame::auxiliary(seed, u64::MAX);
            let traj = simulate(spec, surrogate_particles, horizon, frame, 1)?;
            Ok(ReferenceTrack::Surrogate(traj))
        }
        Err(e) => Err(e),
    }
}
