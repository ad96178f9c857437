//! Empirical analysis of the mean-field map and its particle
//! approximations.
//!
//! The map under study is `Ψ(μ) = law(A X + δ f(X, μ, ε))`, `X ~ μ`.  When
//! `χ = e^{−ω} + 2δσ < 1` it is a `W₁`-contraction, so Picard iteration
//! converges geometrically to the unique invariant law; on empirical
//! measures the iteration is exactly the interacting particle update, and
//! the iteration stalls at the Monte-Carlo resolution of `N` particles.
//! Every estimator here therefore reports an explicit noise floor next to
//! its point estimate — a measured gap is meaningful only relative to it.

use crate::cloud::{Measure, ParticleCloud};
use crate::dynamics::{step_interacting, KeyFrame};
use crate::error::{Error, Result};
use crate::keys::{NoiseKey, NoiseStream};
use crate::model::{derived_constants, ModelSpec};
use crate::numerics;
use crate::scalar::Real;
use crate::transport::{w1_cloud, w1_1d};

/// Monte-Carlo resolution of a cloud: `W₁` between its two halves, scaled
/// by `1/√2`.  Both halves estimate the same law with `N/2` points, so this
/// (conservatively) tracks the `W₁` sampling error of the full cloud.
pub fn half_split_floor<T: Real>(cloud: &ParticleCloud<T>) -> Result<f64> {
    let n = cloud.len();
    if n < 4 {
        return Err(Error::invalid("cloud", "floor estimation needs at least 4 particles"));
    }
    let d = cloud.dim();
    let half = n / 2;
    let a = ParticleCloud::new(d, cloud.step(), cloud.data()[..half * d].to_vec())?;
    let b = ParticleCloud::new(d, cloud.step(), cloud.data()[half * d..2 * half * d].to_vec())?;
    Ok(w1_cloud(&a, &b)?.value / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy)]
pub struct PicardOptions {
    pub max_iters: u64,
    /// Stop once the one-step gap is below `stop_factor`× the floor.
    pub stop_factor: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions { max_iters: 10_000, stop_factor: 2.0 }
    }
}

#[derive(Debug, Clone)]
pub struct PicardReport<T: Real> {
    pub iterations: u64,
    /// One-step gaps `W₁(C_k, C_{k+1})`.
    pub gaps: Vec<f64>,
    pub final_gap: f64,
    /// Monte-Carlo floor of the final cloud.
    pub floor: f64,
    /// Geometric-mean gap ratio over the clean (well above floor) segment.
    pub contraction_estimate: f64,
    pub converged: bool,
    pub cloud: ParticleCloud<T>,
}

/// Picard iteration of `Ψ` on the empirical measure of `n_particles`
/// points.  Convergence means the iteration reached the sampling
/// resolution, not zero; `max_iters` exhaustion clears `converged` but is
/// not an error.
pub fn picard_fixed_point<T: Real>(
    spec: &ModelSpec<T>,
    n_particles: usize,
    seed: u64,
    opts: PicardOptions,
) -> Result<PicardReport<T>> {
    let frame = KeyFrame::system(seed, 0);
    let mut cloud = spec.initial.sample_replicate(n_particles, seed, 0);
    let mut gaps = Vec::new();
    let mut converged = false;
    let mut floor = half_split_floor(&cloud)?;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let next = step_interacting(spec, &cloud, frame)?;
        let gap = w1_cloud(&cloud, &next)?.value;
        gaps.push(gap);
        cloud = next;
        iterations += 1;
        floor = half_split_floor(&cloud)?;
        if gap <= opts.stop_factor * floor {
            converged = true;
            break;
        }
    }
    // Contraction ratio from the segment well above the floor.
    let mut ratios = Vec::new();
    for w in gaps.windows(2) {
        if w[0] > 8.0 * floor && w[1] > 8.0 * floor && w[0] > 0.0 {
            ratios.push((w[1] / w[0]).ln());
        }
    }
    let contraction_estimate = if ratios.is_empty() {
        f64::NAN
    } else {
        numerics::mean(&ratios).exp()
    };
    Ok(PicardReport {
        iterations,
        final_gap: gaps.last().copied().unwrap_or(0.0),
        gaps,
        floor,
        contraction_estimate,
        converged,
        cloud,
    })
}

#[derive(Debug, Clone)]
pub struct ContractionReport {
    /// `W₁` gaps between the two coupled systems at steps `0..=horizon`.
    pub gaps: Vec<f64>,
    /// Slope of `log gap` per step (least squares).
    pub slope: f64,
    pub slope_stderr: f64,
    /// The theoretical one-step bound `log χ`.
    pub log_chi_bound: f64,
}

/// Drive two copies of the interacting system from translated initial
/// conditions under the *same* innovations and record the `W₁` gap decay.
/// The fitted slope certifies the contraction rate empirically; it must
/// not exceed `log χ`.
pub fn contraction_certificate<T: Real>(
    spec: &ModelSpec<T>,
    n_particles: usize,
    horizon: u64,
    seed: u64,
) -> Result<ContractionReport> {
    let frame = KeyFrame::system(seed, 0);
    let mut a = spec.initial.sample_replicate(n_particles, seed, 0);
    let shifted: Vec<T> = a.data().iter().map(|&x| x + T::one()).collect();
    let mut b = ParticleCloud::new(a.dim(), 0, shifted)?;
    let mut gaps = vec![w1_cloud(&a, &b)?.value];
    for _ in 0..horizon {
        a = step_interacting(spec, &a, frame)?;
        b = step_interacting(spec, &b, frame)?;
        gaps.push(w1_cloud(&a, &b)?.value);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = gaps
        .iter()
        .enumerate()
        .filter(|(_, g)| **g > 1e-13)
        .map(|(k, g)| (k as f64, g.ln()))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::invalid("horizon", "not enough nonzero gaps to fit a rate"));
    }
    let fit = numerics::fit_line(&xs, &ys);
    let dc = derived_constants(spec);
    Ok(ContractionReport {
        gaps,
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        log_chi_bound: dc.chi.ln(),
    })
}

/// Version tag of the probe battery; draws depend only on this constant.
pub const BATTERY_SEED: u64 = 0x00C4_A051;
pub const BATTERY_SIZE: usize = 16;

/// One bounded probe `x ↦ tanh(⟨v, x⟩ + b)`.
#[derive(Debug, Clone)]
struct Probe {
    v: Vec<f64>,
    b: f64,
}

impl Probe {
    fn eval<T: Real>(&self, x: &[T]) -> f64 {
        let mut s = self.b;
        for (vi, xi) in self.v.iter().zip(x) {
            s += vi * xi.wide();
        }
        s.tanh()
    }
}

fn battery(dim: usize) -> Vec<Probe> {
    (0..BATTERY_SIZE)
        .map(|j| {
            let mut draws = NoiseKey::new(BATTERY_SEED, NoiseStream::Coupling, j as u64, 0, 0).draws();
            let scale = 1.0 / (dim as f64).sqrt();
            let v = (0..dim).map(|_| scale * draws.next_gaussian()).collect();
            Probe { v, b: draws.next_gaussian() }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ChaosReport {
    /// Mean over probes of |time-averaged joint-minus-product defect|.
    pub statistic: f64,
    /// Batch-means standard error of the per-probe defects, averaged.
    pub noise_scale: f64,
    pub per_probe: Vec<f64>,
    pub tuple_size: usize,
    pub windows: usize,
    pub steps_used: u64,
}

/// Dependence functional of the particle system: for disjoint `k`-tuples
/// of particles and staggered probes,
///
/// ```text
///   d_j(n) = avg_w ∏_{l<k} φ_{j+l}(X^{wk+l}_n) − ∏_{l<k} avg_i φ_{j+l}(X^i_n),
/// ```
///
/// which vanishes in expectation for iid particles and decays like the
/// chaos defect otherwise.  Tuples are disjoint so the estimator noise
/// also shrinks with `N`; batch means over time give the noise scale.
pub fn chaos_statistic<T: Real>(
    spec: &ModelSpec<T>,
    n_particles: usize,
    tuple_size: usize,
    burn_in: u64,
    horizon: u64,
    seed: u64,
) -> Result<ChaosReport> {
    if tuple_size < 2 {
        return Err(Error::invalid("tuple_size", "must be >= 2"));
    }
    let windows = n_particles / tuple_size;
    if windows < 2 {
        return Err(Error::invalid("n_particles", "need at least two disjoint tuples"));
    }
    if horizon <= burn_in {
        return Err(Error::invalid("horizon", "must exceed burn_in"));
    }
    let probes = battery(spec.dim);
    let frame = KeyFrame::system(seed, 0);
    let mut cloud = spec.initial.sample_replicate(n_particles, seed, 0);
    for _ in 0..burn_in {
        cloud = step_interacting(spec, &cloud, frame)?;
    }
    let steps = horizon - burn_in;
    let mut defect_series: Vec<Vec<f64>> = vec![Vec::with_capacity(steps as usize); BATTERY_SIZE];
    let mut phi = vec![0.0f64; BATTERY_SIZE * n_particles];
    for _ in 0..steps {
        cloud = step_interacting(spec, &cloud, frame)?;
        for (i, p) in cloud.points().enumerate() {
            for (j, probe) in probes.iter().enumerate() {
                phi[j * n_particles + i] = probe.eval(p);
            }
        }
        let means: Vec<f64> = (0..BATTERY_SIZE)
            .map(|j| numerics::mean(&phi[j * n_particles..(j + 1) * n_particles]))
            .collect();
        for j in 0..BATTERY_SIZE {
            let mut joint = 0.0f64;
            for w in 0..windows {
                let mut prod = 1.0f64;
                for l in 0..tuple_size {
                    let probe = (j + l) % BATTERY_SIZE;
                    prod *= phi[probe * n_particles + w * tuple_size + l];
                }
                joint += prod;
            }
            joint /= windows as f64;
            let mut indep = 1.0f64;
            for l in 0..tuple_size {
                indep *= means[(j + l) % BATTERY_SIZE];
            }
            defect_series[j].push(joint - indep);
        }
    }
    // Time-average per probe; batch means give the noise of that average.
    let batches = 8usize.min(steps as usize);
    let mut per_probe = Vec::with_capacity(BATTERY_SIZE);
    let mut noises = Vec::with_capacity(BATTERY_SIZE);
    for series in &defect_series {
        per_probe.push(numerics::mean(series).abs());
        let mut batch_means = Vec::with_capacity(batches);
        let base = series.len() / batches;
        for b in 0..batches {
            let lo = b * base;
            let hi = if b + 1 == batches { series.len() } else { (b + 1) * base };
            batch_means.push(numerics::mean(&series[lo..hi]));
        }
        noises.push(numerics::stderr_of_mean(&batch_means));
    }
    Ok(ChaosReport {
        statistic: numerics::mean(&per_probe),
        noise_scale: numerics::mean(&noises),
        per_probe,
        tuple_size,
        windows,
        steps_used: steps,
    })
}

/// Domination sequence of the recursion `u_{n+1} ≤ ρ_n u_n + β_n`:
/// returns the sharp bound sequence started at `u0`.
pub fn discrete_gronwall(u0: f64, rates: &[f64], forcings: &[f64]) -> Result<Vec<f64>> {
    if rates.len() != forcings.len() {
        return Err(Error::DimensionMismatch {
            context: "gronwall",
            expected: rates.len(),
            found: forcings.len(),
        });
    }
    if !(u0.is_finite() && u0 >= 0.0) {
        return Err(Error::invalid("u0", "must be finite and >= 0"));
    }
    if rates.iter().chain(forcings).any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::invalid("rates/forcings", "entries must be finite and >= 0"));
    }
    let mut out = Vec::with_capacity(rates.len() + 1);
    out.push(u0);
    let mut u = u0;
    for (r, b) in rates.iter().zip(forcings) {
        u = r * u + b;
        out.push(u);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct OneStepError {
    pub mean: f64,
    pub stderr: f64,
    pub per_replicate: Vec<f64>,
}

/// Sampling error of a single particle update: `W₁` between the stepped
/// cloud (`N` fresh points of `Ψ(μ̂)`) and an `inner_factor`× larger
/// sample of the same law.  The larger sample resolves `Ψ(μ̂)` finely
/// enough that the distance isolates the `N⁻¹/²` one-step error.
pub fn onestep_mc_error<T: Real>(
    spec: &ModelSpec<T>,
    cloud: &ParticleCloud<T>,
    inner_factor: usize,
    replicates: u64,
    seed: u64,
) -> Result<OneStepError> {
    if inner_factor < 2 {
        return Err(Error::invalid("inner_factor", "must be >= 2"));
    }
    let n = cloud.len();
    let d = cloud.dim();
    let k = n * inner_factor;
    let mean = cloud.mean();
    let measure = Measure::Cloud { cloud, mean: &mean };
    let next_step = cloud.step() + 1;
    let delta = T::of(spec.delta);
    let mut per_replicate = Vec::with_capacity(replicates as usize);
    let mut z = vec![T::zero(); d];
    let mut fx = vec![T::zero(); d];
    let mut ax = vec![T::zero(); d];
    for r in 0..replicates {
        let outer = step_interacting(spec, cloud, KeyFrame::system(seed, r))?;
        let mut data = vec![T::zero(); k * d];
        for j in 0..k {
            let mut draws =
                NoiseKey::new(seed, NoiseStream::Auxiliary, r, j as u64, next_step).draws();
            let pick = (draws.next_u64() % n as u64) as usize;
            let x = cloud.point(pick);
            spec.noise.sample_into(&mut draws, &mut z);
            spec.interaction.eval(x, &measure, &z, &mut fx);
            spec.mat_a.mul_vec_into(x, &mut ax);
            for c in 0..d {
                let v = ax[c] + delta * fx[c];
                if !v.is_finite() {
                    return Err(Error::NumericOverflow { step: next_step, particle: j });
                }
                data[j * d + c] = v;
            }
        }
        let reference = ParticleCloud::new(d, next_step, data)?;
        let dist = if d == 1 {
            w1_1d(&outer, &reference)?.value
        } else {
            w1_cloud(&outer, &reference)?.value
        };
        per_replicate.push(dist);
    }
    Ok(OneStepError {
        mean: numerics::mean(&per_replicate),
        stderr: numerics::stderr_of_mean(&per_replicate),
        per_replicate,
    })
}

#[derive(Debug, Clone)]
pub struct TailReport {
    pub eps: Vec<f64>,
    pub hits: Vec<u64>,
    pub trials: u64,
    pub p_hat: Vec<f64>,
    pub wilson_low: Vec<f64>,
    pub wilson_high: Vec<f64>,
}

/// Empirical exceedance probabilities `P(dist > ε)` over precomputed
/// per-replicate distances, with Wilson score intervals at `z` sigmas.
pub fn tail_estimator(distances: &[f64], eps_grid: &[f64], z: f64) -> Result<TailReport> {
    if distances.is_empty() {
        return Err(Error::invalid("distances", "need at least one replicate"));
    }
    if distances.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("distances", "contains a non-finite entry"));
    }
    let trials = distances.len() as u64;
    let mut hits = Vec::with_capacity(eps_grid.len());
    let mut p_hat = Vec::with_capacity(eps_grid.len());
    let mut wilson_low = Vec::with_capacity(eps_grid.len());
    let mut wilson_high = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let h = distances.iter().filter(|d| **d > eps).count() as u64;
        let (lo, hi) = numerics::wilson_interval(h, trials, z);
        hits.push(h);
        p_hat.push(h as f64 / trials as f64);
        wilson_low.push(lo);
        wilson_high.push(hi);
    }
    Ok(TailReport { eps: eps_grid.to_vec(), hits, trials, p_hat, wilson_low, wilson_high })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::GaussianLaw;
    use crate::linalg::SquareMat;
    use crate::model::{
        builtin_model, exact_law_stationary, InitialLawSpec, Interaction, LipschitzData,
        ModelSpec, NoiseSpec,
    };
    use crate::transport::w1_cloud_gaussian_1d;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn gronwall_matches_hand_recursion() {
        let out = discrete_gronwall(2.0, &[0.5, 0.5, 2.0], &[1.0, 0.0, 3.0]).unwrap();
        assert_eq!(out, vec![2.0, 2.0, 1.0, 5.0]);
        assert!(discrete_gronwall(-1.0, &[0.5], &[0.0]).is_err());
        assert!(discrete_gronwall(1.0, &[0.5], &[0.0, 1.0]).is_err());
        assert!(discrete_gronwall(1.0, &[-0.5], &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn gronwall_dominates_any_compliant_sequence(
            u0 in 0.0f64..5.0,
            rates in proptest::collection::vec(0.0f64..2.0, 1..12),
            forcings in proptest::collection::vec(0.0f64..3.0, 1..12),
            slack in proptest::collection::vec(0.0f64..1.0, 1..12),
        ) {
            let n = rates.len().min(forcings.len()).min(slack.len());
            let rates = &rates[..n];
            let forcings = &forcings[..n];
            let bound = discrete_gronwall(u0, rates, forcings).unwrap();
            // u obeys u_{k+1} = ρ u_k + β − slack ≤ ρ u_k + β.
            let mut u = u0;
            for k in 0..n {
                u = (rates[k] * u + forcings[k] - slack[k]).max(0.0);
                prop_assert!(u <= bound[k + 1] + 1e-12);
            }
        }
    }

    #[test]
    fn coupled_contraction_rate_is_exact_for_pull_kernel() {
        // Uniformly translated copies keep a uniform difference field, the
        // mean-field terms cancel, and the gap contracts by exactly ‖A‖.
        let spec = builtin_model::<f64>("mean-field-gaussian").unwrap();
        let report = contraction_certificate(&spec, 256, 12, 11).unwrap();
        assert_relative_eq!(report.gaps[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(report.gaps[3], 0.125, max_relative = 1e-9);
        assert_relative_eq!(report.slope, 0.5f64.ln(), max_relative = 1e-6);
        assert!(report.slope <= report.log_chi_bound + 0.05);
        assert_relative_eq!(report.log_chi_bound, 0.7f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn picard_reaches_the_stationary_law() {
        let spec = builtin_model::<f64>("mean-field-gaussian").unwrap();
        let report = picard_fixed_point(&spec, 4096, 3, PicardOptions::default()).unwrap();
        assert!(report.converged, "gaps: {:?}", report.gaps);
        // Gaps decay roughly geometrically at 0.5 before hitting the floor.
        assert!(report.contraction_estimate < 0.7);
        let stationary = exact_law_stationary(&spec).unwrap();
        let err = w1_cloud_gaussian_1d(&report.cloud, &stationary).unwrap();
        assert!(
            err < 6.0 * report.floor + 0.01,
            "error {err} vs floor {}",
            report.floor
        );
    }

    #[test]
    fn floor_scales_like_inverse_sqrt_n() {
        let law = GaussianLaw::isotropic(vec![0.0f64], 1.0).unwrap();
        let spec_floor = |n: usize| {
            let init = InitialLawSpec::Iid(law.clone());
            half_split_floor(&init.sample_replicate(n, 5, 0)).unwrap()
        };
        let f_small = spec_floor(500);
        let f_big = spec_floor(8000);
        assert!(f_big < f_small, "floor must shrink with N: {f_small} vs {f_big}");
        assert!(f_small < 0.5 && f_big > 1e-4);
    }

    fn noise_only_model() -> ModelSpec<f64> {
        // f(x, μ, z) = z: particles never interact (D ≡ 0).
        let noise = NoiseSpec::Gaussian { sd: 1.0 };
        let lz = LipschitzData {
            sigma: 0.0,
            sigma1: 0.0,
            c0: noise.abs_moment(1, 1.0).unwrap(),
            c1: noise.abs_moment(1, 2.0).unwrap(),
            ess_sup: 0.0,
        };
        ModelSpec::new(
            "noise-only",
            SquareMat::scaled_identity(1, 0.5f64),
            0.1,
            Interaction::Custom {
                name: "noise-only".into(),
                eval: Arc::new(|_x, _mu, z, out: &mut [f64]| out.copy_from_slice(z)),
            },
            noise,
            InitialLawSpec::Iid(GaussianLaw::point_mass(vec![1.0]).unwrap()),
            lz,
            1.0,
            0.05,
            None,
        )
        .unwrap()
    }

    #[test]
    fn chaos_statistic_flags_dependence_and_clears_independence() {
        // Independent particles: defect is pure estimator noise.
        let indep = noise_only_model();
        let r0 = chaos_statistic(&indep, 512, 2, 10, 110, 21).unwrap();
        assert!(
            r0.statistic <= 4.0 * r0.noise_scale + 1e-3,
            "independent case: {} vs noise {}",
            r0.statistic,
            r0.noise_scale
        );
        // Strong common dependence: a shared initial shift under weak
        // contraction stays in every tuple product ⇒ statistic ≫ noise.
        let doc = crate::model::ModelDocument {
            initial: crate::model::InitialDocument::Exchangeable {
                level: 0.0,
                sd: 0.1,
                shift_sd: 1.5,
            },
            contraction: 0.95,
            delta: 0.01,
            ..Default::default()
        };
        let dep = doc.to_spec::<f64>().unwrap();
        let r1 = chaos_statistic(&dep, 512, 2, 1, 21, 21).unwrap();
        assert!(
            r1.statistic > 5.0 * r1.noise_scale,
            "dependent case: {} vs noise {}",
            r1.statistic,
            r1.noise_scale
        );
        assert_eq!(r1.per_probe.len(), BATTERY_SIZE);
    }

    #[test]
    fn chaos_statistic_validates_input() {
        let spec = builtin_model::<f64>("mean-field-gaussian").unwrap();
        assert!(chaos_statistic(&spec, 512, 1, 0, 10, 1).is_err());
        assert!(chaos_statistic(&spec, 3, 2, 0, 10, 1).is_err());
        assert!(chaos_statistic(&spec, 512, 2, 10, 10, 1).is_err());
    }

    #[test]
    fn onestep_error_shrinks_with_n() {
        let spec = builtin_model::<f64>("mean-field-gaussian").unwrap();
        let measure = |n: usize| {
            let cloud = spec.initial.sample_replicate(n, 7, 0);
            // Move off the deterministic initial point first.
            let stepped = step_interacting(&spec, &cloud, KeyFrame::system(7, 9)).unwrap();
            onestep_mc_error(&spec, &stepped, 40, 6, 13).unwrap()
        };
        let small = measure(100);
        let big = measure(1600);
        assert!(small.mean > 0.0);
        assert!(
            big.mean < small.mean,
            "one-step error must shrink: {} vs {}",
            small.mean,
            big.mean
        );
        // Rough: N↑16× should cut the error by ~4; accept any factor ≥ 2.
        assert!(big.mean < small.mean / 2.0);
        assert_eq!(small.per_replicate.len(), 6);
    }

    #[test]
    fn tail_estimator_counts_and_brackets() {
        let distances = [0.1, 0.2, 0.3, 0.05];
        let rep = tail_estimator(&distances, &[0.15, 0.35], 2.0).unwrap();
        assert_eq!(rep.hits, vec![2, 0]);
        assert_relative_eq!(rep.p_hat[0], 0.5);
        assert_eq!(rep.p_hat[1], 0.0);
        assert!(rep.wilson_low[0] < 0.5 && rep.wilson_high[0] > 0.5);
        assert!(rep.wilson_high[1] > 0.0); // zero hits still give mass
        assert!(tail_estimator(&[], &[0.1], 2.0).is_err());
        assert!(tail_estimator(&[f64::NAN], &[0.1], 2.0).is_err());
    }
}
