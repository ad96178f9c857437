//! Model specification and regime validation.
//!
//! A model is the discrete-time interacting system
//!
//! ```text
//!   X^i_{n+1} = A X^i_n + δ f(X^i_n, μ^N_n, ε^i_{n+1}),   μ^N_n = N⁻¹ Σ_j δ_{X^j_n}
//! ```
//!
//! together with the noise law θ, the initial condition, and the Lipschitz
//! data of the interaction kernel: `D(z)` bounds the joint Lipschitz ratio
//! `|f(x,μ,z) − f(x',μ',z)| ≤ D(z)(|x−x'| + W₁(μ,μ'))` and
//! `D₁(z) = |f(0, δ₀, z)|` anchors the moment recursions.  All regime
//! conditions used by the estimators are integrals of `D`, `D₁` against θ:
//!
//! ```text
//!   σ = ∫D dθ,  σ₁(α) = ∫D^{1+α} dθ,  c₀ = ∫D₁ dθ,  c₁(α) = ∫D₁^{1+α} dθ,
//!   M = ess sup D.
//! ```
//!
//! [`derived_constants`] evaluates the contraction/moment rates built from
//! these, and [`validate`] reports which estimate families apply, flagging
//! rather than erroring: an out-of-regime model still simulates.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cloud::Measure;
use crate::error::{Error, Result};
use crate::keys::{KeyedDraws, NoiseKey, NoiseStream, SHARED_PARTICLE};
use crate::law::{lyapunov_fixed_point, GaussianLaw};
use crate::linalg::SquareMat;
use crate::numerics;
use crate::scalar::Real;

/// Innovation law θ on `R^d` (coordinates iid under both variants).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseSpec {
    /// `N(0, sd² I_d)`.
    Gaussian { sd: f64 },
    /// Uniform on `[-half_width, half_width]^d`.
    UniformBox { half_width: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let s = match self {
            NoiseSpec::Gaussian { sd } => *sd,
            NoiseSpec::UniformBox { half_width } => *half_width,
        };
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::invalid("noise scale", "must be finite and > 0"));
        }
        Ok(())
    }

    pub fn sample_into<T: Real>(&self, draws: &mut KeyedDraws, out: &mut [T]) {
        match self {
            NoiseSpec::Gaussian { sd } => {
                for o in out.iter_mut() {
                    *o = T::of(sd * draws.next_gaussian());
                }
            }
            NoiseSpec::UniformBox { half_width } => {
                for o in out.iter_mut() {
                    *o = T::of(draws.next_symmetric_uniform(*half_width));
                }
            }
        }
    }

    /// `E|ε|^p`.  Exact for Gaussian (any `d`) and for the box with `d ≤ 4`
    /// (tensor quadrature); larger box dimensions are unsupported.
    pub fn abs_moment(&self, dim: usize, p: f64) -> Result<f64> {
        match self {
            NoiseSpec::Gaussian { sd } => Ok(sd.powf(p) * numerics::gaussian_abs_moment(dim, p)),
            NoiseSpec::UniformBox { half_width } => {
                if dim == 1 {
                    // ∫₀^b z^p dz / b = b^p/(p+1)
                    return Ok(half_width.powf(p) / (p + 1.0));
                }
                numerics::uniform_box_expectation(dim, *half_width, |z| {
                    z.iter().map(|x| x * x).sum::<f64>().sqrt().powf(p)
                })
            }
        }
    }

    /// `E e^{s|ε|}`.  Exact for `d = 1`; for `d ≥ 2` a finite upper bound
    /// (coordinate product for Gaussian, `e^{s·b√d}` for the box beyond
    /// quadrature range) — the conservative direction everywhere this
    /// enters a concentration constant.
    pub fn exp_abs_moment(&self, dim: usize, s: f64) -> f64 {
        match self {
            NoiseSpec::Gaussian { sd } => {
                if dim == 1 {
                    numerics::gaussian_exp_abs_moment(0.0, *sd, s)
                } else {
                    numerics::gaussian_exp_abs_moment(0.0, *sd, s).powi(dim as i32)
                }
            }
            NoiseSpec::UniformBox { half_width } => {
                if dim == 1 {
                    // ∫₀^b e^{sz} dz / b
                    if s == 0.0 {
                        1.0
                    } else {
                        ((s * half_width).exp() - 1.0) / (s * half_width)
                    }
                } else {
                    numerics::uniform_box_expectation(dim, *half_width, |z| {
                        (s * z.iter().map(|x| x * x).sum::<f64>().sqrt()).exp()
                    })
                    .unwrap_or_else(|_| (s * half_width * (dim as f64).sqrt()).exp())
                }
            }
        }
    }

    /// `ess sup |ε|` — ∞ for Gaussian noise.
    pub fn ess_sup_abs(&self, dim: usize) -> f64 {
        match self {
            NoiseSpec::Gaussian { .. } => f64::INFINITY,
            NoiseSpec::UniformBox { half_width } => half_width * (dim as f64).sqrt(),
        }
    }
}

/// Integrated Lipschitz data of the kernel at the model's tail exponent α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzData {
    /// σ = ∫ D dθ.
    pub sigma: f64,
    /// σ₁ = ∫ D^{1+α} dθ.
    pub sigma1: f64,
    /// c₀ = ∫ D₁ dθ.
    pub c0: f64,
    /// c₁ = ∫ D₁^{1+α} dθ.
    pub c1: f64,
    /// M = ess sup D (`f64::INFINITY` when unbounded).
    pub ess_sup: f64,
}

impl LipschitzData {
    /// Data for the constant-ratio family `D ≡ κ`, `D₁(z) = |z|` — the
    /// mean-field pull kernels.
    pub fn constant_ratio(kappa: f64, noise: &NoiseSpec, dim: usize, alpha: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::invalid("kappa", "must be finite and >= 0"));
        }
        Ok(LipschitzData {
            sigma: kappa,
            sigma1: kappa.powf(1.0 + alpha),
            c0: noise.abs_moment(dim, 1.0)?,
            c1: noise.abs_moment(dim, 1.0 + alpha)?,
            ess_sup: kappa,
        })
    }
}

/// Interaction kernel `f(x, μ, z)`.
#[derive(Clone)]
pub enum Interaction<T: Real> {
    /// `f(x, μ, z) = −κ(x − m(μ)) + z` where `m(μ)` is the mean of μ.
    MeanFieldPull { kappa: f64 },
    /// Arbitrary kernel; the caller supplies matching [`LipschitzData`].
    Custom {
        name: String,
        eval: Arc<dyn Fn(&[T], &Measure<'_, T>, &[T], &mut [T]) + Send + Sync>,
    },
}

impl<T: Real> Interaction<T> {
    pub fn eval(&self, x: &[T], mu: &Measure<'_, T>, z: &[T], out: &mut [T]) {
        match self {
            Interaction::MeanFieldPull { kappa } => {
                let k = T::of(*kappa);
                let m = mu.mean();
                for i in 0..x.len() {
                    out[i] = -k * (x[i] - m[i]) + z[i];
                }
            }
            Interaction::Custom { eval, .. } => eval(x, mu, z, out),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Interaction::MeanFieldPull { .. } => "mean-field-pull",
            Interaction::Custom { name, .. } => name,
        }
    }
}

impl<T: Real> fmt::Debug for Interaction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interaction::MeanFieldPull { kappa } => {
                f.debug_struct("MeanFieldPull").field("kappa", kappa).finish()
            }
            Interaction::Custom { name, .. } => {
                f.debug_struct("Custom").field("name", name).finish_non_exhaustive()
            }
        }
    }
}

/// Initial condition for one replicate of the `N`-particle system.
#[derive(Debug, Clone)]
pub enum InitialLawSpec<T: Real> {
    /// Particles drawn iid from the law.
    Iid(GaussianLaw<T>),
    /// Iid draws from `base` plus one shared `N(0, shift_sd² I)` shift per
    /// replicate: exchangeable but not independent, with Gaussian marginal
    /// `N(m, Σ + shift_sd² I)`.
    ExchangeableShift { base: GaussianLaw<T>, shift_sd: f64 },
}

impl<T: Real> InitialLawSpec<T> {
    pub fn dim(&self) -> usize {
        match self {
            InitialLawSpec::Iid(law) => law.dim(),
            InitialLawSpec::ExchangeableShift { base, .. } => base.dim(),
        }
    }

    pub fn is_iid(&self) -> bool {
        match self {
            InitialLawSpec::Iid(_) => true,
            InitialLawSpec::ExchangeableShift { shift_sd, .. } => *shift_sd == 0.0,
        }
    }

    /// Marginal law of a single particle.
    pub fn marginal(&self) -> GaussianLaw<T> {
        match self {
            InitialLawSpec::Iid(law) => law.clone(),
            InitialLawSpec::ExchangeableShift { base, shift_sd } => {
                let d = base.dim();
                let bump = SquareMat::scaled_identity(d, T::of(shift_sd * shift_sd));
                GaussianLaw::new(base.mean().to_vec(), base.cov().add(&bump))
                    .expect("base covariance plus s²I stays PSD")
            }
        }
    }

    /// Draw the `N` initial particles of `replicate`.  Keys: particle `i`
    /// uses `(seed, Initial, replicate, i, 0)`; the shared shift uses the
    /// reserved particle index.
    pub fn sample_replicate(
        &self,
        n_particles: usize,
        seed: u64,
        replicate: u64,
    ) -> crate::cloud::ParticleCloud<T> {
        let d = self.dim();
        let mut data = vec![T::zero(); n_particles * d];
        let base = match self {
            InitialLawSpec::Iid(law) => law,
            InitialLawSpec::ExchangeableShift { base, .. } => base,
        };
        for i in 0..n_particles {
            let mut draws = NoiseKey::new(seed, NoiseStream::Initial, replicate, i as u64, 0).draws();
            base.sample_into(&mut draws, &mut data[i * d..(i + 1) * d]);
        }
        if let InitialLawSpec::ExchangeableShift { shift_sd, .. } = self {
            if *shift_sd > 0.0 {
                let mut draws =
                    NoiseKey::new(seed, NoiseStream::Initial, replicate, SHARED_PARTICLE, 0).draws();
                let mut shift = vec![T::zero(); d];
                for s in shift.iter_mut() {
                    *s = T::of(shift_sd * draws.next_gaussian());
                }
                for i in 0..n_particles {
                    for k in 0..d {
                        data[i * d + k] = data[i * d + k] + shift[k];
                    }
                }
            }
        }
        crate::cloud::ParticleCloud::new(d, 0, data).expect("Gaussian samples are finite")
    }
}

/// Full model specification.  `gamma0` is the regime margin in
/// `δ ≤ a₀ − γ₀` and `gamma_rate` the contraction budget `γ` of the
/// iid-concentration window `δ < (1 − e^{−ω} − γ)/(2M)`.
#[derive(Debug, Clone)]
pub struct ModelSpec<T: Real> {
    pub name: String,
    pub dim: usize,
    pub mat_a: SquareMat<T>,
    pub delta: f64,
    pub interaction: Interaction<T>,
    pub noise: NoiseSpec,
    pub initial: InitialLawSpec<T>,
    pub lipschitz: LipschitzData,
    pub alpha: f64,
    pub gamma0: f64,
    pub gamma_rate: f64,
    norm_a: f64,
}

pub const DEFAULT_GAMMA0: f64 = 0.05;

impl<T: Real> ModelSpec<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        mat_a: SquareMat<T>,
        delta: f64,
        interaction: Interaction<T>,
        noise: NoiseSpec,
        initial: InitialLawSpec<T>,
        lipschitz: LipschitzData,
        alpha: f64,
        gamma0: f64,
        gamma_rate: Option<f64>,
    ) -> Result<Self> {
        let dim = mat_a.dim();
        if initial.dim() != dim {
            return Err(Error::DimensionMismatch {
                context: "initial law",
                expected: dim,
                found: initial.dim(),
            });
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid("delta", "must be finite and > 0"));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid("alpha", "must be finite and > 0"));
        }
        if !(gamma0.is_finite() && gamma0 >= 0.0) {
            return Err(Error::invalid("gamma0", "must be finite and >= 0"));
        }
        noise.validate()?;
        let norm_a = mat_a.operator_norm().wide();
        let gamma_rate = gamma_rate.unwrap_or_else(|| {
            let contraction_gap = 1.0 - norm_a;
            (contraction_gap / 2.0).max(0.0)
        });
        if !(gamma_rate.is_finite() && gamma_rate >= 0.0) {
            return Err(Error::invalid("gamma_rate", "must be finite and >= 0"));
        }
        Ok(ModelSpec {
            name: name.into(),
            dim,
            mat_a,
            delta,
            interaction,
            noise,
            initial,
            lipschitz,
            alpha,
            gamma0,
            gamma_rate,
            norm_a,
        })
    }

    /// Operator norm ‖A‖ (cached at construction).
    pub fn norm_a(&self) -> f64 {
        self.norm_a
    }

    /// ω = −log ‖A‖ (the contraction exponent; ≤ 0 means no contraction).
    pub fn omega(&self) -> f64 {
        -self.norm_a.ln()
    }

    /// Re-evaluate the integrated Lipschitz data at a different tail
    /// exponent (constant-ratio kernels only).
    pub fn lipschitz_at(&self, alpha: f64) -> Result<LipschitzData> {
        match &self.interaction {
            Interaction::MeanFieldPull { kappa } => {
                LipschitzData::constant_ratio(*kappa, &self.noise, self.dim, alpha)
            }
            Interaction::Custom { .. } => Err(Error::Unsupported(
                "re-deriving Lipschitz data requires a built-in kernel".into(),
            )),
        }
    }

    pub fn initial_abs_moment(&self, p: f64) -> f64 {
        self.initial.marginal().abs_moment(p)
    }

    pub fn initial_exp_abs_moment(&self, s: f64) -> f64 {
        self.initial.marginal().exp_abs_moment(s)
    }

    pub fn noise_exp_abs_moment(&self, s: f64) -> f64 {
        self.noise.exp_abs_moment(self.dim, s)
    }
}

/// The contraction and moment constants derived from a model's Lipschitz
/// data.  Window emptiness shows up as non-finite or non-positive values
/// here and as cleared flags in [`ValidationReport`]; nothing errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub norm_a: f64,
    /// ω = −log‖A‖.
    pub omega: f64,
    /// a₀ = (1 − e^{−ω}) / (2σ): the fixed-point window is δ < a₀.
    pub a0: f64,
    /// χ = e^{−ω} + 2δσ: one-step contraction factor of Ψ in W₁.
    pub chi: f64,
    /// γ = ‖A‖ + 2δσ: first-moment recursion rate.
    pub gamma: f64,
    /// a(α) = (4^{−α} − e^{−(1+α)ω}) / (2σ₁): poly-tail window scale.
    pub a_alpha: f64,
    /// κ₁ = 4^α (e^{−ω(1+α)} + 2δ^{1+α}σ₁): (1+α)-moment recursion rate.
    pub kappa1: f64,
    /// κ₂ = 4^α c₁.
    pub kappa2: f64,
    /// B(α) = κ₁ E|X₀|^{1+α} + κ₂/(1−κ₁); ∞ when κ₁ ≥ 1.
    pub b_alpha: f64,
    /// ϑ = (1 − 2σγ₀)/χ: per-step gain of the uniform-in-time estimate.
    pub theta_rate: f64,
    /// χ₁ = e^{−ω} + δM.
    pub chi1: f64,
    /// χ₂ = e^{−ω} + 2δM.
    pub chi2: f64,
    /// sup_n E|X_n| ≤ max{E|X₀|, δc₀/(1−γ)} (∞ when γ ≥ 1).
    pub mean_abs_sup: f64,
    /// E|X₀|^{1+α} of the single-particle marginal.
    pub initial_moment_1alpha: f64,
    pub delta: f64,
    pub alpha: f64,
    pub gamma0: f64,
    pub gamma_rate: f64,
    pub lipschitz: LipschitzData,
}

pub fn derived_constants<T: Real>(spec: &ModelSpec<T>) -> DerivedConstants {
    let lz = spec.lipschitz;
    let omega = spec.omega();
    let ea = spec.norm_a(); // e^{−ω} = ‖A‖
    let (delta, alpha) = (spec.delta, spec.alpha);
    let a0 = (1.0 - ea) / (2.0 * lz.sigma);
    let chi = ea + 2.0 * delta * lz.sigma;
    let gamma = ea + 2.0 * delta * lz.sigma;
    let four_a = 4.0f64.powf(alpha);
    let a_alpha = (four_a.recip() - ea.powf(1.0 + alpha)) / (2.0 * lz.sigma1);
    let kappa1 = four_a * (ea.powf(1.0 + alpha) + 2.0 * delta.powf(1.0 + alpha) * lz.sigma1);
    let kappa2 = four_a * lz.c1;
    let initial_moment_1alpha = spec.initial_abs_moment(1.0 + alpha);
    let b_alpha = if kappa1 < 1.0 {
        kappa1 * initial_moment_1alpha + kappa2 / (1.0 - kappa1)
    } else {
        f64::INFINITY
    };
    let theta_rate = (1.0 - 2.0 * lz.sigma * spec.gamma0) / chi;
    let chi1 = ea + delta * lz.ess_sup;
    let chi2 = ea + 2.0 * delta * lz.ess_sup;
    let mean_abs_sup = if gamma < 1.0 {
        spec.initial_abs_moment(1.0).max(delta * lz.c0 / (1.0 - gamma))
    } else {
        f64::INFINITY
    };
    DerivedConstants {
        norm_a: ea,
        omega,
        a0,
        chi,
        gamma,
        a_alpha,
        kappa1,
        kappa2,
        b_alpha,
        theta_rate,
        chi1,
        chi2,
        mean_abs_sup,
        initial_moment_1alpha,
        delta,
        alpha,
        gamma0: spec.gamma0,
        gamma_rate: spec.gamma_rate,
        lipschitz: lz,
    }
}

/// Which assumptions hold and which estimate families apply.  Regime flags
/// are exact inequalities on [`DerivedConstants`]; the Lipschitz audit is a
/// randomized lower-confidence check that the declared ratio bound is not
/// violated by the actual kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub sigma_finite: bool,
    pub c0_finite: bool,
    pub matrix_contractive: bool,
    pub moment_1alpha: bool,
    pub unique_invariant: bool,
    pub bounded_d: bool,
    pub exp_moments: bool,
    /// δ < a₀ — Ψ is a W₁-contraction with a unique fixed point.
    pub fixed_point_regime: bool,
    /// δ ≤ a₀ − γ₀ with γ₀ ∈ (0, a₀) — uniform-in-time L¹ propagation.
    pub uniform_l1_regime: bool,
    /// δ < min{a(α)^{1/(1+α)}, a₀ − γ₀} — polynomial concentration.
    pub poly_conc_regime: bool,
    /// δ < min{a₀ − γ₀, (1 − e^{−ω})/(2M)} — exponential concentration,
    /// exchangeable initial data.
    pub exp_conc_exch_regime: bool,
    /// δ < (1 − e^{−ω} − γ)/(2M) with γ ∈ (0, 1 − e^{−ω}) — exponential
    /// concentration, independent initial data.
    pub exp_conc_iid_regime: bool,
    pub lipschitz_ratio_probe: f64,
    pub lipschitz_audit_ok: bool,
    pub messages: Vec<String>,
}

impl ValidationReport {
    pub fn all_assumptions(&self) -> bool {
        self.sigma_finite
            && self.c0_finite
            && self.matrix_contractive
            && self.moment_1alpha
            && self.unique_invariant
    }
}

/// Exponent used when probing whether exponential moments are finite.
const EXP_MOMENT_PROBE: f64 = 1.0;
const AUDIT_SEED: u64 = 0xA0D17;
const AUDIT_PAIRS: usize = 160;
const AUDIT_CLOUD: usize = 12;

pub fn validate<T: Real>(spec: &ModelSpec<T>) -> ValidationReport {
    let dc = derived_constants(spec);
    let lz = spec.lipschitz;
    let mut messages = Vec::new();

    let sigma_finite = lz.sigma.is_finite() && lz.sigma >= 0.0;
    let c0_finite = lz.c0.is_finite() && lz.c0 >= 0.0;
    let matrix_contractive = dc.norm_a < 1.0;
    let moment_1alpha =
        lz.sigma1.is_finite() && lz.c1.is_finite() && dc.initial_moment_1alpha.is_finite();
    let unique_invariant = dc.chi < 1.0;
    let bounded_d = lz.ess_sup.is_finite();
    let exp_moments = spec.noise_exp_abs_moment(EXP_MOMENT_PROBE).is_finite()
        && spec.initial_exp_abs_moment(EXP_MOMENT_PROBE).is_finite();

    let fixed_point_regime = sigma_finite && matrix_contractive && spec.delta < dc.a0;
    let margin_ok = spec.gamma0 > 0.0 && spec.gamma0 < dc.a0;
    let uniform_l1_regime = fixed_point_regime && margin_ok && spec.delta <= dc.a0 - spec.gamma0;
    if !margin_ok {
        messages.push(format!(
            "margin gamma0 = {} lies outside (0, a0 = {})",
            spec.gamma0, dc.a0
        ));
    }

    let poly_window = if dc.a_alpha > 0.0 {
        dc.a_alpha.powf(1.0 / (1.0 + spec.alpha)).min(dc.a0 - spec.gamma0)
    } else {
        messages.push(format!(
            "polynomial window empty: a(alpha) = {} is not positive at alpha = {}",
            dc.a_alpha, spec.alpha
        ));
        0.0
    };
    let poly_conc_regime =
        moment_1alpha && matrix_contractive && margin_ok && spec.delta < poly_window;

    let exch_window = (dc.a0 - spec.gamma0).min((1.0 - dc.norm_a) / (2.0 * lz.ess_sup));
    let exp_conc_exch_regime =
        bounded_d && exp_moments && matrix_contractive && margin_ok && spec.delta < exch_window;

    let rate_ok = spec.gamma_rate > 0.0 && spec.gamma_rate < 1.0 - dc.norm_a;
    let iid_window = (1.0 - dc.norm_a - spec.gamma_rate) / (2.0 * lz.ess_sup);
    let exp_conc_iid_regime = bounded_d
        && exp_moments
        && matrix_contractive
        && rate_ok
        && spec.initial.is_iid()
        && spec.delta < iid_window;
    if !rate_ok {
        messages.push(format!(
            "contraction budget gamma_rate = {} lies outside (0, 1 - norm_a = {})",
            spec.gamma_rate,
            1.0 - dc.norm_a
        ));
    }
    if !spec.initial.is_iid() {
        messages.push("initial condition is exchangeable but not independent".into());
    }

    let (lipschitz_ratio_probe, lipschitz_audit_ok) = audit_lipschitz(spec, &mut messages);

    ValidationReport {
        sigma_finite,
        c0_finite,
        matrix_contractive,
        moment_1alpha,
        unique_invariant,
        bounded_d,
        exp_moments,
        fixed_point_regime,
        uniform_l1_regime,
        poly_conc_regime,
        exp_conc_exch_regime,
        exp_conc_iid_regime,
        lipschitz_ratio_probe,
        lipschitz_audit_ok,
        messages,
    }
}

/// Estimate sup over probe pairs of |f(x,μ,z) − f(x',μ',z)| / (|x−x'| + W₁(μ,μ'))
/// and compare it with the declared essential bound (or σ when D is
/// declared constant via ess sup = σ).
fn audit_lipschitz<T: Real>(spec: &ModelSpec<T>, messages: &mut Vec<String>) -> (f64, bool) {
    let d = spec.dim;
    let mut worst = 0.0f64;
    let mut x = vec![T::zero(); d];
    let mut xp = vec![T::zero(); d];
    let mut z = vec![T::zero(); d];
    let mut fx = vec![T::zero(); d];
    let mut fxp = vec![T::zero(); d];
    for probe in 0..AUDIT_PAIRS {
        let mut draws = NoiseKey::new(AUDIT_SEED, NoiseStream::Auxiliary, probe as u64, 0, 0).draws();
        for v in [&mut x, &mut xp].into_iter() {
            for c in v.iter_mut() {
                *c = T::of(2.0 * draws.next_gaussian());
            }
        }
        let mut cloud_a = Vec::with_capacity(AUDIT_CLOUD * d);
        let mut cloud_b = Vec::with_capacity(AUDIT_CLOUD * d);
        for _ in 0..AUDIT_CLOUD * d {
            cloud_a.push(T::of(2.0 * draws.next_gaussian()));
            cloud_b.push(T::of(2.0 * draws.next_gaussian()));
        }
        let ca = crate::cloud::ParticleCloud::new(d, 0, cloud_a).expect("finite");
        let cb = crate::cloud::ParticleCloud::new(d, 0, cloud_b).expect("finite");
        let w1 = crate::transport::w1_cloud(&ca, &cb).map(|r| r.value).unwrap_or(0.0);
        let ma = ca.mean();
        let mb = cb.mean();
        spec.noise.sample_into(&mut draws, &mut z);
        let mu_a = Measure::Cloud { cloud: &ca, mean: &ma };
        let mu_b = Measure::Cloud { cloud: &cb, mean: &mb };
        spec.interaction.eval(&x, &mu_a, &z, &mut fx);
        spec.interaction.eval(&xp, &mu_b, &z, &mut fxp);
        let num = fx
            .iter()
            .zip(&fxp)
            .map(|(a, b)| (*a - *b).wide().powi(2))
            .sum::<f64>()
            .sqrt();
        let dx = x
            .iter()
            .zip(&xp)
            .map(|(a, b)| (*a - *b).wide().powi(2))
            .sum::<f64>()
            .sqrt();
        let den = dx + w1;
        if den > 1e-9 {
            worst = worst.max(num / den);
        }
    }
    let declared = if spec.lipschitz.ess_sup.is_finite() {
        spec.lipschitz.ess_sup
    } else {
        f64::INFINITY
    };
    let ok = worst <= declared * (1.0 + 1e-6) + 1e-12;
    if !ok {
        messages.push(format!(
            "observed Lipschitz ratio {worst} exceeds declared bound {declared}"
        ));
    }
    (worst, ok)
}

/// Built-in models.  `mean-field-gaussian`: pull kernel with `N(0, I)`
/// innovations, `A = a·I` with `a = 0.5`, `δ = 0.1`, `κ = 1`, point-mass
/// initial at `(1, …, 1)`, `α = 1`.  `mean-field-bounded`: the same with
/// uniform `[-1, 1]^d` innovations.
pub fn builtin_model<T: Real>(name: &str) -> Result<ModelSpec<T>> {
    let doc = ModelDocument {
        family: name.to_string(),
        ..ModelDocument::default()
    };
    doc.to_spec()
}

fn default_dim() -> usize {
    1
}
fn default_contraction() -> f64 {
    0.5
}
fn default_delta() -> f64 {
    0.1
}
fn default_kappa() -> f64 {
    1.0
}
fn default_noise_scale() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    1.0
}
fn default_gamma0() -> f64 {
    DEFAULT_GAMMA0
}

/// Serializable model description — the configuration-file form.  Either
/// `contraction` (giving `A = a·I`) or the full `mat_a` may be supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub family: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_contraction")]
    pub contraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mat_a: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_noise_scale")]
    pub noise_scale: f64,
    #[serde(default)]
    pub initial: InitialDocument,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_gamma0")]
    pub gamma0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_rate: Option<f64>,
}

impl Default for ModelDocument {
    fn default() -> Self {
        ModelDocument {
            family: "mean-field-gaussian".into(),
            dim: default_dim(),
            contraction: default_contraction(),
            mat_a: None,
            delta: default_delta(),
            kappa: default_kappa(),
            noise_scale: default_noise_scale(),
            initial: InitialDocument::default(),
            alpha: default_alpha(),
            gamma0: default_gamma0(),
            gamma_rate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "kind")]
pub enum InitialDocument {
    /// Point mass at `level·(1,…,1)`.
    Point {
        #[serde(default = "default_noise_scale")]
        level: f64,
    },
    /// `N(level·(1,…,1), sd² I)`, iid across particles.
    Gaussian { level: f64, sd: f64 },
    /// Iid `N(level·(1,…,1), sd² I)` plus a shared `N(0, shift_sd² I)` shift.
    Exchangeable { level: f64, sd: f64, shift_sd: f64 },
}

impl Default for InitialDocument {
    fn default() -> Self {
        InitialDocument::Point { level: 1.0 }
    }
}

impl InitialDocument {
    fn to_spec<T: Real>(&self, dim: usize) -> Result<InitialLawSpec<T>> {
        let fill = |level: f64| vec![T::of(level); dim];
        match *self {
            InitialDocument::Point { level } => {
                Ok(InitialLawSpec::Iid(GaussianLaw::point_mass(fill(level))?))
            }
            InitialDocument::Gaussian { level, sd } => Ok(InitialLawSpec::Iid(
                GaussianLaw::isotropic(fill(level), T::of(sd * sd))?,
            )),
            InitialDocument::Exchangeable { level, sd, shift_sd } => {
                if !(shift_sd.is_finite() && shift_sd >= 0.0) {
                    return Err(Error::invalid("shift_sd", "must be finite and >= 0"));
                }
                Ok(InitialLawSpec::ExchangeableShift {
                    base: GaussianLaw::isotropic(fill(level), T::of(sd * sd))?,
                    shift_sd,
                })
            }
        }
    }
}

impl ModelDocument {
    pub fn to_spec<T: Real>(&self) -> Result<ModelSpec<T>> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::InvalidModel(format!(
                "built-in families require interaction strength kappa > 0, got {}",
                self.kappa
            )));
        }
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be >= 1"));
        }
        let mat_a = match &self.mat_a {
            Some(rows) => {
                let rows: Vec<Vec<T>> = rows
                    .iter()
                    .map(|r| r.iter().map(|&x| T::of(x)).collect())
                    .collect();
                let m = SquareMat::from_nested(&rows)?;
                if m.dim() != self.dim {
                    return Err(Error::DimensionMismatch {
                        context: "mat_a",
                        expected: self.dim,
                        found: m.dim(),
                    });
                }
                m
            }
            None => SquareMat::scaled_identity(self.dim, T::of(self.contraction)),
        };
        let noise = match self.family.as_str() {
            "mean-field-gaussian" => NoiseSpec::Gaussian { sd: self.noise_scale },
            "mean-field-bounded" => NoiseSpec::UniformBox { half_width: self.noise_scale },
            other => {
                return Err(Error::InvalidModel(format!("unknown model family `{other}`")))
            }
        };
        let lipschitz = LipschitzData::constant_ratio(self.kappa, &noise, self.dim, self.alpha)?;
        ModelSpec::new(
            self.family.clone(),
            mat_a,
            self.delta,
            Interaction::MeanFieldPull { kappa: self.kappa },
            noise,
            self.initial.to_spec(self.dim)?,
            lipschitz,
            self.alpha,
            self.gamma0,
            self.gamma_rate,
        )
    }
}

/// Exact marginal laws of the limit dynamics for the linear Gaussian
/// family: `m_{n+1} = A m_n`, `Σ_{n+1} = B Σ_n Bᵀ + δ² sd² I` with
/// `B = A − δκI`.  Returns laws for steps `0, …, horizon`.
pub fn exact_law_linear<T: Real>(
    spec: &ModelSpec<T>,
    horizon: usize,
) -> Result<Vec<GaussianLaw<T>>> {
    let (kappa, sd) = linear_gaussian_parameters(spec)?;
    let d = spec.dim;
    let mat_b = spec
        .mat_a
        .add(&SquareMat::scaled_identity(d, T::of(-spec.delta * kappa)));
    let q = SquareMat::scaled_identity(d, T::of(spec.delta * spec.delta * sd * sd));
    let start = spec.initial.marginal();
    let mut mean = start.mean().to_vec();
    let mut cov = start.cov().clone();
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(GaussianLaw::new(mean.clone(), cov.clone())?);
    let bt = mat_b.transpose();
    for _ in 0..horizon {
        mean = spec.mat_a.mul_vec(&mean);
        cov = mat_b.matmul(&cov).matmul(&bt).add(&q);
        out.push(GaussianLaw::new(mean.clone(), cov.clone())?);
    }
    Ok(out)
}

/// Stationary law of the limit dynamics for the linear Gaussian family:
/// zero mean and the fixed point of the covariance recursion.
pub fn exact_law_stationary<T: Real>(spec: &ModelSpec<T>) -> Result<GaussianLaw<T>> {
    let (kappa, sd) = linear_gaussian_parameters(spec)?;
    let d = spec.dim;
    let mat_b = spec
        .mat_a
        .add(&SquareMat::scaled_identity(d, T::of(-spec.delta * kappa)));
    let q = SquareMat::scaled_identity(d, T::of(spec.delta * spec.delta * sd * sd));
    let cov = lyapunov_fixed_point(&mat_b, &q)?;
    GaussianLaw::new(vec![T::zero(); d], cov)
}

fn linear_gaussian_parameters<T: Real>(spec: &ModelSpec<T>) -> Result<(f64, f64)> {
    let kappa = match spec.interaction {
        Interaction::MeanFieldPull { kappa } => kappa,
        _ => {
            return Err(Error::UnsupportedOracle(
                "exact laws require the mean-field pull kernel".into(),
            ))
        }
    };
    let sd = match spec.noise {
        NoiseSpec::Gaussian { sd } => sd,
        _ => {
            return Err(Error::UnsupportedOracle(
                "exact laws require Gaussian innovations".into(),
            ))
        }
    };
    if !spec.initial.is_iid() {
        return Err(Error::UnsupportedOracle(
            "exact laws require independent initial data (a shared shift makes the limit law random)"
                .into(),
        ));
    }
    Ok((kappa, sd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn builtin_defaults_constants() {
        let spec = builtin_model::<f64>("mean-field-gaussian").unwrap();
        let dc = derived_constants(&spec);
        assert_relative_eq!(dc.norm_a, 0.5, max_relative = 1e-12);
        assert_relative_eq!(dc.omega, std::f64::consts::LN_2, max_relative = 1e-12);
        assert_relative_eq!(dc.a0, 0.25, max_relative = 1e-12);
        assert_relative_eq!(dc.chi, 0.7, max_relative = 1e-12);
        assert_relative_eq!(dc.gamma, 0.7, max_relative = 1e-12);
        assert_relative_eq!(dc.theta_rate, 9.0 / 7.0, max_relative = 1e-12);
        assert_relative_eq!(dc.chi1, 0.6, max_relative = 1e-12);
        assert_relative_eq!(dc.chi2, 0.7, max_relative = 1e-12);
        // α = 1, ω = ln 2: 4^{-1} = e^{-2ω} exactly, so the poly window closes.
        assert_relative_eq!(dc.a_alpha, 0.0, epsilon = 1e-14);
        assert_relative_eq!(dc.kappa1, 1.08, max_relative = 1e-12);
        assert!(dc.b_alpha.is_infinite());
        assert_relative_eq!(dc.kappa2, 4.0, max_relative = 1e-12);
        assert_relative_eq!(dc.mean_abs_sup, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn default_validation_flags() {
        let spec = builtin_model::<f64>("mean-field-gaussian").unwrap();
        let report = validate(&spec);
        assert!(report.all_assumptions());
        assert!(report.bounded_d); // D ≡ κ = 1
        assert!(report.exp_moments);
        assert!(report.fixed_point_regime);
        assert!(report.uniform_l1_regime);
        assert!(!report.poly_conc_regime); // empty window at a = 0.5, α = 1
        assert!(report.exp_conc_exch_regime);
        assert!(report.exp_conc_iid_regime);
        assert!(report.lipschitz_audit_ok);
        assert!(report.lipschitz_ratio_probe <= 1.0 + 1e-6);
    }

    #[test]
    fn poly_window_opens_at_smaller_contraction() {
        let doc = ModelDocument { contraction: 0.4, ..ModelDocument::default() };
        let spec = doc.to_spec::<f64>().unwrap();
        let dc = derived_constants(&spec);
        assert_relative_eq!(dc.a_alpha, 0.045, max_relative = 1e-12);
        assert_relative_eq!(dc.kappa1, 0.72, max_relative = 1e-12);
        assert!(dc.b_alpha.is_finite());
        let report = validate(&spec);
        assert!(report.poly_conc_regime);
    }

    #[test]
    fn builtin_rejects_bad_input() {
        assert!(builtin_model::<f64>("no-such-family").is_err());
        let doc = ModelDocument { kappa: 0.0, ..ModelDocument::default() };
        assert!(doc.to_spec::<f64>().is_err());
        let doc = ModelDocument { delta: -0.1, ..ModelDocument::default() };
        assert!(doc.to_spec::<f64>().is_err());
    }

    #[test]
    fn document_round_trips_through_json() {
        let doc = ModelDocument {
            family: "mean-field-bounded".into(),
            dim: 2,
            contraction: 0.4,
            initial: InitialDocument::Exchangeable { level: 0.5, sd: 0.3, shift_sd: 0.2 },
            ..ModelDocument::default()
        };
        let text = serde_json::to_string(&doc).unwrap();
        let back: ModelDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(doc, back);
        assert!(back.to_spec::<f64>().is_ok());
        // Unknown keys are rejected.
        assert!(serde_json::from_str::<ModelDocument>(
            "{\"family\":\"mean-field-gaussian\",\"bogus\":1}"
        )
        .is_err());
    }

    #[test]
    fn exact_laws_match_hand_recursion() {
        let spec = builtin_model::<f64>("mean-field-gaussian").unwrap();
        let laws = exact_law_linear(&spec, 3).unwrap();
        let means: Vec<f64> = laws.iter().map(|l| l.mean_1d()).collect();
        assert_eq!(means, vec![1.0, 0.5, 0.25, 0.125]);
        // Σ_{n+1} = 0.16 Σ_n + 0.01 from Σ₀ = 0.
        let vars: Vec<f64> = laws.iter().map(|l| l.var_1d()).collect();
        assert_relative_eq!(vars[1], 0.01, max_relative = 1e-12);
        assert_relative_eq!(vars[2], 0.0116, max_relative = 1e-12);
        assert_relative_eq!(vars[3], 0.011856, max_relative = 1e-12);
        let st = exact_law_stationary(&spec).unwrap();
        assert_relative_eq!(st.var_1d(), 0.01 / 0.84, max_relative = 1e-10);
        assert_eq!(st.mean_1d(), 0.0);
    }

    #[test]
    fn exact_laws_refuse_out_of_family_models() {
        let spec = builtin_model::<f64>("mean-field-bounded").unwrap();
        assert!(matches!(
            exact_law_linear(&spec, 1),
            Err(Error::UnsupportedOracle(_))
        ));
        let doc = ModelDocument {
            initial: InitialDocument::Exchangeable { level: 1.0, sd: 0.1, shift_sd: 0.4 },
            ..ModelDocument::default()
        };
        let spec = doc.to_spec::<f64>().unwrap();
        assert!(exact_law_stationary(&spec).is_err());
    }

    #[test]
    fn exchangeable_marginal_adds_shift_variance() {
        let doc = ModelDocument {
            initial: InitialDocument::Exchangeable { level: 1.0, sd: 0.3, shift_sd: 0.4 },
            ..ModelDocument::default()
        };
        let spec = doc.to_spec::<f64>().unwrap();
        let marg = spec.initial.marginal();
        assert_relative_eq!(marg.var_1d(), 0.25, max_relative = 1e-12);
        assert!(!spec.initial.is_iid());
    }

    #[test]
    fn shared_shift_is_shared_within_replicate() {
        let doc = ModelDocument {
            initial: InitialDocument::Exchangeable { level: 0.0, sd: 0.0, shift_sd: 1.0 },
            ..ModelDocument::default()
        };
        let spec = doc.to_spec::<f64>().unwrap();
        let cloud = spec.initial.sample_replicate(8, 9, 4);
        let first = cloud.point(0)[0];
        assert!(first != 0.0);
        assert!(cloud.points().all(|p| p[0] == first));
        // Different replicate, different shift.
        let other = spec.initial.sample_replicate(8, 9, 5);
        assert!(other.point(0)[0] != first);
    }

    #[test]
    fn noise_moments_reference_values() {
        let g = NoiseSpec::Gaussian { sd: 2.0 };
        assert_relative_eq!(
            g.abs_moment(1, 1.0).unwrap(),
            2.0 * (2.0 / std::f64::consts::PI).sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(g.abs_moment(3, 2.0).unwrap(), 12.0, max_relative = 1e-12);
        let b = NoiseSpec::UniformBox { half_width: 1.0 };
        assert_relative_eq!(b.abs_moment(1, 1.0).unwrap(), 0.5, max_relative = 1e-12);
        assert_relative_eq!(b.abs_moment(1, 2.0).unwrap(), 1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(b.ess_sup_abs(4), 2.0, max_relative = 1e-12);
        // E e^{s|ε|} for the 1d box: (e^{sb} − 1)/(sb).
        assert_relative_eq!(
            b.exp_abs_moment(1, 0.7),
            (0.7f64.exp() - 1.0) / 0.7,
            max_relative = 1e-12
        );
    }
}
