//! Gaussian laws on `R^d`.
//!
//! The linear mean-field model admits a closed-form limit law: if
//! `X_{n+1} = A X_n + δ(-κ(X_n - m_n) + ε_{n+1})` with `m_n = E X_n`, then
//! `m_{n+1} = A m_n` and the centred part is the linear recursion
//! `Σ_{n+1} = B Σ_n Bᵀ + δ² Σ_ε` with `B = A - δκ I`.  [`GaussianLaw`]
//! represents such laws exactly and [`lyapunov_fixed_point`] computes the
//! stationary covariance, giving the oracle that simulation output is
//! verified against.

use crate::error::{Error, Result};
use crate::keys::KeyedDraws;
use crate::linalg::SquareMat;
use crate::numerics;
use crate::scalar::Real;

/// A Gaussian law `N(mean, cov)`; `cov` may be singular (point masses and
/// degenerate directions are allowed).  The Cholesky factor is computed once
/// at construction, so sampling is a matrix-vector product.
#[derive(Debug, Clone)]
pub struct GaussianLaw<T: Real> {
    mean: Vec<T>,
    cov: SquareMat<T>,
    chol: SquareMat<T>,
}

impl<T: Real> GaussianLaw<T> {
    pub fn new(mean: Vec<T>, cov: SquareMat<T>) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                context: "gaussian law",
                expected: cov.dim(),
                found: mean.len(),
            });
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("mean", "contains a non-finite entry"));
        }
        let chol = cov.cholesky()?;
        Ok(GaussianLaw { mean, cov, chol })
    }

    /// The point mass at `x`, encoded as a Gaussian with zero covariance.
    pub fn point_mass(x: Vec<T>) -> Result<Self> {
        let d = x.len();
        GaussianLaw::new(x, SquareMat::zeros(d))
    }

    pub fn isotropic(mean: Vec<T>, variance: T) -> Result<Self> {
        if !(variance.is_finite() && variance >= T::zero()) {
            return Err(Error::invalid("variance", "must be finite and >= 0"));
        }
        let d = mean.len();
        GaussianLaw::new(mean, SquareMat::scaled_identity(d, variance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn cov(&self) -> &SquareMat<T> {
        &self.cov
    }

    pub fn mean_1d(&self) -> T {
        self.mean[0]
    }

    pub fn var_1d(&self) -> T {
        self.cov.at(0, 0)
    }

    pub fn std_1d(&self) -> T {
        self.cov.at(0, 0).sqrt()
    }

    /// Draw one sample into `out` (`mean + L·z`, `z` standard normal).
    pub fn sample_into(&self, draws: &mut KeyedDraws, out: &mut [T]) {
        let d = self.dim();
        debug_assert_eq!(out.len(), d);
        let mut z = vec![T::zero(); d];
        for zi in z.iter_mut() {
            *zi = T::of(draws.next_gaussian());
        }
        // out = mean + L z, L lower triangular.
        for i in 0..d {
            let mut acc = self.mean[i];
            for j in 0..=i {
                acc = acc + self.chol.at(i, j) * z[j];
            }
            out[i] = acc;
        }
    }

    /// `Φ⁻¹`-based quantile; one-dimensional laws only.
    pub fn quantile_1d(&self, p: f64) -> T {
        debug_assert_eq!(self.dim(), 1);
        self.mean[0] + self.std_1d() * T::of(numerics::normal_quantile(p))
    }

    pub fn cdf_1d(&self, x: T) -> f64 {
        debug_assert_eq!(self.dim(), 1);
        let sd = self.std_1d().wide();
        let m = self.mean[0].wide();
        if sd == 0.0 {
            return if x.wide() >= m { 1.0 } else { 0.0 };
        }
        numerics::normal_cdf((x.wide() - m) / sd)
    }

    fn is_point_mass(&self) -> bool {
        (0..self.dim()).all(|i| self.cov.at(i, i) == T::zero())
    }

    /// `E e^{s|X|}`.  Exact for `d = 1` and for point masses; for other
    /// `d ≥ 2` laws returns the product bound `∏_i E e^{s|X_i|}` (valid
    /// since `|x| ≤ Σ|x_i|`), which is the conservative direction for every
    /// use in the concentration estimates.
    pub fn exp_abs_moment(&self, s: f64) -> f64 {
        if self.dim() == 1 {
            return numerics::gaussian_exp_abs_moment(
                self.mean[0].wide(),
                self.std_1d().wide(),
                s,
            );
        }
        if self.is_point_mass() {
            let norm = self.mean.iter().map(|x| x.wide().powi(2)).sum::<f64>().sqrt();
            return (s * norm).exp();
        }
        let mut prod = 1.0f64;
        for i in 0..self.dim() {
            let sd = self.cov.at(i, i).wide().max(0.0).sqrt();
            prod *= numerics::gaussian_exp_abs_moment(self.mean[i].wide(), sd, s);
            if !prod.is_finite() {
                return f64::INFINITY;
            }
        }
        prod
    }

    /// `E|X|^p`, `p ≥ 1`.  Exact (quadrature) for `d = 1`; for `d ≥ 2` the
    /// Minkowski upper bound `(|m| + σ_max (E|Z_d|^p)^{1/p})^p` with `Z_d`
    /// standard `d`-dimensional normal.
    pub fn abs_moment(&self, p: f64) -> f64 {
        assert!(p >= 1.0, "abs_moment requires p >= 1");
        let d = self.dim();
        if d == 1 {
            let m = self.mean[0].wide();
            let sd = self.std_1d().wide();
            if sd == 0.0 {
                return m.abs().powf(p);
            }
            // Split E|m+σz|^p at the kink z* = -m/σ and substitute
            // z = z* ± u² on each side: the |z−z*|^p factor becomes the
            // much smoother u^{2p}·(2u du), restoring fast GL convergence.
            // ±12σ truncation is far below f64 precision.
            let kink = (-m / sd).clamp(-12.0, 12.0);
            let (nodes, weights) = numerics::gauss_legendre(96);
            let mut total = 0.0;
            for sign in [-1.0, 1.0] {
                let span = if sign < 0.0 { kink + 12.0 } else { 12.0 - kink };
                if span <= 0.0 {
                    continue;
                }
                let half = 0.5 * span.sqrt();
                for (&x, &w) in nodes.iter().zip(&weights) {
                    let u = half * (1.0 + x);
                    let z = kink + sign * u * u;
                    total += w * half * 2.0 * u
                        * (m + sd * z).abs().powf(p)
                        * numerics::normal_pdf(z);
                }
            }
            total
        } else {
            let norm_m = self.mean.iter().map(|x| x.wide().powi(2)).sum::<f64>().sqrt();
            let sd_max = (0..d)
                .map(|i| self.cov.at(i, i).wide().max(0.0).sqrt())
                .fold(0.0f64, f64::max);
            let z_p = numerics::gaussian_abs_moment(d, p).powf(1.0 / p);
            (norm_m + sd_max * z_p).powf(p)
        }
    }
}

/// Fixed point of `Σ ↦ B Σ Bᵀ + Q` by iteration from `Σ = Q`.
///
/// Converges geometrically at rate `‖B‖²`; requires `‖B‖ < 1`.
pub fn lyapunov_fixed_point<T: Real>(b: &SquareMat<T>, q: &SquareMat<T>) -> Result<SquareMat<T>> {
    if b.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            context: "lyapunov",
            expected: b.dim(),
            found: q.dim(),
        });
    }
    let norm = b.operator_norm();
    if !(norm < T::one()) {
        return Err(Error::invalid(
            "b",
            format!("operator norm {norm} is not < 1; no stable fixed point"),
        ));
    }
    let bt = b.transpose();
    let tol = T::of(1e-14);
    let mut sigma = q.clone();
    let max_iters = 1_000_000u64;
    for it in 0..max_iters {
        let next = b.matmul(&sigma).matmul(&bt).add(q);
        let diff = next.add(&sigma.scale(T::of(-1.0))).max_abs_entry();
        let scale = T::one() + next.max_abs_entry();
        sigma = next;
        if diff <= tol * scale {
            return Ok(sigma);
        }
        if it == max_iters - 1 {
            return Err(Error::NoConvergence {
                context: "lyapunov fixed point",
                iterations: max_iters,
                residual: diff.wide(),
            });
        }
    }
    unreachable!()
}
