//! Scalar numerics shared across modules: Gaussian special functions,
//! absolute moments, quadrature, 1-D minimization, and small-sample
//! statistics.
//!
//! Everything here computes in `f64`.  Callers generic over the working
//! scalar convert at the boundary; `f64` precision dominates every tolerance
//! used elsewhere in the crate.

use crate::error::{Error, Result};

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

// ── Gaussian special functions ──────────────────────────────────────────

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

/// Standard normal CDF via the complementary error function, accurate in
/// both tails.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF.
///
/// Acklam's rational approximation refined by one Halley step against the
/// `erfc`-based CDF; absolute error is at the last-few-ulps level across
/// `(0, 1)`, far below any tolerance used in this crate.
pub fn normal_quantile(p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "quantile argument must be in [0,1]");
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // One Halley step: e = Φ(x) − p, u = e·√(2π)·exp(x²/2).
    let e = normal_cdf(x) - p;
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// `E|Z|^p` for `Z` standard normal in `R^d` (Euclidean norm):
/// `2^{p/2} Γ((d+p)/2) / Γ(d/2)`.
pub fn gaussian_abs_moment(d: usize, p: f64) -> f64 {
    assert!(d >= 1 && p >= 0.0);
    let lg = libm::lgamma(0.5 * (d as f64 + p)) - libm::lgamma(0.5 * d as f64);
    (0.5 * p * std::f64::consts::LN_2 + lg).exp()
}

/// Mean of `|X|` for scalar `X ~ N(m, s²)` (folded normal).
pub fn folded_normal_mean(m: f64, s: f64) -> f64 {
    if s == 0.0 {
        return m.abs();
    }
    let a = m / s;
    s * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * a * a).exp()
        + m * (2.0 * normal_cdf(a) - 1.0)
}

/// `E exp(s|X|)` for scalar `X ~ N(m, sd²)`, `s ≥ 0`.
pub fn gaussian_exp_abs_moment(m: f64, sd: f64, s: f64) -> f64 {
    assert!(s >= 0.0);
    if sd == 0.0 {
        return (s * m.abs()).exp();
    }
    let half = |mu: f64| {
        // E[e^{s X} 1_{X>0}] for X ~ N(mu, sd²)
        let log_term = s * mu + 0.5 * s * s * sd * sd;
        log_term.exp() * normal_cdf(mu / sd + s * sd)
    };
    half(m) + half(-m)
}

// ── Quadrature ──────────────────────────────────────────────────────────

/// Gauss–Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess for the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and its derivative via the three-term recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `∫ f` over the box `[-b, b]^d` of the *normalized* uniform law, i.e.
/// `E f(U)` for `U` uniform on the box, via a tensor-product Gauss–Legendre
/// rule.  Each axis is split at 0 into two panels so the `|x|`-kinked
/// integrands this serves stay piecewise smooth.  Supported up to `d = 4`;
/// the node count per axis shrinks with dimension to keep the total work
/// bounded.
pub fn uniform_box_expectation(
    d: usize,
    b: f64,
    f: impl Fn(&[f64]) -> f64,
) -> Result<f64> {
    if !(1..=4).contains(&d) {
        return Err(Error::Unsupported(format!(
            "uniform-box expectation implemented for 1 <= d <= 4, got d = {d}"
        )));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::invalid("b", "box half-width must be positive and finite"));
    }
    let per_panel = [48usize, 32, 20, 12][d - 1];
    let (nodes, weights) = gauss_legendre(per_panel);
    // Panel [0, b] then its mirror; weights carry the per-axis 1/(2b)
    // normalization times the b/2 panel Jacobian.
    let per_axis = 2 * per_panel;
    let mut pos = Vec::with_capacity(per_axis);
    let mut wts = Vec::with_capacity(per_axis);
    for (&x, &w) in nodes.iter().zip(&weights) {
        pos.push(0.5 * b * (1.0 + x));
        wts.push(0.25 * w);
    }
    for k in 0..per_panel {
        pos.push(-pos[k]);
        wts.push(wts[k]);
    }
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0f64; d];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for (k, &i) in idx.iter().enumerate() {
            point[k] = pos[i];
            w *= wts[i];
        }
        total += w * f(&point);
        // Odometer increment over the d-dimensional index.
        let mut k = 0;
        loop {
            if k == d {
                return Ok(total);
            }
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

// ── 1-D optimization ────────────────────────────────────────────────────

/// Golden-section minimization of a unimodal function on `[a, b]`, run to a
/// relative interval width of `rel_tol`.  Returns `(argmin, min)`.
pub fn golden_section_min(
    mut a: f64,
    mut b: f64,
    rel_tol: f64,
    f: impl Fn(f64) -> f64,
) -> (f64, f64) {
    assert!(a < b);
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    // Bounded iteration count: each step shrinks the interval by 1/φ.
    for _ in 0..200 {
        if (b - a).abs() <= rel_tol * (a.abs() + b.abs() + 1e-300) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Golden-section maximization; returns `(argmax, max)`.
pub fn golden_section_max(a: f64, b: f64, rel_tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let (x, neg) = golden_section_min(a, b, rel_tol, |t| -f(t));
    (x, -neg)
}

// ── Sample statistics ───────────────────────────────────────────────────

pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    crate::scalar::pairwise_sum(xs) / xs.len() as f64
}

/// Standard error of the sample mean (unbiased variance / √n); zero for a
/// single observation.
pub fn stderr_of_mean(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / ((n - 1) as f64 * n as f64)).sqrt()
}

/// Wilson score interval for a binomial proportion at normal quantile `z`
/// (`z = 1.959964…` for 95%).
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Ordinary least squares fit `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (NaN when fewer than 3 points).
    pub slope_stderr: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "line fit needs at least two points");
    let n = xs.len() as f64;
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    assert!(sxx > 0.0, "line fit needs non-degenerate abscissae");
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if xs.len() >= 3 {
        let rss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let r = y - intercept - slope * x;
                r * r
            })
            .sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LineFit {
        slope,
        intercept,
        slope_stderr,
    }
}

/// Numerically stable `log(Σ exp(x_i))`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_cdf_reference_values() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(normal_cdf(1.0), 0.841344746068543, epsilon = 1e-12);
        assert_abs_diff_eq!(normal_cdf(-2.5), 0.006209665325776132, epsilon = 1e-14);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-10, 1e-4, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-6] {
            let z = normal_quantile(p);
            assert_abs_diff_eq!(normal_cdf(z), p, epsilon = 1e-13 * p.max(1e-3));
        }
    }

    #[test]
    fn gaussian_abs_moment_known_cases() {
        // E|Z| in 1d = sqrt(2/pi); E|Z|^2 in d dims = d.
        assert_abs_diff_eq!(
            gaussian_abs_moment(1, 1.0),
            (2.0 / std::f64::consts::PI).sqrt(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(gaussian_abs_moment(3, 2.0), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn folded_mean_limits() {
        assert_abs_diff_eq!(
            folded_normal_mean(0.0, 1.0),
            (2.0 / std::f64::consts::PI).sqrt(),
            epsilon = 1e-14
        );
        // Far from the origin |X| ≈ X.
        assert_abs_diff_eq!(folded_normal_mean(10.0, 1.0), 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(folded_normal_mean(-3.0, 0.0), 3.0, epsilon = 0.0);
    }

    #[test]
    fn exp_abs_moment_against_quadrature() {
        // E e^{0.7|X|}, X ~ N(0.3, 0.8²), by dense midpoint quadrature.
        let (m, sd, s) = (0.3, 0.8, 0.7);
        let mut q = 0.0;
        let n = 400_000;
        let (lo, hi) = (m - 12.0 * sd, m + 12.0 * sd);
        let h = (hi - lo) / n as f64;
        for i in 0..n {
            let x = lo + (i as f64 + 0.5) * h;
            q += (s * x.abs()).exp() * normal_pdf((x - m) / sd) / sd * h;
        }
        assert_abs_diff_eq!(gaussian_exp_abs_moment(m, sd, s), q, epsilon = 1e-8);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // Degree-15 polynomial integrated exactly by an 8-point rule.
        let int: f64 = x
            .iter()
            .zip(&w)
            .map(|(&x, &w)| w * (x.powi(14) + 2.0 * x.powi(7) + 1.0))
            .sum();
        let exact = 2.0 / 15.0 + 2.0; // odd term vanishes
        assert_abs_diff_eq!(int, exact, epsilon = 1e-13);
    }

    #[test]
    fn box_expectation_matches_closed_forms() {
        // E|u| on [-b,b] in 1d is b/2.
        let e = uniform_box_expectation(1, 2.0, |p| p[0].abs()).unwrap();
        assert_abs_diff_eq!(e, 1.0, epsilon = 1e-9);
        // E|u|² on the unit box in d dims is d/3.
        let e2 = uniform_box_expectation(3, 1.0, |p| p.iter().map(|x| x * x).sum()).unwrap();
        assert_abs_diff_eq!(e2, 1.0, epsilon = 1e-10);
        assert!(uniform_box_expectation(5, 1.0, |_| 0.0).is_err());
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let (x, v) = golden_section_min(-10.0, 3.0, 1e-12, |t| (t - 1.25) * (t - 1.25) + 7.0);
        // Derivative-free argmin accuracy is limited to ~√(ε·f/f″) ≈ 3e-8
        // in doubles; the *value* is quadratically flat and far tighter.
        assert_abs_diff_eq!(x, 1.25, epsilon = 1e-6);
        assert_abs_diff_eq!(v, 7.0, epsilon = 1e-12);
    }

    #[test]
    fn wilson_interval_contains_point_estimate() {
        let (lo, hi) = wilson_interval(8, 100, 1.96);
        assert!(lo < 0.08 && 0.08 < hi);
        let (lo0, hi0) = wilson_interval(0, 50, 1.96);
        assert_eq!(lo0, 0.0);
        assert!(hi0 > 0.0 && hi0 < 0.2);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let fit = fit_line(&xs, &ys);
        assert_abs_diff_eq!(fit.slope, -0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(fit.intercept, 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(fit.slope_stderr, 0.0, epsilon = 1e-10);
    }
}
