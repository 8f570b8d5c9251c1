//! Noisy-circle model: sampler, closed-form density, true ridge radius and
//! the Hausdorff distance used to score estimated ridges.
//!
//! `X = r (cos 2πU, sin 2πU) + σ Z` has density
//! `f(x) = (2πσ²)⁻¹ I₀(r‖x‖/σ²) exp(-(r² + ‖x‖²)/(2σ²))`. Its ridge is the
//! circle of radius `t*` solving `ν(r t*/σ²) = r²/σ²` with
//! `ν(t) = t I₀(t)/I₁(t)`, or the origin when `r/σ <= √2`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure_finite, Error, Result};
use crate::parallel;
use crate::points::{dist2, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleModel {
    r: f64,
    sigma: f64,
}

impl CircleModel {
    pub fn new(r: f64, sigma: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0 && sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Domain(format!(
                "circle radius {r} and noise level {sigma} must be positive"
            )));
        }
        Ok(Self { r, sigma })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `r / σ²`.
    pub fn alpha(&self) -> f64 {
        self.r / (self.sigma * self.sigma)
    }
}

/// `n` draws from the model. The generator is ChaCha8 seeded with
/// `seed_from_u64(seed)`; each point consumes one uniform (`U`) and then two
/// standard normals (`Z`).
pub fn sample_circle(model: &CircleModel, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let angle = 2.0 * PI * u;
        coords.push(model.r * angle.cos() + model.sigma * z1);
        coords.push(model.r * angle.sin() + model.sigma * z2);
    }
    PointCloud::new(2, coords)
}

/// Beyond this argument `log I₀`, `log I₁` use the asymptotic expansion.
const ASYMPTOTIC: f64 = 1e4;

/// `log Σ_k a_k` for the series `a_k = (t/2)^{2k+order} / (k! (k+order)!)`,
/// summed outward from its largest term so nothing overflows.
fn log_bessel_series(t: f64, order: u32) -> f64 {
    let half = 0.5 * t;
    let o = order as f64;
    let peak = ((half * half + 0.25 * o * o).sqrt() - 0.5 * o).floor().max(0.0);
    let log_term = |k: f64| (2.0 * k + o) * half.ln() - libm::lgamma(k + 1.0) - libm::lgamma(k + o + 1.0);
    let mut sum = 1.0;
    // Upward: a_{k+1}/a_k = half² / ((k+1)(k+1+order)).
    let mut term = 1.0;
    let mut k = peak;
    loop {
        term *= half * half / ((k + 1.0) * (k + 1.0 + o));
        sum += term;
        k += 1.0;
        if term < 1e-17 * sum {
            break;
        }
    }
    // Downward: a_{k-1}/a_k = k(k+order) / half².
    let mut term = 1.0;
    let mut k = peak;
    while k >= 1.0 {
        term *= k * (k + o) / (half * half);
        sum += term;
        k -= 1.0;
        if term < 1e-17 * sum {
            break;
        }
    }
    log_term(peak) + sum.ln()
}

/// `log I_order(t)` for `t >= ASYMPTOTIC` via the large-argument expansion.
fn log_bessel_asymptotic(t: f64, order: u32) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..8 {
        let kf = k as f64;
        term *= -(mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * t);
        sum += term;
    }
    t - 0.5 * (2.0 * PI * t).ln() + sum.ln()
}

/// `log I₀(t)`.
pub fn log_i0(t: f64) -> f64 {
    let t = t.abs();
    if t == 0.0 {
        0.0
    } else if t >= ASYMPTOTIC {
        log_bessel_asymptotic(t, 0)
    } else {
        log_bessel_series(t, 0)
    }
}

/// `log I₁(t)` for `t > 0`.
pub fn log_i1(t: f64) -> f64 {
    if t <= 0.0 {
        f64::NEG_INFINITY
    } else if t >= ASYMPTOTIC {
        log_bessel_asymptotic(t, 1)
    } else {
        log_bessel_series(t, 1)
    }
}

pub fn i0(t: f64) -> f64 {
    log_i0(t).exp()
}

pub fn i1(t: f64) -> f64 {
    if t < 0.0 {
        -i1(-t)
    } else if t == 0.0 {
        0.0
    } else {
        log_i1(t).exp()
    }
}

/// Arguments up to this value use the plain power series.
const SERIES_LIMIT: f64 = 30.0;

/// `(I₀(t), I₁(t)/t)` by direct power series; `t <= SERIES_LIMIT`.
fn series_i0_i1_over_t(t: f64) -> (f64, f64) {
    let q = 0.25 * t * t;
    let (mut s0, mut s1) = (0.0, 0.0);
    let mut a = 1.0; // q^k / k!²
    let mut k = 0.0;
    loop {
        let b = 0.5 * a / (k + 1.0); // q^k / (2 k! (k+1)!)
        s0 += a;
        s1 += b;
        if a <= 1e-16 * s0 && b <= 1e-16 * s1 {
            break;
        }
        k += 1.0;
        a *= q / (k * k);
    }
    (s0, s1)
}

/// `I₁(t)/I₀(t)` by the backward continued fraction
/// `I_{k+1}/I_k = 1 / (2(k+1)/t + I_{k+2}/I_{k+1})`.
fn ratio_continued_fraction(t: f64) -> f64 {
    let top = t.ceil() as usize + 200;
    let mut ratio = 0.0;
    for k in (0..top).rev() {
        ratio = 1.0 / (2.0 * (k as f64 + 1.0) / t + ratio);
    }
    ratio
}

/// `A(t) = I₁(t)/I₀(t)` for `t >= 0`.
pub fn bessel_ratio(t: f64) -> f64 {
    if t <= SERIES_LIMIT {
        let (s0, s1) = series_i0_i1_over_t(t);
        t * s1 / s0
    } else {
        ratio_continued_fraction(t)
    }
}

/// `A(t)/t`, finite at `t = 0` where it equals ½.
fn bessel_ratio_over_t(t: f64) -> f64 {
    if t <= SERIES_LIMIT {
        let (s0, s1) = series_i0_i1_over_t(t);
        s1 / s0
    } else {
        ratio_continued_fraction(t) / t
    }
}

/// `ν(t) = t I₀(t)/I₁(t)`, with `ν(0) = 2`.
pub fn bessel_nu(t: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("ν is defined for finite t >= 0, got {t}")));
    }
    Ok(1.0 / bessel_ratio_over_t(t))
}

/// The model density at `x`.
pub fn circle_density(model: &CircleModel, x: &[f64; 2]) -> Result<f64> {
    ensure_finite(x, "density argument")?;
    let s2 = model.sigma * model.sigma;
    let rho = x[0].hypot(x[1]);
    let log = log_i0(model.alpha() * rho) - (model.r * model.r + rho * rho) / (2.0 * s2);
    Ok(log.exp() / (2.0 * PI * s2))
}

/// `D² log f(x)` in closed form.
///
/// With `ρ = ‖x‖`, `u = x/ρ` and `L(ρ) = log I₀(αρ) - ρ²/(2σ²)`, the Hessian
/// is `L''(ρ) uuᵀ + (L'(ρ)/ρ)(I - uuᵀ)` where `L' = α A(αρ) - ρ/σ²`,
/// `L'' = α² A'(αρ) - 1/σ²` and `A' (t) = 1 - A(t)/t - A(t)²`.
pub fn log_density_hessian(model: &CircleModel, x: &[f64; 2]) -> Result<[[f64; 2]; 2]> {
    ensure_finite(x, "Hessian argument")?;
    let s2 = model.sigma * model.sigma;
    let alpha = model.alpha();
    let rho = x[0].hypot(x[1]);
    let t = alpha * rho;
    let a = bessel_ratio(t);
    let a_over_t = bessel_ratio_over_t(t);
    let tangential = alpha * alpha * a_over_t - 1.0 / s2;
    let radial = alpha * alpha * (1.0 - a_over_t - a * a) - 1.0 / s2;
    let u = if rho > 0.0 { [x[0] / rho, x[1] / rho] } else { [1.0, 0.0] };
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { 1.0 } else { 0.0 };
            out[i][j] = radial * u[i] * u[j] + tangential * (id - u[i] * u[j]);
        }
    }
    Ok(out)
}

/// Radius of the density ridge: 0 when `r/σ <= √2`, else the root of
/// `ν(r t/σ²) = r²/σ²` on `[0, r]` by bisection to `1e-10`.
pub fn true_ridge_radius(model: &CircleModel) -> f64 {
    let (r, s) = (model.r, model.sigma);
    if r / s <= std::f64::consts::SQRT_2 {
        return 0.0;
    }
    let target = (r / s) * (r / s);
    let alpha = model.alpha();
    let nu = |t: f64| 1.0 / bessel_ratio_over_t(alpha * t);
    let (mut lo, mut hi) = (0.0, r);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if nu(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Hausdorff distance between two finite point sets of equal dimension.
pub fn hausdorff(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("Hausdorff distance needs non-empty sets".into()));
    }
    if a.dim() != b.dim() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let directed = |from: &PointCloud, to: &PointCloud| {
        parallel::map_indices(from.len(), |i| {
            let p = from.point(i);
            to.iter().map(|q| dist2(p, q)).fold(f64::INFINITY, f64::min)
        })
        .into_iter()
        .fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)).sqrt())
}
