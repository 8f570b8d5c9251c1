//! Radially symmetric kernels `K(z) = c · k(‖z‖²)`, their shadow profiles and
//! a quadrature check of the moment conditions the ridge estimators rely on.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{ensure_finite, Error, Result};
use crate::quadrature::{integrate_box, integrate_region, Tolerance};

/// A kernel profile `k: [0, ∞) → [0, ∞)` and its shadow `g = -k'`.
pub trait Profile: Send + Sync + fmt::Debug {
    fn value(&self, y: f64) -> f64;

    /// `g(y) = -k'(y)`.
    fn shadow(&self, y: f64) -> f64;

    fn is_gaussian(&self) -> bool {
        false
    }

    /// Squared radius beyond which the profile vanishes, if bounded.
    fn support(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianProfile;

impl Profile for GaussianProfile {
    fn value(&self, y: f64) -> f64 {
        (-0.5 * y).exp()
    }

    fn shadow(&self, y: f64) -> f64 {
        0.5 * (-0.5 * y).exp()
    }

    fn is_gaussian(&self) -> bool {
        true
    }
}

/// Indicator of the ball `‖z‖² <= radius2`. The shadow vanishes almost
/// everywhere, so this profile is only useful for moment checks.
#[derive(Debug, Clone, Copy)]
pub struct UniformProfile {
    pub radius2: f64,
}

impl Profile for UniformProfile {
    fn support(&self) -> Option<f64> {
        Some(self.radius2)
    }

    fn value(&self, y: f64) -> f64 {
        if y <= self.radius2 {
            1.0
        } else {
            0.0
        }
    }

    fn shadow(&self, _y: f64) -> f64 {
        0.0
    }
}

#[derive(Clone)]
pub struct Kernel {
    dim: usize,
    profile: Arc<dyn Profile>,
    norm: f64,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("dim", &self.dim)
            .field("profile", &self.profile)
            .field("norm", &self.norm)
            .finish()
    }
}

impl Kernel {
    pub fn new(dim: usize, profile: Arc<dyn Profile>, norm: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("kernel dimension must be positive".into()));
        }
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Domain(format!("normalization {norm} must be positive")));
        }
        Ok(Self { dim, profile, norm })
    }

    /// Standard Gaussian density on `R^d`.
    pub fn gaussian(dim: usize) -> Self {
        Self::new(
            dim,
            Arc::new(GaussianProfile),
            (2.0 * PI).powf(-(dim as f64) / 2.0),
        )
        .expect("gaussian kernel parameters are valid")
    }

    /// Uniform density on the ball of the given radius.
    pub fn uniform_ball(dim: usize, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Domain(format!("ball radius {radius} must be positive")));
        }
        let volume = unit_ball_volume(dim) * radius.powi(dim as i32);
        Self::new(
            dim,
            Arc::new(UniformProfile {
                radius2: radius * radius,
            }),
            1.0 / volume,
        )
    }

    /// Same profile with the normalization multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.dim, self.profile.clone(), self.norm * factor)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn normalization(&self) -> f64 {
        self.norm
    }

    pub fn profile(&self) -> &dyn Profile {
        self.profile.as_ref()
    }

    pub fn is_gaussian(&self) -> bool {
        self.profile.is_gaussian()
    }

    /// `K_h(z) = h^{-d} K(z / h)`.
    pub fn eval(&self, z: &[f64], h: f64) -> Result<f64> {
        if z.len() != self.dim {
            return Err(Error::Domain(format!(
                "argument has {} components, kernel dimension is {}",
                z.len(),
                self.dim
            )));
        }
        ensure_finite(z, "kernel argument")?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Domain(format!("bandwidth {h} must be positive")));
        }
        let y = z.iter().map(|v| v * v).sum::<f64>() / (h * h);
        Ok(self.eval_scaled_sq(y, h))
    }

    /// `K_h` evaluated from `y = ‖z/h‖²`; no argument checks.
    #[inline]
    pub fn eval_scaled_sq(&self, y: f64, h: f64) -> f64 {
        self.norm * self.profile.value(y) / h.powi(self.dim as i32)
    }

    /// Unnormalized shadow weight `g(y)`.
    #[inline]
    pub fn shadow_weight(&self, y: f64) -> f64 {
        self.profile.shadow(y)
    }

    /// `K(z)` at unit bandwidth without argument checks.
    #[inline]
    pub fn unit(&self, z: &[f64]) -> f64 {
        self.norm * self.profile.value(z.iter().map(|v| v * v).sum())
    }
}

/// The shadow kernel `G(z) = c_g · g(‖z‖²)` with `g = -k'`.
#[derive(Debug, Clone)]
pub struct ShadowKernel {
    pub kernel: Kernel,
    pub norm: f64,
}

impl ShadowKernel {
    /// Normalizes `g` numerically on `[-8, 8]^d` (exact constant for the
    /// Gaussian, where `G = K`).
    pub fn of(kernel: &Kernel) -> Result<Self> {
        if kernel.is_gaussian() {
            let norm = 2.0 * kernel.normalization();
            return Ok(Self {
                kernel: kernel.clone(),
                norm,
            });
        }
        let d = kernel.dim();
        let p = kernel.profile.clone();
        let mass = integrate_box(
            |z, out| out[0] = p.shadow(z.iter().map(|v| v * v).sum()),
            &vec![-8.0; d],
            &vec![8.0; d],
            1,
            Tolerance::new(1e-10, 1e-8),
        )?[0];
        if mass <= 0.0 {
            return Err(Error::Domain("shadow profile has zero mass".into()));
        }
        Ok(Self {
            kernel: kernel.clone(),
            norm: 1.0 / mass,
        })
    }

    pub fn unit(&self, z: &[f64]) -> f64 {
        self.norm * self.kernel.shadow_weight(z.iter().map(|v| v * v).sum())
    }
}

fn unit_ball_volume(dim: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = 2π/d · V_{d-2}
    let mut v = if dim.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if dim.is_multiple_of(2) { 2 } else { 3 };
    while k <= dim {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Pass,
    Fail,
    Undetermined,
}

impl Check {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Check::Pass
        } else {
            Check::Fail
        }
    }
}

/// Outcome of [`verify_kernel_conditions`].
#[derive(Debug, Clone)]
pub struct KernelReport {
    /// Unit mass.
    pub k0: Check,
    /// Sign and permutation symmetry.
    pub k1: Check,
    /// Identity second moment.
    pub k2: Check,
    /// Fourth moments `μ4 = 3`, `μ22 = 1`.
    pub k3: Check,
    /// Rotational symmetry.
    pub k4: Check,
    /// Log-concavity with `λ_max(D² log K)` bounded away from zero on the grid.
    pub k5: Check,
    pub mass: Option<f64>,
    pub second_moment: Option<DMatrix<f64>>,
    pub mu4: Option<f64>,
    pub mu22: Option<f64>,
    /// Squared radii `‖z‖²` at which the K5 eigenvalue bound was checked.
    pub k5_grid: Vec<f64>,
    /// Largest eigenvalue of `D² log K` found on that grid.
    pub k5_max_eigenvalue: f64,
}

impl KernelReport {
    pub fn all_pass(&self) -> bool {
        [self.k0, self.k1, self.k2, self.k3, self.k4, self.k5]
            .iter()
            .all(|c| *c == Check::Pass)
    }
}

const CONDITION_TOL: f64 = 1e-6;
const K5_MARGIN: f64 = 1e-3;

/// Checks K0–K5 by tensor-product quadrature over `[-8, 8]^d` (`d <= 3`).
pub fn verify_kernel_conditions(kernel: &Kernel) -> KernelReport {
    let d = kernel.dim();
    let (k1, k4) = symmetry_checks(kernel);
    let (k5, k5_grid, k5_max) = log_concavity_check(kernel);

    let mut report = KernelReport {
        k0: Check::Undetermined,
        k1,
        k2: Check::Undetermined,
        k3: Check::Undetermined,
        k4,
        k5,
        mass: None,
        second_moment: None,
        mu4: None,
        mu22: None,
        k5_grid,
        k5_max_eigenvalue: k5_max,
    };
    if d > 3 {
        return report;
    }

    // Layout: [mass, upper triangle of zz^T (row-major), z1^4, z1^2 z2^2].
    let n_cov = d * (d + 1) / 2;
    let width = 1 + n_cov + 2;
    // Clip each axis to the support so inner integrands stay smooth.
    let support = kernel.profile().support().unwrap_or(f64::INFINITY);
    let limits = |prefix: &[f64], _axis: usize| {
        let rest = support - prefix.iter().map(|t| t * t).sum::<f64>();
        let r = rest.max(0.0).sqrt().min(8.0);
        (-r, r)
    };
    let moments = integrate_region(
        |z, out| {
            let kz = kernel.unit(z);
            out[0] = kz;
            let mut idx = 1;
            for i in 0..d {
                for j in i..d {
                    out[idx] = kz * z[i] * z[j];
                    idx += 1;
                }
            }
            out[idx] = kz * z[0].powi(4);
            out[idx + 1] = if d >= 2 { kz * z[0] * z[0] * z[1] * z[1] } else { 0.0 };
        },
        limits,
        d,
        width,
        Tolerance {
            abs: 1e-10,
            rel: 1e-10,
            max_intervals: 2000,
        },
    );
    let Ok(m) = moments else {
        return report;
    };

    let mass = m[0];
    let mut second = DMatrix::zeros(d, d);
    let mut idx = 1;
    for i in 0..d {
        for j in i..d {
            second[(i, j)] = m[idx];
            second[(j, i)] = m[idx];
            idx += 1;
        }
    }
    let mu4 = m[idx];
    let mu22 = m[idx + 1];

    report.k0 = Check::from_bool((mass - 1.0).abs() <= CONDITION_TOL);
    report.k2 = Check::from_bool(
        (&second - DMatrix::<f64>::identity(d, d)).amax() <= CONDITION_TOL,
    );
    let mu4_ok = (mu4 - 3.0).abs() <= CONDITION_TOL;
    let mu22_ok = d < 2 || (mu22 - 1.0).abs() <= CONDITION_TOL;
    report.k3 = Check::from_bool(mu4_ok && mu22_ok);
    report.mass = Some(mass);
    report.second_moment = Some(second);
    report.mu4 = Some(mu4);
    report.mu22 = if d >= 2 { Some(mu22) } else { None };
    report
}

fn symmetry_checks(kernel: &Kernel) -> (Check, Check) {
    let d = kernel.dim();
    let probes: Vec<Vec<f64>> = (0..16)
        .map(|i| {
            (0..d)
                .map(|j| ((i * 7 + j * 3 + 1) as f64 * 0.618_033_988_749_895).fract() * 4.0 - 2.0)
                .collect()
        })
        .collect();
    let mut k1 = true;
    let mut k4 = true;
    for z in &probes {
        let base = kernel.unit(z);
        let tol = 1e-14 * base.abs().max(f64::MIN_POSITIVE);
        // Reversal composed with alternating sign flips.
        let flipped: Vec<f64> = z
            .iter()
            .rev()
            .enumerate()
            .map(|(j, v)| if j % 2 == 0 { -v } else { *v })
            .collect();
        k1 &= (kernel.unit(&flipped) - base).abs() <= tol;
        // Same radius along the first axis.
        let mut axis = vec![0.0; d];
        axis[0] = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        k4 &= (kernel.unit(&axis) - base).abs() <= tol.max(1e-13 * base);
    }
    (Check::from_bool(k1), Check::from_bool(k4))
}

/// With `ℓ = log k` and `y = ‖z‖²`, `D² log K = 2ℓ'(y) I + 4ℓ''(y) z zᵀ`, so the
/// eigenvalues are `2ℓ'(y)` and `2ℓ'(y) + 4yℓ''(y)`.
fn log_concavity_check(kernel: &Kernel) -> (Check, Vec<f64>, f64) {
    let grid: Vec<f64> = (0..=64).map(|i| i as f64).collect();
    let p = kernel.profile();
    let log_k = |y: f64| p.value(y).ln();
    let step = 1e-4;
    let mut max_eig = f64::NEG_INFINITY;
    for &y in &grid {
        let (l1, l2) = if y < 2.0 * step {
            let (a, b, c) = (log_k(y), log_k(y + step), log_k(y + 2.0 * step));
            ((-3.0 * a + 4.0 * b - c) / (2.0 * step), (a - 2.0 * b + c) / (step * step))
        } else {
            let (a, b, c) = (log_k(y - step), log_k(y), log_k(y + step));
            ((c - a) / (2.0 * step), (a - 2.0 * b + c) / (step * step))
        };
        if !(l1.is_finite() && l2.is_finite()) {
            return (Check::Fail, grid, f64::NAN);
        }
        let e = (2.0 * l1).max(2.0 * l1 + 4.0 * y * l2);
        max_eig = max_eig.max(e);
    }
    (Check::from_bool(max_eig <= -K5_MARGIN), grid, max_eig)
}
