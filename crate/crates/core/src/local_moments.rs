//! Kernel-weighted local moments and the local conditional covariance.
//!
//! For a query `x`, bandwidth `h` and sample `X_1..X_n`, the weights are
//! `w_i ∝ K_h(X_i - x)` normalized to sum one. The conditional covariance is
//! the weighted covariance of the displacements `X_i - x`; its eigenvector of
//! smallest eigenvalue is the search direction of the log-concave ridge
//! search.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_finite, Error, Result};
use crate::kernels::Kernel;
use crate::points::PointCloud;
use crate::quadrature::{integrate_box, Tolerance};

#[derive(Debug, Clone, Copy)]
pub struct MomentOptions {
    /// Kernel mass `s_{n,h}(x)` below which the neighborhood counts as empty.
    pub floor: f64,
    /// Minimum Kish effective size `(Σw)²/Σw²` for the covariance to be
    /// trusted as a direction estimate.
    pub min_effective_n: f64,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self {
            floor: 1e-300,
            min_effective_n: 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalMoments {
    /// `s = n⁻¹ Σ K_h(X_i - x)`.
    pub s: f64,
    /// `n⁻¹ Σ K_h(X_i - x) h⁻¹ (X_i - x)`.
    pub s_vec: DVector<f64>,
    /// `n⁻¹ Σ K_h(X_i - x) h⁻² (X_i - x)(X_i - x)ᵀ`.
    pub s_mat: DMatrix<f64>,
    /// Normalized kernel weights.
    pub weights: Vec<f64>,
}

impl LocalMoments {
    pub fn effective_n(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct ConditionalCovariance {
    pub sigma: DMatrix<f64>,
    /// Weighted mean `x + h s_vec / s`.
    pub mu: DVector<f64>,
    pub base: LocalMoments,
}

impl ConditionalCovariance {
    pub fn effective_n(&self) -> f64 {
        self.base.effective_n()
    }
}

pub(crate) fn check_query(data: &PointCloud, x: &[f64], h: f64) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    if x.len() != data.dim() {
        return Err(Error::Domain(format!(
            "query has {} components, data dimension is {}",
            x.len(),
            data.dim()
        )));
    }
    ensure_finite(x, "query point")?;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Domain(format!("bandwidth {h} must be positive")));
    }
    Ok(())
}

/// Normalized kernel weights at `x` together with the raw mass `s`.
pub(crate) fn kernel_weights(
    data: &PointCloud,
    x: &[f64],
    h: f64,
    kernel: &Kernel,
    floor: f64,
) -> Result<(Vec<f64>, f64)> {
    check_query(data, x, h)?;
    let inv_h2 = 1.0 / (h * h);
    let mut w: Vec<f64> = data
        .iter()
        .map(|p| {
            let y = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * inv_h2;
            kernel.eval_scaled_sq(y, h)
        })
        .collect();
    let total: f64 = w.iter().sum();
    let s = total / data.len() as f64;
    if !(s >= floor) || total == 0.0 {
        return Err(Error::EmptyNeighborhood {
            x: x.to_vec(),
            h,
            mass: s,
        });
    }
    w.iter_mut().for_each(|v| *v /= total);
    Ok((w, s))
}

pub fn local_moments(data: &PointCloud, x: &[f64], h: f64, kernel: &Kernel) -> Result<LocalMoments> {
    local_moments_with(data, x, h, kernel, &MomentOptions::default())
}

pub fn local_moments_with(
    data: &PointCloud,
    x: &[f64],
    h: f64,
    kernel: &Kernel,
    opts: &MomentOptions,
) -> Result<LocalMoments> {
    let d = data.dim();
    let (weights, s) = kernel_weights(data, x, h, kernel, opts.floor)?;
    let mut s_vec = DVector::zeros(d);
    let mut s_mat = DMatrix::zeros(d, d);
    for (p, &w) in data.iter().zip(&weights) {
        let ws = w * s;
        for i in 0..d {
            let ui = (p[i] - x[i]) / h;
            s_vec[i] += ws * ui;
            for j in 0..=i {
                s_mat[(i, j)] += ws * ui * (p[j] - x[j]) / h;
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            s_mat[(j, i)] = s_mat[(i, j)];
        }
    }
    Ok(LocalMoments {
        s,
        s_vec,
        s_mat,
        weights,
    })
}

pub fn conditional_covariance(
    data: &PointCloud,
    x: &[f64],
    h: f64,
    kernel: &Kernel,
) -> Result<ConditionalCovariance> {
    conditional_covariance_with(data, x, h, kernel, &MomentOptions::default())
}

/// Weighted covariance of `X_i - x`, computed in centered two-pass form.
pub fn conditional_covariance_with(
    data: &PointCloud,
    x: &[f64],
    h: f64,
    kernel: &Kernel,
    opts: &MomentOptions,
) -> Result<ConditionalCovariance> {
    let base = local_moments_with(data, x, h, kernel, opts)?;
    let d = data.dim();
    let mut mean = vec![0.0; d];
    for (p, &w) in data.iter().zip(&base.weights) {
        for i in 0..d {
            mean[i] += w * (p[i] - x[i]);
        }
    }
    let mut sigma = DMatrix::zeros(d, d);
    let mut u = vec![0.0; d];
    for (p, &w) in data.iter().zip(&base.weights) {
        for i in 0..d {
            u[i] = p[i] - x[i] - mean[i];
        }
        for i in 0..d {
            for j in 0..=i {
                sigma[(i, j)] += w * u[i] * u[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            sigma[(j, i)] = sigma[(i, j)];
        }
    }
    let mu = DVector::from_iterator(d, x.iter().zip(&mean).map(|(a, b)| a + b));
    Ok(ConditionalCovariance { sigma, mu, base })
}

/// `Σ_h(x) = Var(X | X + Z_h = x)` for a density `f`, by quadrature of
/// `K(z) f(x + hz)` over `[-half_width, half_width]^d`.
pub fn population_conditional_covariance<F>(
    density: F,
    x: &[f64],
    h: f64,
    kernel: &Kernel,
) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    population_conditional_covariance_on(density, x, h, kernel, 8.0)
}

pub fn population_conditional_covariance_on<F>(
    density: F,
    x: &[f64],
    h: f64,
    kernel: &Kernel,
    half_width: f64,
) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let d = kernel.dim();
    if x.len() != d {
        return Err(Error::Domain(format!(
            "query has {} components, kernel dimension is {d}",
            x.len()
        )));
    }
    ensure_finite(x, "query point")?;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Domain(format!("bandwidth {h} must be positive")));
    }
    let n_cov = d * (d + 1) / 2;
    let width = 1 + d + n_cov;
    let mut y = vec![0.0; d];
    let cell = std::cell::RefCell::new(&mut y);
    let m = integrate_box(
        |z, out| {
            let mut y = cell.borrow_mut();
            for i in 0..d {
                y[i] = x[i] + h * z[i];
            }
            let wz = kernel.unit(z) * density(&y);
            out[0] = wz;
            for i in 0..d {
                out[1 + i] = wz * z[i];
            }
            let mut idx = 1 + d;
            for i in 0..d {
                for j in i..d {
                    out[idx] = wz * z[i] * z[j];
                    idx += 1;
                }
            }
        },
        &vec![-half_width; d],
        &vec![half_width; d],
        width,
        Tolerance::new(1e-300, 1e-11),
    )?;
    let s = m[0];
    if !(s > 0.0) {
        return Err(Error::Domain(format!("density has no mass near {x:?}")));
    }
    let mut sigma = DMatrix::zeros(d, d);
    let mut idx = 1 + d;
    for i in 0..d {
        for j in i..d {
            let v = h * h * (m[idx] / s - m[1 + i] * m[1 + j] / (s * s));
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
            idx += 1;
        }
    }
    Ok(sigma)
}
