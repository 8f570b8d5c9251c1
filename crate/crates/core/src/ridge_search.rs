//! Iterative mode and ridge finders and starting-grid generation.
//!
//! All searches share [`SearchConfig`] and return a [`RidgeResult`]. Invalid
//! configuration or inputs are reported as errors up front; numerical trouble
//! during the iteration (an empty neighborhood, a degenerate projected sample)
//! ends the search with `converged = false` and a diagnostic instead.

use nalgebra::{DMatrix, DVector};

use crate::eigen::spectral;
use crate::error::{Error, Result};
use crate::kernels::{verify_kernel_conditions, Kernel};
use crate::local_moments::{check_query, conditional_covariance_with, MomentOptions};
use crate::logconcave::{fit, smooth, smoothed_mode, WeightedSample};
use crate::parallel;
use crate::points::{dist2, norm, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    MeanShift,
    Scms,
    Lcrs,
    Slcrs,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::MeanShift => "meanshift",
            Variant::Scms => "scms",
            Variant::Lcrs => "lcrs",
            Variant::Slcrs => "slcrs",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "meanshift" | "mean-shift" | "ms" => Ok(Variant::MeanShift),
            "scms" => Ok(Variant::Scms),
            "lcrs" => Ok(Variant::Lcrs),
            "slcrs" => Ok(Variant::Slcrs),
            other => Err(Error::Domain(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub variant: Variant,
    pub h: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Threshold level of the interval reported by LCRS and sLCRS.
    pub tau: f64,
    /// Ridge dimension `s`; `None` means `d - 1`. Ignored by mean shift.
    pub ridge_dim: Option<usize>,
    /// `None` means the Gaussian kernel in the data dimension.
    pub kernel: Option<Kernel>,
    pub moments: MomentOptions,
    /// Record every iterate in [`RidgeResult::trace`].
    pub trace: bool,
}

impl SearchConfig {
    /// Defaults: `tol = 1e-4 h`, 500 iterations, `tau = 0.9`.
    pub fn new(variant: Variant, h: f64) -> Self {
        Self {
            variant,
            h,
            tol: 1e-4 * h,
            max_iter: 500,
            tau: 0.9,
            ridge_dim: None,
            kernel: None,
            moments: MomentOptions::default(),
            trace: false,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_ridge_dim(mut self, s: usize) -> Self {
        self.ridge_dim = Some(s);
        self
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = Some(kernel);
        self
    }

    pub fn with_trace(mut self, trace: bool) -> Self {
        self.trace = trace;
        self
    }

    /// Checks the configuration against data of dimension `d` and resolves
    /// the kernel and ridge dimension.
    fn resolve(&self, d: usize) -> Result<Resolved> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::Domain(format!("bandwidth {} must be positive", self.h)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Domain(format!("tolerance {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Domain("max_iter must be positive".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Domain(format!("threshold level {} outside (0, 1]", self.tau)));
        }
        let kernel = match &self.kernel {
            Some(k) if k.dim() != d => {
                return Err(Error::Domain(format!(
                    "kernel dimension {} does not match data dimension {d}",
                    k.dim()
                )))
            }
            Some(k) => k.clone(),
            None => Kernel::gaussian(d),
        };
        let s = self.ridge_dim.unwrap_or(d.saturating_sub(1));
        match self.variant {
            Variant::MeanShift => {}
            Variant::Scms => {
                if d < 2 {
                    return Err(Error::Domain("SCMS needs dimension at least 2".into()));
                }
                if s >= d {
                    return Err(Error::Domain(format!("ridge dimension {s} must be below {d}")));
                }
                if !kernel.is_gaussian() {
                    return Err(Error::Domain(
                        "SCMS uses closed-form Gaussian KDE derivatives; use the Gaussian kernel".into(),
                    ));
                }
            }
            Variant::Lcrs | Variant::Slcrs => {
                if d < 2 {
                    return Err(Error::Domain("ridge search needs dimension at least 2".into()));
                }
                if s != d - 1 {
                    return Err(Error::Domain(format!(
                        "log-concave ridge search finds (d-1)-dimensional ridges; got s = {s}, d = {d}"
                    )));
                }
                if !kernel.is_gaussian() && !verify_kernel_conditions(&kernel).all_pass() {
                    return Err(Error::Domain(
                        "kernel does not satisfy the conditions required by ridge search".into(),
                    ));
                }
            }
        }
        Ok(Resolved { kernel, s })
    }
}

struct Resolved {
    kernel: Kernel,
    s: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeResult {
    pub start: Vec<f64>,
    pub point: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Endpoints of the last threshold interval, mapped along the last
    /// direction `v` (LCRS and sLCRS only).
    pub interval: Option<(Vec<f64>, Vec<f64>)>,
    /// The last log-concave fit had a flat top.
    pub flat_top: bool,
    pub trace: Option<Vec<Vec<f64>>>,
    pub diagnostic: Option<String>,
}

impl RidgeResult {
    fn begin(start: &[f64], trace: bool) -> Self {
        Self {
            start: start.to_vec(),
            point: start.to_vec(),
            iterations: 0,
            converged: false,
            interval: None,
            flat_top: false,
            trace: trace.then(|| vec![start.to_vec()]),
            diagnostic: None,
        }
    }

    fn advance(&mut self, point: Vec<f64>) {
        self.iterations += 1;
        if let Some(t) = self.trace.as_mut() {
            t.push(point.clone());
        }
        self.point = point;
    }

    fn fail(mut self, err: Error) -> Self {
        self.converged = false;
        self.diagnostic = Some(err.to_string());
        self
    }

    fn exhausted(mut self) -> Self {
        if !self.converged && self.diagnostic.is_none() {
            self.diagnostic = Some(format!("no convergence after {} iterations", self.iterations));
        }
        self
    }
}

/// Shadow-kernel weighted mean minus the query point.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanShiftVector {
    pub m: Vec<f64>,
}

impl MeanShiftVector {
    pub fn norm(&self) -> f64 {
        norm(&self.m)
    }
}

/// Kernel density estimate `n⁻¹ Σ K_h(X_i - x)`.
pub fn kde(data: &PointCloud, x: &[f64], h: f64, kernel: &Kernel) -> Result<f64> {
    check_query(data, x, h)?;
    let inv_h2 = 1.0 / (h * h);
    let total: f64 = data
        .iter()
        .map(|p| kernel.eval_scaled_sq(dist2(p, x) * inv_h2, h))
        .sum();
    Ok(total / data.len() as f64)
}

pub fn mean_shift_step(data: &PointCloud, x: &[f64], h: f64, kernel: &Kernel) -> Result<MeanShiftVector> {
    check_query(data, x, h)?;
    let d = data.dim();
    let inv_h2 = 1.0 / (h * h);
    let mut total = 0.0;
    let mut acc = vec![0.0; d];
    for p in data.iter() {
        let g = kernel.shadow_weight(dist2(p, x) * inv_h2);
        total += g;
        for (a, (pi, xi)) in acc.iter_mut().zip(p.iter().zip(x)) {
            *a += g * (pi - xi);
        }
    }
    if !(total > 0.0) {
        return Err(Error::EmptyNeighborhood {
            x: x.to_vec(),
            h,
            mass: 0.0,
        });
    }
    Ok(MeanShiftVector {
        m: acc.into_iter().map(|a| a / total).collect(),
    })
}

fn check_start(data: &PointCloud, start: &[f64], h: f64) -> Result<()> {
    check_query(data, start, h)
}

/// Mean shift: `x ← x + m(x)` until `‖m‖ <= tol`.
pub fn mean_shift(data: &PointCloud, start: &[f64], config: &SearchConfig) -> Result<RidgeResult> {
    let r = config.resolve(data.dim())?;
    check_start(data, start, config.h)?;
    Ok(run_mean_shift(data, start, config, &r))
}

fn run_mean_shift(data: &PointCloud, start: &[f64], config: &SearchConfig, r: &Resolved) -> RidgeResult {
    let h = config.h;
    let mut res = RidgeResult::begin(start, config.trace);
    let mut x = start.to_vec();
    while res.iterations < config.max_iter {
        let m = match mean_shift_step(data, &x, h, &r.kernel) {
            Ok(m) => m,
            Err(e) => return res.fail(e),
        };
        let next: Vec<f64> = x.iter().zip(&m.m).map(|(a, b)| a + b).collect();
        if cfg!(debug_assertions) && r.kernel.is_gaussian() {
            let before = kde(data, &x, h, &r.kernel).unwrap_or(0.0);
            let after = kde(data, &next, h, &r.kernel).unwrap_or(0.0);
            debug_assert!(after >= before - 1e-12, "mean shift decreased the KDE: {before} -> {after}");
        }
        x = next;
        res.advance(x.clone());
        if m.norm() <= config.tol {
            res.converged = true;
            break;
        }
    }
    res.exhausted()
}

/// Subspace-constrained mean shift on the Gaussian KDE.
///
/// With weights `w_i ∝ K_h(X_i - x)`, displacement mean `ū` and weighted
/// covariance `Σ̂` of `X_i - x`, the log-density has gradient `ū / h²` and
/// Hessian `Σ̂ / h⁴ - I / h²`; the mean shift equals `ū`. The step projects
/// `ū` onto the eigenvectors of the `d - s` smallest Hessian eigenvalues.
pub fn scms(data: &PointCloud, start: &[f64], config: &SearchConfig) -> Result<RidgeResult> {
    if config.variant != Variant::Scms {
        return Err(Error::Domain("scms called with a non-SCMS configuration".into()));
    }
    let r = config.resolve(data.dim())?;
    check_start(data, start, config.h)?;
    Ok(run_scms(data, start, config, &r))
}

fn run_scms(data: &PointCloud, start: &[f64], config: &SearchConfig, r: &Resolved) -> RidgeResult {
    let h = config.h;
    let mut res = RidgeResult::begin(start, config.trace);
    let mut x = start.to_vec();
    while res.iterations < config.max_iter {
        let step = match scms_step(data, &x, h, r, config) {
            Ok(s) => s,
            Err(e) => return res.fail(e),
        };
        match step {
            ScmsStep::Aligned => {
                res.converged = true;
                break;
            }
            ScmsStep::Move(p) => {
                let small = p.norm() <= config.tol * h;
                x = x.iter().zip(p.iter()).map(|(a, b)| a + b).collect();
                res.advance(x.clone());
                if small {
                    res.converged = true;
                    break;
                }
            }
        }
    }
    res.exhausted()
}

enum ScmsStep {
    Aligned,
    Move(DVector<f64>),
}

fn scms_step(data: &PointCloud, x: &[f64], h: f64, r: &Resolved, config: &SearchConfig) -> Result<ScmsStep> {
    let cc = conditional_covariance_with(data, x, h, &r.kernel, &config.moments)?;
    let d = data.dim();
    let m = DVector::from_iterator(d, cc.mu.iter().zip(x).map(|(a, b)| a - b));
    // The Hessian shares eigenvectors and their order with Σ̂.
    let spec = spectral(&cc.sigma)?;
    let v_perp = spec.v_perp(r.s)?;
    let v_par = spec.v_par(r.s)?;
    let g_norm = m.norm();
    if g_norm == 0.0 || (v_par.transpose() * &m).norm() >= (1.0 - config.tol) * g_norm {
        return Ok(ScmsStep::Aligned);
    }
    Ok(ScmsStep::Move(&v_perp * (v_perp.transpose() * &m)))
}

/// Log-concave ridge search.
pub fn lcrs(data: &PointCloud, start: &[f64], config: &SearchConfig) -> Result<RidgeResult> {
    if config.variant != Variant::Lcrs {
        return Err(Error::Domain("lcrs called with a non-LCRS configuration".into()));
    }
    let r = config.resolve(data.dim())?;
    check_start(data, start, config.h)?;
    Ok(run_lcrs(data, start, config, &r, false))
}

/// Log-concave ridge search stepping to the mode of the smoothed fit.
pub fn slcrs(data: &PointCloud, start: &[f64], config: &SearchConfig) -> Result<RidgeResult> {
    if config.variant != Variant::Slcrs {
        return Err(Error::Domain("slcrs called with a non-sLCRS configuration".into()));
    }
    let r = config.resolve(data.dim())?;
    check_start(data, start, config.h)?;
    Ok(run_lcrs(data, start, config, &r, true))
}

/// Weights below this fraction of the largest are dropped before fitting.
const WEIGHT_CUTOFF: f64 = 1e-12;

struct LcrsStep {
    v: DVector<f64>,
    m: f64,
    interval: (f64, f64),
    flat_top: bool,
}

fn lcrs_step(
    data: &PointCloud,
    x: &[f64],
    prev: Option<&DVector<f64>>,
    config: &SearchConfig,
    r: &Resolved,
    smoothed: bool,
) -> Result<LcrsStep> {
    let h = config.h;
    let cc = conditional_covariance_with(data, x, h, &r.kernel, &config.moments)?;
    let n_eff = cc.effective_n();
    if n_eff < config.moments.min_effective_n {
        return Err(Error::DegenerateSample(format!(
            "effective neighborhood size {n_eff:.3} below {}",
            config.moments.min_effective_n
        )));
    }
    let spec = spectral(&cc.sigma)?;
    let d = data.dim();
    let mut v: DVector<f64> = spec.eigenvectors.column(d - 1).into_owned();
    match prev {
        Some(p) if v.dot(p) < 0.0 => v.neg_mut(),
        Some(_) => {}
        None => {
            if let Some(first) = v.iter().find(|c| c.abs() > 1e-12) {
                if *first < 0.0 {
                    v.neg_mut();
                }
            }
        }
    }

    let weights = &cc.base.weights;
    let w_max = weights.iter().copied().fold(0.0, f64::max);
    let cut = WEIGHT_CUTOFF * w_max;
    let mut z = Vec::new();
    let mut w = Vec::new();
    for (p, &wi) in data.iter().zip(weights) {
        if wi >= cut && wi > 0.0 {
            z.push(p.iter().zip(x).zip(v.iter()).map(|((a, b), c)| c * (a - b)).sum());
            w.push(wi);
        }
    }
    let sample = WeightedSample::new(z, w)?;
    let f = fit(&sample)?;
    let mode = f.mode();
    let m = if smoothed {
        smoothed_mode(&smooth(&f, sample.variance())?)?
    } else {
        mode.location
    };
    Ok(LcrsStep {
        v,
        m,
        interval: f.threshold_interval(config.tau)?,
        flat_top: mode.flat_top,
    })
}

fn run_lcrs(data: &PointCloud, start: &[f64], config: &SearchConfig, r: &Resolved, smoothed: bool) -> RidgeResult {
    let mut res = RidgeResult::begin(start, config.trace);
    let mut x = start.to_vec();
    let mut prev: Option<DVector<f64>> = None;
    while res.iterations < config.max_iter {
        let step = match lcrs_step(data, &x, prev.as_ref(), config, r, smoothed) {
            Ok(s) => s,
            Err(e) => return res.fail(e),
        };
        let along = |t: f64| -> Vec<f64> { x.iter().zip(step.v.iter()).map(|(a, b)| a + t * b).collect() };
        res.interval = Some((along(step.interval.0), along(step.interval.1)));
        res.flat_top = step.flat_top;
        let next = along(step.m);
        x = next;
        res.advance(x.clone());
        if step.m.abs() <= config.tol {
            res.converged = true;
            break;
        }
        prev = Some(step.v);
    }
    res.exhausted()
}

/// Runs the configured variant from one start.
pub fn search(data: &PointCloud, start: &[f64], config: &SearchConfig) -> Result<RidgeResult> {
    let r = config.resolve(data.dim())?;
    check_start(data, start, config.h)?;
    Ok(dispatch(data, start, config, &r))
}

fn dispatch(data: &PointCloud, start: &[f64], config: &SearchConfig, r: &Resolved) -> RidgeResult {
    match config.variant {
        Variant::MeanShift => run_mean_shift(data, start, config, r),
        Variant::Scms => run_scms(data, start, config, r),
        Variant::Lcrs => run_lcrs(data, start, config, r, false),
        Variant::Slcrs => run_lcrs(data, start, config, r, true),
    }
}

/// Runs the configured variant from every start; results are in start
/// order. Starts with the wrong dimension or non-finite coordinates yield a
/// failed result with a diagnostic.
pub fn search_many(data: &PointCloud, starts: &[Vec<f64>], config: &SearchConfig) -> Result<Vec<RidgeResult>> {
    let r = config.resolve(data.dim())?;
    if data.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    Ok(parallel::map_slice(starts, |start| match check_start(data, start, config.h) {
        Ok(()) => dispatch(data, start, config, &r),
        Err(e) => RidgeResult::begin(start, config.trace).fail(e),
    }))
}

/// Upper bound on the number of lattice nodes [`starting_grid`] will visit.
pub const MAX_GRID_NODES: usize = 50_000_000;

/// Axis-aligned lattice `lo + k·spacing` over the bounding box of `data`,
/// keeping nodes within `max_dist` of some data point. The last coordinate
/// varies fastest.
pub fn starting_grid(data: &PointCloud, spacing: f64, max_dist: f64) -> Result<Vec<Vec<f64>>> {
    if data.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::Domain(format!("grid spacing {spacing} must be positive")));
    }
    if !(max_dist.is_finite() && max_dist > 0.0) {
        return Err(Error::Domain(format!("grid distance {max_dist} must be positive")));
    }
    let (lo, hi) = data.bounding_box();
    let counts: Vec<usize> = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| ((b - a) / spacing + 1e-9).floor() as usize + 1)
        .collect();
    let total = counts
        .iter()
        .try_fold(1usize, |acc, &c| acc.checked_mul(c))
        .filter(|&t| t <= MAX_GRID_NODES)
        .ok_or_else(|| Error::Domain(format!("grid with counts {counts:?} is too large")))?;
    let max2 = max_dist * max_dist;
    let node = |mut k: usize| -> Vec<f64> {
        let mut p = vec![0.0; counts.len()];
        for j in (0..counts.len()).rev() {
            p[j] = lo[j] + (k % counts[j]) as f64 * spacing;
            k /= counts[j];
        }
        p
    };
    let keep = parallel::map_indices(total, |k| {
        let p = node(k);
        data.iter().any(|q| dist2(q, &p) <= max2).then_some(p)
    });
    Ok(keep.into_iter().flatten().collect())
}

/// `Σ̂ / h⁴ - I / h²`, the Hessian of the log Gaussian KDE.
pub fn log_kde_hessian(data: &PointCloud, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let d = data.dim();
    let cc = conditional_covariance_with(data, x, h, &Kernel::gaussian(d), &MomentOptions::default())?;
    Ok(cc.sigma / h.powi(4) - DMatrix::identity(d, d) / (h * h))
}

/// `ū / h²`, the gradient of the log Gaussian KDE.
pub fn log_kde_gradient(data: &PointCloud, x: &[f64], h: f64) -> Result<DVector<f64>> {
    let d = data.dim();
    let cc = conditional_covariance_with(data, x, h, &Kernel::gaussian(d), &MomentOptions::default())?;
    Ok(DVector::from_iterator(d, cc.mu.iter().zip(x).map(|(a, b)| (a - b) / (h * h))))
}
