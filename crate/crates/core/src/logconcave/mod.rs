//! Weighted univariate log-concave maximum-likelihood estimation and the
//! quantities built on it: mode, threshold intervals, the Gaussian-smoothed
//! estimator, the mode-constrained fit and likelihood-ratio intervals.

mod active_set;
mod lrt;
mod smooth;

pub use lrt::{
    calibrate_critical_value, constrained_fit, lr_confidence_interval, lr_statistic,
    null_statistics, LrInterval,
};
pub use smooth::{smooth, smooth_sample, smoothed_mode, SmoothedFit};

use crate::error::{Error, Result};

/// Relative optimality tolerance on knot directional derivatives.
pub const ACTIVE_SET_TOL: f64 = 1e-10;

/// Sorted distinct support points with positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    z: Vec<f64>,
    w: Vec<f64>,
    effective_n: f64,
}

impl WeightedSample {
    /// Sorts, merges coincident points (summing their weights) and
    /// normalizes. The Kish effective size `(Σw)²/Σw²` is taken before
    /// merging.
    pub fn new(z: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if z.len() != w.len() {
            return Err(Error::Domain(format!(
                "{} points but {} weights",
                z.len(),
                w.len()
            )));
        }
        if z.is_empty() {
            return Err(Error::DegenerateSample("empty sample".into()));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("sample contains non-finite points".into()));
        }
        if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Domain("weights must be positive and finite".into()));
        }
        let total: f64 = w.iter().sum();
        let effective_n = total * total / w.iter().map(|v| v * v).sum::<f64>();
        let mut order: Vec<usize> = (0..z.len()).collect();
        order.sort_by(|&a, &b| z[a].total_cmp(&z[b]));
        let mut zs: Vec<f64> = Vec::with_capacity(z.len());
        let mut ws: Vec<f64> = Vec::with_capacity(z.len());
        for i in order {
            if zs.last() == Some(&z[i]) {
                *ws.last_mut().expect("parallel vectors") += w[i];
            } else {
                zs.push(z[i]);
                ws.push(w[i]);
            }
        }
        ws.iter_mut().for_each(|v| *v /= total);
        Ok(Self {
            z: zs,
            w: ws,
            effective_n,
        })
    }

    pub fn equal_weights(z: Vec<f64>) -> Result<Self> {
        let n = z.len();
        Self::new(z, vec![1.0; n])
    }

    pub fn points(&self) -> &[f64] {
        &self.z
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn effective_n(&self) -> f64 {
        self.effective_n
    }

    pub fn mean(&self) -> f64 {
        self.z.iter().zip(&self.w).map(|(z, w)| z * w).sum()
    }

    /// Weighted variance with weights summing to one (no bias correction).
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.z.iter().zip(&self.w).map(|(z, w)| w * (z - m) * (z - m)).sum()
    }
}

/// A concave piecewise-linear log-density on `[knots[0], knots[m-1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogConcaveFit {
    knots: Vec<f64>,
    phi: Vec<f64>,
    slopes: Vec<f64>,
    log_likelihood: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeEstimate {
    pub location: f64,
    /// The maximum is attained on a whole segment; `location` is its midpoint.
    pub flat_top: bool,
}

impl LogConcaveFit {
    fn from_solution(grid: &[f64], sol: active_set::Solution) -> Self {
        let knots: Vec<f64> = sol.knots.iter().map(|&k| grid[k]).collect();
        let phi: Vec<f64> = sol.knots.iter().map(|&k| sol.phi[k]).collect();
        let slopes = knots
            .windows(2)
            .zip(phi.windows(2))
            .map(|(x, p)| (p[1] - p[0]) / (x[1] - x[0]))
            .collect();
        Self {
            knots,
            phi,
            slopes,
            log_likelihood: sol.log_likelihood,
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Log-density values at the knots.
    pub fn log_density_at_knots(&self) -> &[f64] {
        &self.phi
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// `Σ w_i θ̂(z_i)` for the sample the fit was computed from.
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn support(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// `θ̂(t)`, `-∞` outside the support.
    pub fn log_density(&self, t: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(t >= lo && t <= hi) {
            return f64::NEG_INFINITY;
        }
        let a = self.knots.partition_point(|&k| k <= t).clamp(1, self.knots.len() - 1) - 1;
        self.phi[a] + self.slopes[a] * (t - self.knots[a])
    }

    pub fn density(&self, t: f64) -> f64 {
        self.log_density(t).exp()
    }

    /// `∫ exp θ̂`, in closed form per segment.
    pub fn mass(&self) -> f64 {
        self.segments().map(|(dx, seg, _)| dx * seg.j).sum()
    }

    /// Mean and variance of the fitted density.
    pub fn mean_variance(&self) -> (f64, f64) {
        // Centre at the midpoint of the support to limit cancellation.
        let (lo, hi) = self.support();
        let c = 0.5 * (lo + hi);
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for (dx, seg, u) in self.segments() {
            let off = u - c;
            m0 += dx * seg.j;
            m1 += dx * (off * seg.j + dx * seg.j_s);
            m2 += dx * (off * off * seg.j + 2.0 * off * dx * seg.j_s + dx * dx * seg.j_ss);
        }
        let mean = m1 / m0;
        (c + mean, m2 / m0 - mean * mean)
    }

    fn segments(&self) -> impl Iterator<Item = (f64, active_set::SegmentIntegrals, f64)> + '_ {
        (0..self.knots.len() - 1).map(move |a| {
            (
                self.knots[a + 1] - self.knots[a],
                active_set::segment_integrals(self.phi[a], self.phi[a + 1]),
                self.knots[a],
            )
        })
    }

    fn top_knots(&self) -> (usize, usize) {
        let max = self.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let eps = 1e-12 * max.abs().max(1.0);
        let first = self.phi.iter().position(|&p| p >= max - eps).expect("non-empty");
        let last = self.phi.iter().rposition(|&p| p >= max - eps).expect("non-empty");
        (first, last)
    }

    /// Argmax of `θ̂`; the midpoint of the argmax segment when flat.
    pub fn mode(&self) -> ModeEstimate {
        let (first, last) = self.top_knots();
        ModeEstimate {
            location: 0.5 * (self.knots[first] + self.knots[last]),
            flat_top: first != last,
        }
    }

    /// `{t : θ̂(t) >= max θ̂ + log τ}` for `τ ∈ (0, 1]`.
    pub fn threshold_interval(&self, tau: f64) -> Result<(f64, f64)> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::Domain(format!("threshold level {tau} outside (0, 1]")));
        }
        let (first, last) = self.top_knots();
        if tau == 1.0 {
            return Ok((self.knots[first], self.knots[last]));
        }
        let max = self.phi[first].max(self.phi[last]);
        let level = max + tau.ln();
        let crossing = |a: usize, b: usize| {
            // θ̂ is linear between knots a and b; θ̂(a) < level <= θ̂(b).
            let t = (level - self.phi[a]) / (self.phi[b] - self.phi[a]);
            self.knots[a] + t * (self.knots[b] - self.knots[a])
        };
        let mut lo = self.knots[0];
        for a in (0..first).rev() {
            if self.phi[a] < level {
                lo = crossing(a, a + 1);
                break;
            }
        }
        let mut hi = self.knots[self.knots.len() - 1];
        for b in last + 1..self.knots.len() {
            if self.phi[b] < level {
                hi = crossing(b, b - 1);
                break;
            }
        }
        Ok((lo, hi))
    }
}

/// Unconstrained weighted log-concave MLE.
pub fn fit(sample: &WeightedSample) -> Result<LogConcaveFit> {
    if sample.len() < 2 {
        return Err(Error::DegenerateSample(format!(
            "log-concave fit needs at least 2 distinct points, got {}",
            sample.len()
        )));
    }
    let sol = active_set::solve(&sample.z, &sample.w, None, ACTIVE_SET_TOL)?;
    Ok(LogConcaveFit::from_solution(&sample.z, sol))
}

/// Convenience wrapper for [`LogConcaveFit::mode`].
pub fn mode(fit: &LogConcaveFit) -> ModeEstimate {
    fit.mode()
}

/// Convenience wrapper for [`LogConcaveFit::threshold_interval`].
pub fn threshold_interval(fit: &LogConcaveFit, tau: f64) -> Result<(f64, f64)> {
    fit.threshold_interval(tau)
}
