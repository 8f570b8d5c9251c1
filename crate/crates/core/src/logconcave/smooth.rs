use super::{LogConcaveFit, WeightedSample};
use crate::error::{Error, Result};
use crate::special::{mills_ratio, normal_cdf, normal_sf, INV_SQRT_2PI};

/// The log-concave fit convolved with a centred Gaussian whose variance
/// makes the total variance equal to the empirical one.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedFit {
    pub base: LogConcaveFit,
    pub gamma: f64,
    /// The variance deficit was negligible and `gamma` was clamped to a tiny
    /// positive value.
    pub clamped: bool,
}

struct Terms {
    value: f64,
    first: f64,
    second: f64,
}

impl SmoothedFit {
    /// Contribution of every segment at `y`, accumulated.
    fn terms(&self, y: f64) -> Terms {
        let g = self.gamma;
        let knots = self.base.knots();
        let phi = self.base.log_density_at_knots();
        let mut out = Terms {
            value: 0.0,
            first: 0.0,
            second: 0.0,
        };
        for (k, &a) in self.base.slopes().iter().enumerate() {
            let (u, v) = (knots[k], knots[k + 1]);
            let l = (u - y - a * g * g) / g;
            let r = (v - y - a * g * g) / g;
            let t_l = INV_SQRT_2PI * (phi[k] - (u - y) * (u - y) / (2.0 * g * g)).exp();
            let t_r = INV_SQRT_2PI * (phi[k + 1] - (v - y) * (v - y) / (2.0 * g * g)).exp();
            let p = if l >= 0.0 {
                t_l * mills_ratio(l) - t_r * mills_ratio(r)
            } else if r <= 0.0 {
                t_r * mills_ratio(-r) - t_l * mills_ratio(-l)
            } else {
                let mass = 1.0 - normal_sf(r) - normal_cdf(l);
                (phi[k] + a * (y - u) + 0.5 * a * a * g * g).exp() * mass
            };
            let first = a * p + (t_l - t_r) / g;
            let second = a * first + (t_l * (u - y) - t_r * (v - y)) / (g * g * g);
            out.value += p;
            out.first += first;
            out.second += second;
        }
        out
    }

    /// `ĝ*(y)`.
    pub fn density(&self, y: f64) -> f64 {
        self.terms(y).value
    }

    /// `ĝ*'(y)`.
    pub fn derivative(&self, y: f64) -> f64 {
        self.terms(y).first
    }

    /// `ĝ*''(y)`.
    pub fn second_derivative(&self, y: f64) -> f64 {
        self.terms(y).second
    }

    /// Mean and variance of `ĝ*`.
    pub fn mean_variance(&self) -> (f64, f64) {
        let (m, v) = self.base.mean_variance();
        (m, v + self.gamma * self.gamma)
    }
}

/// Smooths `fit` so that its variance matches `empirical_variance`.
pub fn smooth(fit: &LogConcaveFit, empirical_variance: f64) -> Result<SmoothedFit> {
    if !(empirical_variance.is_finite() && empirical_variance > 0.0) {
        return Err(Error::Domain(format!(
            "empirical variance must be positive, got {empirical_variance}"
        )));
    }
    let (_, fit_var) = fit.mean_variance();
    let deficit = empirical_variance - fit_var;
    if deficit < -1e-8 * empirical_variance {
        return Err(Error::Internal(format!(
            "fitted variance {fit_var} exceeds empirical variance {empirical_variance}"
        )));
    }
    let (gamma, clamped) = if deficit < 1e-12 * empirical_variance {
        (1e-6 * empirical_variance.sqrt(), true)
    } else {
        (deficit.sqrt(), false)
    };
    Ok(SmoothedFit {
        base: fit.clone(),
        gamma,
        clamped,
    })
}

/// Smooths the fit of `sample` against the sample's own variance.
pub fn smooth_sample(fit: &LogConcaveFit, sample: &WeightedSample) -> Result<SmoothedFit> {
    smooth(fit, sample.variance())
}

const MODE_TOL: f64 = 1e-10;

/// Root of `ĝ*'` by Newton's method safeguarded with bisection.
pub fn smoothed_mode(sf: &SmoothedFit) -> Result<f64> {
    let (z1, zn) = sf.base.support();
    let g = sf.gamma;
    let start = sf.base.mode().location;

    // Expand outwards from the base mode until the derivative changes sign,
    // never beyond four smoothing widths past the data.
    let (outer_lo, outer_hi) = (z1 - 4.0 * g, zn + 4.0 * g);
    let find = |dir: f64, limit: f64| {
        let mut k = 0;
        loop {
            let t = start + dir * g * 2f64.powi(k);
            let clipped = if dir < 0.0 { t.max(limit) } else { t.min(limit) };
            let d = sf.derivative(clipped);
            if d * dir <= 0.0 {
                return Some(clipped);
            }
            if clipped == limit {
                return None;
            }
            k += 1;
        }
    };
    let lo = find(-1.0, outer_lo);
    let hi = find(1.0, outer_hi);
    let (mut lo, mut hi) = match (lo, hi) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => {
            return Err(Error::Internal(
                "smoothed density derivative does not change sign".into(),
            ))
        }
    };

    let mut x = start.clamp(lo, hi);
    let scale = (zn - z1).max(g);
    for _ in 0..200 {
        let t = sf.terms(x);
        if t.first.abs() <= MODE_TOL || hi - lo <= 4.0 * f64::EPSILON * scale {
            return Ok(x);
        }
        if t.first > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - t.first / t.second;
        x = if t.second < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(x)
}
