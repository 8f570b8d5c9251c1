use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{active_set, fit, LogConcaveFit, WeightedSample, ACTIVE_SET_TOL};
use crate::error::{Error, Result};
use crate::parallel;

/// Log-concave MLE whose mode is pinned at `m`: non-decreasing left of `m`,
/// non-increasing right of it, with `m` a knot.
pub fn constrained_fit(sample: &WeightedSample, m: f64) -> Result<LogConcaveFit> {
    let z = sample.points();
    let n = z.len();
    if n < 2 {
        return Err(Error::DegenerateSample(format!(
            "log-concave fit needs at least 2 distinct points, got {n}"
        )));
    }
    if !(m >= z[0] && m <= z[n - 1]) {
        return Err(Error::Domain(format!(
            "pinned mode {m} outside sample range [{}, {}]",
            z[0],
            z[n - 1]
        )));
    }
    let pos = z.partition_point(|&t| t < m);
    if z[pos] == m {
        let sol = active_set::solve(z, sample.weights(), Some(pos), ACTIVE_SET_TOL)?;
        return Ok(LogConcaveFit::from_solution(z, sol));
    }
    // Insert m as a zero-weight grid point.
    let mut grid = Vec::with_capacity(n + 1);
    grid.extend_from_slice(&z[..pos]);
    grid.push(m);
    grid.extend_from_slice(&z[pos..]);
    let mut w = Vec::with_capacity(n + 1);
    w.extend_from_slice(&sample.weights()[..pos]);
    w.push(0.0);
    w.extend_from_slice(&sample.weights()[pos..]);
    let sol = active_set::solve(&grid, &w, Some(pos), ACTIVE_SET_TOL)?;
    Ok(LogConcaveFit::from_solution(&grid, sol))
}

/// `2 log λ(m) = 2 n_eff (ℓ(unconstrained) - ℓ(constrained at m))`, with
/// `n_eff` the Kish effective sample size. Infinite when `m` lies outside the
/// sample range, where no constrained fit exists.
pub fn lr_statistic(sample: &WeightedSample, unconstrained: &LogConcaveFit, m: f64) -> Result<f64> {
    let z = sample.points();
    if !(m >= z[0] && m <= z[z.len() - 1]) {
        return Ok(f64::INFINITY);
    }
    let constrained = constrained_fit(sample, m)?;
    let gap = unconstrained.log_likelihood() - constrained.log_likelihood();
    Ok((2.0 * sample.effective_n() * gap).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrInterval {
    pub lo: f64,
    pub hi: f64,
    /// The statistic was non-increasing then non-decreasing on a 50-point
    /// grid over the sample range. When false the bisection endpoints may
    /// miss parts of the set.
    pub monotone: bool,
}

const MONOTONE_GRID: usize = 50;
const BISECTION_STEPS: usize = 100;

/// `{m : 2 log λ(m) <= c}`, located by bisection outward from the mode.
pub fn lr_confidence_interval(
    sample: &WeightedSample,
    alpha: f64,
    critical_value: f64,
) -> Result<LrInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha {alpha} outside (0, 1)")));
    }
    if !(critical_value >= 0.0) {
        return Err(Error::Domain(format!(
            "critical value must be non-negative, got {critical_value}"
        )));
    }
    let unconstrained = fit(sample)?;
    let mode = unconstrained.mode().location;
    let z = sample.points();
    let (z1, zn) = (z[0], z[z.len() - 1]);
    let stat = |m: f64| lr_statistic(sample, &unconstrained, m);
    let resolution = 1e-12 * (zn - z1);

    // `inside` is accepted, `outside` rejected; shrink towards the boundary.
    let bisect = |mut inside: f64, mut outside: f64| -> Result<f64> {
        for _ in 0..BISECTION_STEPS {
            if (outside - inside).abs() <= resolution {
                break;
            }
            let mid = 0.5 * (inside + outside);
            if stat(mid)? <= critical_value {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(inside)
    };
    let lo = if stat(z1)? <= critical_value {
        z1
    } else {
        bisect(mode, z1)?
    };
    let hi = if stat(zn)? <= critical_value {
        zn
    } else {
        bisect(mode, zn)?
    };

    let grid: Vec<f64> = (0..MONOTONE_GRID)
        .map(|i| z1 + (zn - z1) * i as f64 / (MONOTONE_GRID - 1) as f64)
        .collect();
    let values = grid.iter().map(|&m| stat(m)).collect::<Result<Vec<_>>>()?;
    let slack = |a: f64, b: f64| 1e-8 * (1.0 + a.abs().max(b.abs()));
    let monotone = grid.windows(2).zip(values.windows(2)).all(|(g, v)| {
        if g[1] <= mode {
            v[1] <= v[0] + slack(v[0], v[1])
        } else if g[0] >= mode {
            v[1] >= v[0] - slack(v[0], v[1])
        } else {
            true
        }
    });
    Ok(LrInterval { lo, hi, monotone })
}

/// Null draws of `2 log λ_n(0)` for standard-normal samples of size `n`.
/// Replicate `r` uses stream `r` of a ChaCha8 generator keyed by `seed`, so
/// the output does not depend on scheduling.
pub fn null_statistics(n: usize, reps: usize, seed: u64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Domain(format!("sample size {n} below 2")));
    }
    parallel::map_indices(reps, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let sample = WeightedSample::equal_weights(z)?;
        let unconstrained = fit(&sample)?;
        lr_statistic(&sample, &unconstrained, 0.0)
    })
    .into_iter()
    .collect()
}

/// Empirical `(1 - α)`-quantile of the null statistic.
pub fn calibrate_critical_value(alpha: f64, n: usize, reps: usize, seed: u64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha {alpha} must be positive")));
    }
    if alpha >= 1.0 {
        return Ok(0.0);
    }
    if reps < 200 {
        return Err(Error::Domain(format!("{reps} replicates, need at least 200")));
    }
    let mut stats = null_statistics(n, reps, seed)?;
    stats.sort_by(f64::total_cmp);
    let idx = (((1.0 - alpha) * reps as f64).ceil() as usize).clamp(1, reps) - 1;
    Ok(stats[idx])
}
