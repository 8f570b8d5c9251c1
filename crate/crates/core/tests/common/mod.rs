//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use densridge::kernels::Kernel;
use densridge::local_moments::local_moments;
use densridge::logconcave::{LogConcaveFit, WeightedSample};
use densridge::PointCloud;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` draws from `N(mean, diag(sd²))`.
pub fn normal_cloud(n: usize, mean: &[f64], sd: &[f64], seed: u64) -> PointCloud {
    let mut r = rng(seed);
    let d = sd.len();
    let coords = (0..n * d)
        .map(|k| mean[k % d] + sd[k % d] * r.sample::<f64, _>(StandardNormal))
        .collect();
    PointCloud::new(d, coords).unwrap()
}

/// Two-component Gaussian mixture in the plane.
pub fn mixture_cloud(n: usize, seed: u64) -> PointCloud {
    let mut r = rng(seed);
    let mut coords = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let (cx, sd) = if r.random::<f64>() < 0.5 { (-1.5, 0.6) } else { (1.5, 0.8) };
        coords.push(cx + sd * r.sample::<f64, _>(StandardNormal));
        coords.push(sd * r.sample::<f64, _>(StandardNormal));
    }
    PointCloud::new(2, coords).unwrap()
}

/// Gaussian KDE by direct summation.
pub fn gaussian_kde(data: &PointCloud, x: &[f64], h: f64) -> f64 {
    let d = data.dim() as f64;
    let c = (2.0 * std::f64::consts::PI * h * h).powf(-d / 2.0);
    data.iter()
        .map(|p| {
            let r2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            c * (-0.5 * r2 / (h * h)).exp()
        })
        .sum::<f64>()
        / data.len() as f64
}

/// Minimum spanning tree length by enumerating all `n^{n-2}` labelled trees
/// through their Prüfer sequences.
pub fn brute_force_mst_length(pts: &[Vec<f64>]) -> f64 {
    let n = pts.len();
    let dist = |a: usize, b: usize| -> f64 {
        pts[a].iter().zip(&pts[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    if n == 2 {
        return dist(0, 1);
    }
    let len = n - 2;
    let mut code = vec![0usize; len];
    let mut best = f64::INFINITY;
    loop {
        let mut degree = vec![1usize; n];
        for &c in &code {
            degree[c] += 1;
        }
        let mut total = 0.0;
        for &c in &code {
            let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
            total += dist(leaf, c);
            degree[leaf] = 0;
            degree[c] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
        total += dist(rest[0], rest[1]);
        best = best.min(total);

        let mut k = 0;
        loop {
            if k == len {
                return best;
            }
            code[k] += 1;
            if code[k] < n {
                break;
            }
            code[k] = 0;
            k += 1;
        }
    }
}

/// `∫ exp θ` for the piecewise-linear `θ` with values `phi` at `knots`.
pub fn piecewise_exp_integral(knots: &[f64], phi: &[f64]) -> f64 {
    knots
        .windows(2)
        .zip(phi.windows(2))
        .map(|(x, p)| {
            let dx = x[1] - x[0];
            let diff = p[1] - p[0];
            if diff.abs() < 1e-12 {
                dx * p[0].exp() * (1.0 + diff / 2.0 + diff * diff / 6.0)
            } else {
                dx * p[0].exp() * diff.exp_m1() / diff
            }
        })
        .sum()
}

fn interpolate(knots: &[f64], phi: &[f64], t: f64) -> f64 {
    let a = knots.partition_point(|&k| k <= t).clamp(1, knots.len() - 1) - 1;
    phi[a] + (phi[a + 1] - phi[a]) * (t - knots[a]) / (knots[a + 1] - knots[a])
}

/// `Σ w_i θ(z_i) - log ∫ exp θ`, the normalized weighted log-likelihood.
pub fn normalized_log_likelihood(sample: &WeightedSample, knots: &[f64], phi: &[f64]) -> f64 {
    let ll: f64 = sample
        .points()
        .iter()
        .zip(sample.weights())
        .map(|(&z, &w)| w * interpolate(knots, phi, z))
        .sum();
    ll - piecewise_exp_integral(knots, phi).ln()
}

/// Largest gain in the normalized log-likelihood from moving a single knot
/// value by `±eps`; non-positive at the maximum likelihood estimate.
pub fn best_knot_perturbation_gain(sample: &WeightedSample, fit: &LogConcaveFit, eps: f64) -> f64 {
    let knots = fit.knots();
    let phi = fit.log_density_at_knots();
    let base = normalized_log_likelihood(sample, knots, phi);
    let mut best = f64::NEG_INFINITY;
    for j in 0..knots.len() {
        for sign in [-1.0, 1.0] {
            let mut p = phi.to_vec();
            p[j] += sign * eps;
            best = best.max(normalized_log_likelihood(sample, knots, &p) - base);
        }
    }
    best
}

/// Random weighted sample of size 2..=60 with weights in `[0.1, 1]`.
pub fn random_weighted_sample(seed: u64) -> WeightedSample {
    let mut r = rng(seed);
    let n = r.random_range(2..=60);
    let z: Vec<f64> = (0..n).map(|_| r.sample::<f64, _>(StandardNormal) * 1.5 + 0.3).collect();
    let w: Vec<f64> = (0..n).map(|_| r.random_range(0.1..1.0)).collect();
    WeightedSample::new(z, w).unwrap()
}

/// Central-difference Hessian of `f` at `x`.
pub fn fd_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> DMatrix<f64> {
    let d = x.len();
    let mut h = DMatrix::zeros(d, d);
    let at = |di: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, s) in di {
            y[i] += s;
        }
        f(&y)
    };
    for i in 0..d {
        for j in 0..d {
            h[(i, j)] = if i == j {
                (at(&[(i, step)]) - 2.0 * f(x) + at(&[(i, -step)])) / (step * step)
            } else {
                (at(&[(i, step), (j, step)]) - at(&[(i, step), (j, -step)]) - at(&[(i, -step), (j, step)])
                    + at(&[(i, -step), (j, -step)]))
                    / (4.0 * step * step)
            };
        }
    }
    h
}

/// Random points in the convex hull of `data`: convex combinations of three
/// random sample points.
pub fn hull_points(data: &PointCloud, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let mut w = [r.random::<f64>(), r.random::<f64>(), r.random::<f64>()];
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            let idx = [0, 1, 2].map(|_| r.random_range(0..data.len()));
            (0..data.dim())
                .map(|j| (0..3).map(|k| w[k] * data.point(idx[k])[j]).sum())
                .collect()
        })
        .collect()
}

/// The Lipschitz constant `4 d M √L̃ / m²` for the local covariance with the
/// Gaussian kernel. `L̃` bounds the moment Lipschitz constants with the
/// bandwidth factors written out; `M` and `m` are the largest local moment
/// and the smallest zeroth moment over `probes`.
pub fn lipschitz_constant(data: &PointCloud, h: f64, probes: &[Vec<f64>]) -> f64 {
    let d = data.dim();
    let k = Kernel::gaussian(d);
    let diam = {
        let mut best: f64 = 0.0;
        for a in data.iter() {
            for b in data.iter() {
                best = best.max(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>());
            }
        }
        best.sqrt().max(1.0)
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    let k_sup = two_pi.powf(-(d as f64) / 2.0);
    let grad_sup = k_sup * (-0.5f64).exp();
    let hd = h.powi(d as i32);
    let moment_factor = h.powi(-2).max(1.0);
    let l_tilde = diam * diam * moment_factor * (3.0 * k_sup / hd + grad_sup / (hd * h));
    let (mut big_m, mut small_m) = (1.0f64, f64::INFINITY);
    for x in probes {
        let lm = local_moments(data, x, h, &k).unwrap();
        small_m = small_m.min(lm.s);
        big_m = big_m.max(lm.s.abs()).max(lm.s_vec.amax()).max(lm.s_mat.amax());
    }
    4.0 * d as f64 * big_m * l_tilde.sqrt() / (small_m * small_m)
}
