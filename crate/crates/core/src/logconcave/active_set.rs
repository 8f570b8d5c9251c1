//! Active-set maximization of `Σ w_i φ(x_i) - ∫ exp φ` over concave,
//! piecewise-linear `φ` with kinks only at sample points, optionally with the
//! mode pinned to one grid point.
//!
//! The free parameters are the values of `φ` at the current knots; between
//! knots `φ` is linear. For a fixed knot set the objective is smooth and
//! strictly concave and is maximized by damped Newton. Knots are added where
//! the directional derivative `∫_{x_1}^{x_j} (F - F̂)` is most positive and
//! removed (with a step back along the segment to the previous iterate) when
//! a Newton solution breaks concavity. The mode-pinned variant additionally
//! ties the segment next to the pinned point to slope zero when its sign
//! constraint becomes active.

use crate::error::{Error, Result};

/// `∫_0^1 u^k e^{-a u} du` for `k = 0, 1, 2` and `a >= 0`.
fn decay_moments(a: f64) -> [f64; 3] {
    if a <= 2.0 {
        let mut out = [0.0; 3];
        let mut term = 1.0; // (-a)^j / j!
        for j in 0..40 {
            let jf = j as f64;
            out[0] += term / (jf + 1.0);
            out[1] += term / (jf + 2.0);
            out[2] += term / (jf + 3.0);
            term *= -a / (jf + 1.0);
            if term.abs() < 1e-18 {
                break;
            }
        }
        out
    } else {
        let e = (-a).exp();
        [
            (1.0 - e) / a,
            (1.0 - e * (1.0 + a)) / (a * a),
            (2.0 - e * (a * a + 2.0 * a + 2.0)) / (a * a * a),
        ]
    }
}

/// Integrals over `u ∈ [0, 1]` of `e^{(1-u) r + u s}` against `1`, `u`,
/// `1-u`, `u²`, `(1-u)²` and `u(1-u)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SegmentIntegrals {
    pub j: f64,
    pub j_s: f64,
    pub j_r: f64,
    pub j_ss: f64,
    pub j_rr: f64,
    pub j_rs: f64,
}

pub(crate) fn segment_integrals(r: f64, s: f64) -> SegmentIntegrals {
    let delta = s - r;
    if delta <= 0.0 {
        // Mass concentrated near u = 0; factor out e^r.
        let [m0, m1, m2] = decay_moments(-delta);
        let e = r.exp();
        SegmentIntegrals {
            j: e * m0,
            j_s: e * m1,
            j_r: e * (m0 - m1),
            j_ss: e * m2,
            j_rr: e * (m0 - 2.0 * m1 + m2),
            j_rs: e * (m1 - m2),
        }
    } else {
        // Mirror u -> 1 - u and factor out e^s.
        let [m0, m1, m2] = decay_moments(delta);
        let e = s.exp();
        SegmentIntegrals {
            j: e * m0,
            j_s: e * (m0 - m1),
            j_r: e * m1,
            j_ss: e * (m0 - 2.0 * m1 + m2),
            j_rr: e * m2,
            j_rs: e * (m1 - m2),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    /// Normalized log-density at every grid point.
    pub phi: Vec<f64>,
    /// Grid indices where the slope may change (always includes both ends
    /// and the pinned mode).
    pub knots: Vec<usize>,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct State {
    knots: Vec<usize>,
    tie_left: bool,
    tie_right: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Constraint {
    Concavity(usize),
    LeftSign,
    RightSign,
}

struct Problem<'a> {
    x: &'a [f64],
    w: &'a [f64],
    mode: Option<usize>,
}

const NEWTON_MAX_ITER: usize = 200;

/// Maximizes the weighted log-likelihood on a sorted, strictly increasing
/// grid `x` with non-negative weights `w` summing to one.
pub(crate) fn solve(x: &[f64], w: &[f64], mode: Option<usize>, tol: f64) -> Result<Solution> {
    let n = x.len();
    if n < 2 {
        return Err(Error::DegenerateSample(format!(
            "need at least 2 distinct points, got {n}"
        )));
    }
    debug_assert!(x.windows(2).all(|p| p[0] < p[1]));
    let problem = Problem { x, w, mode };
    let range = x[n - 1] - x[0];
    let tol = tol * range.max(f64::MIN_POSITIVE);

    let mut knots = vec![0, n - 1];
    if let Some(k) = mode {
        if k >= n {
            return Err(Error::Internal(format!("pinned index {k} outside grid of {n}")));
        }
        if k != 0 && k != n - 1 {
            knots.insert(1, k);
        }
    }
    let mut state = State {
        knots,
        tie_left: false,
        tie_right: false,
    };
    let mut phi = vec![-range.ln(); n];
    phi = problem.settle(&mut state, phi)?;

    // Moves whose gain sits at the rounding level can be undone by the
    // step-back, returning to an earlier active set; stop when that happens.
    let mut seen = std::collections::HashSet::new();
    seen.insert(state.clone());
    let max_outer = 4 * n + 50;
    for _ in 0..max_outer {
        let d = problem.integrated_cdf_gap(&phi);
        let mut best: Option<(f64, Move)> = None;
        let mut consider = |value: f64, mv: Move| {
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                best = Some((value, mv));
            }
        };
        let mut ki = 0;
        for j in 1..n - 1 {
            while state.knots[ki] < j {
                ki += 1;
            }
            if state.knots[ki] == j {
                continue;
            }
            consider(problem.direction_gain(&d, j), Move::AddKnot(j));
        }
        if let Some(k) = mode {
            if state.tie_left {
                consider(d[k], Move::ReleaseLeft);
            }
            if state.tie_right {
                consider(d[k] - d[n - 1], Move::ReleaseRight);
            }
        }
        match best {
            Some((gain, mv)) if gain > tol => {
                match mv {
                    Move::AddKnot(j) => {
                        let pos = state.knots.partition_point(|&k| k < j);
                        state.knots.insert(pos, j);
                    }
                    Move::ReleaseLeft => state.tie_left = false,
                    Move::ReleaseRight => state.tie_right = false,
                }
                phi = problem.settle(&mut state, phi)?;
                if !seen.insert(state.clone()) {
                    break;
                }
            }
            _ => break,
        }
    }

    let mass = problem.mass(&phi);
    let shift = mass.ln();
    phi.iter_mut().for_each(|p| *p -= shift);
    let log_likelihood = w.iter().zip(&phi).map(|(wi, p)| wi * p).sum();
    Ok(Solution {
        phi,
        knots: state.knots,
        log_likelihood,
    })
}

/// Solves `A x = b` for symmetric positive definite tridiagonal `A` with
/// diagonal `diag` and off-diagonal `off`; `None` if a pivot is not positive.
fn solve_tridiagonal(diag: &[f64], off: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let q = diag.len();
    let mut d = vec![0.0; q];
    let mut l = vec![0.0; q.saturating_sub(1)];
    let mut y = vec![0.0; q];
    for i in 0..q {
        let (mut pivot, mut rhs) = (diag[i], b[i]);
        if i > 0 {
            pivot -= l[i - 1] * l[i - 1] * d[i - 1];
            rhs -= l[i - 1] * y[i - 1];
        }
        if !(pivot > 0.0) {
            return None;
        }
        d[i] = pivot;
        y[i] = rhs;
        if i + 1 < q {
            l[i] = off[i] / pivot;
        }
    }
    let mut x = vec![0.0; q];
    for i in (0..q).rev() {
        x[i] = y[i] / d[i] - if i + 1 < q { l[i] * x[i + 1] } else { 0.0 };
    }
    Some(x)
}

#[derive(Debug, Clone, Copy)]
enum Move {
    AddKnot(usize),
    ReleaseLeft,
    ReleaseRight,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.x.len()
    }

    fn slope(&self, phi: &[f64], i: usize) -> f64 {
        (phi[i + 1] - phi[i]) / (self.x[i + 1] - self.x[i])
    }

    fn mass(&self, phi: &[f64]) -> f64 {
        (0..self.n() - 1)
            .map(|i| (self.x[i + 1] - self.x[i]) * segment_integrals(phi[i], phi[i + 1]).j)
            .sum()
    }

    /// `D_j = ∫_{x_1}^{x_j} (F - F̂)` at every grid point.
    fn integrated_cdf_gap(&self, phi: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut d = vec![0.0; n];
        let (mut cdf, mut int_cdf, mut cum_w, mut int_emp) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n - 1 {
            let dx = self.x[i + 1] - self.x[i];
            let seg = segment_integrals(phi[i], phi[i + 1]);
            cum_w += self.w[i];
            int_cdf += cdf * dx + dx * dx * seg.j_r;
            cdf += dx * seg.j;
            int_emp += cum_w * dx;
            d[i + 1] = int_cdf - int_emp;
        }
        d
    }

    /// Directional derivative of the objective for a new kink at `j`.
    fn direction_gain(&self, d: &[f64], j: usize) -> f64 {
        match self.mode {
            Some(k) if j > k => d[j] - d[self.n() - 1],
            _ => d[j],
        }
    }

    fn constraint_value(&self, phi: &[f64], c: Constraint) -> f64 {
        match c {
            Constraint::Concavity(j) => self.slope(phi, j) - self.slope(phi, j - 1),
            Constraint::LeftSign => -self.slope(phi, self.mode.expect("pinned") - 1),
            Constraint::RightSign => self.slope(phi, self.mode.expect("pinned")),
        }
    }

    fn free_constraints(&self, state: &State) -> Vec<Constraint> {
        let n = self.n();
        let mut out: Vec<Constraint> = state
            .knots
            .iter()
            .copied()
            .filter(|&j| j != 0 && j != n - 1 && Some(j) != self.mode)
            .map(Constraint::Concavity)
            .collect();
        if let Some(k) = self.mode {
            if k > 0 && !state.tie_left {
                out.push(Constraint::LeftSign);
            }
            if k < n - 1 && !state.tie_right {
                out.push(Constraint::RightSign);
            }
        }
        out
    }

    /// Solves for the current active set, stepping back and deactivating
    /// constraints until the solution is feasible. `phi` must be feasible.
    fn settle(&self, state: &mut State, mut phi: Vec<f64>) -> Result<Vec<f64>> {
        for _ in 0..4 * self.n() + 50 {
            let candidate = self.newton(state, &phi)?;
            let slope_scale = (0..self.n() - 1)
                .map(|i| self.slope(&candidate, i).abs())
                .fold(1.0f64, f64::max);
            let eps = 1e-10 * slope_scale;
            let mut step: Option<(f64, Constraint)> = None;
            for c in self.free_constraints(state) {
                let new = self.constraint_value(&candidate, c);
                if new > eps {
                    let old = self.constraint_value(&phi, c).min(0.0);
                    let lambda = (old / (old - new)).clamp(0.0, 1.0);
                    if step.is_none_or(|(l, _)| lambda < l) {
                        step = Some((lambda, c));
                    }
                }
            }
            let Some((lambda, c)) = step else {
                return Ok(candidate);
            };
            for (p, q) in phi.iter_mut().zip(&candidate) {
                *p += lambda * (q - *p);
            }
            match c {
                Constraint::Concavity(j) => state.knots.retain(|&k| k != j),
                Constraint::LeftSign => state.tie_left = true,
                Constraint::RightSign => state.tie_right = true,
            }
        }
        Err(Error::Internal("active-set step-back did not terminate".into()))
    }

    /// Maps knot positions to parameter slots, merging tied knots.
    fn parameter_groups(&self, state: &State) -> (Vec<usize>, usize) {
        let p = state.knots.len();
        let mode_pos = self
            .mode
            .map(|k| state.knots.binary_search(&k).expect("pinned index is a knot"));
        let mut group = vec![0; p];
        let mut next = 0;
        for a in 0..p {
            let tied_to_previous = a > 0
                && mode_pos.is_some_and(|m| {
                    (a == m && state.tie_left) || (a == m + 1 && state.tie_right)
                });
            if tied_to_previous {
                group[a] = group[a - 1];
            } else {
                group[a] = next;
                next += 1;
            }
        }
        (group, next)
    }

    fn newton(&self, state: &State, start: &[f64]) -> Result<Vec<f64>> {
        let knots = &state.knots;
        let p = knots.len();
        let (group, q) = self.parameter_groups(state);

        // Linear term: Σ w_i φ(x_i) = c · ψ.
        let mut lin = vec![0.0; p];
        for a in 0..p - 1 {
            let (lo, hi) = (knots[a], knots[a + 1]);
            let span = self.x[hi] - self.x[lo];
            for i in lo..hi {
                let t = (self.x[i] - self.x[lo]) / span;
                lin[a] += self.w[i] * (1.0 - t);
                lin[a + 1] += self.w[i] * t;
            }
        }
        lin[p - 1] += self.w[knots[p - 1]];
        let widths: Vec<f64> = knots.windows(2).map(|k| self.x[k[1]] - self.x[k[0]]).collect();

        let mut beta = vec![0.0; q];
        let mut counts = vec![0usize; q];
        for (a, &k) in knots.iter().enumerate() {
            beta[group[a]] += start[k];
            counts[group[a]] += 1;
        }
        for (b, c) in beta.iter_mut().zip(&counts) {
            *b /= *c as f64;
        }

        let expand = |beta: &[f64]| -> Vec<f64> { group.iter().map(|&g| beta[g]).collect() };
        let objective = |psi: &[f64]| -> f64 {
            let linear: f64 = lin.iter().zip(psi).map(|(c, v)| c * v).sum();
            let integral: f64 = widths
                .iter()
                .enumerate()
                .map(|(a, dx)| dx * segment_integrals(psi[a], psi[a + 1]).j)
                .sum();
            linear - integral
        };

        let mut lin_grouped = vec![0.0; q];
        for a in 0..p {
            lin_grouped[group[a]] += lin[a];
        }

        let mut psi = expand(&beta);
        let mut value = objective(&psi);
        for _ in 0..NEWTON_MAX_ITER {
            // Grouped knots are consecutive, so the Hessian stays tridiagonal.
            let mut grad = lin_grouped.clone();
            let mut diag = vec![0.0; q];
            let mut off = vec![0.0; q.saturating_sub(1)];
            for (a, dx) in widths.iter().enumerate() {
                let seg = segment_integrals(psi[a], psi[a + 1]);
                let (ga, gb) = (group[a], group[a + 1]);
                grad[ga] -= dx * seg.j_r;
                grad[gb] -= dx * seg.j_s;
                diag[ga] += dx * seg.j_rr;
                diag[gb] += dx * seg.j_ss;
                if ga == gb {
                    diag[ga] += 2.0 * dx * seg.j_rs;
                } else {
                    off[ga] += dx * seg.j_rs;
                }
            }
            let direction = solve_tridiagonal(&diag, &off, &grad).unwrap_or_else(|| {
                let ridge = 1e-12 * diag.iter().copied().fold(1e-300, f64::max);
                let shifted: Vec<f64> = diag.iter().map(|d| d + ridge).collect();
                solve_tridiagonal(&shifted, &off, &grad).unwrap_or_else(|| grad.clone())
            });
            let decrement: f64 = grad.iter().zip(&direction).map(|(g, d)| g * d).sum();
            if !decrement.is_finite() {
                return Err(Error::Internal("non-finite Newton step".into()));
            }
            let step_size = direction.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            let scale = beta.iter().fold(1.0f64, |m, b| m.max(b.abs()));
            if decrement <= 1e-22 || step_size <= 1e-14 * scale {
                break;
            }
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-12 {
                let trial_beta: Vec<f64> = beta.iter().zip(direction.iter()).map(|(b, d)| b + t * d).collect();
                let trial_psi = expand(&trial_beta);
                let trial = objective(&trial_psi);
                if trial.is_finite() && trial >= value + 1e-4 * t * decrement {
                    beta = trial_beta;
                    psi = trial_psi;
                    value = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }

        let mut phi = vec![0.0; self.n()];
        for a in 0..p - 1 {
            let (lo, hi) = (knots[a], knots[a + 1]);
            let span = self.x[hi] - self.x[lo];
            for i in lo..hi {
                let t = (self.x[i] - self.x[lo]) / span;
                phi[i] = (1.0 - t) * psi[a] + t * psi[a + 1];
            }
        }
        phi[knots[p - 1]] = psi[p - 1];
        Ok(phi)
    }
}
