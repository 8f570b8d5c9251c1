//! Adaptive Gauss–Kronrod (7/15) quadrature, scalar, vector-valued and
//! tensor-product over boxes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-12,
            rel: 1e-10,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            ..Self::default()
        }
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn gk15<F>(f: &F, a: f64, b: f64, width: usize) -> Segment
where
    F: Fn(f64, &mut [f64]),
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = vec![0.0; width];
    let mut gauss = vec![0.0; width];
    let mut buf = vec![0.0; width];
    f(c, &mut buf);
    for k in 0..width {
        kron[k] = WGK[7] * buf[k];
        gauss[k] = WG[3] * buf[k];
    }
    for (i, (&x, &wk)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        for sign in [-1.0, 1.0] {
            f(c + sign * h * x, &mut buf);
            for k in 0..width {
                kron[k] += wk * buf[k];
                if i % 2 == 1 {
                    gauss[k] += WG[i / 2] * buf[k];
                }
            }
        }
    }
    let mut err = 0.0f64;
    for k in 0..width {
        kron[k] *= h;
        gauss[k] *= h;
        err = err.max((kron[k] - gauss[k]).abs());
    }
    Segment {
        a,
        b,
        value: kron,
        err,
    }
}

/// Integrates a vector-valued function over `[a, b]`; `f(x, out)` writes
/// `width` components. Convergence is judged on the largest component error.
pub fn integrate_vec<F>(f: F, a: f64, b: f64, width: usize, tol: Tolerance) -> Result<Vec<f64>>
where
    F: Fn(f64, &mut [f64]),
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("integration limits must be finite".into()));
    }
    if a == b {
        return Ok(vec![0.0; width]);
    }
    let mut heap = BinaryHeap::new();
    let first = gk15(&f, a, b, width);
    let mut total = first.value.clone();
    let mut total_err = first.err;
    heap.push(first);
    loop {
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if total_err <= tol.abs.max(tol.rel * scale) {
            return Ok(total);
        }
        if heap.len() >= tol.max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {total_err:e} after {} subintervals on [{a}, {b}]",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Quadrature(format!(
                "subinterval collapsed near {mid} with error {total_err:e}"
            )));
        }
        let left = gk15(&f, worst.a, mid, width);
        let right = gk15(&f, mid, worst.b, width);
        for k in 0..width {
            total[k] += left.value[k] + right.value[k] - worst.value[k];
        }
        total_err = total_err - worst.err + left.err + right.err;
        heap.push(left);
        heap.push(right);
        if heap.len() % 64 == 0 {
            // Re-sum to keep the running error free of drift.
            total_err = heap.iter().map(|s| s.err).sum();
        }
    }
}

/// Scalar adaptive quadrature over `[a, b]`.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_vec(|x, out| out[0] = f(x), a, b, 1, tol).map(|v| v[0])
}

/// Nested tensor-product quadrature over the box `[lo_j, hi_j]^d`.
///
/// `f(z, out)` receives the full point; each axis is integrated adaptively.
pub fn integrate_box<F>(f: F, lo: &[f64], hi: &[f64], width: usize, tol: Tolerance) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    if lo.len() != hi.len() || lo.is_empty() {
        return Err(Error::Domain("box corners must share a positive dimension".into()));
    }
    integrate_region(f, |_, axis| (lo[axis], hi[axis]), lo.len(), width, tol)
}

/// Nested quadrature over a region described axis by axis: `limits(prefix,
/// axis)` gives the range of coordinate `axis` given the earlier coordinates
/// in `prefix`. Aligning the limits with discontinuities of `f` keeps every
/// one-dimensional integrand smooth.
pub fn integrate_region<F, L>(f: F, limits: L, dim: usize, width: usize, tol: Tolerance) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
    L: Fn(&[f64], usize) -> (f64, f64),
{
    if dim == 0 {
        return Err(Error::Domain("region must have positive dimension".into()));
    }
    nested(&f, &limits, dim, &[], width, tol)
}

fn nested<F, L>(f: &F, limits: &L, dim: usize, prefix: &[f64], width: usize, tol: Tolerance) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
    L: Fn(&[f64], usize) -> (f64, f64),
{
    let axis = prefix.len();
    let (a, b) = limits(prefix, axis);
    if !(b > a) {
        return Ok(vec![0.0; width]);
    }
    let failure = std::cell::RefCell::new(None);
    let out = integrate_vec(
        |t, out| {
            let mut z = prefix.to_vec();
            z.push(t);
            if axis + 1 == dim {
                f(&z, out);
            } else {
                match nested(f, limits, dim, &z, width, tol) {
                    Ok(v) => out.copy_from_slice(&v),
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        out.iter_mut().for_each(|o| *o = 0.0);
                    }
                }
            }
        },
        a,
        b,
        width,
        tol,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(out)
}
