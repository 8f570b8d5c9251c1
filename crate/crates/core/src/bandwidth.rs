//! Bandwidth selectors: a Silverman-type rule of thumb and a rule based on
//! the length of the Euclidean minimum spanning tree.

use crate::error::{Error, Result};
use crate::parallel;
use crate::points::{dist2, PointCloud};

/// `h = A0 · (d + 2)^{-1/(d+4)} · n^{-1/(d+4)} · σ_min`, where `σ_min` is the
/// smallest positive per-coordinate sample standard deviation.
pub fn silverman_bandwidth(data: &PointCloud, a0: f64) -> Result<f64> {
    if !(a0.is_finite() && a0 > 0.0) {
        return Err(Error::Domain(format!("scale factor {a0} must be positive")));
    }
    let n = data.len();
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 points, got {n}")));
    }
    let sigma_min = data
        .coordinate_std()
        .into_iter()
        .filter(|s| *s > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !sigma_min.is_finite() {
        return Err(Error::DegenerateData("every coordinate is constant".into()));
    }
    let d = data.dim() as f64;
    let e = -1.0 / (d + 4.0);
    Ok(a0 * (d + 2.0).powf(e) * (n as f64).powf(e) * sigma_min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmstResult {
    /// Tree edges as `(parent, child)` in the order Prim's algorithm adds them.
    pub edges: Vec<(usize, usize)>,
    pub total_length: f64,
}

/// Rows at least this long are scanned in parallel.
const PARALLEL_ROW: usize = 4096;

/// Exact Euclidean minimum spanning tree by Prim's algorithm on the complete
/// graph: `O(n²)` distance evaluations and `O(n)` memory. Coincident points
/// are joined by zero-length edges.
pub fn emst(data: &PointCloud) -> Result<EmstResult> {
    let n = data.len();
    if n < 2 {
        return Err(Error::Domain(format!("spanning tree needs at least 2 points, got {n}")));
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut total = 0.0;
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let p = data.point(current);
        let row: Vec<f64> = if n >= PARALLEL_ROW {
            parallel::map_indices(n, |j| if in_tree[j] { f64::INFINITY } else { dist2(p, data.point(j)) })
        } else {
            (0..n)
                .map(|j| if in_tree[j] { f64::INFINITY } else { dist2(p, data.point(j)) })
                .collect()
        };
        let mut next = usize::MAX;
        let mut next_d = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            if row[j] < best[j] {
                best[j] = row[j];
                parent[j] = current;
            }
            if next == usize::MAX || best[j] < next_d {
                next = j;
                next_d = best[j];
            }
        }
        in_tree[next] = true;
        edges.push((parent[next], next));
        total += next_d.sqrt();
        current = next;
    }
    Ok(EmstResult {
        edges,
        total_length: total,
    })
}

/// `h = (L_n / n)^{1/(d+4)}` with `L_n` the EMST length.
pub fn emst_bandwidth(data: &PointCloud) -> Result<f64> {
    let tree = emst(data)?;
    Ok(emst_rule(tree.total_length, data.len(), data.dim()))
}

/// `(length / n)^{1/(d+4)}`.
pub fn emst_rule(length: f64, n: usize, d: usize) -> f64 {
    (length / n as f64).powf(1.0 / (d as f64 + 4.0))
}
