//! Cyclic Jacobi eigensolver for small dense symmetric matrices, the
//! `V_∥ / V_⊥` split and projector distances between eigenspaces.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in decreasing order with matching orthonormal eigenvectors
/// (column `j` pairs with `eigenvalues[j]`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `λ_s - λ_{s+1}` with 1-based `s` as in the usual ridge notation.
    pub fn eigengap_at(&self, s: usize) -> Result<f64> {
        let d = self.dim();
        if s == 0 || s >= d {
            return Err(Error::Domain(format!("eigengap index {s} outside 1..{d}")));
        }
        Ok(self.eigenvalues[s - 1] - self.eigenvalues[s])
    }

    /// Columns `s+1..=d`: eigenvectors of the `d - s` smallest eigenvalues.
    pub fn v_perp(&self, s: usize) -> Result<DMatrix<f64>> {
        let d = self.dim();
        if s >= d {
            return Err(Error::Domain(format!("split index {s} must be below dimension {d}")));
        }
        Ok(self.eigenvectors.columns(s, d - s).into_owned())
    }

    /// Columns `1..=s`: eigenvectors of the `s` largest eigenvalues.
    pub fn v_par(&self, s: usize) -> Result<DMatrix<f64>> {
        let d = self.dim();
        if s > d {
            return Err(Error::Domain(format!("split index {s} exceeds dimension {d}")));
        }
        Ok(self.eigenvectors.columns(0, s).into_owned())
    }

    /// Orthogonal projector onto the `V_⊥` span.
    pub fn perp_projector(&self, s: usize) -> Result<DMatrix<f64>> {
        let v = self.v_perp(s)?;
        Ok(&v * v.transpose())
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.eigenvalues.clone()));
        &self.eigenvectors * lambda * self.eigenvectors.transpose()
    }
}

/// Full spectral decomposition of a symmetric matrix.
///
/// The input is symmetrized as `(M + Mᵀ)/2` first. Eigenvectors are
/// sign-normalized so that their first non-negligible component is positive;
/// within a numerically tied block they are ordered lexicographically. Only
/// the span of a tied block is meaningful.
pub fn spectral(m: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    let d = m.nrows();
    if d == 0 || m.ncols() != d {
        return Err(Error::Domain(format!(
            "expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix contains non-finite entries".into()));
    }

    let mut a = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            a[i * d + j] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    jacobi_sweeps(&mut a, &mut v, d, frob);

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|j| {
            let mut col: Vec<f64> = (0..d).map(|i| v[i * d + j]).collect();
            normalize_sign(&mut col);
            (a[j * d + j], col)
        })
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));

    let tie = 1e-12 * frob;
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (pairs[start].0 - pairs[end].0).abs() <= tie {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by(|x, y| {
                y.1.iter()
                    .zip(&x.1)
                    .map(|(p, q)| p.total_cmp(q))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        }
        start = end;
    }

    let eigenvalues = pairs.iter().map(|p| p.0).collect();
    let eigenvectors = DMatrix::from_fn(d, d, |i, j| pairs[j].1[i]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn jacobi_sweeps(a: &mut [f64], v: &mut [f64], d: usize, frob: f64) {
    if frob == 0.0 {
        return;
    }
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * d + j] * a[i * d + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * frob {
            return;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
}

fn normalize_sign(col: &mut [f64]) {
    if let Some(first) = col.iter().copied().find(|c| c.abs() > 1e-12) {
        if first < 0.0 {
            col.iter_mut().for_each(|c| *c = -*c);
        }
    }
}

/// `‖V_⊥(A)V_⊥(A)ᵀ - V_⊥(B)V_⊥(B)ᵀ‖_F`.
pub fn subspace_distance(a: &SpectralDecomposition, b: &SpectralDecomposition, s: usize) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let pa = a.perp_projector(s)?;
    let pb = b.perp_projector(s)?;
    Ok((pa - pb).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_invariants(m: &DMatrix<f64>, dec: &SpectralDecomposition) {
        let d = m.nrows();
        let v = &dec.eigenvectors;
        let vtv = v.transpose() * v;
        assert!((vtv - DMatrix::<f64>::identity(d, d)).amax() < 1e-10);
        let scale = m.norm().max(1e-300);
        for j in 0..d {
            let col = v.column(j);
            let resid = m * col - col * dec.eigenvalues[j];
            assert!(resid.norm() <= 1e-8 * scale);
        }
        assert!(dec.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn diagonal_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let dec = spectral(&m).unwrap();
        assert_eq!(dec.eigenvalues, vec![3.0, 1.0]);
        assert_eq!(dec.eigenvectors.column(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0]);
        check_invariants(&m, &dec);
        let perp = dec.v_perp(1).unwrap();
        assert_eq!(perp.iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0]);
        assert_eq!(dec.v_perp(0).unwrap(), dec.eigenvectors);
        assert!((dec.eigengap_at(1).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn identity_is_degenerate_but_valid() {
        let m = DMatrix::<f64>::identity(3, 3);
        let dec = spectral(&m).unwrap();
        assert_eq!(dec.eigenvalues, vec![1.0; 3]);
        check_invariants(&m, &dec);
    }

    #[test]
    fn rotated_diagonal_second_axis() {
        let theta: f64 = 0.7;
        let (c, s) = (theta.cos(), theta.sin());
        let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let m = &r * DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]) * r.transpose();
        let dec = spectral(&m).unwrap();
        let perp = dec.v_perp(1).unwrap();
        // Second rotated axis is (-sin θ, cos θ); compare spans via |cos angle|.
        let dot = -s * perp[(0, 0)] + c * perp[(1, 0)];
        assert!((dot.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perpendicular_lines_are_sqrt2_apart() {
        let a = spectral(&DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])).unwrap();
        let b = spectral(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0])).unwrap();
        assert!((subspace_distance(&a, &b, 1).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(subspace_distance(&a, &a, 1).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        let a = spectral(&DMatrix::<f64>::identity(2, 2)).unwrap();
        let b = spectral(&DMatrix::<f64>::identity(3, 3)).unwrap();
        assert!(subspace_distance(&a, &b, 1).is_err());
        assert!(a.v_perp(2).is_err());
        assert!(spectral(&DMatrix::from_element(2, 2, f64::NAN)).is_err());
        assert!(spectral(&DMatrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn zero_matrix() {
        let m = DMatrix::<f64>::zeros(3, 3);
        let dec = spectral(&m).unwrap();
        assert_eq!(dec.eigenvalues, vec![0.0; 3]);
        check_invariants(&m, &dec);
    }
}
