use crate::error::{ensure_finite, Error, Result};

/// An ordered set of `d`-dimensional points stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl PointCloud {
    /// Builds a cloud from a flat row-major buffer.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("point dimension must be positive".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::Domain(format!(
                "buffer of length {} is not a multiple of dimension {dim}",
                coords.len()
            )));
        }
        ensure_finite(&coords, "point coordinates")?;
        Ok(Self {
            dim,
            coords,
            labels: None,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::Domain("no rows given".into()))?;
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Domain(format!(
                    "row {i} has {} components, expected {dim}",
                    r.len()
                )));
            }
            coords.extend_from_slice(r);
        }
        Self::new(dim, coords)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.dim {
            return Err(Error::Domain(format!(
                "{} labels for {}-dimensional points",
                labels.len(),
                self.dim
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Applies `f` to every point, keeping labels.
    pub fn map_points(&self, mut f: impl FnMut(&[f64], &mut [f64])) -> Result<Self> {
        let mut coords = vec![0.0; self.coords.len()];
        for (src, dst) in self.iter().zip(coords.chunks_exact_mut(self.dim)) {
            f(src, dst);
        }
        let mut out = Self::new(self.dim, coords)?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    /// Per-coordinate sample standard deviation (divisor `n - 1`).
    pub fn coordinate_std(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; self.dim];
        if n < 2 {
            return out;
        }
        for (j, sd) in out.iter_mut().enumerate() {
            let mean = self.iter().map(|p| p[j]).sum::<f64>() / n as f64;
            let ss: f64 = self.iter().map(|p| (p[j] - mean).powi(2)).sum();
            *sd = (ss / (n - 1) as f64).sqrt();
        }
        out
    }

    /// Lower and upper corners of the bounding box.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in self.iter() {
            for j in 0..self.dim {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        (lo, hi)
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let pc = PointCloud::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(pc.len(), 2);
        assert_eq!(pc.point(1), &[3.0, 4.0]);
        assert_eq!(pc.bounding_box(), (vec![1.0, 2.0], vec![3.0, 4.0]));
    }

    #[test]
    fn rejects_ragged_and_nan() {
        assert!(PointCloud::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(PointCloud::new(1, vec![f64::NAN]).is_err());
        let rows: Vec<Vec<f64>> = vec![vec![1.0], vec![1.0, 2.0]];
        assert!(PointCloud::from_rows(&rows).is_err());
    }
}
