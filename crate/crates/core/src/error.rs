use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty neighborhood at x = {x:?} with h = {h}: kernel mass {mass:e} below floor")]
    EmptyNeighborhood { x: Vec<f64>, h: f64, mass: f64 },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} contains non-finite values")))
    }
}
