use thiserror::Error;

/// Errors raised by the solvers and their configuration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {actual} ({what})")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("nutrient iteration did not converge after {iterations} iterations (last update {last_update:.3e})")]
    NutrientNonConvergence { iterations: usize, last_update: f64 },

    #[error("CFL condition violated: Courant number {courant:.4} > 1 at node {node}")]
    Cfl { courant: f64, node: usize },

    #[error("tumour radius collapsed to {0:.6e}")]
    RadiusCollapse(f64),

    #[error("seed growth did not reach S = {target} within t = {max_time} (reached {reached})")]
    SeedGrowth { target: f64, max_time: f64, reached: f64 },

    #[error("shooting root not bracketed in [{lo}, {hi}] after expansion")]
    RootNotBracketed { lo: f64, hi: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical solve, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NutrientNonConvergence { .. }
                | Error::Cfl { .. }
                | Error::RadiusCollapse(_)
                | Error::SeedGrowth { .. }
                | Error::RootNotBracketed { .. }
                | Error::NonFinite(_)
                | Error::Domain(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape { what, expected, actual })
    }
}
