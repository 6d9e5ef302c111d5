use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter domain: {0}")]
    Domain(String),

    #[error("density collapse{}: rho = {rho:.6e} <= {threshold:.6e}", cell_label(.cell))]
    DensityCollapse {
        cell: Option<(usize, usize)>,
        rho: f64,
        threshold: f64,
    },

    #[error("transport misaligned: {0}")]
    Alignment(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("logarithm argument {0:.6e} is below 1, the time bound would be negative")]
    NonPositiveLog(f64),
}

fn cell_label(cell: &Option<(usize, usize)>) -> String {
    match cell {
        Some((i, j)) => format!(" at cell ({i}, {j})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
