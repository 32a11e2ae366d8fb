use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unsupported dimension {0} (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("extent along axis {axis} must be positive")]
    NonPositiveExtent { axis: usize },
    #[error("axis {axis} needs at least 2 cells, got {cells}")]
    TooFewCells { axis: usize, cells: usize },
    #[error("field length {found} does not match grid (expected {expected})")]
    LengthMismatch { expected: usize, found: usize },
    #[error("field contains non-finite values")]
    NonFinite,
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("region outside domain")]
    RegionOutsideDomain,
    #[error("doubled root cube must lie inside the grid domain")]
    RootOutsideDomain,
    #[error("at least two sample nodes are required")]
    TooFewNodes,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("key-estimate precondition failed: mean {mean} exceeds bound {bound}")]
    KeyEstimatePrecondition { mean: f64, bound: f64 },
    #[error("below covering threshold: lambda {lambda} < lambda0 {lambda0}")]
    BelowCoveringThreshold { lambda: f64, lambda0: f64 },
    #[error("level-0 cube has no predecessor inside the lattice")]
    NoPredecessor,
    #[error("mean of |f| over the cube is zero")]
    ZeroMean,
    #[error("exponent must satisfy 1 < p- <= p+ < inf (got p- = {p_minus}, p+ = {p_plus})")]
    ExponentRange { p_minus: f64, p_plus: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: &'static str) -> Self {
        Error::InvalidParameter { name, reason }
    }
}
