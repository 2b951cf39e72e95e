use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid multi-index: {0}")]
    InvalidMultiIndex(String),

    #[error("denominator vanishes at the origin")]
    SingularDenominator,

    #[error("symbol evaluation is not finite at {point}")]
    Evaluation { point: String },

    #[error("symbol is not inner (torus deviation {torus_deviation:.3e}, isometry defect {isometry_defect:.3e})")]
    NotInner {
        torus_deviation: f64,
        isometry_defect: f64,
    },

    #[error("rank collapse: {discarded} numerically dependent columns discarded")]
    RankCollapse { discarded: usize },

    #[error("subspace is not shift-invariant (residual {residual:.3e})")]
    NotInvariant { residual: f64 },

    #[error("truncation: {0}")]
    Truncation(String),

    #[error("operators do not commute (residual {residual:.3e})")]
    NonCommuting { residual: f64 },

    #[error("operator is not a contraction (norm {norm:.6})")]
    NotContraction { norm: f64 },

    #[error("Brehmer precondition failed (defect minimum eigenvalue {min_eigenvalue:.3e})")]
    NotBrehmer { min_eigenvalue: f64 },

    #[error("pureness precondition failed for T{index}")]
    NotPure { index: usize },

    #[error("not divisible (containment residual {residual:.3e})")]
    NotDivisible { residual: f64 },

    #[error("division not analytic (shift-commutation residual {residual:.3e})")]
    DivisionNotAnalytic { residual: f64 },

    #[error("subspace is not orthogonal to the submodule (residual {residual:.3e})")]
    NotOrthogonal { residual: f64 },

    #[error("kernel point outside the open polydisc: {0}")]
    OutsidePolydisc(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}
