//! Numerical operator theory on the truncated polydisc Hardy space.
//!
//! Functions in `H²_E(𝔻ⁿ)` are represented by their Taylor coefficients on a
//! finite monomial grid (per-variable degree caps, `E = ℂ^m`). On that grid the
//! crate builds multiplication operators, submodule/quotient-module projections
//! and compressed shift tuples, and turns the structural identities between them
//! into residuals that can be checked against a tolerance.
//!
//! Module map:
//!
//! - [`grid`], [`symbol`], [`operator`]: multi-indices, the monomial basis,
//!   analytic symbols (polynomial or rational), multiplication operators and
//!   innerness certification.
//! - [`subspace`], [`criteria`]: submodules `ΘH²`, quotient modules, compressions
//!   `C_i = P_Q M_{z_i}|_Q`, and the Beurling / cross-commutator / identity checks.
//! - [`dilation`]: Brehmer tuples, defect operators and the canonical isometric
//!   dilation into `H²_𝒟(𝔻ⁿ)`.
//! - [`factorization`]: division of inner functions, invariant subspaces built
//!   from factorizations, constancy detection.
//! - [`kernel`]: the reproducing-kernel computations and the non-factorable
//!   rational inner function on the bidisc.
//! - [`io`]: text formats for symbols, subspace bases and operator tuples.
//! - [`generators`]: seeded corpora of inner symbols and Brehmer tuples.

pub mod criteria;
pub mod dilation;
pub mod error;
pub mod factorization;
pub mod generators;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod operator;
pub mod subspace;
pub mod symbol;

pub use criteria::{
    beurling_criterion, cross_commutator_criterion, default_hats, identity_suite,
    commutator_contraction, CriterionReport, CommutatorContraction,
};
pub use dilation::{
    brehmer_defect, canonical_dilation, model_correspondence, pureness_check, BrehmerDefect,
    ContractionTuple, DilationData, ModelInput, PurenessRule, PurenessVerdict,
};
pub use error::{Error, Result};
pub use factorization::{
    beurling_submodule_check, constancy_check, divide_inner, invariant_subspace_from_factorization,
    ConstancyVerdict, Division, FactorizationWitness,
};
pub use grid::{enumerate_basis, HardyVector, MultiIndex, TruncationGrid};
pub use kernel::{bidisc_example_suite, BidiscExampleOptions, BidiscExampleReport, GramWitness, KernelPoint};
pub use operator::{mult_operator, shift_operator, OperatorMatrix};
pub use subspace::{
    quotient_data, submodule_projection, CompressionTuple, Margins, ModuleFrame, QuotientData,
    SubspaceData,
};
pub use symbol::{innerness_check, rational_taylor, AnalyticSymbol, InnernessReport, SymbolKind};

use num_complex::Complex;

/// Complex scalar used throughout.
pub type C64 = Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Numerical thresholds shared by the checks.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CheckConfig {
    /// Identity residual tolerance.
    pub tol: f64,
    /// Relative singular-value cutoff for orthonormalization: keep `σ > rank_tol·σ_max`.
    pub rank_tol: f64,
    /// Eigenvalue floor for positive semidefiniteness: `λ_min ≥ -psd_tol`.
    pub psd_tol: f64,
    /// Tolerance on the submodule invariance residual. Rational symbols carry a
    /// truncation error here that shrinks with the grid, so it is set separately.
    pub invariance_tol: f64,
    /// Torus samples per axis for innerness certification.
    pub torus_samples: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            rank_tol: 1e-10,
            psd_tol: 1e-10,
            invariance_tol: 1e-8,
            torus_samples: 32,
        }
    }
}

impl CheckConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_invariance_tol(mut self, tol: f64) -> Self {
        self.invariance_tol = tol;
        self
    }
}
