//! Dense operators between truncated Hardy spaces.

use crate::error::{Error, Result};
use crate::grid::{MultiIndex, TruncationGrid};
use crate::linalg::{one, spectral_norm};
use crate::symbol::AnalyticSymbol;
use crate::CMatrix;

/// Matrix of an operator from `domain` to `codomain` in their monomial bases.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    matrix: CMatrix,
    domain: TruncationGrid,
    codomain: TruncationGrid,
}

impl OperatorMatrix {
    pub fn new(matrix: CMatrix, domain: TruncationGrid, codomain: TruncationGrid) -> Result<Self> {
        if matrix.shape() != (codomain.dim(), domain.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, grids need {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                codomain.dim(),
                domain.dim()
            )));
        }
        Ok(Self {
            matrix,
            domain,
            codomain,
        })
    }

    /// Operator on a single grid.
    pub fn square(matrix: CMatrix, grid: TruncationGrid) -> Result<Self> {
        Self::new(matrix, grid.clone(), grid)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn domain(&self) -> &TruncationGrid {
        &self.domain
    }

    pub fn codomain(&self) -> &TruncationGrid {
        &self.codomain
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
        }
    }

    /// `self ∘ rhs`.
    pub fn compose(&self, rhs: &OperatorMatrix) -> Result<Self> {
        if self.domain != rhs.codomain {
            return Err(Error::DimensionMismatch("composition of incompatible grids".into()));
        }
        Ok(Self {
            matrix: &self.matrix * &rhs.matrix,
            domain: rhs.domain.clone(),
            codomain: self.codomain.clone(),
        })
    }

    pub fn norm(&self) -> f64 {
        spectral_norm(&self.matrix)
    }
}

/// Compression of `f ↦ Θf` to the grid: the codomain carries `rows(Θ)` channels,
/// the domain `cols(Θ)`, and products leaving the caps are dropped.
pub fn mult_operator(symbol: &AnalyticSymbol, grid: &TruncationGrid) -> Result<OperatorMatrix> {
    if grid.nvars() != symbol.nvars() {
        return Err(Error::DimensionMismatch(format!(
            "grid has {} variables, symbol has {}",
            grid.nvars(),
            symbol.nvars()
        )));
    }
    if grid.coeff_dim() != symbol.rows() {
        return Err(Error::DimensionMismatch(format!(
            "grid has {} channels, symbol has {} rows",
            grid.coeff_dim(),
            symbol.rows()
        )));
    }
    let codomain = grid.clone();
    let domain = grid.with_coeff_dim(symbol.cols())?;
    let table = symbol.expanded(grid.caps())?;
    let mut m = CMatrix::zeros(codomain.dim(), domain.dim());
    for k in domain.monomials() {
        for (j, coeff) in table.coefficients() {
            let target = k.add(j);
            let Some(row_pos) = codomain.monomial_position(&target) else {
                continue;
            };
            let col_pos = domain.monomial_position(k).expect("domain monomial");
            for c in 0..symbol.cols() {
                for r in 0..symbol.rows() {
                    m[(row_pos * symbol.rows() + r, col_pos * symbol.cols() + c)] += coeff[(r, c)];
                }
            }
        }
    }
    OperatorMatrix::new(m, domain, codomain)
}

/// Truncated coordinate shift `M_{z_var}` on the grid.
pub fn shift_operator(grid: &TruncationGrid, var: usize) -> Result<OperatorMatrix> {
    if var >= grid.nvars() {
        return Err(Error::InvalidMultiIndex(format!("variable {var} out of range")));
    }
    let mut m = CMatrix::zeros(grid.dim(), grid.dim());
    for (col, target) in grid.shift_targets(var).into_iter().enumerate() {
        if let Some(row) = target {
            m[(row, col)] = one();
        }
    }
    OperatorMatrix::square(m, grid.clone())
}

/// `M_z^k = ∏ M_{z_t}^{k_t}` on the grid.
pub fn shift_power(grid: &TruncationGrid, k: &MultiIndex) -> Result<OperatorMatrix> {
    if k.len() != grid.nvars() {
        return Err(Error::InvalidMultiIndex(format!("{k} does not match the grid")));
    }
    let mut m = CMatrix::zeros(grid.dim(), grid.dim());
    for col in 0..grid.dim() {
        let (mono, c) = grid.entry(col);
        if let Some(row) = grid.index_of(&mono.add(k), c) {
            m[(row, col)] = one();
        }
    }
    OperatorMatrix::square(m, grid.clone())
}
