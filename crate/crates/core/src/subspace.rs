//! Submodules `S = ΘH²`, quotient modules `Q = S^⊥` and the compressed shifts.
//!
//! `S` is spanned by the columns of `M_Θ` on the input window (domain degrees
//! `k ≤ d − input margin`), so every column is an exact Taylor table. `Q` is its
//! orthocomplement inside the working grid `V`. Identities are evaluated on an
//! enlarged grid `V⁺` (caps `d + headroom`) where `P_S = I − P_Q`, i.e. `S`
//! is treated as everything orthogonal to `Q`, and residual operators are
//! compressed to the core window `k ≤ d − window margin`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{MultiIndex, TruncationGrid};
use crate::linalg::{
    hermitian_eigen, identity, min_eigenvalue, orthonormal_columns, psd_sqrt_floor, select_rows,
    selector, spectral_norm,
};
use crate::operator::{mult_operator, OperatorMatrix};
use crate::symbol::{innerness_check, AnalyticSymbol};
use crate::{CMatrix, CheckConfig};

/// Per-variable truncation margins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    /// Domain monomials with `k ≤ d − input` feed the submodule basis.
    pub input: Vec<usize>,
    /// Residuals are compressed to `k ≤ d − window`.
    pub window: Vec<usize>,
    /// Extra degrees of the evaluation grid `V⁺`.
    pub headroom: usize,
}

impl Margins {
    /// Polynomial symbols: input margin = degree, window = max(degree, 1).
    /// Other symbols: input margin `input` (default 1 per variable), window = input + 1.
    pub fn for_symbol(symbol: &AnalyticSymbol, input: Option<Vec<usize>>) -> Self {
        let n = symbol.nvars();
        if symbol.is_polynomial() && input.is_none() {
            let input = symbol.support().to_vec();
            let window = input.iter().map(|&p| p.max(1)).collect();
            return Self {
                input,
                window,
                headroom: 2,
            };
        }
        let input = input.unwrap_or_else(|| vec![1; n]);
        let window = if symbol.is_polynomial() {
            input.iter().map(|&p| p.max(1)).collect()
        } else {
            input.iter().map(|&p| p + 1).collect()
        };
        Self {
            input,
            window,
            headroom: 2,
        }
    }

    /// Margins for a subspace given by an explicit basis.
    pub fn for_basis(nvars: usize, window: usize) -> Self {
        Self {
            input: vec![0; nvars],
            window: vec![window; nvars],
            headroom: 2,
        }
    }

    pub fn with_headroom(mut self, headroom: usize) -> Self {
        self.headroom = headroom;
        self
    }

    pub fn with_window(mut self, window: Vec<usize>) -> Self {
        self.window = window;
        self
    }

    /// Headroom large enough for shift words with exponents up to `max_entry`.
    pub fn ensure_headroom(mut self, max_entry: usize) -> Self {
        self.headroom = self.headroom.max(max_entry.max(1) + 1);
        self
    }
}

/// Closed subspace of the working grid with an orthonormal basis.
#[derive(Clone, Debug)]
pub struct SubspaceData {
    grid: TruncationGrid,
    basis: CMatrix,
    margins: Margins,
    core_window: Vec<usize>,
    discarded: usize,
}

impl SubspaceData {
    /// Span of `columns` (coefficient vectors in the basis order of `grid`).
    pub fn from_columns(
        grid: TruncationGrid,
        columns: &CMatrix,
        margins: Margins,
        rank_tol: f64,
    ) -> Result<Self> {
        if columns.nrows() != grid.dim() {
            return Err(Error::DimensionMismatch(format!(
                "basis vectors have {} coefficients, grid dimension is {}",
                columns.nrows(),
                grid.dim()
            )));
        }
        let core_window = grid.reduced_caps(&margins.window)?;
        let (basis, discarded) = orthonormal_columns(columns, rank_tol);
        Ok(Self {
            grid,
            basis,
            margins,
            core_window,
            discarded,
        })
    }

    /// `{f : f(0) = 0}`, spanned by every non-constant monomial.
    pub fn vanishing_at_origin(grid: TruncationGrid, margins: Margins) -> Result<Self> {
        let cols: Vec<usize> = (0..grid.dim())
            .filter(|&i| !grid.entry(i).0.is_zero())
            .collect();
        let columns = selector(grid.dim(), &cols);
        Self::from_columns(grid, &columns, margins, 1e-12)
    }

    /// Closed span of the monomials `z^k ⊗ ε_c` accepted by `keep`.
    pub fn monomial_span<F>(grid: TruncationGrid, margins: Margins, keep: F) -> Result<Self>
    where
        F: Fn(&MultiIndex) -> bool,
    {
        let cols: Vec<usize> = (0..grid.dim()).filter(|&i| keep(grid.entry(i).0)).collect();
        let columns = selector(grid.dim(), &cols);
        Self::from_columns(grid, &columns, margins, 1e-12)
    }

    /// Orthocomplement inside the working grid.
    pub fn complement(&self) -> Self {
        let n = self.grid.dim();
        let p = identity(n) - &self.basis * self.basis.adjoint();
        let (vals, vecs) = hermitian_eigen(&p);
        let keep: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.5).collect();
        let mut basis = CMatrix::zeros(n, keep.len());
        for (dst, &src) in keep.iter().enumerate() {
            basis.set_column(dst, &vecs.column(src));
        }
        Self {
            grid: self.grid.clone(),
            basis,
            margins: self.margins.clone(),
            core_window: self.core_window.clone(),
            discarded: 0,
        }
    }

    /// Orthogonal sum with a subspace orthogonal to this one.
    pub fn direct_sum(&self, other: &SubspaceData, rank_tol: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch("subspaces on different grids".into()));
        }
        let mut cols = CMatrix::zeros(self.grid.dim(), self.rank() + other.rank());
        cols.view_mut((0, 0), (self.grid.dim(), self.rank()))
            .copy_from(&self.basis);
        cols.view_mut((0, self.rank()), (self.grid.dim(), other.rank()))
            .copy_from(&other.basis);
        Self::from_columns(self.grid.clone(), &cols, self.margins.clone(), rank_tol)
    }

    pub fn grid(&self) -> &TruncationGrid {
        &self.grid
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn margins(&self) -> &Margins {
        &self.margins
    }

    /// Caps of the core window.
    pub fn core_window(&self) -> &[usize] {
        &self.core_window
    }

    /// Directions dropped by the rank cutoff when the subspace was built.
    pub fn discarded(&self) -> usize {
        self.discarded
    }

    pub fn projection(&self) -> OperatorMatrix {
        OperatorMatrix::square(&self.basis * self.basis.adjoint(), self.grid.clone())
            .expect("projection shape matches grid")
    }

    /// `‖(I − P) x‖` maximized over the columns of `x`, measured in operator norm.
    pub fn distance(&self, x: &CMatrix) -> f64 {
        let proj = &self.basis * (self.basis.adjoint() * x);
        spectral_norm(&(x - proj))
    }

    pub fn with_margins(mut self, margins: Margins) -> Result<Self> {
        self.core_window = self.grid.reduced_caps(&margins.window)?;
        self.margins = margins;
        Ok(self)
    }
}

/// `S = ΘH²` on the working grid: columns of `M_Θ` on the input window,
/// orthonormalized. Θ must pass the innerness certificate at `config.tol`.
pub fn submodule_projection(
    symbol: &AnalyticSymbol,
    grid: &TruncationGrid,
    margins: &Margins,
    config: &CheckConfig,
) -> Result<SubspaceData> {
    let report = innerness_check(symbol, grid, config.torus_samples, margins, config.tol)?;
    if !report.is_inner() {
        return Err(Error::NotInner {
            torus_deviation: report.torus_deviation,
            isometry_defect: report.isometry_defect,
        });
    }
    let m = mult_operator(symbol, grid)?;
    let domain = m.domain();
    let window = domain.window_indices(&domain.reduced_caps(&margins.input)?);
    let all: Vec<usize> = (0..grid.dim()).collect();
    let columns = crate::linalg::select(m.matrix(), &all, &window);
    let s = SubspaceData::from_columns(grid.clone(), &columns, margins.clone(), config.rank_tol)?;
    if s.discarded > 0 {
        return Err(Error::RankCollapse {
            discarded: s.discarded,
        });
    }
    Ok(s)
}

/// Projections and shifts on the enlarged grid `V⁺`, applied to column blocks.
#[derive(Clone, Debug)]
pub struct ModuleFrame {
    working: TruncationGrid,
    enlarged: TruncationGrid,
    embedding: Vec<usize>,
    q_basis: CMatrix,
    q_working: CMatrix,
    up: Vec<Vec<Option<usize>>>,
    down: Vec<Vec<Option<usize>>>,
    window: Vec<usize>,
}

impl ModuleFrame {
    /// Frame for the quotient of the working grid by `s`.
    pub fn from_submodule(s: &SubspaceData) -> Result<Self> {
        Self::from_quotient(&s.complement())
    }

    pub fn from_quotient(q: &SubspaceData) -> Result<Self> {
        let working = q.grid.clone();
        let enlarged = working.enlarged(q.margins.headroom)?;
        let embedding = working.embedding_into(&enlarged)?;
        let mut q_basis = CMatrix::zeros(enlarged.dim(), q.rank());
        for (src, &dst) in embedding.iter().enumerate() {
            q_basis.set_row(dst, &q.basis.row(src));
        }
        let n = working.nvars();
        let up: Vec<_> = (0..n).map(|t| enlarged.shift_targets(t)).collect();
        let down = up
            .iter()
            .map(|targets| {
                let mut inv = vec![None; enlarged.dim()];
                for (src, dst) in targets.iter().enumerate() {
                    if let Some(d) = dst {
                        inv[*d] = Some(src);
                    }
                }
                inv
            })
            .collect();
        let window = enlarged.window_indices(&q.core_window);
        Ok(Self {
            working,
            enlarged,
            embedding,
            q_basis,
            q_working: q.basis.clone(),
            up,
            down,
            window,
        })
    }

    pub fn working_grid(&self) -> &TruncationGrid {
        &self.working
    }

    pub fn enlarged_grid(&self) -> &TruncationGrid {
        &self.enlarged
    }

    pub fn nvars(&self) -> usize {
        self.working.nvars()
    }

    pub fn dim(&self) -> usize {
        self.enlarged.dim()
    }

    /// Orthonormal basis of `Q` as vectors of `V⁺`.
    pub fn q_basis(&self) -> &CMatrix {
        &self.q_basis
    }

    /// Vectors of the working grid as vectors of `V⁺`.
    pub fn embed(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim(), x.ncols());
        for (src, &dst) in self.embedding.iter().enumerate() {
            out.set_row(dst, &x.row(src));
        }
        out
    }

    /// Indices of the core window inside `V⁺`.
    pub fn window(&self) -> &[usize] {
        &self.window
    }

    /// Columns of the identity at the core window: apply an operator to this to
    /// get its compression to the window.
    pub fn probe(&self) -> CMatrix {
        selector(self.dim(), &self.window)
    }

    /// `P_W R P_W` as a square matrix, given `y = R·probe()`.
    pub fn window_block(&self, y: &CMatrix) -> CMatrix {
        select_rows(y, &self.window)
    }

    pub fn window_norm(&self, y: &CMatrix) -> f64 {
        spectral_norm(&self.window_block(y))
    }

    pub fn pq(&self, x: &CMatrix) -> CMatrix {
        let xw = select_rows(x, &self.embedding);
        let yw = &self.q_working * (self.q_working.adjoint() * xw);
        let mut out = CMatrix::zeros(x.nrows(), x.ncols());
        for (src, &dst) in self.embedding.iter().enumerate() {
            out.set_row(dst, &yw.row(src));
        }
        out
    }

    pub fn ps(&self, x: &CMatrix) -> CMatrix {
        x - self.pq(x)
    }

    fn permute(map: &[Option<usize>], x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(x.nrows(), x.ncols());
        for (src, dst) in map.iter().enumerate() {
            if let Some(d) = dst {
                out.set_row(*d, &x.row(src));
            }
        }
        out
    }

    /// `M_{z_t} x`.
    pub fn shift(&self, t: usize, x: &CMatrix) -> CMatrix {
        Self::permute(&self.up[t], x)
    }

    /// `M_{z_t}* x`.
    pub fn shift_adj(&self, t: usize, x: &CMatrix) -> CMatrix {
        Self::permute(&self.down[t], x)
    }

    /// `M_z^k x`.
    pub fn shift_pow(&self, k: &MultiIndex, x: &CMatrix) -> CMatrix {
        let mut y = x.clone();
        for (t, &e) in k.entries().iter().enumerate() {
            for _ in 0..e {
                y = self.shift(t, &y);
            }
        }
        y
    }

    /// `M_z^{*k} x`.
    pub fn shift_pow_adj(&self, k: &MultiIndex, x: &CMatrix) -> CMatrix {
        let mut y = x.clone();
        for (t, &e) in k.entries().iter().enumerate() {
            for _ in 0..e {
                y = self.shift_adj(t, &y);
            }
        }
        y
    }

    /// Extended compression `C_t = P_Q M_{z_t} P_Q`.
    pub fn compression(&self, t: usize, x: &CMatrix) -> CMatrix {
        self.pq(&self.shift(t, &self.pq(x)))
    }

    /// `C_t* = P_Q M_{z_t}* P_Q`.
    pub fn compression_adj(&self, t: usize, x: &CMatrix) -> CMatrix {
        self.pq(&self.shift_adj(t, &self.pq(x)))
    }

    /// `C^k = ∏ C_t^{k_t}`.
    pub fn compression_pow(&self, k: &MultiIndex, x: &CMatrix) -> CMatrix {
        let mut y = x.clone();
        for (t, &e) in k.entries().iter().enumerate() {
            for _ in 0..e {
                y = self.compression(t, &y);
            }
        }
        y
    }

    /// `C^{*k} = (C^k)*`.
    pub fn compression_pow_adj(&self, k: &MultiIndex, x: &CMatrix) -> CMatrix {
        let mut y = x.clone();
        for (t, &e) in k.entries().iter().enumerate().rev() {
            for _ in 0..e {
                y = self.compression_adj(t, &y);
            }
        }
        y
    }

    /// Defect `D_{C_t}² = P_Q − C_t*C_t`.
    pub fn defect(&self, t: usize, x: &CMatrix) -> CMatrix {
        self.pq(x) - self.compression_adj(t, &self.compression(t, x))
    }

    /// `max_t ‖P_W (P_S M_{z_t} P_S − M_{z_t} P_S) P_W‖`.
    pub fn invariance_residual(&self) -> f64 {
        let e = self.probe();
        let pse = self.ps(&e);
        (0..self.nvars())
            .map(|t| {
                let ms = self.shift(t, &pse);
                self.window_norm(&(self.ps(&ms) - ms))
            })
            .fold(0.0, f64::max)
    }

    /// Dense `V⁺` matrix of a block operator.
    pub fn dense<F>(&self, op: F) -> CMatrix
    where
        F: Fn(&CMatrix) -> CMatrix,
    {
        op(&identity(self.dim()))
    }
}

/// `C_i = P_Q M_{z_i}|_Q` on the `Q` basis together with the extended
/// `P_Q M_{z_i} P_Q` on `V⁺`.
#[derive(Clone, Debug)]
pub struct CompressionTuple {
    pub operators: Vec<CMatrix>,
    pub extended: Vec<CMatrix>,
}

impl CompressionTuple {
    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn max_norm(&self) -> f64 {
        self.operators.iter().map(spectral_norm).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct QuotientData {
    pub quotient: SubspaceData,
    pub compressions: CompressionTuple,
    /// `I_Q − C_t*C_t` on the `Q` basis.
    pub defects: Vec<CMatrix>,
    /// Principal square roots `D_{C_t}`; eigenvalues below `psd_tol` are treated as zero.
    pub defect_roots: Vec<CMatrix>,
    pub frame: ModuleFrame,
    /// `invariance`, `defect_identity`, `defect_min_eigenvalue`, `compression_norm`.
    pub diagnostics: BTreeMap<String, f64>,
}

/// Quotient module of the working grid by `s`, its compressed shifts and
/// their defects. Fails when `s` is not shift-invariant at `config.invariance_tol`.
pub fn quotient_data(s: &SubspaceData, config: &CheckConfig) -> Result<QuotientData> {
    let quotient = s.complement();
    let frame = ModuleFrame::from_quotient(&quotient)?;
    let invariance = frame.invariance_residual();
    if invariance > config.invariance_tol || invariance.is_nan() {
        return Err(Error::NotInvariant {
            residual: invariance,
        });
    }
    let n = frame.nvars();
    let qb = frame.q_basis();
    let r = qb.ncols();
    let mut operators = Vec::with_capacity(n);
    let mut extended = Vec::with_capacity(n);
    let mut defects = Vec::with_capacity(n);
    let mut defect_roots = Vec::with_capacity(n);
    let e = frame.probe();
    let mut defect_identity: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for t in 0..n {
        let c = qb.adjoint() * frame.shift(t, qb);
        extended.push(qb * &c * qb.adjoint());
        let d = identity(r) - c.adjoint() * &c;
        min_eig = min_eig.min(min_eigenvalue(&d));
        defect_roots.push(psd_sqrt_floor(&d, config.psd_tol));
        defects.push(d);
        operators.push(c);

        let lhs = frame.defect(t, &e);
        let rhs = frame.pq(&frame.shift_adj(t, &frame.ps(&frame.shift(t, &frame.pq(&e)))));
        defect_identity = defect_identity.max(frame.window_norm(&(lhs - rhs)));
    }
    let compressions = CompressionTuple {
        operators,
        extended,
    };
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("invariance".to_string(), invariance);
    diagnostics.insert("defect_identity".to_string(), defect_identity);
    diagnostics.insert(
        "defect_min_eigenvalue".to_string(),
        if min_eig.is_finite() { min_eig } else { 0.0 },
    );
    diagnostics.insert("compression_norm".to_string(), compressions.max_norm());
    Ok(QuotientData {
        quotient,
        compressions,
        defects,
        defect_roots,
        frame,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::C64;

    fn cfg() -> CheckConfig {
        CheckConfig::default()
    }

    #[test]
    fn z1z2_submodule_is_the_monomial_span() {
        let grid = TruncationGrid::uniform(2, 3).unwrap();
        let theta = AnalyticSymbol::monomial(&[1, 1]).unwrap();
        let m = Margins::for_symbol(&theta, None);
        let s = submodule_projection(&theta, &grid, &m, &cfg()).unwrap();
        assert_eq!(s.rank(), 9);
        let p = s.projection();
        for i in 0..grid.dim() {
            let (k, _) = grid.entry(i);
            let expect = if k.get(0) >= 1 && k.get(1) >= 1 { 1.0 } else { 0.0 };
            assert!((p.matrix()[(i, i)] - C64::new(expect, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_unitary_fills_the_space() {
        let grid = TruncationGrid::new(vec![2, 2], 2).unwrap();
        let u = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 1.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)],
        );
        let theta = AnalyticSymbol::constant(2, u).unwrap();
        let s = submodule_projection(&theta, &grid, &Margins::for_symbol(&theta, None), &cfg())
            .unwrap();
        assert!(max_abs(&(s.projection().into_matrix() - identity(grid.dim()))) < 1e-12);
        let q = quotient_data(&s, &cfg()).unwrap();
        assert_eq!(q.quotient.rank(), 0);
    }

    #[test]
    fn phi_submodule_rank() {
        let grid = TruncationGrid::uniform(2, 4).unwrap();
        let phi = AnalyticSymbol::bidisc_phi().unwrap();
        let m = Margins::for_symbol(&phi, None);
        let s = submodule_projection(&phi, &grid, &m, &cfg()).unwrap();
        assert_eq!(s.rank(), 16);
    }

    #[test]
    fn z1z2_defects_are_axis_projections() {
        let grid = TruncationGrid::uniform(2, 4).unwrap();
        let theta = AnalyticSymbol::monomial(&[1, 1]).unwrap();
        let s = submodule_projection(&theta, &grid, &Margins::for_symbol(&theta, None), &cfg())
            .unwrap();
        let q = quotient_data(&s, &cfg()).unwrap();
        assert_eq!(q.quotient.rank(), 9);
        let f = &q.frame;
        let e = f.probe();
        for (t, other) in [(0usize, 1usize), (1, 0)] {
            let d = f.window_block(&f.defect(t, &e));
            for (a, &row) in f.window().iter().enumerate() {
                for (b, &col) in f.window().iter().enumerate() {
                    let (k, _) = f.enlarged_grid().entry(row);
                    let expect = if row == col && k.get(t) == 0 && k.get(other) >= 1 {
                        1.0
                    } else {
                        0.0
                    };
                    let _ = col;
                    assert!((d[(a, b)] - C64::new(expect, 0.0)).norm() < 1e-12);
                }
            }
        }
        assert!(q.diagnostics["defect_identity"] < 1e-12);
    }

    #[test]
    fn constants_quotient_has_zero_compressions() {
        let grid = TruncationGrid::uniform(2, 3).unwrap();
        let s = SubspaceData::vanishing_at_origin(grid, Margins::for_basis(2, 1)).unwrap();
        let q = quotient_data(&s, &cfg()).unwrap();
        assert_eq!(q.quotient.rank(), 1);
        for (c, d) in q.compressions.operators.iter().zip(&q.defects) {
            assert!(max_abs(c) < 1e-14);
            assert!((d[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn non_invariant_subspace_is_rejected() {
        let grid = TruncationGrid::uniform(2, 3).unwrap();
        let s = SubspaceData::monomial_span(grid, Margins::for_basis(2, 1), |k| k.is_zero())
            .unwrap();
        assert!(matches!(quotient_data(&s, &cfg()), Err(Error::NotInvariant { .. })));
    }

    #[test]
    fn blaschke_quotient_second_defect_vanishes() {
        let grid = TruncationGrid::uniform(2, 8).unwrap();
        let b = AnalyticSymbol::blaschke(2, 0, C64::new(0.5, 0.0)).unwrap();
        let m = Margins::for_symbol(&b, None);
        let config = cfg().with_invariance_tol(1e-2);
        let s = submodule_projection(&b, &grid, &m, &config).unwrap();
        let q = quotient_data(&s, &config).unwrap();
        let f = &q.frame;
        assert!(f.window_norm(&f.defect(1, &f.probe())) <= 1e-6);
    }
}
