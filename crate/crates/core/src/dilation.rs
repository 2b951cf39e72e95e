//! Brehmer tuples, their defect operators and the canonical isometric dilation
//! `(Πh)_k = D_{T*} T^{*k} h` into `H²_𝒟(𝔻ⁿ)`.

use serde::{Deserialize, Serialize};

use crate::criteria::{beurling_residual, CriterionReport};
use crate::error::{Error, Result};
use crate::grid::{MultiIndex, TruncationGrid};
use crate::linalg::{identity, min_eigenvalue, orthonormal_columns, psd_sqrt_floor, spectral_norm};
use crate::subspace::{quotient_data, submodule_projection, Margins, ModuleFrame, QuotientData};
use crate::symbol::AnalyticSymbol;
use crate::{CMatrix, CheckConfig};

/// Commuting contractions `T₁,…,Tₙ` on `ℂ^dim`.
#[derive(Clone, Debug)]
pub struct ContractionTuple {
    ops: Vec<CMatrix>,
}

impl ContractionTuple {
    /// Validates shapes, `‖T_i‖ ≤ 1 + tol` and `‖T_iT_j − T_jT_i‖ ≤ tol`.
    pub fn new(ops: Vec<CMatrix>, tol: f64) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::DimensionMismatch("empty operator tuple".into()));
        }
        let dim = ops[0].nrows();
        if ops.iter().any(|t| t.shape() != (dim, dim)) {
            return Err(Error::DimensionMismatch(
                "tuple entries must be square matrices of one size".into(),
            ));
        }
        for t in &ops {
            let norm = spectral_norm(t);
            if norm > 1.0 + tol {
                return Err(Error::NotContraction { norm });
            }
        }
        let tuple = Self { ops };
        let residual = tuple.commutator_residual();
        if residual > tol {
            return Err(Error::NonCommuting { residual });
        }
        Ok(tuple)
    }

    /// Compressed shifts of a quotient module on its orthonormal basis.
    pub fn from_quotient(q: &QuotientData, tol: f64) -> Result<Self> {
        Self::new(q.compressions.operators.clone(), tol)
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.ops[0].nrows()
    }

    pub fn commutator_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.ops.len() {
            for j in i + 1..self.ops.len() {
                let c = &self.ops[i] * &self.ops[j] - &self.ops[j] * &self.ops[i];
                worst = worst.max(spectral_norm(&c));
            }
        }
        worst
    }

    /// `T_F = ∏_{j ∈ F} T_j` for the subset encoded by the bit mask.
    pub fn subset_product(&self, mask: usize) -> CMatrix {
        let mut out = identity(self.dim());
        for (j, t) in self.ops.iter().enumerate() {
            if mask & (1 << j) != 0 {
                out = &out * t;
            }
        }
        out
    }

    /// `T^{*k} = ∏ (T_t*)^{k_t}`.
    pub fn adjoint_power(&self, k: &MultiIndex) -> CMatrix {
        let mut out = identity(self.dim());
        for (t, &e) in k.entries().iter().enumerate() {
            let adj = self.ops[t].adjoint();
            for _ in 0..e {
                out = &out * &adj;
            }
        }
        out
    }

    /// `max_{i≠j} ‖(I − T_i*T_i)(I − T_j*T_j)‖`.
    pub fn annihilation_residual(&self) -> f64 {
        let eye = identity(self.dim());
        let defects: Vec<CMatrix> = self
            .ops
            .iter()
            .map(|t| &eye - t.adjoint() * t)
            .collect();
        let mut worst: f64 = 0.0;
        for i in 0..defects.len() {
            for j in 0..defects.len() {
                if i != j {
                    worst = worst.max(spectral_norm(&(&defects[i] * &defects[j])));
                }
            }
        }
        worst
    }
}

#[derive(Clone, Debug)]
pub struct BrehmerDefect {
    /// `D²_{T*} = Σ_F (−1)^{|F|} T_F T_F*`.
    pub defect_sq: CMatrix,
    pub min_eigenvalue: f64,
    pub is_psd: bool,
    /// `D_{T*}`, eigenvalues below the PSD tolerance dropped.
    pub defect_root: CMatrix,
    /// Orthonormal basis of the defect space `𝒟 = ran D_{T*}`.
    pub defect_space_basis: CMatrix,
}

impl BrehmerDefect {
    pub fn rank(&self) -> usize {
        self.defect_space_basis.ncols()
    }
}

/// Alternating defect sum over all `2ⁿ` subsets.
pub fn brehmer_defect(t: &ContractionTuple, config: &CheckConfig) -> BrehmerDefect {
    let n = t.len();
    let mut sum = CMatrix::zeros(t.dim(), t.dim());
    for mask in 0..(1usize << n) {
        let tf = t.subset_product(mask);
        let term = &tf * tf.adjoint();
        if mask.count_ones() % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let min_eig = min_eigenvalue(&sum);
    let root = psd_sqrt_floor(&sum, config.psd_tol);
    let (basis, _) = orthonormal_columns(&root, config.rank_tol);
    BrehmerDefect {
        is_psd: min_eig >= -config.psd_tol,
        min_eigenvalue: min_eig,
        defect_sq: sum,
        defect_root: root,
        defect_space_basis: basis,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PurenessRule {
    Nilpotent,
    SpectralRadius,
    PowerDecay,
    /// No rule certified pureness.
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurenessVerdict {
    pub pure: bool,
    pub rule: PurenessRule,
    pub spectral_radius: f64,
    /// `‖T^{*max_power}‖`.
    pub power_norm: f64,
}

fn matrix_power(t: &CMatrix, k: usize) -> CMatrix {
    let mut out = identity(t.nrows());
    let mut base = t.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            out = &out * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    out
}

/// Largest modulus on the diagonal of the complex Schur form.
pub fn spectral_radius(t: &CMatrix) -> f64 {
    if t.nrows() == 0 {
        return 0.0;
    }
    let schur = nalgebra::linalg::Schur::new(t.clone());
    let (_, tri) = schur.unpack();
    (0..tri.nrows())
        .map(|i| tri[(i, i)].norm())
        .fold(0.0, f64::max)
}

/// Pureness of a single matrix: nilpotency, then spectral radius `< 1 − tol`,
/// then decay of `‖T^{*max_power}‖` below `tol`.
pub fn pureness_check(t: &CMatrix, max_power: usize, tol: f64) -> PurenessVerdict {
    let dim = t.nrows();
    let rho = spectral_radius(t);
    let power_norm = spectral_norm(&matrix_power(&t.adjoint(), max_power));
    let rule = if spectral_norm(&matrix_power(t, dim.max(1))) <= tol {
        PurenessRule::Nilpotent
    } else if rho < 1.0 - tol {
        PurenessRule::SpectralRadius
    } else if power_norm <= tol {
        PurenessRule::PowerDecay
    } else {
        PurenessRule::Undecided
    };
    PurenessVerdict {
        pure: rule != PurenessRule::Undecided,
        rule,
        spectral_radius: rho,
        power_norm,
    }
}

#[derive(Clone, Debug)]
pub struct DilationData {
    pub defect: BrehmerDefect,
    /// Grid of `H²_𝒟(𝔻ⁿ)`; channels are coordinates in the defect space basis.
    pub grid: TruncationGrid,
    /// `Π: ℂ^dim → H²_𝒟` on the grid.
    pub pi: CMatrix,
    /// `‖Π*Π − I‖`.
    pub isometry_residual: f64,
    /// `max_i ‖Π T_i* − M_{z_i}* Π‖`.
    pub intertwining_residual: f64,
    /// `max_i ‖Π* M_{z_i} Π − T_i‖`.
    pub compression_residual: f64,
    /// `Σ ‖D_{T*} T^{*k}‖²` over the first layer of exponents beyond the caps.
    pub tail_mass: f64,
}

/// Canonical dilation on a grid with the given caps. Requires a PSD Brehmer
/// defect, pure entries and a tail mass within `config.tol`.
pub fn canonical_dilation(
    t: &ContractionTuple,
    caps: &[usize],
    config: &CheckConfig,
) -> Result<DilationData> {
    let n = t.len();
    if caps.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} caps for a {n}-tuple",
            caps.len()
        )));
    }
    let defect = brehmer_defect(t, config);
    if !defect.is_psd {
        return Err(Error::NotBrehmer {
            min_eigenvalue: defect.min_eigenvalue,
        });
    }
    let max_power = caps.iter().copied().max().unwrap_or(0).max(t.dim()) * 4 + 16;
    for (i, ti) in t.ops().iter().enumerate() {
        if !pureness_check(ti, max_power, config.tol).pure {
            return Err(Error::NotPure { index: i + 1 });
        }
    }
    let r = defect.rank();
    if r == 0 {
        return Err(Error::Truncation("defect space is trivial".into()));
    }
    let grid = TruncationGrid::new(caps.to_vec(), r)?;
    let coords = defect.defect_space_basis.adjoint() * &defect.defect_root;
    let dim = t.dim();
    let mut pi = CMatrix::zeros(grid.dim(), dim);
    for (pos, k) in grid.monomials().iter().enumerate() {
        let block = &coords * t.adjoint_power(k);
        pi.view_mut((pos * r, 0), (r, dim)).copy_from(&block);
    }

    let mut tail_mass = 0.0;
    let outer = TruncationGrid::new(caps.iter().map(|d| d + 1).collect(), 1)?;
    for k in outer.monomials().iter().filter(|k| !k.within(caps)) {
        let v = &defect.defect_root * t.adjoint_power(k);
        tail_mass += v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    if tail_mass > config.tol {
        return Err(Error::Truncation(format!(
            "dilation tail mass {tail_mass:.3e} beyond caps {caps:?}"
        )));
    }

    let isometry_residual = spectral_norm(&(pi.adjoint() * &pi - identity(dim)));
    let mut intertwining: f64 = 0.0;
    let mut compression: f64 = 0.0;
    for (i, ti) in t.ops().iter().enumerate() {
        let down = shift_adj_rows(&grid, i, &pi);
        intertwining = intertwining.max(spectral_norm(&(&pi * ti.adjoint() - &down)));
        compression = compression.max(spectral_norm(&(down.adjoint() * &pi - ti)));
    }
    Ok(DilationData {
        defect,
        grid,
        pi,
        isometry_residual,
        intertwining_residual: intertwining,
        compression_residual: compression,
        tail_mass,
    })
}

/// `M_{z_var}* x` on a grid, for a block of coefficient vectors.
fn shift_adj_rows(grid: &TruncationGrid, var: usize, x: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(x.nrows(), x.ncols());
    for (src, dst) in grid.shift_targets(var).into_iter().enumerate() {
        if let Some(d) = dst {
            out.set_row(src, &x.row(d));
        }
    }
    out
}

/// Input of the model correspondence: an inner symbol, a quotient module, or
/// an abstract tuple.
pub enum ModelInput<'a> {
    Symbol {
        symbol: &'a AnalyticSymbol,
        grid: &'a TruncationGrid,
        margins: &'a Margins,
    },
    Quotient(&'a QuotientData),
    Tuple(&'a ContractionTuple),
}

/// Tests whether a tuple is a model of a Beurling quotient module: Brehmer
/// defect PSD, pure entries, and `(I − T_i*T_i)(I − T_j*T_j) = 0` for `i ≠ j`.
///
/// Residuals: `annihilation`, `brehmer_negativity` (`max(0, −λ_min)` of the
/// defect sum) and `impure` (number of entries not certified pure). For
/// quotient modules the first two are evaluated on the core window.
pub fn model_correspondence(input: ModelInput<'_>, config: &CheckConfig) -> Result<CriterionReport> {
    match input {
        ModelInput::Symbol {
            symbol,
            grid,
            margins,
        } => {
            let s = submodule_projection(symbol, grid, margins, config)?;
            let q = quotient_data(&s, config)?;
            model_correspondence(ModelInput::Quotient(&q), config)
        }
        ModelInput::Quotient(q) => {
            let frame = &q.frame;
            let mut report = CriterionReport::new(config.tol);
            report.record("annihilation", beurling_residual(frame));
            let min_eig = windowed_brehmer_min(frame);
            report.record("brehmer_negativity", (-min_eig).max(0.0));
            report.diagnostic("brehmer_min_eigenvalue", min_eig);
            let impure = q
                .compressions
                .operators
                .iter()
                .filter(|c| !pureness_check(c, 4 * c.nrows() + 16, config.tol).pure)
                .count();
            report.record("impure", impure as f64);
            report.diagnostic("commutator", tuple_commutator(&q.compressions.operators));
            Ok(report)
        }
        ModelInput::Tuple(t) => {
            let mut report = CriterionReport::new(config.tol);
            report.record("annihilation", t.annihilation_residual());
            let defect = brehmer_defect(t, config);
            report.record("brehmer_negativity", (-defect.min_eigenvalue).max(0.0));
            report.diagnostic("brehmer_min_eigenvalue", defect.min_eigenvalue);
            let impure = t
                .ops()
                .iter()
                .filter(|c| !pureness_check(c, 4 * c.nrows() + 16, config.tol).pure)
                .count();
            report.record("impure", impure as f64);
            report.diagnostic("commutator", t.commutator_residual());
            Ok(report)
        }
    }
}

fn tuple_commutator(ops: &[CMatrix]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..ops.len() {
        for j in i + 1..ops.len() {
            worst = worst.max(spectral_norm(&(&ops[i] * &ops[j] - &ops[j] * &ops[i])));
        }
    }
    worst
}

/// Smallest eigenvalue of `Σ_F (−1)^{|F|} C_F C_F*` compressed to the core window.
fn windowed_brehmer_min(frame: &ModuleFrame) -> f64 {
    let n = frame.nvars();
    let e = frame.probe();
    let mut sum = CMatrix::zeros(e.nrows(), e.ncols());
    for mask in 0..(1usize << n) {
        let mut y = e.clone();
        // C_F* applied first, then C_F
        for t in (0..n).rev() {
            if mask & (1 << t) != 0 {
                y = frame.compression_adj(t, &y);
            }
        }
        for t in 0..n {
            if mask & (1 << t) != 0 {
                y = frame.compression(t, &y);
            }
        }
        if mask == 0 {
            y = frame.pq(&y);
        }
        if mask.count_ones() % 2 == 0 {
            sum += y;
        } else {
            sum -= y;
        }
    }
    let block = frame.window_block(&sum);
    let w = crate::linalg::hermitian_part(&block);
    if w.nrows() == 0 {
        0.0
    } else {
        min_eigenvalue(&w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn jordan(n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |i, j| if j == i + 1 { c(1.0) } else { c(0.0) })
    }

    #[test]
    fn zero_pair_on_a_line() {
        let z = CMatrix::zeros(1, 1);
        let t = ContractionTuple::new(vec![z.clone(), z], 1e-10).unwrap();
        let d = brehmer_defect(&t, &CheckConfig::default());
        assert_eq!(d.defect_sq[(0, 0)], c(1.0));
        assert!(d.is_psd);
        assert_eq!(d.rank(), 1);
        let dil = canonical_dilation(&t, &[2, 2], &CheckConfig::default()).unwrap();
        assert!(dil.isometry_residual < 1e-15);
        assert!(dil.intertwining_residual < 1e-15);
        let r = model_correspondence(ModelInput::Tuple(&t), &CheckConfig::default()).unwrap();
        assert_eq!(r.residual("annihilation"), Some(1.0));
        assert_eq!(r.verdict("annihilation"), Some(false));
    }

    #[test]
    fn scalar_pair_fails_annihilation() {
        let (l, m) = (C64::new(0.3, 0.4), c(-0.6));
        let t = ContractionTuple::new(
            vec![CMatrix::from_element(1, 1, l), CMatrix::from_element(1, 1, m)],
            1e-10,
        )
        .unwrap();
        let r = model_correspondence(ModelInput::Tuple(&t), &CheckConfig::default()).unwrap();
        let expect = (1.0 - l.norm_sqr()) * (1.0 - m.norm_sqr());
        assert!((r.residual("annihilation").unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn half_jordan_pair_defect_by_direct_sum() {
        let n = jordan(4);
        let a = n.scale(0.5);
        let b = (&n * &n).scale(0.5);
        let t = ContractionTuple::new(vec![a.clone(), b.clone()], 1e-10).unwrap();
        let d = brehmer_defect(&t, &CheckConfig::default());
        let ab = &a * &b;
        let direct = identity(4) - &a * a.adjoint() - &b * b.adjoint() + &ab * ab.adjoint();
        assert!(spectral_norm(&(d.defect_sq - &direct)) < 1e-15);
        assert_eq!(d.is_psd, min_eigenvalue(&direct) >= -1e-10);
    }

    #[test]
    fn pureness_rules() {
        let v = pureness_check(&jordan(4), 50, 1e-10);
        assert!(v.pure);
        assert_eq!(v.rule, PurenessRule::Nilpotent);
        let v = pureness_check(&identity(3), 50, 1e-10);
        assert!(!v.pure);
        let m = CMatrix::from_row_slice(2, 2, &[c(0.9), c(0.0), c(0.0), c(-0.5)]);
        let v = pureness_check(&m, 50, 1e-10);
        assert!(v.pure);
        assert_eq!(v.rule, PurenessRule::SpectralRadius);
    }

    #[test]
    fn non_commuting_tuple_is_rejected() {
        let n = jordan(2).scale(0.5);
        let err = ContractionTuple::new(vec![n.clone(), n.transpose()], 1e-10).unwrap_err();
        assert!(matches!(err, Error::NonCommuting { .. }));
    }

    #[test]
    fn non_brehmer_pair_is_rejected() {
        let n = jordan(3);
        let t = ContractionTuple::new(vec![n.clone(), n], 1e-10).unwrap();
        assert!(!brehmer_defect(&t, &CheckConfig::default()).is_psd);
        assert!(matches!(
            canonical_dilation(&t, &[3, 3], &CheckConfig::default()),
            Err(Error::NotBrehmer { .. })
        ));
    }
}
