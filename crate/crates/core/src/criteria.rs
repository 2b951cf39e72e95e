//! Beurling criterion, cross-commutator criterion and the identity suite, as
//! residuals compressed to the core window.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::MultiIndex;
use crate::linalg::{hermitian_part, min_eigenvalue, pseudo_inverse, spectral_norm};
use crate::subspace::{ModuleFrame, QuotientData};
use crate::CMatrix;

/// Named residuals with a pass/fail verdict each (`residual ≤ tolerance`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub residuals: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, bool>,
    /// Values reported alongside the residuals but not judged.
    pub diagnostics: BTreeMap<String, f64>,
    pub tolerance: f64,
}

impl CriterionReport {
    pub fn new(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }

    pub fn record(&mut self, name: &str, residual: f64) {
        self.residuals.insert(name.to_string(), residual);
        self.verdicts
            .insert(name.to_string(), residual <= self.tolerance);
    }

    pub fn diagnostic(&mut self, name: &str, value: f64) {
        self.diagnostics.insert(name.to_string(), value);
    }

    pub fn residual(&self, name: &str) -> Option<f64> {
        self.residuals.get(name).copied()
    }

    pub fn verdict(&self, name: &str) -> Option<bool> {
        self.verdicts.get(name).copied()
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|v| *v)
    }

    /// Copy every entry of `other` under `prefix.name`, re-judged at this tolerance.
    pub fn absorb(&mut self, prefix: &str, other: &CriterionReport) {
        for (k, v) in &other.residuals {
            self.record(&format!("{prefix}.{k}"), *v);
        }
        for (k, v) in &other.diagnostics {
            self.diagnostic(&format!("{prefix}.{k}"), *v);
        }
    }
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
}

/// `max_{i≠j} ‖(I_Q − C_i*C_i)(I_Q − C_j*C_j)‖` on the core window.
pub fn beurling_residual(frame: &ModuleFrame) -> f64 {
    let e = frame.probe();
    let n = frame.nvars();
    let defects: Vec<CMatrix> = (0..n).map(|t| frame.defect(t, &e)).collect();
    pairs(n)
        .map(|(i, j)| frame.window_norm(&frame.defect(i, &defects[j])))
        .fold(0.0, f64::max)
}

/// Defect-product test: the quotient is Beurling iff all products vanish.
pub fn beurling_criterion(q: &QuotientData, tol: f64) -> CriterionReport {
    let mut r = CriterionReport::new(tol);
    r.record("beurling", beurling_residual(&q.frame));
    r
}

/// `max_{i≠j} ‖R_j*R_i − R_iR_j*‖` on the core window, `R_t = M_{z_t}|_S`.
pub fn cross_commutator_residual(frame: &ModuleFrame) -> f64 {
    let e = frame.probe();
    let r = |t: usize, x: &CMatrix| frame.ps(&frame.shift(t, &frame.ps(x)));
    let r_adj = |t: usize, x: &CMatrix| frame.ps(&frame.shift_adj(t, &frame.ps(x)));
    pairs(frame.nvars())
        .map(|(i, j)| {
            let a = r_adj(j, &r(i, &e));
            let b = r(i, &r_adj(j, &e));
            frame.window_norm(&(a - b))
        })
        .fold(0.0, f64::max)
}

pub fn cross_commutator_criterion(frame: &ModuleFrame, tol: f64) -> CriterionReport {
    let mut r = CriterionReport::new(tol);
    r.record("cross_commutator", cross_commutator_residual(frame));
    r
}

/// `X_ij x = P_S M_{z_i} P_Q M_{z_j}* P_S x`.
fn xij_apply(frame: &ModuleFrame, i: usize, j: usize, x: &CMatrix) -> CMatrix {
    frame.ps(&frame.shift(i, &frame.pq(&frame.shift_adj(j, &frame.ps(x)))))
}

/// `max_{i≠j} ‖X_ij‖` on the core window.
pub fn xij_residual(frame: &ModuleFrame) -> f64 {
    let e = frame.probe();
    pairs(frame.nvars())
        .map(|(i, j)| frame.window_norm(&xij_apply(frame, i, j, &e)))
        .fold(0.0, f64::max)
}

/// For each variable `i`, the nonzero 0/1 multi-indices with slot `i` zero.
pub fn default_hats(nvars: usize) -> Vec<Vec<MultiIndex>> {
    (0..nvars)
        .map(|i| {
            (1..(1usize << nvars))
                .filter(|mask| mask & (1 << i) == 0)
                .map(|mask| MultiIndex::new((0..nvars).map(|t| (mask >> t) & 1).collect()))
                .collect()
        })
        .collect()
}

fn validate_hats(frame: &ModuleFrame, hats: &[Vec<MultiIndex>]) -> Result<()> {
    let n = frame.nvars();
    if hats.len() != n {
        return Err(Error::InvalidMultiIndex(format!(
            "expected {n} lists of multi-indices, got {}",
            hats.len()
        )));
    }
    let headroom = frame.enlarged_grid().caps()[0] - frame.working_grid().caps()[0];
    for (i, list) in hats.iter().enumerate() {
        for k in list {
            if k.len() != n || k.is_zero() || k.get(i) != 0 {
                return Err(Error::InvalidMultiIndex(format!(
                    "{k} is not a nonzero multi-index with slot {} equal to zero",
                    i + 1
                )));
            }
            if k.max_entry() + 1 > headroom {
                return Err(Error::Truncation(format!(
                    "multi-index {k} needs headroom {}, frame has {headroom}",
                    k.max_entry() + 1
                )));
            }
        }
    }
    Ok(())
}

/// `[C_i, C^{*k}] x`.
fn commutator_apply(frame: &ModuleFrame, i: usize, k: &MultiIndex, x: &CMatrix) -> CMatrix {
    frame.compression(i, &frame.compression_pow_adj(k, x))
        - frame.compression_pow_adj(k, &frame.compression(i, x))
}

/// `[C_i, C^{*k}]* x = [C^k, C_i*] x`.
fn commutator_adj_apply(frame: &ModuleFrame, i: usize, k: &MultiIndex, x: &CMatrix) -> CMatrix {
    frame.compression_pow(k, &frame.compression_adj(i, x))
        - frame.compression_adj(i, &frame.compression_pow(k, x))
}

/// Structural identities of the quotient module:
///
/// - `xij`: `‖X_ij‖`, `X_ij = P_S M_{z_i} P_Q M_{z_j}* P_S`;
/// - `commutator_identity`: `‖[C_i, C^{*k̂}] − P_Q M_z^{*k̂} P_S M_{z_i} P_Q‖`;
/// - `domination_negativity`: `max(0, −λ_min(D²_{C_i} − K*K))` with `K = [C_i, C^{*k̂}]`;
/// - `xij_products`: the three products `P_Q M^{*k̂} X_ij M^{l̂} P_Q`,
///   `P_Q M_{z_i}* X_ij M^{l̂} P_Q`, `P_Q M^{*k̂} X_ij M_{z_j} P_Q`, only when the
///   Beurling criterion passes;
/// - `reduces`: `‖[P_Q, M_{z_t}* P_S M_{z_t}]‖`;
/// - `defect_identity`: `‖(P_Q − C_t*C_t) − P_Q M_{z_t}* P_S M_{z_t} P_Q‖`.
///
/// `hats[i]` lists the multi-indices `k̂_i` used for variable `i`.
pub fn identity_suite(
    q: &QuotientData,
    hats: &[Vec<MultiIndex>],
    tol: f64,
) -> Result<CriterionReport> {
    let frame = &q.frame;
    validate_hats(frame, hats)?;
    let n = frame.nvars();
    let e = frame.probe();
    let mut report = CriterionReport::new(tol);

    report.record("xij", xij_residual(frame));

    let mut commutator_gap: f64 = 0.0;
    let mut domination_min = f64::INFINITY;
    for (i, list) in hats.iter().enumerate() {
        let d2 = frame.defect(i, &e);
        for k in list {
            let lhs = commutator_apply(frame, i, k, &e);
            let rhs = frame.pq(&frame.shift_pow_adj(
                k,
                &frame.ps(&frame.shift(i, &frame.pq(&e))),
            ));
            commutator_gap = commutator_gap.max(frame.window_norm(&(&lhs - rhs)));
            let kk = commutator_adj_apply(frame, i, k, &lhs);
            let gap = frame.window_block(&(&d2 - kk));
            domination_min = domination_min.min(min_eigenvalue(&hermitian_part(&gap)));
        }
    }
    report.record("commutator_identity", commutator_gap);
    let domination_min = if domination_min.is_finite() { domination_min } else { 0.0 };
    report.record("domination_negativity", (-domination_min).max(0.0));
    report.diagnostic("domination_min_eigenvalue", domination_min);

    let beurling = beurling_residual(frame);
    report.diagnostic("beurling", beurling);
    if beurling <= tol {
        let mut products: f64 = 0.0;
        for (i, j) in pairs(n) {
            for k in &hats[i] {
                for l in &hats[j] {
                    let x_ml = xij_apply(frame, i, j, &frame.shift_pow(l, &frame.pq(&e)));
                    let x_mj = xij_apply(frame, i, j, &frame.shift(j, &frame.pq(&e)));
                    let a = frame.pq(&frame.shift_pow_adj(k, &x_ml));
                    let b = frame.pq(&frame.shift_adj(i, &x_ml));
                    let c = frame.pq(&frame.shift_pow_adj(k, &x_mj));
                    products = products
                        .max(frame.window_norm(&a))
                        .max(frame.window_norm(&b))
                        .max(frame.window_norm(&c));
                }
            }
        }
        report.record("xij_products", products);
    }

    let mut reduces: f64 = 0.0;
    for t in 0..n {
        let g = |x: &CMatrix| frame.shift_adj(t, &frame.ps(&frame.shift(t, x)));
        let a = frame.pq(&g(&e));
        let b = g(&frame.pq(&e));
        reduces = reduces.max(frame.window_norm(&(a - b)));
    }
    report.record("reduces", reduces);
    report.record("defect_identity", q.diagnostics.get("defect_identity").copied().unwrap_or(0.0));
    Ok(report)
}

/// A contraction `X` with `[C_i, C^{*k̂}] = X D_{C_i}` on the quotient basis.
#[derive(Clone, Debug)]
pub struct CommutatorContraction {
    pub x: CMatrix,
    pub norm: f64,
    /// `‖X D_{C_i} − [C_i, C^{*k̂}]‖` compressed to the core window.
    pub factorization_residual: f64,
    /// The same residual on the whole quotient basis, top degrees included.
    pub full_residual: f64,
}

impl CommutatorContraction {
    pub fn is_contraction(&self, tol: f64) -> bool {
        self.norm <= 1.0 + tol
    }
}

/// `X = [C_i, C^{*k̂}]·D_{C_i}^+` with the pseudo-inverse taken at `rank_tol`.
pub fn commutator_contraction(
    q: &QuotientData,
    i: usize,
    k: &MultiIndex,
    rank_tol: f64,
) -> Result<CommutatorContraction> {
    let n = q.frame.nvars();
    if i >= n || k.len() != n || k.is_zero() || k.get(i) != 0 {
        return Err(Error::InvalidMultiIndex(format!(
            "{k} is not admissible for variable {}",
            i + 1
        )));
    }
    let ops = &q.compressions.operators;
    let r = q.quotient.rank();
    let mut ck_adj = crate::linalg::identity(r);
    for (t, &e) in k.entries().iter().enumerate() {
        for _ in 0..e {
            ck_adj = &ck_adj * ops[t].adjoint();
        }
    }
    let comm = &ops[i] * &ck_adj - &ck_adj * &ops[i];
    let d = &q.defect_roots[i];
    let x = &comm * pseudo_inverse(d, rank_tol);
    let gap = &x * d - &comm;
    let qb = q.frame.q_basis();
    let windowed = q.frame.window_norm(&(qb * (&gap * (qb.adjoint() * q.frame.probe()))));
    Ok(CommutatorContraction {
        norm: spectral_norm(&x),
        factorization_residual: windowed,
        full_residual: spectral_norm(&gap),
        x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TruncationGrid;
    use crate::subspace::{quotient_data, submodule_projection, Margins, SubspaceData};
    use crate::symbol::AnalyticSymbol;
    use crate::CheckConfig;

    fn monomial_quotient(k: &[usize], cap: usize) -> QuotientData {
        let grid = TruncationGrid::uniform(k.len(), cap).unwrap();
        let theta = AnalyticSymbol::monomial(k).unwrap();
        let m = Margins::for_symbol(&theta, None);
        let s = submodule_projection(&theta, &grid, &m, &CheckConfig::default()).unwrap();
        quotient_data(&s, &CheckConfig::default()).unwrap()
    }

    fn constants_quotient(cap: usize) -> QuotientData {
        let grid = TruncationGrid::uniform(2, cap).unwrap();
        let s = SubspaceData::vanishing_at_origin(grid, Margins::for_basis(2, 1)).unwrap();
        quotient_data(&s, &CheckConfig::default()).unwrap()
    }

    #[test]
    fn default_hats_have_zero_slot() {
        let h = default_hats(3);
        assert_eq!(h[0].len(), 3);
        assert!(h.iter().enumerate().all(|(i, l)| l.iter().all(|k| k.get(i) == 0)));
        assert_eq!(default_hats(2)[0], vec![MultiIndex::new(vec![0, 1])]);
    }

    #[test]
    fn z1z2_is_beurling() {
        let q = monomial_quotient(&[1, 1], 4);
        assert!(beurling_criterion(&q, 1e-10).all_pass());
        assert!(cross_commutator_criterion(&q.frame, 1e-10).all_pass());
        let suite = identity_suite(&q, &default_hats(2), 1e-10).unwrap();
        assert!(suite.all_pass(), "{suite:?}");
        assert!(suite.residual("xij_products").is_some());
    }

    #[test]
    fn constants_quotient_is_not_beurling() {
        let q = constants_quotient(3);
        let b = beurling_criterion(&q, 1e-8);
        assert!((b.residual("beurling").unwrap() - 1.0).abs() < 1e-12);
        assert!(cross_commutator_residual(&q.frame) >= 0.5);
        let suite = identity_suite(&q, &default_hats(2), 1e-12).unwrap();
        assert!(suite.residual("commutator_identity").unwrap() <= 1e-12);
        assert!(suite.residual("reduces").unwrap() <= 1e-12);
        assert!(suite.residual("xij").unwrap() > 0.0);
        assert!(suite.residual("xij_products").is_none());
    }

    #[test]
    fn hats_must_have_zero_slot() {
        let q = monomial_quotient(&[1, 1], 3);
        let bad = vec![vec![MultiIndex::new(vec![1, 0])], vec![MultiIndex::new(vec![1, 0])]];
        assert!(matches!(
            identity_suite(&q, &bad, 1e-8),
            Err(Error::InvalidMultiIndex(_))
        ));
    }

    #[test]
    fn commutator_contraction_factors_the_commutator() {
        let q = monomial_quotient(&[1, 1], 4);
        let c = commutator_contraction(&q, 0, &MultiIndex::new(vec![0, 1]), 1e-10).unwrap();
        assert!(c.is_contraction(1e-10));
        assert!(c.factorization_residual < 1e-10, "{c:?}");
    }
}
