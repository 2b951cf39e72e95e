//! Division of inner functions, the invariant subspace `M = S_Φ ⊖ S_Θ` attached
//! to a factorization `Θ = ΦΨ`, and constancy detection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::criteria::{beurling_residual, cross_commutator_residual, CriterionReport};
use crate::error::{Error, Result};
use crate::grid::{MultiIndex, TruncationGrid};
use crate::linalg::{hermitian_eigen, select, selector, spectral_norm};
use crate::operator::mult_operator;
use crate::subspace::{quotient_data, submodule_projection, Margins, ModuleFrame, SubspaceData};
use crate::symbol::{innerness_check, AnalyticSymbol};
use crate::{CMatrix, CheckConfig, C64};

/// Coefficients of an exactly divided polynomial below this size are rounding.
const ROUNDING_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct Division {
    pub psi: AnalyticSymbol,
    /// `‖(I − P_{S_Φ}) M_Θ‖` on the input window of Θ.
    pub containment: f64,
    /// `max_i ‖X M_{z_i} − M_{z_i} X‖` for `X = M_Φ* M_Θ` on the exact block.
    pub commutation: f64,
    /// `‖M_Θ − M_Φ M_Ψ‖` on the input window of Θ.
    pub factorization: f64,
    /// `‖M_Ψ*M_Ψ − I‖` on the input window of Ψ.
    pub psi_isometry: f64,
}

fn require_inner(
    symbol: &AnalyticSymbol,
    grid: &TruncationGrid,
    margins: &Margins,
    config: &CheckConfig,
) -> Result<()> {
    let r = innerness_check(symbol, grid, config.torus_samples, margins, config.tol)?;
    if r.is_inner() {
        Ok(())
    } else {
        Err(Error::NotInner {
            torus_deviation: r.torus_deviation,
            isometry_defect: r.isometry_defect,
        })
    }
}

fn input_window(grid: &TruncationGrid, margin: &[usize]) -> Result<Vec<usize>> {
    Ok(grid.window_indices(&grid.reduced_caps(margin)?))
}

fn numerator_support(symbol: &AnalyticSymbol) -> Vec<usize> {
    match symbol.rational_form() {
        Some(form) => form.numerator.support().to_vec(),
        None => symbol.support().to_vec(),
    }
}

/// Θ's input margin, at least Φ's plus the numerator degree gap.
fn widened_for_division(
    mut m_theta: Margins,
    m_phi: &Margins,
    theta: &AnalyticSymbol,
    phi: &AnalyticSymbol,
) -> Margins {
    let (nt, np) = (numerator_support(theta), numerator_support(phi));
    for (i, slot) in m_theta.input.iter_mut().enumerate() {
        let need = m_phi.input[i] + nt[i].saturating_sub(np[i]);
        *slot = (*slot).max(need);
    }
    m_theta
}

/// `Ψ` with `Θ = ΦΨ`, read off `X = M_Φ* M_Θ`. The grid carries the channels of
/// the common codomain `E`.
pub fn divide_inner(
    theta: &AnalyticSymbol,
    phi: &AnalyticSymbol,
    grid: &TruncationGrid,
    config: &CheckConfig,
) -> Result<Division> {
    if theta.rows() != phi.rows() || theta.nvars() != phi.nvars() {
        return Err(Error::DimensionMismatch(
            "Θ and Φ must share variables and codomain".into(),
        ));
    }
    let m_theta = Margins::for_symbol(theta, None);
    let m_phi = Margins::for_symbol(phi, None);
    let m_theta = widened_for_division(m_theta, &m_phi, theta, phi);
    require_inner(theta, grid, &m_theta, config)?;
    require_inner(phi, grid, &m_phi, config)?;

    let s_phi = submodule_projection(phi, grid, &m_phi, config)?;
    let mt = mult_operator(theta, grid)?;
    let mp = mult_operator(phi, grid)?;
    let dom_theta = mt.domain().clone();
    let dom_phi = mp.domain().clone();
    let all_rows: Vec<usize> = (0..grid.dim()).collect();
    let win_theta = input_window(&dom_theta, &m_theta.input)?;
    let theta_cols = select(mt.matrix(), &all_rows, &win_theta);
    let containment = s_phi.distance(&theta_cols);
    if containment > config.tol {
        return Err(Error::NotDivisible {
            residual: containment,
        });
    }

    // rows of X are exact for exponents j ≤ d − input(Φ); rational symbols are
    // paired on a doubled grid, which keeps every row up to the tail decay
    let x = if theta.is_polynomial() && phi.is_polynomial() {
        mp.matrix().adjoint() * mt.matrix()
    } else {
        let extra = grid.caps().iter().copied().max().unwrap_or(0);
        let big = grid.enlarged(extra)?;
        let bt = mult_operator(theta, &big)?;
        let bp = mult_operator(phi, &big)?;
        let rows = dom_phi.embedding_into(bp.domain())?;
        let cols = dom_theta.embedding_into(bt.domain())?;
        select(&(bp.matrix().adjoint() * bt.matrix()), &rows, &cols)
    };
    let exact_caps = if theta.is_polynomial() && phi.is_polynomial() {
        dom_phi.reduced_caps(&m_phi.input)?
    } else {
        dom_phi.caps().to_vec()
    };
    let exact_rows = dom_phi.window_indices(&exact_caps);
    let mut commutation: f64 = 0.0;
    for var in 0..grid.nvars() {
        let mut margin = m_theta.input.clone();
        margin[var] += 1;
        let Ok(cols) = input_window(&dom_theta, &margin) else {
            continue;
        };
        let shifted_cols: Vec<usize> = cols
            .iter()
            .map(|&c| dom_theta.shift_targets(var)[c].expect("inside the input window"))
            .collect();
        let x_m = select(&x, &exact_rows, &shifted_cols);
        let m_x = CMatrix::from_fn(exact_rows.len(), cols.len(), |a, b| {
            let (k, ch) = dom_phi.entry(exact_rows[a]);
            if k.get(var) == 0 {
                C64::new(0.0, 0.0)
            } else {
                let mut below = k.entries().to_vec();
                below[var] -= 1;
                let row = dom_phi
                    .index_of(&MultiIndex::new(below), ch)
                    .expect("inside the grid");
                x[(row, cols[b])]
            }
        });
        commutation = commutation.max(spectral_norm(&(x_m - m_x)));
    }
    if commutation > config.tol {
        return Err(Error::DivisionNotAnalytic {
            residual: commutation,
        });
    }

    let (f_dim, e_dim) = (phi.cols(), theta.cols());
    let mut coeffs: BTreeMap<MultiIndex, CMatrix> = BTreeMap::new();
    for k in dom_phi.monomials().iter().filter(|k| k.within(&exact_caps)) {
        let block = CMatrix::from_fn(f_dim, e_dim, |r, c| {
            x[(
                dom_phi.index_of(k, r).expect("grid row"),
                dom_theta.index_of(&MultiIndex::zeros(grid.nvars()), c).expect("grid col"),
            )]
        });
        coeffs.insert(k.clone(), block);
    }
    let psi = if theta.is_polynomial() && phi.is_polynomial() {
        let terms = coeffs.into_iter().filter_map(|(k, mut m)| {
            m.iter_mut().for_each(|z| {
                if z.norm() <= ROUNDING_FLOOR {
                    *z = C64::new(0.0, 0.0);
                }
            });
            (m.iter().any(|z| z.norm() > 0.0)).then_some((k, m))
        });
        AnalyticSymbol::polynomial(grid.nvars(), f_dim, e_dim, terms)?
    } else {
        AnalyticSymbol::series(grid.nvars(), f_dim, e_dim, exact_caps, coeffs)?
    };

    let psi_grid = grid.with_coeff_dim(f_dim)?;
    let mpsi = mult_operator(&psi, &psi_grid)?;
    let product = mp.matrix() * mpsi.matrix();
    let factorization = spectral_norm(&select(
        &(mt.matrix() - product),
        &all_rows,
        &win_theta,
    ));
    let m_psi = Margins::for_symbol(&psi, None);
    let psi_isometry = match psi_grid.reduced_caps(&m_psi.input) {
        Ok(_) => {
            let w = input_window(mpsi.domain(), &m_psi.input)?;
            let all: Vec<usize> = (0..psi_grid.dim()).collect();
            let cols = select(mpsi.matrix(), &all, &w);
            spectral_norm(&(cols.adjoint() * &cols - crate::linalg::identity(w.len())))
        }
        Err(_) => f64::INFINITY,
    };
    Ok(Division {
        psi,
        containment,
        commutation,
        factorization,
        psi_isometry,
    })
}

#[derive(Clone, Debug)]
pub struct FactorizationWitness {
    pub theta: AnalyticSymbol,
    pub phi: AnalyticSymbol,
    pub psi: AnalyticSymbol,
    pub s_theta: SubspaceData,
    pub s_phi: SubspaceData,
    /// `M = S_Φ ⊖ S_Θ`.
    pub m_basis: SubspaceData,
    pub residuals: BTreeMap<String, f64>,
}

/// Orthonormal basis of `big ⊖ small` for nested subspaces.
pub fn orthogonal_difference(big: &SubspaceData, small: &SubspaceData) -> Result<SubspaceData> {
    if big.grid() != small.grid() {
        return Err(Error::DimensionMismatch("subspaces on different grids".into()));
    }
    let b = big.basis();
    let sb = small.basis();
    let reduced = b.adjoint() * b - (b.adjoint() * sb) * (sb.adjoint() * b);
    let (vals, vecs) = hermitian_eigen(&reduced);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5).collect();
    let mut coords = CMatrix::zeros(vals.len(), keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        coords.set_column(dst, &vecs.column(src));
    }
    SubspaceData::from_columns(big.grid().clone(), &(b * coords), big.margins().clone(), 1e-10)
}

/// `z_i M ⊆ M ⊕ S_Θ` residual on the core window, evaluated in the frame of `N = M ⊕ S_Θ`.
fn invariance_in_sum(frame_n: &ModuleFrame, m: &SubspaceData) -> f64 {
    let mb = frame_n.embed(m.basis());
    let pm_e = &mb * (mb.adjoint() * frame_n.probe());
    (0..frame_n.nvars())
        .map(|t| frame_n.window_norm(&frame_n.pq(&frame_n.shift(t, &pm_e))))
        .fold(0.0, f64::max)
}

/// Divides `Θ` by `Φ` and builds `M = S_Φ ⊖ S_Θ` with its residuals:
/// `factorization`, `orthogonality` (`‖P_{S_Θ} P_M‖`), `invariance`
/// (`max_i ‖(I − P_{M⊕S_Θ}) M_{z_i} P_M‖`), `complement`
/// (`‖P_{Q_Θ⊖M} − P_{Q_Φ}‖`), plus the division diagnostics.
pub fn invariant_subspace_from_factorization(
    theta: &AnalyticSymbol,
    phi: &AnalyticSymbol,
    grid: &TruncationGrid,
    config: &CheckConfig,
) -> Result<FactorizationWitness> {
    let division = divide_inner(theta, phi, grid, config)?;
    let m_theta = Margins::for_symbol(theta, None);
    let m_phi = Margins::for_symbol(phi, None).with_window(m_theta.window.clone());
    let s_theta = submodule_projection(theta, grid, &m_theta, config)?;
    let s_phi = submodule_projection(phi, grid, &m_phi, config)?;
    let m = orthogonal_difference(&s_phi, &s_theta)?.with_margins(m_theta.clone())?;

    let mut residuals = BTreeMap::new();
    residuals.insert("containment".to_string(), division.containment);
    residuals.insert("commutation".to_string(), division.commutation);
    residuals.insert("factorization".to_string(), division.factorization);
    residuals.insert("psi_isometry".to_string(), division.psi_isometry);
    residuals.insert(
        "orthogonality".to_string(),
        spectral_norm(&(s_theta.basis().adjoint() * m.basis())),
    );

    let n_sum = s_theta.direct_sum(&m, config.rank_tol)?;
    let frame_n = ModuleFrame::from_submodule(&n_sum)?;
    residuals.insert("invariance".to_string(), invariance_in_sum(&frame_n, &m));

    // P_{Q_Θ ⊖ M} − P_{Q_Φ} = P_{S_Φ} − P_{S_Θ} − P_M on the working grid
    let diff = s_phi.projection().into_matrix()
        - s_theta.projection().into_matrix()
        - m.projection().into_matrix();
    let window = grid.window_indices(m.core_window());
    residuals.insert(
        "complement".to_string(),
        spectral_norm(&select(&diff, &window, &window)),
    );

    Ok(FactorizationWitness {
        theta: theta.clone(),
        phi: phi.clone(),
        psi: division.psi,
        s_theta,
        s_phi,
        m_basis: m,
        residuals,
    })
}

/// Tests whether `N = M ⊕ S_Θ` is a Beurling submodule in two ways:
/// `condition2` is the cross-commutator residual of `N`, `condition3` the
/// defect-product residual of the compressions to `Q_Θ ⊖ M`. `agreement` is 0
/// when both verdicts coincide. The reducing residual `‖[P_{Q_Θ⊖M}, M_{z_i}]‖`
/// is reported as a diagnostic.
pub fn beurling_submodule_check(
    m: &SubspaceData,
    theta: &AnalyticSymbol,
    margins: &Margins,
    config: &CheckConfig,
) -> Result<CriterionReport> {
    let s_theta = submodule_projection(theta, m.grid(), margins, config)?;
    let orth = spectral_norm(&(s_theta.basis().adjoint() * m.basis()));
    if orth > config.tol {
        return Err(Error::NotOrthogonal { residual: orth });
    }
    let n_sum = s_theta
        .direct_sum(m, config.rank_tol)?
        .with_margins(margins.clone())?;
    let q = quotient_data(&n_sum, config)?;
    let mut report = CriterionReport::new(config.tol);
    report.diagnostic("orthogonality", orth);
    report.diagnostic("invariance", q.diagnostics["invariance"]);
    let c2 = cross_commutator_residual(&q.frame);
    let c3 = beurling_residual(&q.frame);
    report.record("condition2", c2);
    report.record("condition3", c3);
    let agree = (c2 <= config.tol) == (c3 <= config.tol);
    report.record("agreement", if agree { 0.0 } else { 1.0 });
    report.diagnostic("reducing", reducing_residual(&q.frame));
    Ok(report)
}

/// `max_i ‖P_Q M_{z_i} − M_{z_i} P_Q‖` on the core window.
pub fn reducing_residual(frame: &ModuleFrame) -> f64 {
    let e = frame.probe();
    (0..frame.nvars())
        .map(|t| {
            let a = frame.pq(&frame.shift(t, &e));
            let b = frame.shift(t, &frame.pq(&e));
            frame.window_norm(&(a - b))
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstancyVerdict {
    /// `ΘH²` covers the codomain window.
    pub surjective: bool,
    /// Largest distance of a codomain-window basis vector from `ΘH²`.
    pub surjectivity_residual: f64,
    /// All non-constant coefficients vanish.
    pub constant_coefficients: bool,
    pub max_nonconstant_coefficient: f64,
    /// Surjectivity implies constant coefficients.
    pub consistent: bool,
}

impl ConstancyVerdict {
    pub fn is_unitary_constant(&self) -> bool {
        self.surjective && self.constant_coefficients
    }
}

/// Surjectivity of `M_Θ` on the exactness window against vanishing of `Θ_k`, `k ≠ 0`.
pub fn constancy_check(
    theta: &AnalyticSymbol,
    grid: &TruncationGrid,
    margins: &Margins,
    config: &CheckConfig,
) -> Result<ConstancyVerdict> {
    let s = submodule_projection(theta, grid, margins, config)?;
    let window = input_window(grid, &margins.input)?;
    let probe = selector(grid.dim(), &window);
    let residual = s.distance(&probe);
    let size = theta.expanded(grid.caps())?.nonconstant_size();
    let surjective = residual <= config.tol;
    let constant = size <= config.tol;
    Ok(ConstancyVerdict {
        surjective,
        surjectivity_residual: residual,
        constant_coefficients: constant,
        max_nonconstant_coefficient: size,
        consistent: !surjective || constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn mono(k: &[usize]) -> AnalyticSymbol {
        AnalyticSymbol::monomial(k).unwrap()
    }

    #[test]
    fn monomial_division_is_exact() {
        let grid = TruncationGrid::uniform(2, 4).unwrap();
        let d = divide_inner(&mono(&[1, 1]), &mono(&[1, 0]), &grid, &CheckConfig::default())
            .unwrap();
        assert!(d.psi.is_polynomial());
        assert_eq!(d.psi.coefficients().len(), 1);
        assert_eq!(d.psi.coefficient(&MultiIndex::new(vec![0, 1]))[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(d.factorization, 0.0);
    }

    #[test]
    fn self_division_gives_one() {
        let grid = TruncationGrid::uniform(2, 3).unwrap();
        let t = mono(&[2, 1]);
        let d = divide_inner(&t, &t, &grid, &CheckConfig::default()).unwrap();
        assert_eq!(d.psi.coefficients().len(), 1);
        assert_eq!(d.psi.coefficient(&MultiIndex::zeros(2))[(0, 0)], C64::new(1.0, 0.0));
    }

    #[test]
    fn z1_squared_is_not_divisible_by_z2() {
        let grid = TruncationGrid::uniform(2, 3).unwrap();
        let err = divide_inner(&mono(&[2, 0]), &mono(&[0, 1]), &grid, &CheckConfig::default())
            .unwrap_err();
        match err {
            Error::NotDivisible { residual } => assert!(residual >= 1.0 - 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn z1z2_factorization_subspace() {
        let grid = TruncationGrid::uniform(2, 4).unwrap();
        let w = invariant_subspace_from_factorization(
            &mono(&[1, 1]),
            &mono(&[1, 0]),
            &grid,
            &CheckConfig::default(),
        )
        .unwrap();
        // M = span{z1^k : k ≥ 1}
        assert_eq!(w.m_basis.rank(), 4);
        let p = w.m_basis.projection().into_matrix();
        for i in 0..grid.dim() {
            let (k, _) = grid.entry(i);
            let expect = if k.get(0) >= 1 && k.get(1) == 0 { 1.0 } else { 0.0 };
            assert!((p[(i, i)].re - expect).abs() < 1e-12);
        }
        for (name, r) in &w.residuals {
            assert!(*r <= 1e-10, "{name} = {r}");
        }
    }

    #[test]
    fn constant_unitary_is_constant() {
        let grid = TruncationGrid::uniform(2, 3).unwrap();
        let u = AnalyticSymbol::constant(2, CMatrix::from_element(1, 1, C64::new(0.6, 0.8)))
            .unwrap();
        let v = constancy_check(&u, &grid, &Margins::for_symbol(&u, None), &CheckConfig::default())
            .unwrap();
        assert!(v.surjective && v.constant_coefficients && v.consistent);
        let z1 = mono(&[1, 0]);
        let v = constancy_check(&z1, &grid, &Margins::for_symbol(&z1, None), &CheckConfig::default())
            .unwrap();
        assert!(!v.surjective && !v.constant_coefficients && v.consistent);
    }

    #[test]
    fn trivial_m_is_beurling() {
        let grid = TruncationGrid::uniform(2, 4).unwrap();
        let theta = mono(&[1, 1]);
        let margins = Margins::for_symbol(&theta, None);
        let empty =
            SubspaceData::from_columns(grid.clone(), &CMatrix::zeros(grid.dim(), 0), margins.clone(), 1e-10)
                .unwrap();
        let r = beurling_submodule_check(&empty, &theta, &margins, &CheckConfig::default()).unwrap();
        assert!(r.all_pass(), "{r:?}");
        assert!(max_abs(empty.basis()) == 0.0);
    }
}
