use polydisc_core::criteria::{cross_commutator_residual, xij_residual};
use polydisc_core::generators::{inner_corpus, non_beurling_corpus};
use polydisc_core::linalg::{identity, max_abs, spectral_norm};
use polydisc_core::{
    beurling_criterion, commutator_contraction, cross_commutator_criterion, default_hats,
    identity_suite, quotient_data, submodule_projection, AnalyticSymbol, CheckConfig, Margins,
    MultiIndex, SubspaceData, TruncationGrid, C64,
};
use proptest::prelude::*;

fn config() -> CheckConfig {
    CheckConfig::default().with_tol(1e-10)
}

fn symbol_quotient(symbol: &AnalyticSymbol, caps: &[usize], config: &CheckConfig) -> polydisc_core::QuotientData {
    let grid = TruncationGrid::new(caps.to_vec(), symbol.rows()).unwrap();
    let s = submodule_projection(symbol, &grid, &Margins::for_symbol(symbol, None), config).unwrap();
    quotient_data(&s, config).unwrap()
}

#[test]
fn projections_split_the_grid() {
    let theta = AnalyticSymbol::monomial(&[1, 2]).unwrap();
    let grid = TruncationGrid::uniform(2, 4).unwrap();
    let s = submodule_projection(&theta, &grid, &Margins::for_symbol(&theta, None), &config()).unwrap();
    let q = s.complement();
    let ps = s.projection().into_matrix();
    let pq = q.projection().into_matrix();
    assert!(max_abs(&(&ps * &ps - &ps)) < 1e-14);
    assert!(max_abs(&(&ps - ps.adjoint())) < 1e-15);
    assert!(max_abs(&(&ps + &pq - identity(grid.dim()))) < 1e-14);
    assert!(max_abs(&(&ps * &pq)) < 1e-14);
    assert_eq!(s.rank() + q.rank(), grid.dim());
}

#[test]
fn z1z2_quotient_compressions() {
    let q = symbol_quotient(&AnalyticSymbol::monomial(&[1, 1]).unwrap(), &[6, 6], &config());
    // Q is spanned by 1, z1^k, z2^k
    assert_eq!(q.quotient.rank(), 13);
    for c in &q.compressions.operators {
        assert!(spectral_norm(c) <= 1.0 + 1e-12);
    }
    let beurling = beurling_criterion(&q, 1e-10);
    assert!(beurling.all_pass());
    assert!(cross_commutator_criterion(&q.frame, 1e-10).all_pass());
    assert!(xij_residual(&q.frame) < 1e-12);
}

#[test]
fn vanishing_at_origin_fails_every_criterion() {
    let grid = TruncationGrid::uniform(2, 3).unwrap();
    let s = SubspaceData::vanishing_at_origin(grid, Margins::for_basis(2, 1)).unwrap();
    let q = quotient_data(&s, &config()).unwrap();
    assert_eq!(q.quotient.rank(), 1);
    assert!(max_abs(&q.compressions.operators[0]) < 1e-15);
    let r = beurling_criterion(&q, 1e-10);
    assert!(!r.all_pass());
    assert!((r.residuals.values().next().unwrap() - 1.0).abs() < 1e-12);
    assert!(cross_commutator_residual(&q.frame) >= 0.5);
    assert!(xij_residual(&q.frame) > 0.5);
}

#[test]
fn identities_hold_on_a_blaschke_quotient() {
    let theta = AnalyticSymbol::blaschke(2, 0, C64::new(0.5, 0.0))
        .unwrap()
        .mul(&AnalyticSymbol::blaschke(2, 1, C64::new(0.3, 0.1)).unwrap())
        .unwrap();
    let cfg = config().with_invariance_tol(1e-2);
    let q = symbol_quotient(&theta, &[6, 6], &cfg);
    let r = identity_suite(&q, &default_hats(2), 1e-10).unwrap();
    for name in ["commutator_identity", "domination_negativity", "reduces", "defect_identity"] {
        assert!(r.residual(name).unwrap() <= 1e-10, "{name}: {:?}", r.residual(name));
    }
}

#[test]
fn identities_hold_without_the_beurling_property() {
    for entry in non_beurling_corpus().unwrap() {
        let q = quotient_data(&entry.subspace, &config()).unwrap();
        let n = q.frame.nvars();
        let r = identity_suite(&q, &default_hats(n), 1e-10).unwrap();
        assert!(r.residual("xij_products").is_none(), "{}", entry.id);
        for name in ["commutator_identity", "domination_negativity", "reduces", "defect_identity"] {
            assert!(r.residual(name).unwrap() <= 1e-10, "{} {name}", entry.id);
        }
        assert!(r.residual("xij").unwrap() > 0.5, "{}", entry.id);
    }
}

#[test]
fn commutator_contraction_on_z1z2() {
    let q = symbol_quotient(&AnalyticSymbol::monomial(&[1, 1]).unwrap(), &[5, 5], &config());
    let x = commutator_contraction(&q, 0, &MultiIndex::new(vec![0, 1]), 1e-10).unwrap();
    assert!(x.is_contraction(1e-10));
    assert!(x.factorization_residual < 1e-10);
    assert!(commutator_contraction(&q, 0, &MultiIndex::new(vec![1, 0]), 1e-10).is_err());
}

#[test]
fn beurling_criteria_agree_across_the_corpus() {
    let cfg = CheckConfig::default().with_tol(1e-6).with_invariance_tol(1e-6);
    for entry in inner_corpus(11, 18).unwrap() {
        let grid = entry.grid().unwrap();
        let s = submodule_projection(&entry.symbol, &grid, &entry.margins(), &cfg).unwrap();
        let q = quotient_data(&s, &cfg).unwrap();
        let b = beurling_criterion(&q, cfg.tol).all_pass();
        let cc = cross_commutator_criterion(&q.frame, cfg.tol).all_pass();
        let x = xij_residual(&q.frame) <= cfg.tol;
        assert!(b && cc && x, "{}", entry.id);
    }
}

fn upper_set(generators: &[(usize, usize)]) -> impl Fn(&MultiIndex) -> bool + '_ {
    move |k| generators.iter().any(|&(a, b)| k.get(0) >= a && k.get(1) >= b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn monomial_submodules_satisfy_the_identities(
        generators in prop::collection::vec((0usize..3, 0usize..3), 1..3)
            .prop_filter("proper submodule", |g| g.iter().all(|&(a, b)| a + b > 0)),
    ) {
        let grid = TruncationGrid::uniform(2, 5).unwrap();
        let s = SubspaceData::monomial_span(grid, Margins::for_basis(2, 2), upper_set(&generators)).unwrap();
        let q = quotient_data(&s, &config()).unwrap();
        let r = identity_suite(&q, &default_hats(2), 1e-10).unwrap();
        for name in ["commutator_identity", "domination_negativity", "reduces", "defect_identity"] {
            prop_assert!(r.residual(name).unwrap() <= 1e-10, "{} {:?}", name, generators);
        }
        // the three Beurling tests agree
        let b = beurling_criterion(&q, 1e-10).all_pass();
        let cc = cross_commutator_criterion(&q.frame, 1e-10).all_pass();
        let x = xij_residual(&q.frame) <= 1e-10;
        prop_assert_eq!(b, cc);
        prop_assert_eq!(b, x);
        // a single generator gives z^g H², which is Beurling
        if generators.len() == 1 || generators.windows(2).all(|w| w[0] == w[1]) {
            prop_assert!(b);
        }
        if b {
            prop_assert!(r.residual("xij_products").unwrap() <= 1e-10);
        }
    }

    #[test]
    fn blaschke_quotients_are_beurling_with_contractive_compressions(re in -0.25..0.25f64, im in -0.25..0.25f64, var in 0usize..2) {
        let theta = AnalyticSymbol::blaschke(2, var, C64::new(re, im)).unwrap();
        let cfg = config().with_invariance_tol(1e-4);
        let q = symbol_quotient(&theta, &[6, 6], &cfg);
        prop_assert!(q.compressions.max_norm() <= 1.0 + 1e-10);
        for d in &q.defects {
            prop_assert!(max_abs(&(d - d.adjoint())) < 1e-14);
        }
        prop_assert!(beurling_criterion(&q, 1e-8).all_pass());
    }
}
