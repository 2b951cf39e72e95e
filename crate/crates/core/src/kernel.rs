//! Reproducing-kernel computations for `S = {f ∈ H²(𝔻²) : f(0,0) = 0}` and the
//! rational inner function `φ = (2z₁z₂ − z₁ − z₂)/(2 − z₁ − z₂)` on the bidisc.
//!
//! `S` has kernel `k(z,w) = (z₁(1 − z₂w̄₂)w̄₁ + z₂w̄₂)·𝕊(z,w) = 𝕊(z,w) − 1`. If `S`
//! were `ΘH²` for an inner `Θ`, then `F = k/𝕊 = z₁(1 − z₂w̄₂)w̄₁ + z₂w̄₂` would be a
//! positive definite kernel; a small Gram matrix of `F` with a negative
//! eigenvalue certifies that it is not.

use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{beurling_criterion, CriterionReport};
use crate::error::{Error, Result};
use crate::factorization::{beurling_submodule_check, orthogonal_difference};
use crate::grid::TruncationGrid;
use crate::subspace::{quotient_data, submodule_projection, Margins, SubspaceData};
use crate::symbol::{innerness_check, AnalyticSymbol};
use crate::{CMatrix, CheckConfig, C64};

/// Pair of points `(z, w)` of the open polydisc.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelPoint {
    pub z: Vec<C64>,
    pub w: Vec<C64>,
}

impl KernelPoint {
    pub fn new(z: Vec<C64>, w: Vec<C64>) -> Result<Self> {
        if z.len() != w.len() || z.is_empty() {
            return Err(Error::DimensionMismatch("kernel points need equal dimension".into()));
        }
        if let Some(p) = z.iter().chain(&w).find(|p| p.norm() >= 1.0 || p.norm().is_nan()) {
            return Err(Error::OutsidePolydisc(format!("coordinate {p} has modulus ≥ 1")));
        }
        Ok(Self { z, w })
    }
}

/// `𝕊(z,w) = ∏ (1 − z_i w̄_i)⁻¹`.
pub fn szego(z: &[C64], w: &[C64]) -> C64 {
    z.iter()
        .zip(w)
        .fold(C64::new(1.0, 0.0), |acc, (a, b)| acc / (1.0 - a * b.conj()))
}

/// `F(z,w) = z₁(1 − z₂w̄₂)w̄₁ + z₂w̄₂`.
pub fn kernel_quotient(z: &[C64], w: &[C64]) -> C64 {
    let x = z[0] * w[0].conj();
    let y = z[1] * w[1].conj();
    x * (1.0 - y) + y
}

/// Closed form `k(z,w) = F(z,w)·𝕊(z,w)`.
pub fn kernel_closed_form(p: &KernelPoint) -> C64 {
    kernel_quotient(&p.z, &p.w) * szego(&p.z, &p.w)
}

/// `Σ_{k ≠ 0, k ≤ caps} z^k w̄^k`, the kernel of `S` summed over its monomial basis.
pub fn kernel_basis_sum(p: &KernelPoint, grid: &TruncationGrid) -> C64 {
    let wbar: Vec<C64> = p.w.iter().map(|v| v.conj()).collect();
    grid.monomials()
        .iter()
        .filter(|k| !k.is_zero())
        .map(|k| k.monomial_at(&p.z) * k.monomial_at(&wbar))
        .sum()
}

/// Seeded points of the bidisc with every coordinate of modulus ≤ `radius`.
pub fn sample_kernel_points(seed: u64, count: usize, radius: f64) -> Vec<KernelPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut draw = || {
                (0..2)
                    .map(|_| random_point(&mut rng, radius))
                    .collect::<Vec<_>>()
            };
            let z = draw();
            let w = draw();
            KernelPoint { z, w }
        })
        .collect()
}

fn random_point(rng: &mut ChaCha8Rng, radius: f64) -> C64 {
    let r = radius * rng.random::<f64>();
    let t = 2.0 * PI * rng.random::<f64>();
    C64::from_polar(r, t)
}

/// Point set whose Gram matrix of `F` has a negative eigenvalue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramWitness {
    pub points: Vec<Vec<C64>>,
    pub gram: Vec<Vec<C64>>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    pub stream: u64,
    pub draw: u64,
}

fn gram_of(points: &[Vec<C64>]) -> CMatrix {
    let n = points.len();
    CMatrix::from_fn(n, n, |a, b| kernel_quotient(&points[a], &points[b]))
}

fn sorted_eigenvalues(g: &CMatrix) -> Vec<f64> {
    let h = (g + g.adjoint()).scale(0.5);
    let mut v: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn search_stream(seed: u64, stream: u64, draws: u64, radius: f64) -> Option<GramWitness> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut best: Option<GramWitness> = None;
    for draw in 0..draws {
        let size = rng.random_range(2..=4usize);
        let points: Vec<Vec<C64>> = (0..size)
            .map(|_| vec![random_point(&mut rng, radius), random_point(&mut rng, radius)])
            .collect();
        let g = gram_of(&points);
        let eig = sorted_eigenvalues(&g);
        let min = eig[0];
        if best.as_ref().is_none_or(|b| min < b.min_eigenvalue) {
            best = Some(GramWitness {
                gram: (0..size)
                    .map(|a| (0..size).map(|b| g[(a, b)]).collect())
                    .collect(),
                points,
                eigenvalues: eig,
                min_eigenvalue: min,
                stream,
                draw,
            });
        }
    }
    best
}

/// Most negative Gram eigenvalue over `budget` seeded point sets of size 2–4.
/// The budget is split over `streams` independent ChaCha streams, so the result
/// does not depend on how many worker threads evaluate them.
pub fn gram_search(seed: u64, budget: u64, streams: u64, radius: f64) -> Option<GramWitness> {
    let streams = streams.max(1);
    let per = budget / streams;
    let extra = budget % streams;
    let results: Vec<Option<GramWitness>> = (0..streams)
        .into_par_iter()
        .map(|s| search_stream(seed, s, per + u64::from(s < extra), radius))
        .collect();
    results.into_iter().flatten().fold(None, |acc, w| match acc {
        Some(a) if a.min_eigenvalue <= w.min_eigenvalue => Some(a),
        _ => Some(w),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidiscExampleOptions {
    /// Caps of the basis-sum oracle.
    pub kernel_caps: Vec<usize>,
    pub seed: u64,
    pub search_budget: u64,
    pub search_streams: u64,
    pub search_radius: f64,
    /// A witness needs an eigenvalue below `−gram_threshold`.
    pub gram_threshold: f64,
    /// Grid for the rank comparison `φH² ⊊ S ⊊ H²`.
    pub rank_caps: Vec<usize>,
    /// Grid for the Beurling checks on `S`.
    pub module_caps: Vec<usize>,
    pub torus_samples: usize,
}

impl Default for BidiscExampleOptions {
    fn default() -> Self {
        Self {
            kernel_caps: vec![20, 20],
            seed: 0,
            search_budget: 20_000,
            search_streams: 16,
            search_radius: 0.9,
            gram_threshold: 1e-6,
            rank_caps: vec![4, 4],
            module_caps: vec![6, 6],
            torus_samples: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BidiscExampleReport {
    /// Residuals: `kernel_identity`, `kernel_at_zero_w`, `phi_at_origin`,
    /// `phi_torus`, `strict_inclusion` (0 when strict), `phi_in_s`,
    /// `gram_witness` (0 when found), and the Beurling residuals
    /// `constants_beurling`, `m_condition2`, `m_condition3` whose verdicts are
    /// expected to fail.
    pub checks: CriterionReport,
    pub witness: Option<GramWitness>,
    pub inconclusive: bool,
    pub ranks: RankComparison,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankComparison {
    pub phi_module: usize,
    pub vanishing: usize,
    pub full: usize,
    /// `dist(z₁, φH²)`: a vector of `S` outside `φH²`.
    pub gap: f64,
}

/// Runs every computation around `φ` and `S = {f(0,0) = 0}`.
pub fn bidisc_example_suite(
    options: &BidiscExampleOptions,
    pairs: &[KernelPoint],
    config: &CheckConfig,
) -> Result<BidiscExampleReport> {
    for p in pairs {
        KernelPoint::new(p.z.clone(), p.w.clone())?;
        if p.z.len() != 2 {
            return Err(Error::DimensionMismatch("kernel pairs live on the bidisc".into()));
        }
    }
    let mut checks = CriterionReport::new(config.tol);

    let kgrid = TruncationGrid::new(options.kernel_caps.clone(), 1)?;
    let deviation = pairs
        .iter()
        .map(|p| (kernel_closed_form(p) - kernel_basis_sum(p, &kgrid)).norm())
        .fold(0.0, f64::max);
    checks.record("kernel_identity", deviation);
    let zero_w = pairs
        .iter()
        .map(|p| kernel_closed_form(&KernelPoint { z: p.z.clone(), w: vec![C64::new(0.0, 0.0); 2] }).norm())
        .fold(0.0, f64::max);
    checks.record("kernel_at_zero_w", zero_w);

    let phi = AnalyticSymbol::bidisc_phi()?;
    let origin = phi.eval(&[C64::new(0.0, 0.0), C64::new(0.0, 0.0)])?[(0, 0)];
    checks.record("phi_at_origin", origin.norm());

    let rgrid = TruncationGrid::new(options.rank_caps.clone(), 1)?;
    let phi_margins = Margins::for_symbol(&phi, None);
    let inner = innerness_check(&phi, &rgrid, options.torus_samples, &phi_margins, config.tol)?;
    checks.record("phi_torus", inner.torus_deviation);
    checks.diagnostic("phi_isometry_defect", inner.isometry_defect);

    let s_phi = submodule_projection(&phi, &rgrid, &phi_margins, config)?;
    let s = SubspaceData::vanishing_at_origin(rgrid.clone(), phi_margins.clone())?;
    let z1 = crate::linalg::selector(
        rgrid.dim(),
        &[rgrid
            .index_of(&crate::grid::MultiIndex::unit(2, 0), 0)
            .expect("z1 in grid")],
    );
    let ranks = RankComparison {
        phi_module: s_phi.rank(),
        vanishing: s.rank(),
        full: rgrid.dim(),
        gap: s_phi.distance(&z1),
    };
    let strict = ranks.phi_module < ranks.vanishing && ranks.vanishing < ranks.full && ranks.gap > config.tol;
    checks.record("strict_inclusion", if strict { 0.0 } else { 1.0 });
    checks.record("phi_in_s", s.distance(s_phi.basis()));

    let mgrid = TruncationGrid::new(options.module_caps.clone(), 1)?;
    let s_mod = SubspaceData::vanishing_at_origin(mgrid.clone(), phi_margins.clone())?;
    let q = quotient_data(&s_mod, config)?;
    checks.record("constants_beurling", beurling_criterion(&q, config.tol).residual("beurling").unwrap_or(0.0));
    let s_phi_mod = submodule_projection(&phi, &mgrid, &phi_margins, config)?;
    let m = orthogonal_difference(&s_mod, &s_phi_mod)?;
    let cond = beurling_submodule_check(&m, &phi, &phi_margins, config)?;
    checks.record("m_condition2", cond.residual("condition2").unwrap_or(f64::NAN));
    checks.record("m_condition3", cond.residual("condition3").unwrap_or(f64::NAN));
    checks.diagnostic("m_rank", m.rank() as f64);

    let best = gram_search(
        options.seed,
        options.search_budget,
        options.search_streams,
        options.search_radius,
    );
    checks.diagnostic(
        "gram_min_eigenvalue",
        best.as_ref().map_or(0.0, |w| w.min_eigenvalue),
    );
    let witness = best.filter(|w| w.min_eigenvalue < -options.gram_threshold);
    checks.record("gram_witness", if witness.is_some() { 0.0 } else { 1.0 });
    Ok(BidiscExampleReport {
        checks,
        inconclusive: witness.is_none(),
        witness,
        ranks,
    })
}
