//! Seeded test corpora: inner symbols, non-Beurling submodules and commuting
//! nilpotent Brehmer pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dilation::{brehmer_defect, ContractionTuple};
use crate::error::{Error, Result};
use crate::grid::TruncationGrid;
use crate::linalg::identity;
use crate::subspace::{Margins, SubspaceData};
use crate::symbol::AnalyticSymbol;
use crate::{CMatrix, CheckConfig, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolFamily {
    Monomial,
    Blaschke,
    ConstantUnitary,
}

/// Inner symbol together with the grid it is checked on.
#[derive(Clone, Debug)]
pub struct CorpusSymbol {
    pub id: String,
    pub family: SymbolFamily,
    pub symbol: AnalyticSymbol,
    pub caps: Vec<usize>,
}

impl CorpusSymbol {
    pub fn grid(&self) -> Result<TruncationGrid> {
        TruncationGrid::new(self.caps.clone(), self.symbol.rows())
    }

    pub fn margins(&self) -> Margins {
        Margins::for_symbol(&self.symbol, None)
    }
}

/// Largest Blaschke zero modulus and cap range per number of variables.
fn blaschke_shape(nvars: usize) -> (f64, usize, usize) {
    if nvars == 2 {
        (0.3, 5, 6)
    } else {
        (0.2, 3, 4)
    }
}

fn random_point(rng: &mut ChaCha8Rng, max_modulus: f64) -> C64 {
    let r = rng.random_range(0.05..=max_modulus);
    let t = rng.random_range(0.0..std::f64::consts::TAU);
    C64::from_polar(r, t)
}

/// Haar-ish unitary from the QR factor of a random matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, m: usize) -> CMatrix {
    let a = CMatrix::from_fn(m, m, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let qr = a.qr();
    let q = qr.q();
    let r = qr.r();
    // fix the column phases
    let mut out = q.clone();
    for j in 0..m {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..m {
            out[(i, j)] = q[(i, j)] * phase;
        }
    }
    out
}

/// Random `m × m` unitary from a seed.
pub fn seeded_unitary(seed: u64, m: usize) -> CMatrix {
    random_unitary(&mut ChaCha8Rng::seed_from_u64(seed), m)
}

fn monomial_entry(rng: &mut ChaCha8Rng, nvars: usize) -> Result<(AnalyticSymbol, Vec<usize>)> {
    let top = if nvars == 2 { 2 } else { 1 };
    let mut k: Vec<usize> = (0..nvars).map(|_| rng.random_range(0..=top)).collect();
    if k.iter().all(|&e| e == 0) {
        let i = rng.random_range(0..nvars);
        k[i] = 1;
    }
    let caps = if nvars == 2 {
        k.iter().map(|&e| (e + 3).max(rng.random_range(4..=6))).collect()
    } else {
        k.iter().map(|&e| (e + 2).max(rng.random_range(3..=4))).collect()
    };
    Ok((AnalyticSymbol::monomial(&k)?, caps))
}

fn blaschke_entry(rng: &mut ChaCha8Rng, nvars: usize) -> Result<(AnalyticSymbol, Vec<usize>)> {
    let (radius, lo, hi) = blaschke_shape(nvars);
    let factors = rng.random_range(1..=nvars);
    let mut vars: Vec<usize> = (0..nvars).collect();
    for i in 0..nvars {
        let j = rng.random_range(i..nvars);
        vars.swap(i, j);
    }
    let mut vars = vars[..factors].to_vec();
    vars.sort_unstable();
    let mut symbol: Option<AnalyticSymbol> = None;
    for &v in &vars {
        let b = AnalyticSymbol::blaschke(nvars, v, random_point(rng, radius))?;
        symbol = Some(match symbol {
            None => b,
            Some(s) => s.mul(&b)?,
        });
    }
    let cap = rng.random_range(lo..=hi);
    Ok((symbol.expect("at least one factor"), vec![cap; nvars]))
}

fn unitary_entry(rng: &mut ChaCha8Rng, nvars: usize) -> Result<(AnalyticSymbol, Vec<usize>)> {
    let m = rng.random_range(1..=2);
    let u = random_unitary(rng, m);
    let cap = if nvars == 2 { rng.random_range(2..=4) } else { rng.random_range(2..=3) };
    Ok((AnalyticSymbol::constant(nvars, u)?, vec![cap; nvars]))
}

/// `count` inner symbols cycling through monomials, Blaschke products in
/// separate variables and constant unitaries, in two and three variables.
pub fn inner_corpus(seed: u64, count: usize) -> Result<Vec<CorpusSymbol>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plan = [
        (SymbolFamily::Monomial, 2),
        (SymbolFamily::Blaschke, 2),
        (SymbolFamily::ConstantUnitary, 2),
        (SymbolFamily::Monomial, 3),
        (SymbolFamily::Blaschke, 3),
        (SymbolFamily::ConstantUnitary, 3),
    ];
    (0..count)
        .map(|i| {
            let (family, nvars) = plan[i % plan.len()];
            let (symbol, caps) = match family {
                SymbolFamily::Monomial => monomial_entry(&mut rng, nvars)?,
                SymbolFamily::Blaschke => blaschke_entry(&mut rng, nvars)?,
                SymbolFamily::ConstantUnitary => unitary_entry(&mut rng, nvars)?,
            };
            let tag = match family {
                SymbolFamily::Monomial => "monomial",
                SymbolFamily::Blaschke => "blaschke",
                SymbolFamily::ConstantUnitary => "unitary",
            };
            Ok(CorpusSymbol {
                id: format!("{tag}-n{nvars}-{i:03}"),
                family,
                symbol,
                caps,
            })
        })
        .collect()
}

/// Submodule given by a basis rather than an inner symbol.
#[derive(Clone, Debug)]
pub struct CorpusSubspace {
    pub id: String,
    pub subspace: SubspaceData,
}

/// `{f : f(0) = 0}` in two and three variables and `z₁²H² + z₂H²` on the bidisc.
pub fn non_beurling_corpus() -> Result<Vec<CorpusSubspace>> {
    let mut out = Vec::new();
    for (nvars, cap) in [(2, 5), (3, 3)] {
        let grid = TruncationGrid::uniform(nvars, cap)?;
        out.push(CorpusSubspace {
            id: format!("vanishing-at-origin-n{nvars}"),
            subspace: SubspaceData::vanishing_at_origin(grid, Margins::for_basis(nvars, 1))?,
        });
    }
    let grid = TruncationGrid::uniform(2, 5)?;
    out.push(CorpusSubspace {
        id: "mixed-powers-n2".into(),
        subspace: SubspaceData::monomial_span(grid, Margins::for_basis(2, 2), |k| {
            k.get(0) >= 2 || k.get(1) >= 1
        })?,
    });
    Ok(out)
}

/// Nilpotent Jordan block with ones on the superdiagonal.
pub fn jordan_block(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| {
        if j == i + 1 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `Σ_{k≥1} c_k N^k`, so the result is nilpotent and commutes with `N`.
pub fn polynomial_in(n: &CMatrix, coeffs: &[C64]) -> CMatrix {
    let dim = n.nrows();
    let mut power = identity(dim);
    let mut out = CMatrix::zeros(dim, dim);
    for c in coeffs {
        power = &power * n;
        out += &power * *c;
    }
    out
}

#[derive(Clone, Debug)]
pub struct NilpotentPair {
    pub id: String,
    pub ops: Vec<CMatrix>,
    /// Factor `0.9^k` applied to reach a contractive Brehmer pair.
    pub scale: f64,
    pub draws: usize,
}

const MAX_HALVINGS: usize = 200;

/// Commuting pairs `(p(N), q(N))` built from the `dim × dim` Jordan block, each
/// scaled by `0.9^k` for the least `k` making it a Brehmer pair. Draws that
/// never get there are rejected.
pub fn nilpotent_brehmer_pairs(
    seed: u64,
    count: usize,
    dim: usize,
    config: &CheckConfig,
) -> Result<Vec<NilpotentPair>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = jordan_block(dim);
    let degree = dim.saturating_sub(1).max(1);
    let mut out = Vec::with_capacity(count);
    let mut draws = 0;
    while out.len() < count {
        draws += 1;
        if draws > 100 * count.max(1) {
            return Err(Error::Truncation(
                "nilpotent pair generation exhausted its draws".into(),
            ));
        }
        let mut coeffs = || -> Vec<C64> {
            (0..degree)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect()
        };
        let (pc, qc) = (coeffs(), coeffs());
        let p = polynomial_in(&n, &pc);
        let q = polynomial_in(&n, &qc);
        let mut scale = 1.0;
        for _ in 0..MAX_HALVINGS {
            let ops = vec![&p * C64::new(scale, 0.0), &q * C64::new(scale, 0.0)];
            if let Ok(t) = ContractionTuple::new(ops.clone(), config.tol) {
                if brehmer_defect(&t, config).is_psd {
                    out.push(NilpotentPair {
                        id: format!("nilpotent-pair-{:02}", out.len()),
                        ops,
                        scale,
                        draws,
                    });
                    break;
                }
            }
            scale *= 0.9;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_norm;

    #[test]
    fn corpus_is_seeded_and_inner() {
        let a = inner_corpus(7, 12).unwrap();
        let b = inner_corpus(7, 12).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.caps, y.caps);
            assert_eq!(x.symbol.coefficients(), y.symbol.coefficients());
            assert!(crate::symbol::torus_deviation(&x.symbol, 16).unwrap() < 1e-12, "{}", x.id);
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(&mut rng, 3);
        assert!(spectral_norm(&(u.adjoint() * &u - identity(3))) < 1e-12);
    }

    #[test]
    fn nilpotent_pairs_commute_and_are_brehmer() {
        let config = CheckConfig::default();
        for pair in nilpotent_brehmer_pairs(0, 5, 4, &config).unwrap() {
            let t = ContractionTuple::new(pair.ops.clone(), 1e-12).unwrap();
            assert!(t.commutator_residual() < 1e-14);
            assert!(brehmer_defect(&t, &config).is_psd);
            let p4 = pair.ops[0].pow(4);
            assert!(spectral_norm(&p4) == 0.0);
        }
    }
}
