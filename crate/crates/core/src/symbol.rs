//! Operator-valued analytic symbols `Θ(z) = Σ Θ_k z^k`.
//!
//! A symbol is either a polynomial, a rational function `N(z)/q(z)` with a
//! matrix numerator and scalar denominator (stored with its Taylor table), or a
//! bare truncated series (e.g. the quotient produced by inner division).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{MultiIndex, TruncationGrid};
use crate::linalg::{identity, select, spectral_norm};
use crate::operator::mult_operator;
use crate::subspace::Margins;
use crate::{CMatrix, C64};

#[derive(Clone, Debug)]
pub enum SymbolKind {
    Polynomial,
    /// Taylor table of `numerator / denominator`; the closed form is kept for
    /// evaluation on the torus and for re-expansion to larger grids.
    Rational(Arc<RationalForm>),
    /// Truncated series with no closed form; valid only up to its support.
    Series,
}

#[derive(Clone, Debug)]
pub struct RationalForm {
    pub numerator: AnalyticSymbol,
    /// Scalar (1×1) polynomial with nonzero constant term.
    pub denominator: AnalyticSymbol,
}

#[derive(Clone, Debug)]
pub struct AnalyticSymbol {
    nvars: usize,
    rows: usize,
    cols: usize,
    coeffs: BTreeMap<MultiIndex, CMatrix>,
    support: Vec<usize>,
    kind: SymbolKind,
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

impl AnalyticSymbol {
    /// Polynomial symbol from `(exponent, coefficient)` terms; repeated exponents add up.
    pub fn polynomial<I>(nvars: usize, rows: usize, cols: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, CMatrix)>,
    {
        if nvars == 0 || rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(
                "symbols need at least one variable and nonempty coefficients".into(),
            ));
        }
        let mut coeffs: BTreeMap<MultiIndex, CMatrix> = BTreeMap::new();
        for (k, m) in terms {
            if k.len() != nvars {
                return Err(Error::InvalidMultiIndex(format!(
                    "{k} has {} entries, expected {nvars}",
                    k.len()
                )));
            }
            if m.shape() != (rows, cols) {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient at {k} is {}x{}, expected {rows}x{cols}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            *coeffs.entry(k).or_insert_with(|| CMatrix::zeros(rows, cols)) += m;
        }
        let support = nonzero_support(nvars, &coeffs);
        Ok(Self {
            nvars,
            rows,
            cols,
            coeffs,
            support,
            kind: SymbolKind::Polynomial,
        })
    }

    pub fn scalar_polynomial(nvars: usize, terms: &[(Vec<usize>, C64)]) -> Result<Self> {
        Self::polynomial(
            nvars,
            1,
            1,
            terms
                .iter()
                .map(|(k, v)| (MultiIndex::new(k.clone()), CMatrix::from_element(1, 1, *v))),
        )
    }

    /// Scalar monomial `z^k`.
    pub fn monomial(k: &[usize]) -> Result<Self> {
        Self::scalar_polynomial(k.len(), &[(k.to_vec(), c(1.0))])
    }

    /// `z^k ⊗ I_m`.
    pub fn monomial_identity(k: &[usize], m: usize) -> Result<Self> {
        Self::polynomial(k.len(), m, m, [(MultiIndex::new(k.to_vec()), identity(m))])
    }

    pub fn constant(nvars: usize, value: CMatrix) -> Result<Self> {
        let (r, cl) = value.shape();
        Self::polynomial(nvars, r, cl, [(MultiIndex::zeros(nvars), value)])
    }

    /// Truncated series valid for exponents `k ≤ caps`.
    pub fn series(
        nvars: usize,
        rows: usize,
        cols: usize,
        caps: Vec<usize>,
        coeffs: BTreeMap<MultiIndex, CMatrix>,
    ) -> Result<Self> {
        if caps.len() != nvars {
            return Err(Error::DimensionMismatch("series caps do not match nvars".into()));
        }
        if coeffs.keys().any(|k| !k.within(&caps)) {
            return Err(Error::InvalidMultiIndex("series coefficient outside its caps".into()));
        }
        if coeffs.values().any(|m| m.shape() != (rows, cols)) {
            return Err(Error::DimensionMismatch("series coefficient shape".into()));
        }
        Ok(Self {
            nvars,
            rows,
            cols,
            coeffs,
            support: caps,
            kind: SymbolKind::Series,
        })
    }

    /// `numerator / denominator`, expanded up to the numerator's degree; the
    /// table is re-expanded on demand for larger grids.
    pub fn rational(numerator: AnalyticSymbol, denominator: AnalyticSymbol) -> Result<Self> {
        let caps = numerator.support.clone();
        taylor_table(&numerator, &denominator, &caps)
    }

    /// One-variable Blaschke factor `(z_var − a)/(1 − ā z_var)` in `nvars` variables.
    pub fn blaschke(nvars: usize, var: usize, a: C64) -> Result<Self> {
        if a.norm() >= 1.0 {
            return Err(Error::InvalidGrid(format!(
                "Blaschke zero {a} is not in the open disc"
            )));
        }
        if var >= nvars {
            return Err(Error::InvalidMultiIndex(format!("variable {var} out of range")));
        }
        let e = MultiIndex::unit(nvars, var).entries().to_vec();
        let num = Self::scalar_polynomial(nvars, &[(vec![0; nvars], -a), (e.clone(), c(1.0))])?;
        let den = Self::scalar_polynomial(nvars, &[(vec![0; nvars], c(1.0)), (e, -a.conj())])?;
        Self::rational(num, den)
    }

    /// `(2z₁z₂ − z₁ − z₂)/(2 − z₁ − z₂)`, inner on the bidisc and vanishing at the origin.
    pub fn bidisc_phi() -> Result<Self> {
        let num = Self::scalar_polynomial(
            2,
            &[(vec![1, 1], c(2.0)), (vec![1, 0], c(-1.0)), (vec![0, 1], c(-1.0))],
        )?;
        let den = Self::scalar_polynomial(
            2,
            &[(vec![0, 0], c(2.0)), (vec![1, 0], c(-1.0)), (vec![0, 1], c(-1.0))],
        )?;
        Self::rational(num, den)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Dimension of the codomain coefficient space `E`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Dimension of the domain coefficient space `E_*`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kind(&self) -> &SymbolKind {
        &self.kind
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self.kind, SymbolKind::Polynomial)
    }

    pub fn rational_form(&self) -> Option<&RationalForm> {
        match &self.kind {
            SymbolKind::Rational(f) => Some(f),
            _ => None,
        }
    }

    /// Per-variable degree bound of the stored coefficients.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn coefficients(&self) -> &BTreeMap<MultiIndex, CMatrix> {
        &self.coeffs
    }

    pub fn coefficient(&self, k: &MultiIndex) -> CMatrix {
        self.coeffs
            .get(k)
            .cloned()
            .unwrap_or_else(|| CMatrix::zeros(self.rows, self.cols))
    }

    /// Largest coefficient norm over `k ≠ 0`.
    pub fn nonconstant_size(&self) -> f64 {
        self.coeffs
            .iter()
            .filter(|(k, _)| !k.is_zero())
            .map(|(_, m)| spectral_norm(m))
            .fold(0.0, f64::max)
    }

    /// The same symbol with a Taylor table covering `caps`.
    pub fn expanded(&self, caps: &[usize]) -> Result<Self> {
        if caps.len() != self.nvars {
            return Err(Error::DimensionMismatch(format!(
                "grid has {} variables, symbol has {}",
                caps.len(),
                self.nvars
            )));
        }
        match &self.kind {
            SymbolKind::Polynomial => Ok(self.clone()),
            SymbolKind::Rational(form) => {
                if self.support.as_slice() == caps {
                    Ok(self.clone())
                } else {
                    taylor_table(&form.numerator, &form.denominator, caps)
                }
            }
            SymbolKind::Series => {
                if caps.iter().zip(&self.support).all(|(d, s)| d <= s) {
                    Ok(self.clone())
                } else {
                    Err(Error::Truncation(format!(
                        "series known up to {:?}, grid needs {:?}",
                        self.support, caps
                    )))
                }
            }
        }
    }

    /// `Θ(z)`; rational symbols use their closed form.
    pub fn eval(&self, z: &[C64]) -> Result<CMatrix> {
        if z.len() != self.nvars {
            return Err(Error::DimensionMismatch("point dimension".into()));
        }
        let value = match &self.kind {
            SymbolKind::Rational(form) => {
                let den = form.denominator.eval_terms(z)[(0, 0)];
                if den.norm() < f64::MIN_POSITIVE {
                    return Err(Error::Evaluation {
                        point: format!("{z:?}"),
                    });
                }
                form.numerator.eval_terms(z).unscale(1.0) / den
            }
            _ => self.eval_terms(z),
        };
        if value.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Evaluation {
                point: format!("{z:?}"),
            });
        }
        Ok(value)
    }

    fn eval_terms(&self, z: &[C64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows, self.cols);
        for (k, m) in &self.coeffs {
            out += m * k.monomial_at(z);
        }
        out
    }

    /// Pointwise product `Θ₁Θ₂`. Polynomials multiply exactly, rational
    /// functions combine numerators and denominators, series truncate to the
    /// common support.
    pub fn mul(&self, other: &AnalyticSymbol) -> Result<Self> {
        if self.nvars != other.nvars {
            return Err(Error::DimensionMismatch("symbols in different variables".into()));
        }
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        match (&self.kind, &other.kind) {
            (SymbolKind::Polynomial, SymbolKind::Polynomial) => {
                let mut terms = Vec::new();
                for (a, ma) in &self.coeffs {
                    for (b, mb) in &other.coeffs {
                        terms.push((a.add(b), ma * mb));
                    }
                }
                Self::polynomial(self.nvars, self.rows, other.cols, terms)
            }
            (SymbolKind::Series, _) | (_, SymbolKind::Series) => {
                let caps: Vec<usize> = self
                    .support
                    .iter()
                    .zip(&other.support)
                    .map(|(a, b)| *a.min(b))
                    .collect();
                let lhs = self.expanded(&caps)?;
                let rhs = other.expanded(&caps)?;
                let mut coeffs: BTreeMap<MultiIndex, CMatrix> = BTreeMap::new();
                for (a, ma) in &lhs.coeffs {
                    for (b, mb) in &rhs.coeffs {
                        let k = a.add(b);
                        if k.within(&caps) {
                            *coeffs
                                .entry(k)
                                .or_insert_with(|| CMatrix::zeros(self.rows, other.cols)) +=
                                ma * mb;
                        }
                    }
                }
                Self::series(self.nvars, self.rows, other.cols, caps, coeffs)
            }
            _ => {
                let (n1, d1) = self.as_fraction()?;
                let (n2, d2) = other.as_fraction()?;
                let caps: Vec<usize> = self
                    .support
                    .iter()
                    .zip(&other.support)
                    .map(|(a, b)| *a.max(b))
                    .collect();
                taylor_table(&n1.mul(&n2)?, &d1.mul(&d2)?, &caps)
            }
        }
    }

    fn as_fraction(&self) -> Result<(AnalyticSymbol, AnalyticSymbol)> {
        match &self.kind {
            SymbolKind::Polynomial => Ok((
                self.clone(),
                Self::scalar_polynomial(self.nvars, &[(vec![0; self.nvars], c(1.0))])?,
            )),
            SymbolKind::Rational(f) => Ok((f.numerator.clone(), f.denominator.clone())),
            SymbolKind::Series => Err(Error::Truncation("series have no closed form".into())),
        }
    }
}

fn nonzero_support(nvars: usize, coeffs: &BTreeMap<MultiIndex, CMatrix>) -> Vec<usize> {
    let mut support = vec![0; nvars];
    for (k, m) in coeffs {
        if m.iter().any(|v| *v != C64::new(0.0, 0.0)) {
            for (s, &e) in support.iter_mut().zip(k.entries()) {
                *s = (*s).max(e);
            }
        }
    }
    support
}

fn taylor_table(
    numerator: &AnalyticSymbol,
    denominator: &AnalyticSymbol,
    caps: &[usize],
) -> Result<AnalyticSymbol> {
    if !numerator.is_polynomial() || !denominator.is_polynomial() {
        return Err(Error::DimensionMismatch(
            "rational symbols need polynomial numerator and denominator".into(),
        ));
    }
    if denominator.rows != 1 || denominator.cols != 1 {
        return Err(Error::DimensionMismatch("denominator must be scalar".into()));
    }
    let n = numerator.nvars;
    if denominator.nvars != n || caps.len() != n {
        return Err(Error::DimensionMismatch("numerator/denominator/grid variables".into()));
    }
    let den0 = denominator.coefficient(&MultiIndex::zeros(n))[(0, 0)];
    if den0.norm() == 0.0 {
        return Err(Error::SingularDenominator);
    }
    let grid = TruncationGrid::new(caps.to_vec(), 1)?;
    let den_terms: Vec<(MultiIndex, C64)> = denominator
        .coeffs
        .iter()
        .filter(|(k, m)| !k.is_zero() && m[(0, 0)] != C64::new(0.0, 0.0))
        .map(|(k, m)| (k.clone(), m[(0, 0)]))
        .collect();
    let (rows, cols) = (numerator.rows, numerator.cols);
    // graded order guarantees every k − j with j ≠ 0 is already known
    let mut table: BTreeMap<MultiIndex, CMatrix> = BTreeMap::new();
    for k in grid.monomials() {
        let mut acc = numerator.coefficient(k);
        for (j, dj) in &den_terms {
            if let Some(prev) = k.checked_sub(j).and_then(|r| table.get(&r)) {
                acc -= prev * *dj;
            }
        }
        table.insert(k.clone(), acc / den0);
    }
    Ok(AnalyticSymbol {
        nvars: n,
        rows,
        cols,
        coeffs: table,
        support: caps.to_vec(),
        kind: SymbolKind::Rational(Arc::new(RationalForm {
            numerator: numerator.clone(),
            denominator: denominator.clone(),
        })),
    })
}

/// Taylor coefficients of `numerator / denominator` on the grid caps, from the
/// recursion `denominator · q = numerator` matched in graded order.
pub fn rational_taylor(
    numerator: &AnalyticSymbol,
    denominator: &AnalyticSymbol,
    grid: &TruncationGrid,
) -> Result<AnalyticSymbol> {
    taylor_table(numerator, denominator, grid.caps())
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InnernessReport {
    /// `max_{z ∈ 𝕋ⁿ samples} ‖Θ(z)*Θ(z) − I‖`.
    pub torus_deviation: f64,
    /// `‖M_Θ*M_Θ − I‖` on the exact input window.
    pub isometry_defect: f64,
    pub tolerance: f64,
    pub torus_pass: bool,
    pub isometry_pass: bool,
    /// Polynomial symbols truncate exactly on the input window; for rational
    /// symbols the isometry defect measures the Taylor tail lost at the caps.
    pub exact_truncation: bool,
}

impl InnernessReport {
    /// Torus certificate, plus the isometry check when the truncation is exact.
    pub fn is_inner(&self) -> bool {
        self.torus_pass && (self.isometry_pass || !self.exact_truncation)
    }
}

/// Points `(e^{iπ(2j₁+1)/s}, …)`: a midpoint grid on the torus. The half-step
/// offset keeps samples off `z = (1,…,1)`, where boundary singularities of
/// rational inner functions sit.
pub fn torus_points(nvars: usize, samples: usize) -> Vec<Vec<C64>> {
    let axis: Vec<C64> = (0..samples)
        .map(|j| C64::from_polar(1.0, PI * (2 * j + 1) as f64 / samples as f64))
        .collect();
    let total = samples.pow(nvars as u32);
    (0..total)
        .map(|mut code| {
            (0..nvars)
                .map(|_| {
                    let z = axis[code % samples];
                    code /= samples;
                    z
                })
                .collect()
        })
        .collect()
}

pub fn torus_deviation(symbol: &AnalyticSymbol, samples: usize) -> Result<f64> {
    let eye = identity(symbol.cols());
    let mut worst: f64 = 0.0;
    for z in torus_points(symbol.nvars(), samples) {
        let v = symbol.eval(&z)?;
        worst = worst.max(spectral_norm(&(v.adjoint() * &v - &eye)));
    }
    Ok(worst)
}

/// Innerness certificate: deviation from isometric values on a torus sample
/// and the isometry defect of `M_Θ` on the input window.
pub fn innerness_check(
    symbol: &AnalyticSymbol,
    grid: &TruncationGrid,
    torus_samples: usize,
    margins: &Margins,
    tol: f64,
) -> Result<InnernessReport> {
    if torus_samples == 0 {
        return Err(Error::InvalidGrid("torus_samples must be at least 1".into()));
    }
    let torus = torus_deviation(symbol, torus_samples)?;
    let m = mult_operator(symbol, grid)?;
    let domain = m.domain();
    let window = domain.window_indices(&domain.reduced_caps(&margins.input)?);
    let all: Vec<usize> = (0..m.codomain().dim()).collect();
    let cols = select(m.matrix(), &all, &window);
    let gram = cols.adjoint() * &cols - identity(window.len());
    let defect = spectral_norm(&gram);
    Ok(InnernessReport {
        torus_deviation: torus,
        isometry_defect: defect,
        tolerance: tol,
        torus_pass: torus <= tol,
        isometry_pass: defect <= tol,
        exact_truncation: symbol.is_polynomial(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(v: &[usize]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    fn scalar(s: &AnalyticSymbol, e: &[usize]) -> C64 {
        s.coefficient(&k(e))[(0, 0)]
    }

    /// Coefficients of (1/2)·Σ_j ((z₁+z₂)/2)^j, expanded with binomials.
    fn geometric_oracle(a: usize, b: usize) -> f64 {
        let s = a + b;
        let mut binom = 1.0;
        for i in 0..a {
            binom = binom * (s - i) as f64 / (i + 1) as f64;
        }
        binom / 2f64.powi(s as i32 + 1)
    }

    #[test]
    fn reciprocal_of_two_minus_sum() {
        let one = AnalyticSymbol::scalar_polynomial(2, &[(vec![0, 0], c(1.0))]).unwrap();
        let den = AnalyticSymbol::scalar_polynomial(
            2,
            &[(vec![0, 0], c(2.0)), (vec![1, 0], c(-1.0)), (vec![0, 1], c(-1.0))],
        )
        .unwrap();
        let grid = TruncationGrid::uniform(2, 4).unwrap();
        let q = rational_taylor(&one, &den, &grid).unwrap();
        assert_eq!(scalar(&q, &[0, 0]), c(0.5));
        assert_eq!(scalar(&q, &[1, 0]), c(0.25));
        assert_eq!(scalar(&q, &[1, 1]), c(0.25));
        for a in 0..=4 {
            for b in 0..=4 {
                assert!((scalar(&q, &[a, b]) - c(geometric_oracle(a, b))).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn unit_denominator_keeps_numerator() {
        let p = AnalyticSymbol::scalar_polynomial(
            2,
            &[(vec![1, 0], C64::new(0.5, -1.0)), (vec![2, 1], c(3.0))],
        )
        .unwrap();
        let one = AnalyticSymbol::scalar_polynomial(2, &[(vec![0, 0], c(1.0))]).unwrap();
        let q = rational_taylor(&p, &one, &TruncationGrid::uniform(2, 3).unwrap()).unwrap();
        for (key, m) in q.coefficients() {
            assert_eq!(m[(0, 0)], p.coefficient(key)[(0, 0)]);
        }
    }

    #[test]
    fn geometric_series_in_one_variable() {
        let one = AnalyticSymbol::scalar_polynomial(2, &[(vec![0, 0], c(1.0))]).unwrap();
        let den =
            AnalyticSymbol::scalar_polynomial(2, &[(vec![0, 0], c(1.0)), (vec![1, 0], c(-1.0))])
                .unwrap();
        let q = rational_taylor(&one, &den, &TruncationGrid::new(vec![5, 2], 1).unwrap()).unwrap();
        for a in 0..=5 {
            for b in 0..=2 {
                let expect = if b == 0 { 1.0 } else { 0.0 };
                assert_eq!(scalar(&q, &[a, b]), c(expect));
            }
        }
    }

    #[test]
    fn vanishing_denominator_is_rejected() {
        let one = AnalyticSymbol::scalar_polynomial(1, &[(vec![0], c(1.0))]).unwrap();
        let z = AnalyticSymbol::monomial(&[1]).unwrap();
        let err = rational_taylor(&one, &z, &TruncationGrid::uniform(1, 3).unwrap()).unwrap_err();
        assert_eq!(err, Error::SingularDenominator);
    }

    #[test]
    fn monomial_and_half_monomial_innerness() {
        let grid = TruncationGrid::uniform(2, 3).unwrap();
        let theta = AnalyticSymbol::monomial(&[1, 1]).unwrap();
        let margins = Margins::for_symbol(&theta, None);
        let r = innerness_check(&theta, &grid, 8, &margins, 1e-10).unwrap();
        assert!(r.torus_deviation < 1e-14);
        assert_eq!(r.isometry_defect, 0.0);
        assert!(r.is_inner());

        let half = AnalyticSymbol::scalar_polynomial(2, &[(vec![1, 0], c(0.5))]).unwrap();
        let r = innerness_check(&half, &grid, 8, &Margins::for_symbol(&half, None), 1e-10)
            .unwrap();
        assert!((r.torus_deviation - 0.75).abs() < 1e-14);
        assert!(!r.is_inner());
    }

    #[test]
    fn phi_is_inner_on_the_torus() {
        let phi = AnalyticSymbol::bidisc_phi().unwrap();
        assert!(torus_deviation(&phi, 64).unwrap() <= 1e-10);
        assert_eq!(phi.eval(&[c(0.0), c(0.0)]).unwrap()[(0, 0)], c(0.0));
    }

    #[test]
    fn blaschke_closed_form_matches_series() {
        let a = C64::new(0.3, -0.2);
        let b = AnalyticSymbol::blaschke(2, 1, a).unwrap().expanded(&[0, 40]).unwrap();
        let z = [c(0.1), C64::new(0.2, 0.4)];
        let closed = b.eval(&z).unwrap()[(0, 0)];
        let mut sum = C64::new(0.0, 0.0);
        for (key, m) in b.coefficients() {
            sum += m[(0, 0)] * key.monomial_at(&z);
        }
        assert!((closed - sum).norm() < 1e-13);
        assert!(torus_deviation(&b, 16).unwrap() < 1e-14);
    }

    #[test]
    fn products_of_blaschke_factors_stay_inner() {
        let b1 = AnalyticSymbol::blaschke(2, 0, c(0.2)).unwrap();
        let b2 = AnalyticSymbol::blaschke(2, 1, C64::new(0.0, -0.25)).unwrap();
        let p = b1.mul(&b2).unwrap();
        assert!(matches!(p.kind(), SymbolKind::Rational(_)));
        assert!(torus_deviation(&p, 16).unwrap() < 1e-14);
    }
}
