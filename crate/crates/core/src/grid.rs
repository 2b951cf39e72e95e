//! Multi-indices and the truncated monomial basis of `H²_E(𝔻ⁿ)`.
//!
//! A [`TruncationGrid`] keeps the monomials `z^k` with `k ≤ d` componentwise,
//! tensored with `E = ℂ^m`. Basis vectors are ordered graded-lexicographically
//! (total degree first, then larger leading exponents first) with the channel
//! index varying fastest, so `(k, c)` sits at `position(k)·m + c`.

use std::cmp::Reverse;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Exponent vector `k = (k₁,…,kₙ) ∈ ℤ₊ⁿ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        Self(entries)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    /// `e_i`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0; n];
        v[i] = 1;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn get(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn total_degree(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&k| k == 0)
    }

    /// Componentwise sum.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.len(), other.len());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Componentwise difference, `None` if any entry would go negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    /// `k ≤ caps` componentwise.
    pub fn within(&self, caps: &[usize]) -> bool {
        self.0.len() == caps.len() && self.0.iter().zip(caps).all(|(k, d)| k <= d)
    }

    /// `k̂_i`: the same index with slot `i` zeroed.
    pub fn hat(&self, i: usize) -> MultiIndex {
        let mut v = self.0.clone();
        v[i] = 0;
        MultiIndex(v)
    }

    pub fn max_entry(&self) -> usize {
        self.0.iter().cloned().max().unwrap_or(0)
    }

    /// `z^k` at a point.
    pub fn monomial_at(&self, z: &[C64]) -> C64 {
        self.0
            .iter()
            .zip(z)
            .fold(C64::new(1.0, 0.0), |acc, (&k, &zi)| acc * zi.powu(k as u32))
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl From<&[usize]> for MultiIndex {
    fn from(v: &[usize]) -> Self {
        Self(v.to_vec())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug)]
struct GridData {
    caps: Vec<usize>,
    coeff_dim: usize,
    monomials: Vec<MultiIndex>,
    /// mixed-radix code of a monomial -> its position in `monomials`
    position: Vec<usize>,
    strides: Vec<usize>,
}

/// Finite monomial basis `{z^k ⊗ ε_c : k ≤ caps, 0 ≤ c < coeff_dim}`.
#[derive(Clone, Debug)]
pub struct TruncationGrid {
    inner: Arc<GridData>,
}

impl PartialEq for TruncationGrid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.caps == other.inner.caps && self.inner.coeff_dim == other.inner.coeff_dim
    }
}

impl TruncationGrid {
    pub fn new(caps: Vec<usize>, coeff_dim: usize) -> Result<Self> {
        if caps.is_empty() {
            return Err(Error::InvalidGrid("at least one variable is required".into()));
        }
        if coeff_dim == 0 {
            return Err(Error::InvalidGrid("coefficient dimension must be positive".into()));
        }
        let mut strides = Vec::with_capacity(caps.len());
        let mut total = 1usize;
        for &d in &caps {
            strides.push(total);
            total = total
                .checked_mul(d + 1)
                .ok_or_else(|| Error::InvalidGrid("grid too large".into()))?;
        }
        let mut monomials = Vec::with_capacity(total);
        for code in 0..total {
            let mut rem = code;
            let k: Vec<usize> = caps
                .iter()
                .map(|&d| {
                    let e = rem % (d + 1);
                    rem /= d + 1;
                    e
                })
                .collect();
            monomials.push(MultiIndex(k));
        }
        monomials.sort_by_key(|k| (k.total_degree(), Reverse(k.0.clone())));
        let mut position = vec![0; total];
        for (pos, k) in monomials.iter().enumerate() {
            let code: usize = k.0.iter().zip(&strides).map(|(e, s)| e * s).sum();
            position[code] = pos;
        }
        Ok(Self {
            inner: Arc::new(GridData {
                caps,
                coeff_dim,
                monomials,
                position,
                strides,
            }),
        })
    }

    /// Scalar grid with the same cap in every variable.
    pub fn uniform(nvars: usize, cap: usize) -> Result<Self> {
        Self::new(vec![cap; nvars], 1)
    }

    pub fn nvars(&self) -> usize {
        self.inner.caps.len()
    }

    pub fn caps(&self) -> &[usize] {
        &self.inner.caps
    }

    pub fn coeff_dim(&self) -> usize {
        self.inner.coeff_dim
    }

    pub fn num_monomials(&self) -> usize {
        self.inner.monomials.len()
    }

    /// Basis size `m·∏(dᵢ+1)`.
    pub fn dim(&self) -> usize {
        self.num_monomials() * self.coeff_dim()
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.inner.monomials
    }

    pub fn monomial_position(&self, k: &MultiIndex) -> Option<usize> {
        if !k.within(&self.inner.caps) {
            return None;
        }
        let code: usize = k.0.iter().zip(&self.inner.strides).map(|(e, s)| e * s).sum();
        Some(self.inner.position[code])
    }

    /// Basis index of `z^k ⊗ ε_channel`.
    pub fn index_of(&self, k: &MultiIndex, channel: usize) -> Option<usize> {
        if channel >= self.coeff_dim() {
            return None;
        }
        self.monomial_position(k).map(|p| p * self.coeff_dim() + channel)
    }

    /// Inverse of [`index_of`](Self::index_of).
    pub fn entry(&self, index: usize) -> (&MultiIndex, usize) {
        let m = self.coeff_dim();
        (&self.inner.monomials[index / m], index % m)
    }

    pub fn with_coeff_dim(&self, coeff_dim: usize) -> Result<Self> {
        if coeff_dim == self.coeff_dim() {
            return Ok(self.clone());
        }
        Self::new(self.caps().to_vec(), coeff_dim)
    }

    /// Same channels, caps increased by `headroom` in every variable.
    pub fn enlarged(&self, headroom: usize) -> Result<Self> {
        Self::new(self.caps().iter().map(|d| d + headroom).collect(), self.coeff_dim())
    }

    /// Caps reduced by `margin`, or an error when a margin exceeds its cap.
    pub fn reduced_caps(&self, margin: &[usize]) -> Result<Vec<usize>> {
        if margin.len() != self.nvars() {
            return Err(Error::DimensionMismatch(format!(
                "margin has {} entries, grid has {} variables",
                margin.len(),
                self.nvars()
            )));
        }
        self.caps()
            .iter()
            .zip(margin)
            .map(|(&d, &m)| {
                d.checked_sub(m).ok_or_else(|| {
                    Error::Truncation(format!("margin {m} exceeds degree cap {d}"))
                })
            })
            .collect()
    }

    /// Basis indices (all channels) of monomials with `k ≤ window`.
    pub fn window_indices(&self, window: &[usize]) -> Vec<usize> {
        let m = self.coeff_dim();
        (0..self.dim())
            .filter(|&i| self.inner.monomials[i / m].within(window))
            .collect()
    }

    /// For every basis index of `self`, the index of the same basis vector in `larger`.
    pub fn embedding_into(&self, larger: &TruncationGrid) -> Result<Vec<usize>> {
        if larger.coeff_dim() != self.coeff_dim() || larger.nvars() != self.nvars() {
            return Err(Error::DimensionMismatch("grids are not nested".into()));
        }
        (0..self.dim())
            .map(|i| {
                let (k, c) = self.entry(i);
                larger
                    .index_of(k, c)
                    .ok_or_else(|| Error::DimensionMismatch("grids are not nested".into()))
            })
            .collect()
    }

    /// For each basis index, the index of its image under `M_{z_var}`, or `None`
    /// when the shifted monomial leaves the grid.
    pub fn shift_targets(&self, var: usize) -> Vec<Option<usize>> {
        let unit = MultiIndex::unit(self.nvars(), var);
        (0..self.dim())
            .map(|i| {
                let (k, c) = self.entry(i);
                self.index_of(&k.add(&unit), c)
            })
            .collect()
    }
}

/// Ordered `(multi-index, channel)` list of the grid basis.
pub fn enumerate_basis(grid: &TruncationGrid) -> Vec<(MultiIndex, usize)> {
    (0..grid.dim())
        .map(|i| {
            let (k, c) = grid.entry(i);
            (k.clone(), c)
        })
        .collect()
}

/// Element of the truncated Hardy space, stored as Taylor coefficients.
#[derive(Clone, Debug)]
pub struct HardyVector {
    grid: TruncationGrid,
    coeffs: DVector<C64>,
}

impl HardyVector {
    pub fn new(grid: TruncationGrid, coeffs: DVector<C64>) -> Result<Self> {
        if coeffs.len() != grid.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a grid of dimension {}",
                coeffs.len(),
                grid.dim()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: TruncationGrid) -> Self {
        let n = grid.dim();
        Self {
            grid,
            coeffs: DVector::zeros(n),
        }
    }

    /// `z^k ⊗ ε_channel`.
    pub fn monomial(grid: TruncationGrid, k: &MultiIndex, channel: usize) -> Result<Self> {
        let idx = grid
            .index_of(k, channel)
            .ok_or_else(|| Error::InvalidMultiIndex(format!("{k} is outside the grid")))?;
        let mut v = Self::zeros(grid);
        v.coeffs[idx] = C64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn grid(&self) -> &TruncationGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &DVector<C64> {
        &self.coeffs
    }

    pub fn coefficient(&self, k: &MultiIndex, channel: usize) -> Option<C64> {
        self.grid.index_of(k, channel).map(|i| self.coeffs[i])
    }

    pub fn inner(&self, other: &HardyVector) -> C64 {
        other.coeffs.dotc(&self.coeffs)
    }

    pub fn norm_squared(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// `f(z) ∈ ℂ^m`.
    pub fn eval(&self, z: &[C64]) -> Vec<C64> {
        let m = self.grid.coeff_dim();
        let mut out = vec![C64::new(0.0, 0.0); m];
        for (pos, k) in self.grid.monomials().iter().enumerate() {
            let zk = k.monomial_at(z);
            for (c, o) in out.iter_mut().enumerate() {
                *o += self.coeffs[pos * m + c] * zk;
            }
        }
        out
    }
}
