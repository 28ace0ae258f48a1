//! Tangent coordinates at the origin: `v = vech(H·F_α(L)·Hᵀ)` with `H` the
//! Helmert sub-matrix and an isometric half-vectorization (off-diagonal
//! entries scaled by √2), so that `‖v1 − v2‖ = d_α(L1, L2)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplacian::{GraphLaplacian, SymmetricMatrix};
use crate::spectral::{reduced_power, PowerConfig};

/// The `(m-1)×m` Helmert sub-matrix. Row `j` (1-based) is
/// `(h_j, …, h_j, −j·h_j, 0, …, 0)` with `h_j = −1/√(j(j+1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct HelmertBasis {
    m: usize,
    coeffs: Vec<f64>,
}

impl HelmertBasis {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter(format!(
                "Helmert sub-matrix needs m >= 2, got {m}"
            )));
        }
        let coeffs = (1..m)
            .map(|j| {
                let j = j as f64;
                -1.0 / (j * (j + 1.0)).sqrt()
            })
            .collect();
        Ok(Self { m, coeffs })
    }

    pub fn node_count(&self) -> usize {
        self.m
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.m - 1, self.m);
        for (r, &c) in self.coeffs.iter().enumerate() {
            for k in 0..=r {
                h[(r, k)] = c;
            }
            h[(r, r + 1)] = -((r + 1) as f64) * c;
        }
        h
    }

    /// `H·x` via prefix sums.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.m);
        let mut out = Vec::with_capacity(self.m - 1);
        let mut prefix = 0.0;
        for (r, &c) in self.coeffs.iter().enumerate() {
            prefix += x[r];
            out.push(c * (prefix - (r + 1) as f64 * x[r + 1]));
        }
        out
    }

    /// `Hᵀ·y` via suffix sums.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.m - 1);
        let mut out = vec![0.0; self.m];
        let mut suffix = 0.0;
        for k in (0..self.m).rev() {
            if k < self.m - 1 {
                suffix += self.coeffs[k] * y[k];
            }
            let mut v = suffix;
            if k >= 1 {
                v -= k as f64 * self.coeffs[k - 1] * y[k - 1];
            }
            out[k] = v;
        }
        out
    }

    /// `H·M·Hᵀ` for an `m×m` matrix.
    pub fn conjugate(&self, mat: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.m;
        assert_eq!(mat.shape(), (m, m));
        // H·M, column by column
        let mut hm = DMatrix::zeros(m - 1, m);
        for c in 0..m {
            let col: Vec<f64> = mat.column(c).iter().copied().collect();
            for (r, v) in self.apply(&col).into_iter().enumerate() {
                hm[(r, c)] = v;
            }
        }
        // (H·M)·Hᵀ, row by row
        let mut out = DMatrix::zeros(m - 1, m - 1);
        for r in 0..m - 1 {
            let row: Vec<f64> = hm.row(r).iter().copied().collect();
            for (c, v) in self.apply(&row).into_iter().enumerate() {
                out[(r, c)] = v;
            }
        }
        out
    }

    /// `Hᵀ·B·H` for an `(m-1)×(m-1)` matrix.
    pub fn expand(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.m;
        assert_eq!(b.shape(), (m - 1, m - 1));
        let mut hb = DMatrix::zeros(m, m - 1);
        for c in 0..m - 1 {
            let col: Vec<f64> = b.column(c).iter().copied().collect();
            for (r, v) in self.apply_transpose(&col).into_iter().enumerate() {
                hb[(r, c)] = v;
            }
        }
        let mut out = DMatrix::zeros(m, m);
        for r in 0..m {
            let row: Vec<f64> = hb.row(r).iter().copied().collect();
            for (c, v) in self.apply_transpose(&row).into_iter().enumerate() {
                out[(r, c)] = v;
            }
        }
        out
    }
}

/// Euclidean tangent coordinates of an embedded Laplacian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub coords: Vec<f64>,
    pub m: usize,
    pub alpha: f64,
}

impl TangentVector {
    /// Infers `m` from `len = m(m-1)/2`.
    pub fn from_coords(coords: Vec<f64>, alpha: f64) -> Result<Self> {
        let m = node_count_for_len(coords.len()).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "tangent length {} is not m(m-1)/2 for any m >= 2",
                coords.len()
            ))
        })?;
        Ok(Self { coords, m, alpha })
    }

    pub fn zeros(m: usize, alpha: f64) -> Self {
        Self {
            coords: vec![0.0; m * (m - 1) / 2],
            m,
            alpha,
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &TangentVector) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn dot(&self, other: &TangentVector) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a * b)
            .sum()
    }
}

pub(crate) fn node_count_for_len(len: usize) -> Option<usize> {
    if len == 0 {
        return None;
    }
    let m = ((1.0 + (1.0 + 8.0 * len as f64).sqrt()) / 2.0).round() as usize;
    (m >= 2 && m * (m - 1) / 2 == len).then_some(m)
}

/// Isometric half-vectorization of a symmetric matrix (row-major upper triangle).
pub(crate) fn vech(b: &DMatrix<f64>) -> Vec<f64> {
    let n = b.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        out.push(b[(i, i)]);
        for j in i + 1..n {
            out.push(std::f64::consts::SQRT_2 * b[(i, j)]);
        }
    }
    out
}

pub(crate) fn unvech(coords: &[f64], n: usize) -> DMatrix<f64> {
    debug_assert_eq!(coords.len(), n * (n + 1) / 2);
    let mut b = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        b[(i, i)] = coords[k];
        k += 1;
        for j in i + 1..n {
            let v = coords[k] / std::f64::consts::SQRT_2;
            b[(i, j)] = v;
            b[(j, i)] = v;
            k += 1;
        }
    }
    b
}

/// `vech(H·F_α(L)·Hᵀ)`.
pub fn to_tangent(l: &GraphLaplacian, cfg: &PowerConfig) -> Result<TangentVector> {
    let m = l.node_count();
    let reduced = reduced_power(l, cfg)?;
    Ok(TangentVector {
        coords: vech(&reduced),
        m,
        alpha: cfg.alpha,
    })
}

/// The reduced matrix `B` with `v = vech(B)`.
pub(crate) fn reduced_from_tangent(v: &TangentVector) -> Result<DMatrix<f64>> {
    if v.m < 2 || v.coords.len() != v.m * (v.m - 1) / 2 {
        return Err(Error::DimensionMismatch {
            expected: v.m * v.m.saturating_sub(1) / 2,
            found: v.coords.len(),
        });
    }
    if v.coords.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(unvech(&v.coords, v.m - 1))
}

/// `Hᵀ·B·H` where `v = vech(B)`; inverts [`to_tangent`] on the image of `F_α`.
pub fn from_tangent(v: &TangentVector) -> Result<SymmetricMatrix> {
    let b = reduced_from_tangent(v)?;
    let helmert = HelmertBasis::new(v.m)?;
    Ok(SymmetricMatrix::symmetrize(helmert.expand(&b)))
}
