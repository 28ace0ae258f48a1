//! Matrix powers through the spectral decomposition, and the power-Euclidean
//! distance `d_α(L1, L2) = ‖L1^α − L2^α‖_F`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplacian::{frobenius_distance, GraphLaplacian, SymmetricMatrix};
use crate::tangent::HelmertBasis;

/// Eigenvalues below `-PSD_TOL · ‖L‖_F` mean the input is not a Laplacian.
const PSD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub alpha: f64,
    /// Eigenvalues below this (and all negative ones) are set to zero before powering.
    #[serde(default)]
    pub eigenvalue_floor: f64,
}

impl PowerConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        let cfg = Self {
            alpha,
            eigenvalue_floor: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn euclidean() -> Self {
        Self {
            alpha: 1.0,
            eigenvalue_floor: 0.0,
        }
    }

    pub fn square_root() -> Self {
        Self {
            alpha: 0.5,
            eigenvalue_floor: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "power alpha must be positive and finite, got {}",
                self.alpha
            )));
        }
        if !(self.eigenvalue_floor >= 0.0) || !self.eigenvalue_floor.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "eigenvalue floor must be a nonnegative finite number, got {}",
                self.eigenvalue_floor
            )));
        }
        Ok(())
    }

    fn clamp(&self, xi: f64, roundoff: f64) -> f64 {
        if xi <= roundoff || xi < self.eigenvalue_floor {
            0.0
        } else {
            xi
        }
    }
}

impl SpectralDecomposition {
    /// Eigenvalues at or below this are indistinguishable from zero.
    fn roundoff(&self) -> f64 {
        let n = self.eigenvalues.len().max(1) as f64;
        let scale = self.eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        8.0 * n * f64::EPSILON * scale
    }

    fn powered(&self, cfg: &PowerConfig, p: f64) -> DMatrix<f64> {
        let cut = self.roundoff();
        self.map_eigenvalues(|xi| cfg.clamp(xi, cut).powf(p))
    }
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self::euclidean()
    }
}

/// `U·diag(ξ)·Uᵀ` with eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.map_eigenvalues(|x| x)
    }

    /// `U·diag(f(ξ))·Uᵀ`, symmetrized exactly.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[k]);
        }
        let out = &scaled * self.eigenvectors.transpose();
        SymmetricMatrix::symmetrize(out).into_matrix()
    }
}

pub fn spectral_decompose(mat: &SymmetricMatrix) -> Result<SpectralDecomposition> {
    decompose(mat.as_matrix())
}

pub(crate) fn decompose(mat: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    if mat.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = mat.nrows();
    if n == 0 {
        return Ok(SpectralDecomposition {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::new(mat.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let eigenvectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&k| eig.eigenvectors.column(k).into_owned())
            .collect::<Vec<_>>(),
    );
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `H·L^α·Hᵀ`, the power of `L` restricted to the complement of `𝟙`.
///
/// Because `L𝟙 = 0`, `L = Hᵀ(H L Hᵀ)H` and powers commute with this
/// conjugation, so working in the reduced space keeps `L^α 𝟙 = 0` exact.
pub(crate) fn reduced_power(l: &GraphLaplacian, cfg: &PowerConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    let m = l.node_count();
    let helmert = HelmertBasis::new(m)?;
    let reduced = helmert.conjugate(l.matrix());
    if cfg.alpha == 1.0 && cfg.eigenvalue_floor == 0.0 {
        return Ok(reduced);
    }
    let dec = decompose(&reduced)?;
    let scale = l.matrix().norm();
    if let Some(&min) = dec.eigenvalues.as_slice().last() {
        if min < -PSD_TOL * scale {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min,
            });
        }
    }
    Ok(dec.powered(cfg, cfg.alpha))
}

/// `F_α(L) = U Ξ^α Uᵀ`. Roundoff-negative eigenvalues are clamped to zero.
pub fn power_map(l: &GraphLaplacian, cfg: &PowerConfig) -> Result<SymmetricMatrix> {
    cfg.validate()?;
    if cfg.alpha == 1.0 && cfg.eigenvalue_floor == 0.0 {
        return Ok(SymmetricMatrix::from(l.clone()));
    }
    let m = l.node_count();
    if m < 2 {
        return Ok(SymmetricMatrix::zeros(m));
    }
    let reduced = reduced_power(l, cfg)?;
    let helmert = HelmertBasis::new(m)?;
    Ok(SymmetricMatrix::symmetrize(helmert.expand(&reduced)))
}

/// `G_α(S)`: clamp eigenvalues below the floor to zero, then raise to `1/α`.
pub fn inverse_power_map(s: &SymmetricMatrix, cfg: &PowerConfig) -> Result<SymmetricMatrix> {
    cfg.validate()?;
    let dec = spectral_decompose(s)?;
    Ok(SymmetricMatrix::symmetrize(
        dec.powered(cfg, 1.0 / cfg.alpha),
    ))
}

/// `G_α` applied in the reduced `(m-1)`-dimensional space.
pub(crate) fn reduced_inverse_power(b: &DMatrix<f64>, cfg: &PowerConfig) -> Result<DMatrix<f64>> {
    Ok(decompose(b)?.powered(cfg, 1.0 / cfg.alpha))
}

/// `d_α(L1, L2) = ‖F_α(L1) − F_α(L2)‖_F`.
pub fn power_distance(l1: &GraphLaplacian, l2: &GraphLaplacian, cfg: &PowerConfig) -> Result<f64> {
    if l1.node_count() != l2.node_count() {
        return Err(Error::DimensionMismatch {
            expected: l1.node_count(),
            found: l2.node_count(),
        });
    }
    let a = power_map(l1, cfg)?;
    let b = power_map(l2, cfg)?;
    frobenius_distance(a.as_matrix(), b.as_matrix())
}

/// Precomputed `F_α(Lᵢ)` for repeated distance evaluations.
#[derive(Debug, Clone)]
pub struct Embedded {
    pub(crate) matrices: Vec<DMatrix<f64>>,
}

impl Embedded {
    pub fn new(laplacians: &[GraphLaplacian], cfg: &PowerConfig) -> Result<Self> {
        use rayon::prelude::*;
        let matrices = laplacians
            .par_iter()
            .map(|l| power_map(l, cfg).map(SymmetricMatrix::into_matrix))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { matrices })
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        frobenius_distance(&self.matrices[i], &self.matrices[j]).expect("common dimension")
    }

    pub fn distance_to(&self, i: usize, other: &DMatrix<f64>) -> Result<f64> {
        frobenius_distance(&self.matrices[i], other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplacian::{laplacian_from_network, WeightedNetwork};

    fn path2() -> GraphLaplacian {
        GraphLaplacian::from_matrix(DMatrix::from_row_slice(2, 2, &[1., -1., -1., 1.]), 1e-12)
            .unwrap()
    }

    fn sample(m: usize, seed: u64) -> GraphLaplacian {
        // small deterministic LCG; tests here must not depend on rand
        let mut state = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let labels = (0..m).map(|i| i.to_string()).collect();
        let mut edges = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                let u = next();
                if u > 0.3 {
                    edges.push((i, j, 3.0 * next()));
                }
            }
        }
        laplacian_from_network(&WeightedNetwork::from_edges(labels, &edges).unwrap())
    }

    #[test]
    fn identity_eigenvalues() {
        let dec =
            spectral_decompose(&SymmetricMatrix::new(DMatrix::identity(3, 3)).unwrap()).unwrap();
        assert_eq!(dec.eigenvalues.as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn two_by_two_decomposition() {
        let s = SymmetricMatrix::from(path2());
        let dec = spectral_decompose(&s).unwrap();
        assert!((dec.eigenvalues[0] - 2.0).abs() < 1e-14);
        assert!(dec.eigenvalues[1].abs() < 1e-14);
        let u = dec.eigenvectors.column(0);
        // proportional to (1, -1)
        assert!((u[0] + u[1]).abs() < 1e-14);
        assert!((u[0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn reconstruction_of_random_symmetric() {
        let vals = [
            0.3, -1.2, 0.7, 2.2, -0.4, 1.1, 0.05, -0.9, 0.6, 1.5, -2.0, 0.8, 0.33, -0.1, 0.9,
        ];
        let mut m = DMatrix::zeros(5, 5);
        let mut k = 0;
        for i in 0..5 {
            for j in i..5 {
                m[(i, j)] = vals[k];
                m[(j, i)] = vals[k];
                k += 1;
            }
        }
        let dec = spectral_decompose(&SymmetricMatrix::new(m.clone()).unwrap()).unwrap();
        assert!((dec.reconstruct() - &m).norm() < 1e-9 * m.norm());
        let utu = dec.eigenvectors.transpose() * &dec.eigenvectors;
        assert!((utu - DMatrix::identity(5, 5)).abs().max() < 1e-9);
        assert!(dec.eigenvalues.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn non_finite_rejected() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = f64::NAN;
        assert!(matches!(decompose(&m), Err(Error::NonFinite)));
    }

    #[test]
    fn square_root_of_path() {
        let f = power_map(&path2(), &PowerConfig::square_root()).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expected = DMatrix::from_row_slice(2, 2, &[r, -r, -r, r]);
        assert!((f.as_matrix() - expected).abs().max() < 1e-14);
    }

    #[test]
    fn alpha_one_is_identity_and_alpha_two_is_square() {
        let l = sample(6, 3);
        let f1 = power_map(&l, &PowerConfig::euclidean()).unwrap();
        assert!((f1.as_matrix() - l.matrix()).abs().max() < 1e-10);
        let f2 = power_map(&l, &PowerConfig::new(2.0).unwrap()).unwrap();
        let sq = l.matrix() * l.matrix();
        assert!((f2.as_matrix() - sq).abs().max() < 1e-10);
        // block-diagonal case
        let labels = (0..4).map(|i| i.to_string()).collect();
        let block = laplacian_from_network(
            &WeightedNetwork::from_edges(labels, &[(0, 1, 2.0), (2, 3, 0.5)]).unwrap(),
        );
        let f2 = power_map(&block, &PowerConfig::new(2.0).unwrap()).unwrap();
        assert!(
            (f2.as_matrix() - block.matrix() * block.matrix())
                .abs()
                .max()
                < 1e-12
        );
    }

    #[test]
    fn inverse_power_examples() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[r, -r, -r, r])).unwrap();
        let g = inverse_power_map(&s, &PowerConfig::square_root()).unwrap();
        assert!((g.as_matrix() - path2().matrix()).abs().max() < 1e-14);

        // one negative eigenvalue gets annihilated
        let s = SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        let g = inverse_power_map(&s, &PowerConfig::euclidean()).unwrap();
        let expected = DMatrix::from_element(2, 2, 1.5);
        assert!((g.as_matrix() - expected).abs().max() < 1e-14);
        let dec = spectral_decompose(&g).unwrap();
        assert!(dec.eigenvalues.iter().all(|&x| x >= -1e-14));
    }

    #[test]
    fn round_trips_and_null_vector() {
        for (seed, alpha) in [(1, 0.5), (2, 1.0), (3, 2.0), (4, 0.5)] {
            let l = sample(7, seed);
            let cfg = PowerConfig::new(alpha).unwrap();
            let f = power_map(&l, &cfg).unwrap();
            let ones = DVector::from_element(7, 1.0);
            assert!((f.as_matrix() * &ones).abs().max() < 1e-9);
            let back = inverse_power_map(&f, &cfg).unwrap();
            let err = (back.as_matrix() - l.matrix()).abs().max();
            let tol = 1e-9 * l.matrix().norm().max(1.0).powf(alpha.max(1.0));
            assert!(err < tol, "alpha {alpha} err {err}");
        }
    }

    #[test]
    fn not_psd_is_rejected() {
        let bad = GraphLaplacian::from_matrix_unchecked(DMatrix::from_row_slice(
            2,
            2,
            &[-1.0, 1.0, 1.0, -1.0],
        ));
        assert!(matches!(
            power_map(&bad, &PowerConfig::square_root()),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn distance_examples() {
        let cfg = PowerConfig::square_root();
        let l = sample(5, 9);
        assert_eq!(power_distance(&l, &l, &cfg).unwrap(), 0.0);
        let d = power_distance(&path2(), &GraphLaplacian::zeros(2), &cfg).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-14);
        let l2 = sample(5, 10);
        let d1 = power_distance(&l, &l2, &PowerConfig::euclidean()).unwrap();
        let e = crate::laplacian::euclidean_distance(&l, &l2).unwrap();
        assert!((d1 - e).abs() < 1e-10);
        assert!(power_distance(&l, &sample(4, 1), &cfg).is_err());
    }

    #[test]
    fn invalid_alpha() {
        assert!(PowerConfig::new(0.0).is_err());
        assert!(PowerConfig::new(-1.0).is_err());
        assert!(PowerConfig::new(f64::NAN).is_err());
    }
}
