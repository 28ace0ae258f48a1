//! Nadaraya-Watson regression with graph-Laplacian responses.
//!
//! The Euclidean estimator is the kernel-weighted average of the observed
//! Laplacians, which stays inside the Laplacian cone. The power estimator
//! averages tangent coordinates of `F_α(Lᵢ)` and maps the average back with
//! `P_L ∘ G_α ∘ π`.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplacian::{frobenius_distance, GraphLaplacian};
use crate::projection::{pipeline_to_laplacian_with, ProjectionOptions};
use crate::spectral::{power_map, Embedded, PowerConfig};
use crate::tangent::{to_tangent, TangentVector};

pub const DEFAULT_TRUNCATION_MULTIPLE: f64 = 10.0;
/// Bandwidth multipliers (of the covariate standard deviation) tried when no grid is given.
pub const DEFAULT_CV_MULTIPLIERS: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];

/// Truncated Gaussian kernel: bandwidth `h`, support radius `truncation_multiple·h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub h: f64,
    pub truncation_multiple: f64,
}

impl KernelConfig {
    pub fn new(h: f64) -> Result<Self> {
        Self::with_truncation(h, DEFAULT_TRUNCATION_MULTIPLE)
    }

    pub fn with_truncation(h: f64, truncation_multiple: f64) -> Result<Self> {
        let cfg = Self {
            h,
            truncation_multiple,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {}",
                self.h
            )));
        }
        if !(self.truncation_multiple > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "truncation multiple must be positive, got {}",
                self.truncation_multiple
            )));
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        self.truncation_multiple * self.h
    }
}

/// `K_h(u)` evaluated at a distance `r = ‖u‖`.
pub fn kernel_at_distance(r: f64, cfg: &KernelConfig) -> f64 {
    if r > cfg.radius() {
        return 0.0;
    }
    let z = r / cfg.h;
    (-0.5 * z * z).exp() / (cfg.h * (2.0 * PI).sqrt())
}

pub fn kernel_eval(u: &[f64], cfg: &KernelConfig) -> f64 {
    let r = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    kernel_at_distance(r, cfg)
}

fn covariate_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Normalized kernel weights; `skip` excludes one observation (weight 0).
fn weights_excluding(
    x: &[f64],
    covariates: &[Vec<f64>],
    cfg: &KernelConfig,
    skip: Option<usize>,
) -> Result<Vec<f64>> {
    let mut w: Vec<f64> = covariates
        .iter()
        .enumerate()
        .map(|(i, xi)| {
            if Some(i) == skip {
                0.0
            } else {
                kernel_at_distance(covariate_distance(x, xi), cfg)
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::OutsideSupport { query: x.to_vec() });
    }
    for v in w.iter_mut() {
        *v /= total;
    }
    Ok(w)
}

/// `W_hi(x) = K_h(x − xᵢ) / Σ_j K_h(x − x_j)`.
pub fn nw_weights(x: &[f64], covariates: &[Vec<f64>], cfg: &KernelConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if let Some(c) = covariates.iter().find(|c| c.len() != x.len()) {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: c.len(),
        });
    }
    weights_excluding(x, covariates, cfg, None)
}

/// Paired covariates and Laplacian responses, kept in a canonical order
/// (covariates ascending, ties broken by response entries and then labels),
/// so estimates do not depend on how the input was ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDataset {
    covariates: Vec<Vec<f64>>,
    responses: Vec<GraphLaplacian>,
    labels: Vec<String>,
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

impl NetworkDataset {
    /// Labels default to the 1-based input position.
    pub fn new(covariates: Vec<Vec<f64>>, responses: Vec<GraphLaplacian>) -> Result<Self> {
        let labels = (1..=covariates.len()).map(|i| i.to_string()).collect();
        Self::with_labels(covariates, responses, labels)
    }

    pub fn with_labels(
        covariates: Vec<Vec<f64>>,
        responses: Vec<GraphLaplacian>,
        labels: Vec<String>,
    ) -> Result<Self> {
        let n = covariates.len();
        if n == 0 {
            return Err(Error::InsufficientData(
                "dataset needs at least one observation".into(),
            ));
        }
        if responses.len() != n || labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if responses.len() != n {
                    responses.len()
                } else {
                    labels.len()
                },
            });
        }
        let p = covariates[0].len();
        let m = responses[0].node_count();
        for (x, l) in covariates.iter().zip(&responses) {
            if x.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: x.len(),
                });
            }
            if l.node_count() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: l.node_count(),
                });
            }
            if x.iter().chain(l.matrix().iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            lexicographic(&covariates[a], &covariates[b])
                .then_with(|| {
                    lexicographic(
                        responses[a].matrix().as_slice(),
                        responses[b].matrix().as_slice(),
                    )
                })
                .then_with(|| labels[a].cmp(&labels[b]))
        });
        Ok(Self {
            covariates: order.iter().map(|&i| covariates[i].clone()).collect(),
            responses: order.iter().map(|&i| responses[i].clone()).collect(),
            labels: order.iter().map(|&i| labels[i].clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.covariates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covariates.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.responses[0].node_count()
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariates[0].len()
    }

    pub fn covariates(&self) -> &[Vec<f64>] {
        &self.covariates
    }

    pub fn responses(&self) -> &[GraphLaplacian] {
        &self.responses
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// The dataset with observation `i` removed.
    pub fn without(&self, i: usize) -> Result<Self> {
        let kept: Vec<usize> = (0..self.len()).filter(|&k| k != i).collect();
        Self::with_labels(
            kept.iter().map(|&k| self.covariates[k].clone()).collect(),
            kept.iter().map(|&k| self.responses[k].clone()).collect(),
            kept.iter().map(|&k| self.labels[k].clone()).collect(),
        )
    }

    /// Per-dimension sample standard deviations (`n-1` denominator; 0 when `n = 1`).
    pub fn covariate_sd(&self) -> Vec<f64> {
        let n = self.len();
        let p = self.covariate_dim();
        (0..p)
            .map(|d| {
                if n < 2 {
                    return 0.0;
                }
                let mean = self.covariates.iter().map(|x| x[d]).sum::<f64>() / n as f64;
                let ss: f64 = self.covariates.iter().map(|x| (x[d] - mean).powi(2)).sum();
                (ss / (n - 1) as f64).sqrt()
            })
            .collect()
    }

    /// Z-scores every covariate dimension; returns the transform applied.
    pub fn standardized(&self) -> (Self, Standardization) {
        let n = self.len() as f64;
        let p = self.covariate_dim();
        let mean: Vec<f64> = (0..p)
            .map(|d| self.covariates.iter().map(|x| x[d]).sum::<f64>() / n)
            .collect();
        let sd: Vec<f64> = self
            .covariate_sd()
            .into_iter()
            .map(|s| if s > 0.0 { s } else { 1.0 })
            .collect();
        let t = Standardization { mean, sd };
        let covariates = self.covariates.iter().map(|x| t.apply(x)).collect();
        (
            Self {
                covariates,
                responses: self.responses.clone(),
                labels: self.labels.clone(),
            },
            t,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// `Σ W_hi(x)·Lᵢ`.
pub fn nw_estimate_euclidean(
    x: &[f64],
    data: &NetworkDataset,
    cfg: &KernelConfig,
) -> Result<GraphLaplacian> {
    let w = nw_weights(x, data.covariates(), cfg)?;
    let refs: Vec<&GraphLaplacian> = data.responses().iter().collect();
    GraphLaplacian::combine(&w, &refs)
}

/// The power-Euclidean estimator with cached tangent coordinates.
#[derive(Debug, Clone)]
pub struct PowerNw<'a> {
    data: &'a NetworkDataset,
    power: PowerConfig,
    tangents: Vec<TangentVector>,
    projection: ProjectionOptions,
}

impl<'a> PowerNw<'a> {
    pub fn new(data: &'a NetworkDataset, power: PowerConfig) -> Result<Self> {
        power.validate()?;
        let tangents = data
            .responses()
            .par_iter()
            .map(|l| to_tangent(l, &power))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            data,
            power,
            tangents,
            projection: ProjectionOptions::default(),
        })
    }

    pub fn with_projection(mut self, projection: ProjectionOptions) -> Self {
        self.projection = projection;
        self
    }

    pub fn tangents(&self) -> &[TangentVector] {
        &self.tangents
    }

    /// The tangent-space average `Σ W_hi(x)·vᵢ`.
    pub fn tangent_average(
        &self,
        x: &[f64],
        cfg: &KernelConfig,
        skip: Option<usize>,
    ) -> Result<TangentVector> {
        cfg.validate()?;
        if x.len() != self.data.covariate_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.data.covariate_dim(),
                found: x.len(),
            });
        }
        let w = weights_excluding(x, self.data.covariates(), cfg, skip)?;
        let d = self.tangents[0].dim();
        let mut coords = vec![0.0; d];
        for (wi, v) in w.iter().zip(&self.tangents) {
            if *wi == 0.0 {
                continue;
            }
            for (c, vi) in coords.iter_mut().zip(&v.coords) {
                *c += wi * vi;
            }
        }
        Ok(TangentVector {
            coords,
            m: self.data.node_count(),
            alpha: self.power.alpha,
        })
    }

    pub fn estimate(&self, x: &[f64], cfg: &KernelConfig) -> Result<GraphLaplacian> {
        self.estimate_excluding(x, cfg, None)
    }

    pub fn estimate_excluding(
        &self,
        x: &[f64],
        cfg: &KernelConfig,
        skip: Option<usize>,
    ) -> Result<GraphLaplacian> {
        let avg = self.tangent_average(x, cfg, skip)?;
        pipeline_to_laplacian_with(&avg, &self.power, &self.projection).map(|r| r.laplacian)
    }
}

/// `P_L ∘ G_α ∘ π(Σ W_hi(x)·π⁻¹(F_α(Lᵢ)))`.
pub fn nw_estimate_power(
    x: &[f64],
    data: &NetworkDataset,
    kernel: &KernelConfig,
    power: &PowerConfig,
) -> Result<GraphLaplacian> {
    PowerNw::new(data, *power)?.estimate(x, kernel)
}

#[derive(Debug, Clone)]
pub struct CurveFit {
    pub query_points: Vec<Vec<f64>>,
    pub fitted: Vec<GraphLaplacian>,
    pub alpha: f64,
    pub h: f64,
}

pub fn fit_curve(
    grid: &[Vec<f64>],
    data: &NetworkDataset,
    kernel: &KernelConfig,
    power: &PowerConfig,
) -> Result<CurveFit> {
    let model = PowerNw::new(data, *power)?;
    fit_curve_with(&model, grid, kernel)
}

pub fn fit_curve_with(
    model: &PowerNw<'_>,
    grid: &[Vec<f64>],
    kernel: &KernelConfig,
) -> Result<CurveFit> {
    let fitted = grid
        .par_iter()
        .map(|x| model.estimate(x, kernel))
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveFit {
        query_points: grid.to_vec(),
        fitted,
        alpha: model.power.alpha,
        h: kernel.h,
    })
}

/// Cross-validation criterion for every candidate bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_h: f64,
    /// `(h, Σᵢ d_α(Lᵢ, L̂₋ᵢ(xᵢ; h))²)` in candidate order; `+∞` where a fold is undefined.
    pub table: Vec<(f64, f64)>,
}

/// Relative gap below which two criterion values count as tied.
const CV_TIE_TOL: f64 = 1e-12;

/// Leave-one-out cross-validation over `candidates`, measured in `d_α`.
pub fn loocv_bandwidth(
    data: &NetworkDataset,
    candidates: &[f64],
    truncation_multiple: f64,
    power: &PowerConfig,
) -> Result<CvResult> {
    if data.len() < 2 {
        return Err(Error::InsufficientData(
            "cross-validation needs n >= 2".into(),
        ));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("empty bandwidth grid".into()));
    }
    let model = PowerNw::new(data, *power)?;
    let embedded = Embedded::new(data.responses(), power)?;

    let mut table = Vec::with_capacity(candidates.len());
    for &h in candidates {
        let kernel = KernelConfig::with_truncation(h, truncation_multiple)?;
        let folds = (0..data.len())
            .into_par_iter()
            .map(
                |i| match model.estimate_excluding(&data.covariates()[i], &kernel, Some(i)) {
                    Ok(fit) => {
                        let f = power_map(&fit, power)?;
                        Ok(Some(embedded.distance_to(i, f.as_matrix())?))
                    }
                    Err(Error::OutsideSupport { .. }) => Ok(None),
                    Err(e) => Err(e),
                },
            )
            .collect::<Result<Vec<_>>>()?;
        let criterion = if folds.iter().any(Option::is_none) {
            f64::INFINITY
        } else {
            folds.iter().map(|d| d.unwrap().powi(2)).sum()
        };
        table.push((h, criterion));
    }

    let scale: f64 = embedded.matrices.iter().map(|f| f.norm_squared()).sum();
    let min = table.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::NoFeasibleBandwidth);
    }
    let tie = CV_TIE_TOL * min.max(scale);
    let best_h = table
        .iter()
        .filter(|(_, c)| *c - min <= tie)
        .map(|t| t.0)
        .fold(f64::INFINITY, f64::min);
    Ok(CvResult { best_h, table })
}

/// `{0.5, 1, 2, 4, 8}` times the root-mean-square covariate standard deviation.
pub fn default_cv_grid(data: &NetworkDataset) -> Vec<f64> {
    let sd = data.covariate_sd();
    let rms = (sd.iter().map(|s| s * s).sum::<f64>() / sd.len() as f64).sqrt();
    let scale = if rms > 0.0 { rms } else { 1.0 };
    DEFAULT_CV_MULTIPLIERS.iter().map(|k| k * scale).collect()
}

/// Reverse regression: predicts a covariate from a Laplacian,
/// `t̂(L) = Σ K_h(d(L, Lᵢ))·tᵢ / Σ K_h(d(L, Lᵢ))`.
#[derive(Debug, Clone)]
pub struct ReverseNw<'a> {
    data: &'a NetworkDataset,
    power: PowerConfig,
    embedded: Embedded,
}

impl<'a> ReverseNw<'a> {
    pub fn new(data: &'a NetworkDataset, power: PowerConfig) -> Result<Self> {
        let embedded = Embedded::new(data.responses(), &power)?;
        Ok(Self {
            data,
            power,
            embedded,
        })
    }

    pub fn distances(&self, l: &GraphLaplacian) -> Result<Vec<f64>> {
        if l.node_count() != self.data.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.data.node_count(),
                found: l.node_count(),
            });
        }
        let f = power_map(l, &self.power)?;
        (0..self.embedded.len())
            .map(|i| frobenius_distance(&self.embedded.matrices[i], f.as_matrix()))
            .collect()
    }

    pub fn predict(&self, l: &GraphLaplacian, kernel: &KernelConfig) -> Result<Vec<f64>> {
        kernel.validate()?;
        let k: Vec<f64> = self
            .distances(l)?
            .into_iter()
            .map(|d| kernel_at_distance(d, kernel))
            .collect();
        let total: f64 = k.iter().sum();
        if !(total > 0.0) {
            return Err(Error::OutsideSupport { query: vec![] });
        }
        // offsets from the first target keep constant targets exact
        let targets = self.data.covariates();
        let base = &targets[0];
        Ok((0..base.len())
            .map(|d| {
                let shift: f64 = k
                    .iter()
                    .zip(targets)
                    .map(|(ki, t)| (ki / total) * (t[d] - base[d]))
                    .sum();
                base[d] + shift
            })
            .collect())
    }
}

pub fn reverse_nw(
    l: &GraphLaplacian,
    data: &NetworkDataset,
    kernel: &KernelConfig,
    power: &PowerConfig,
) -> Result<Vec<f64>> {
    ReverseNw::new(data, *power)?.predict(l, kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplacian::{laplacian_from_network, validate_laplacian, WeightedNetwork};
    use nalgebra::DMatrix;

    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

    fn lap(m: usize, edges: &[(usize, usize, f64)]) -> GraphLaplacian {
        let labels = (0..m).map(|i| i.to_string()).collect();
        laplacian_from_network(&WeightedNetwork::from_edges(labels, edges).unwrap())
    }

    fn two_point() -> NetworkDataset {
        NetworkDataset::new(
            vec![vec![0.0], vec![1.0]],
            vec![lap(3, &[(0, 1, 1.0)]), lap(3, &[(1, 2, 2.0), (0, 2, 0.5)])],
        )
        .unwrap()
    }

    #[test]
    fn kernel_values() {
        let cfg = KernelConfig::with_truncation(1.0, 100.0).unwrap();
        assert!((kernel_eval(&[0.0], &cfg) - INV_SQRT_2PI).abs() < 1e-15);
        assert!((kernel_eval(&[1.0, 0.0], &cfg) - 0.241_970_724_519_143_37).abs() < 1e-15);
        let tight = KernelConfig::with_truncation(1.0, 2.0).unwrap();
        assert_eq!(kernel_eval(&[2.0001], &tight), 0.0);
        assert!(kernel_eval(&[2.0], &tight) > 0.0);
        assert!(KernelConfig::new(0.0).is_err());
    }

    #[test]
    fn weight_examples() {
        let cfg = KernelConfig::new(1.0).unwrap();
        assert_eq!(nw_weights(&[3.0], &[vec![0.0]], &cfg).unwrap(), vec![1.0]);
        let w = nw_weights(&[0.5], &[vec![0.0], vec![1.0]], &cfg).unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
        let w = nw_weights(&[0.0], &[vec![0.0], vec![1.0]], &cfg).unwrap();
        // 0.398942 / (0.398942 + 0.241971)
        assert!((w[0] - 0.622_459_331_201_854_6).abs() < 1e-12);
        assert!((w[1] - 0.377_540_668_798_145_4).abs() < 1e-12);
        assert!(matches!(
            nw_weights(&[100.0], &[vec![0.0]], &cfg),
            Err(Error::OutsideSupport { .. })
        ));
    }

    #[test]
    fn euclidean_estimates() {
        let data = two_point();
        let cfg = KernelConfig::new(1.0).unwrap();
        let est = nw_estimate_euclidean(&[0.0], &data, &cfg).unwrap();
        let (w0, w1) = (0.622_459_331_201_854_6, 0.377_540_668_798_145_4);
        let expected = data.responses()[0].matrix() * w0 + data.responses()[1].matrix() * w1;
        assert!((est.matrix() - expected).abs().max() < 1e-12);
        assert!(validate_laplacian(est.matrix(), 1e-12).is_valid());

        let single = NetworkDataset::new(vec![vec![2.0]], vec![lap(3, &[(0, 1, 1.0)])]).unwrap();
        assert_eq!(
            nw_estimate_euclidean(&[2.5], &single, &cfg).unwrap(),
            single.responses()[0]
        );
    }

    #[test]
    fn power_estimates() {
        let l = lap(4, &[(0, 1, 1.0), (2, 3, 0.4), (1, 3, 0.2)]);
        let cfg = KernelConfig::new(0.7).unwrap();
        for alpha in [0.5, 1.0, 2.0] {
            let p = PowerConfig::new(alpha).unwrap();
            let single = NetworkDataset::new(vec![vec![0.0]], vec![l.clone()]).unwrap();
            let est = nw_estimate_power(&[0.3], &single, &cfg, &p).unwrap();
            assert!((est.matrix() - l.matrix()).abs().max() < 1e-7);
            let twin = NetworkDataset::new(vec![vec![0.0], vec![1.0]], vec![l.clone(), l.clone()])
                .unwrap();
            let est = nw_estimate_power(&[0.2], &twin, &cfg, &p).unwrap();
            assert!((est.matrix() - l.matrix()).abs().max() < 1e-7);
        }
        let data = two_point();
        let e = nw_estimate_euclidean(&[0.4], &data, &cfg).unwrap();
        let p = nw_estimate_power(&[0.4], &data, &cfg, &PowerConfig::euclidean()).unwrap();
        assert!((e.matrix() - p.matrix()).abs().max() < 1e-8);
    }

    #[test]
    fn locality_under_truncation() {
        let data = two_point();
        let cfg = KernelConfig::with_truncation(0.1, 3.0).unwrap();
        let est = nw_estimate_power(&[0.05], &data, &cfg, &PowerConfig::square_root()).unwrap();
        assert!((est.matrix() - data.responses()[0].matrix()).abs().max() < 1e-7);
    }

    #[test]
    fn curve_examples() {
        let data = two_point();
        let big = KernelConfig::new(1e4).unwrap();
        let fit = fit_curve(data.covariates(), &data, &big, &PowerConfig::euclidean()).unwrap();
        let mean = (data.responses()[0].matrix() + data.responses()[1].matrix()) * 0.5;
        for f in &fit.fitted {
            assert!((f.matrix() - &mean).abs().max() < 1e-8);
        }
        let fit = fit_curve(&[vec![0.5]], &data, &big, &PowerConfig::euclidean()).unwrap();
        assert_eq!(fit.fitted.len(), 1);
        let narrow = KernelConfig::with_truncation(0.01, 1.0).unwrap();
        assert!(matches!(
            fit_curve(&[vec![0.5]], &data, &narrow, &PowerConfig::euclidean()),
            Err(Error::OutsideSupport { query }) if query == vec![0.5]
        ));
    }

    #[test]
    fn canonical_order_makes_estimates_permutation_invariant() {
        let ls = [
            lap(3, &[(0, 1, 1.0)]),
            lap(3, &[(1, 2, 2.0)]),
            lap(3, &[(0, 2, 0.3), (0, 1, 0.1)]),
        ];
        let xs = [vec![0.2], vec![-1.0], vec![0.7]];
        let a = NetworkDataset::new(xs.to_vec(), ls.to_vec()).unwrap();
        let b = NetworkDataset::new(
            vec![xs[2].clone(), xs[0].clone(), xs[1].clone()],
            vec![ls[2].clone(), ls[0].clone(), ls[1].clone()],
        )
        .unwrap();
        assert_eq!(a.covariates(), b.covariates());
        let cfg = KernelConfig::new(0.6).unwrap();
        let p = PowerConfig::square_root();
        assert_eq!(
            nw_estimate_power(&[0.1], &a, &cfg, &p).unwrap(),
            nw_estimate_power(&[0.1], &b, &cfg, &p).unwrap()
        );
    }

    #[test]
    fn cv_identical_responses_ties_to_smallest() {
        let l = lap(3, &[(0, 1, 1.0), (1, 2, 0.5)]);
        let data =
            NetworkDataset::new((0..5).map(|i| vec![i as f64]).collect(), vec![l; 5]).unwrap();
        let cv =
            loocv_bandwidth(&data, &[4.0, 0.5, 2.0], 10.0, &PowerConfig::square_root()).unwrap();
        assert_eq!(cv.best_h, 0.5);
        for (_, c) in &cv.table {
            assert!(*c < 1e-20);
        }
    }

    #[test]
    fn cv_infeasible_bandwidths() {
        let data = NetworkDataset::new(
            vec![vec![0.0], vec![10.0]],
            vec![lap(2, &[(0, 1, 1.0)]), lap(2, &[(0, 1, 2.0)])],
        )
        .unwrap();
        let cv = loocv_bandwidth(&data, &[0.1, 5.0], 10.0, &PowerConfig::euclidean()).unwrap();
        assert!(cv.table[0].1.is_infinite());
        assert_eq!(cv.best_h, 5.0);
        assert!((cv.table[1].1 - 2.0 * 4.0).abs() < 1e-10);
        assert!(matches!(
            loocv_bandwidth(&data, &[0.1], 10.0, &PowerConfig::euclidean()),
            Err(Error::NoFeasibleBandwidth)
        ));
        assert!(loocv_bandwidth(&data, &[], 10.0, &PowerConfig::euclidean()).is_err());
    }

    #[test]
    fn reverse_examples() {
        let ls = vec![
            lap(3, &[(0, 1, 1.0)]),
            lap(3, &[(1, 2, 1.0)]),
            lap(3, &[(0, 2, 3.0)]),
        ];
        let same = NetworkDataset::new(vec![vec![1.7]; 3], ls.clone()).unwrap();
        let cfg = KernelConfig::new(5.0).unwrap();
        let t = reverse_nw(&ls[0], &same, &cfg, &PowerConfig::euclidean()).unwrap();
        assert_eq!(t, vec![1.7]);

        let data = NetworkDataset::new(vec![vec![1.0], vec![2.0], vec![3.0]], ls.clone()).unwrap();
        let tiny = KernelConfig::new(0.01).unwrap();
        let t = reverse_nw(&ls[2], &data, &tiny, &PowerConfig::square_root()).unwrap();
        assert!((t[0] - 3.0).abs() < 1e-12);

        // equidistant from the first two observations
        let mid = GraphLaplacian::from_matrix(DMatrix::zeros(3, 3), 1e-12).unwrap();
        let two = NetworkDataset::new(vec![vec![1.0], vec![2.0]], ls[..2].to_vec()).unwrap();
        let t = reverse_nw(&mid, &two, &cfg, &PowerConfig::euclidean()).unwrap();
        assert!((t[0] - 1.5).abs() < 1e-12);

        let far = KernelConfig::with_truncation(0.01, 1.0).unwrap();
        assert!(reverse_nw(&mid, &two, &far, &PowerConfig::euclidean()).is_err());
    }

    #[test]
    fn default_grid_scales_with_sd() {
        let data = NetworkDataset::new(
            vec![vec![0.0], vec![2.0]],
            vec![lap(2, &[]), lap(2, &[(0, 1, 1.0)])],
        )
        .unwrap();
        let sd = 2f64.sqrt();
        let grid = default_cv_grid(&data);
        assert_eq!(grid.len(), 5);
        assert!((grid[0] - 0.5 * sd).abs() < 1e-12);
        assert!((grid[4] - 8.0 * sd).abs() < 1e-12);
        let (z, t) = data.standardized();
        assert!((z.covariates()[0][0] + 1.0 / sd).abs() < 1e-12);
        assert_eq!(t.mean, vec![1.0]);
    }
}
