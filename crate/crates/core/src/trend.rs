//! Descriptive analysis of a dynamic network sequence: consecutive and
//! residual distances, anomaly ranking, PCA in tangent coordinates, and
//! classical MDS under an AR(1) Mahalanobis rescaling of `d_α`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::{CurveFit, NetworkDataset};
use crate::spectral::{decompose, power_map, Embedded, PowerConfig};
use crate::tangent::TangentVector;

/// ρ estimates are clamped into `[RHO_MIN, RHO_MAX]`.
pub const RHO_MIN: f64 = 1e-6;
pub const RHO_MAX: f64 = 1.0 - 1e-6;
const RHO_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSeries {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl DistanceSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `d_α(Lᵢ, Lᵢ₊₁)` in covariate order, labelled `"<label i>-<label i+1>"`.
pub fn consecutive_distances(data: &NetworkDataset, cfg: &PowerConfig) -> Result<DistanceSeries> {
    if data.len() < 2 {
        return Err(Error::InsufficientData(
            "consecutive distances need n >= 2".into(),
        ));
    }
    let emb = Embedded::new(data.responses(), cfg)?;
    let labels = data.labels();
    Ok(DistanceSeries {
        labels: labels
            .windows(2)
            .map(|w| format!("{}-{}", w[0], w[1]))
            .collect(),
        values: (0..data.len() - 1)
            .map(|i| emb.distance(i, i + 1))
            .collect(),
    })
}

/// `d_α(L̂(xᵢ), Lᵢ)` for a fit evaluated at the observed covariates.
pub fn residual_distances(
    data: &NetworkDataset,
    fit: &CurveFit,
    cfg: &PowerConfig,
) -> Result<DistanceSeries> {
    if fit.query_points.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: fit.query_points.len(),
        });
    }
    for (q, x) in fit.query_points.iter().zip(data.covariates()) {
        let same = q.len() == x.len()
            && q.iter()
                .zip(x)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0));
        if !same {
            return Err(Error::InvalidParameter(format!(
                "fit evaluated at {q:?} but observation covariate is {x:?}"
            )));
        }
    }
    let emb = Embedded::new(data.responses(), cfg)?;
    let values = fit
        .fitted
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let f = power_map(l, cfg)?;
            emb.distance_to(i, f.as_matrix())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceSeries {
        labels: data.labels().to_vec(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAnomaly {
    /// Position in the input series.
    pub index: usize,
    pub label: String,
    pub score: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyRanking {
    pub top: Vec<RankedAnomaly>,
    /// `median + 3·MAD` over the whole series.
    pub threshold: f64,
    pub median: f64,
    pub mad: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Top-`k` entries by value (ties → earlier index) plus a robust flagging threshold.
pub fn rank_anomalies(series: &DistanceSeries, k: usize) -> Result<AnomalyRanking> {
    if series.is_empty() {
        return Err(Error::InsufficientData("empty distance series".into()));
    }
    if k > series.len() {
        return Err(Error::InvalidParameter(format!(
            "asked for {k} anomalies from a series of length {}",
            series.len()
        )));
    }
    let mut sorted = series.values.clone();
    sorted.sort_by(f64::total_cmp);
    let med = median(&sorted);
    let mut dev: Vec<f64> = series.values.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mad = median(&dev);
    let threshold = med + 3.0 * mad;

    let mut order: Vec<usize> = (0..series.len()).collect();
    order.sort_by(|&a, &b| {
        series.values[b]
            .total_cmp(&series.values[a])
            .then(a.cmp(&b))
    });
    let top = order
        .into_iter()
        .take(k)
        .map(|i| RankedAnomaly {
            index: i,
            label: series.labels[i].clone(),
            score: series.values[i],
            flagged: series.values[i] > threshold,
        })
        .collect();
    Ok(AnomalyRanking {
        top,
        threshold,
        median: med,
        mad,
    })
}

/// Principal components of tangent coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Orthonormal directions, most variable first.
    pub components: Vec<Vec<f64>>,
    /// Sample variance (`n-1` denominator) along each component.
    pub explained_variance: Vec<f64>,
    /// Sum of coordinate variances.
    pub total_variance: f64,
}

impl PcaModel {
    pub fn explained_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| {
                if self.total_variance > 0.0 {
                    v / self.total_variance
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// PCA through the `n×n` Gram matrix of centred data, so the cost does not
/// grow with the `m(m-1)/2` tangent dimension beyond linear.
pub fn pca_fit(items: &[TangentVector]) -> Result<PcaModel> {
    let n = items.len();
    if n < 2 {
        return Err(Error::InsufficientData("PCA needs n >= 2".into()));
    }
    let d = items[0].dim();
    if let Some(v) = items.iter().find(|v| v.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: v.dim(),
        });
    }
    let mut mean = vec![0.0; d];
    for v in items {
        for (m, x) in mean.iter_mut().zip(&v.coords) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let centred = DMatrix::from_fn(n, d, |i, k| items[i].coords[k] - mean[k]);
    let total_variance = centred.norm_squared() / (n - 1) as f64;
    let gram = &centred * centred.transpose();
    let dec = decompose(&gram)?;
    let top = dec.eigenvalues[0].max(0.0);
    let cutoff = 1e-12 * top;

    let mut components = Vec::new();
    let mut explained_variance = Vec::new();
    for k in 0..n {
        let mu = dec.eigenvalues[k];
        if !(mu > cutoff) || mu <= 0.0 {
            break;
        }
        let u = dec.eigenvectors.column(k);
        let dir = centred.transpose() * u / mu.sqrt();
        components.push(dir.iter().copied().collect());
        explained_variance.push(mu / (n - 1) as f64);
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        total_variance,
    })
}

/// Scores `componentsᵀ·(v − mean)` on the first `k` components.
pub fn pca_project(model: &PcaModel, items: &[TangentVector], k: usize) -> Result<Vec<Vec<f64>>> {
    if k > model.components.len() {
        return Err(Error::InvalidParameter(format!(
            "requested {k} components, model has {}",
            model.components.len()
        )));
    }
    items
        .iter()
        .map(|v| {
            if v.dim() != model.mean.len() {
                return Err(Error::DimensionMismatch {
                    expected: model.mean.len(),
                    found: v.dim(),
                });
            }
            Ok(model.components[..k]
                .iter()
                .map(|c| {
                    c.iter()
                        .zip(v.coords.iter().zip(&model.mean))
                        .map(|(ci, (x, m))| ci * (x - m))
                        .sum()
                })
                .collect())
        })
        .collect()
}

/// Isotropic AR(1) model with `σ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Model {
    pub rho: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    /// Clamped into `[RHO_MIN, RHO_MAX]`.
    pub rho: f64,
    /// Least-squares ratio before clamping.
    pub raw: f64,
    pub clamped: bool,
}

impl RhoEstimate {
    pub fn model(&self) -> Ar1Model {
        Ar1Model {
            rho: self.rho,
            sigma: 1.0,
        }
    }
}

/// `ρ = Σ_k y_kᵀ v_k / Σ_k v_kᵀ v_k` with `y_k` the k-th and `v_k` the (k-1)-th item.
pub fn estimate_rho_ls(items: &[TangentVector]) -> Result<RhoEstimate> {
    if items.len() < 2 {
        return Err(Error::InsufficientData(
            "rho estimation needs n >= 2".into(),
        ));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for w in items.windows(2) {
        num += w[1].dot(&w[0]);
        den += w[0].dot(&w[0]);
    }
    if !(den > 0.0) {
        return Err(Error::Degenerate(
            "all lagged tangent vectors are zero".into(),
        ));
    }
    let raw = num / den;
    let rho = raw.clamp(RHO_MIN, RHO_MAX);
    Ok(RhoEstimate {
        rho,
        raw,
        clamped: rho != raw,
    })
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rho must lie in (0, 1), got {rho}"
        )));
    }
    Ok(())
}

/// `√((1−ρ)/ρ^|k−l|)`, evaluated in log space.
pub fn mahalanobis_factor(rho: f64, lag: usize) -> f64 {
    (0.5 * ((1.0 - rho).ln() - lag as f64 * rho.ln())).exp()
}

fn mahalanobis_from_embedded(emb: &Embedded, rho: f64) -> Result<DMatrix<f64>> {
    check_rho(rho)?;
    let n = emb.len();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        for l in k + 1..n {
            let v = mahalanobis_factor(rho, l - k) * emb.distance(k, l);
            if !v.is_finite() {
                return Err(Error::Degenerate(format!(
                    "Mahalanobis factor overflows for rho = {rho} at lag {}",
                    l - k
                )));
            }
            out[(k, l)] = v;
            out[(l, k)] = v;
        }
    }
    Ok(out)
}

/// Entry `(k, l)` is `√((1−ρ)/ρ^|k−l|)·d_α(L_k, L_l)`, with `k, l` positions in time order.
/// `d_α(Lᵢ, Lⱼ)` for every pair of observations.
pub fn pairwise_distances(data: &NetworkDataset, cfg: &PowerConfig) -> Result<DMatrix<f64>> {
    let emb = Embedded::new(data.responses(), cfg)?;
    let n = emb.len();
    Ok(DMatrix::from_fn(n, n, |i, j| emb.distance(i, j)))
}

pub fn mahalanobis_distance_matrix(
    data: &NetworkDataset,
    rho: f64,
    cfg: &PowerConfig,
) -> Result<DMatrix<f64>> {
    check_rho(rho)?;
    mahalanobis_from_embedded(&Embedded::new(data.responses(), cfg)?, rho)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdsResult {
    /// `n×k'` coordinates, `k' ≤ k`.
    pub coordinates: DMatrix<f64>,
    /// Every eigenvalue of the double-centred matrix, descending (negatives included).
    pub eigenvalues: Vec<f64>,
    /// Set when fewer than `k` positive eigenvalues were available.
    pub truncated: bool,
}

impl MdsResult {
    /// Share of positive eigenvalue mass on the first axis.
    pub fn first_axis_fraction(&self) -> Option<f64> {
        let scale = self.eigenvalues.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        let cutoff = 1e-12 * scale;
        let positive: f64 = self.eigenvalues.iter().filter(|&&e| e > cutoff).sum();
        let first = *self.eigenvalues.first()?;
        (first > cutoff).then(|| first / positive)
    }
}

/// Classical (Torgerson) scaling: eigendecompose `−½·J·D²·J`.
pub fn classical_mds(dist: &DMatrix<f64>, k: usize) -> Result<MdsResult> {
    if !dist.is_square() {
        return Err(Error::DimensionMismatch {
            expected: dist.nrows(),
            found: dist.ncols(),
        });
    }
    let n = dist.nrows();
    for i in 0..n {
        if dist[(i, i)] != 0.0 {
            return Err(Error::InvalidParameter(format!("nonzero diagonal at {i}")));
        }
        for j in 0..n {
            let v = dist[(i, j)];
            if !v.is_finite() || v < 0.0 || v != dist[(j, i)] {
                return Err(Error::InvalidParameter(format!(
                    "distance matrix must be finite, nonnegative and symmetric (entry {i},{j})"
                )));
            }
        }
    }
    let sq = dist.map(|d| d * d);
    let row_means = DVector::from_iterator(n, (0..n).map(|i| sq.row(i).sum() / n as f64));
    let grand = row_means.sum() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand)
    });
    let dec = decompose(&b)?;
    let scale = dec.eigenvalues.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let cutoff = 1e-12 * scale;
    let kept: Vec<usize> = (0..n.min(k))
        .filter(|&c| dec.eigenvalues[c] > cutoff)
        .collect();
    let mut coordinates = DMatrix::zeros(n, kept.len());
    for (col, &c) in kept.iter().enumerate() {
        let s = dec.eigenvalues[c].sqrt();
        let u = dec.eigenvectors.column(c);
        // sign convention: largest-magnitude loading positive
        let pivot = u
            .iter()
            .copied()
            .fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coordinates[(i, col)] = sign * u[i] * s;
        }
    }
    Ok(MdsResult {
        coordinates,
        truncated: kept.len() < k,
        eigenvalues: dec.eigenvalues.iter().copied().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoGridResult {
    pub rho: f64,
    /// `(ρ, first-axis share)`; `None` when the configuration is degenerate.
    pub table: Vec<(f64, Option<f64>)>,
}

/// Chooses ρ from `grid` to maximize the first-axis share of the MDS configuration.
pub fn estimate_rho_pc1(
    data: &NetworkDataset,
    grid: &[f64],
    cfg: &PowerConfig,
) -> Result<RhoGridResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty rho grid".into()));
    }
    for &r in grid {
        check_rho(r)?;
    }
    let emb = Embedded::new(data.responses(), cfg)?;
    let mut table = Vec::with_capacity(grid.len());
    for &rho in grid {
        let share = match mahalanobis_from_embedded(&emb, rho) {
            Ok(d) => classical_mds(&d, 1)?.first_axis_fraction(),
            Err(Error::Degenerate(_)) => None,
            Err(e) => return Err(e),
        };
        table.push((rho, share));
    }
    // shares within RHO_TIE_TOL of the maximum tie; the smallest ρ wins
    let top = table
        .iter()
        .filter_map(|t| t.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let best = table
        .iter()
        .filter(|t| t.1.is_some_and(|s| top - s <= RHO_TIE_TOL))
        .map(|t| t.0)
        .reduce(f64::min);
    let rho = best.ok_or_else(|| {
        Error::Degenerate("every rho gives a degenerate MDS configuration".into())
    })?;
    Ok(RhoGridResult { rho, table })
}

/// `{0.05, 0.10, …, 0.95}`.
pub fn default_rho_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}
