//! Run configuration and the end-to-end analysis that writes a result directory.
//!
//! Layout of a run directory:
//!
//! | file | contents |
//! |------|----------|
//! | `metadata.json` | resolved parameters, tolerances, input digest, output list |
//! | `cv.csv` | bandwidth criterion table (only when the bandwidth is cross-validated) |
//! | `curve/index.csv`, `curve/point_NNNN.txt` | fitted Laplacian at each query point |
//! | `residuals.csv` | `d(L̂(xᵢ), Lᵢ)` per observation |
//! | `consecutive.csv` | `d(Lᵢ, Lᵢ₊₁)` along the covariate order |
//! | `anomalies.csv` | top residuals with the robust flag |
//! | `pca_variance.csv`, `pca_observations.csv`, `pca_curve.csv` | tangent-space PCA |
//! | `rho_pc1.csv` | first-axis share for every candidate ρ |
//! | `mds_<method>.csv`, `mds_<method>_eigenvalues.csv` | Mahalanobis MDS per ρ estimator |

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, format_matrix, load_dataset, LoadedDataset, Table};
use crate::laplacian::GraphLaplacian;
use crate::projection::{ProjectionOptions, DEFAULT_TOL};
use crate::regression::{
    default_cv_grid, fit_curve_with, loocv_bandwidth, CvResult, KernelConfig, NetworkDataset,
    PowerNw, Standardization, DEFAULT_TRUNCATION_MULTIPLE,
};
use crate::spectral::PowerConfig;
use crate::tangent::to_tangent;
use crate::trend::{
    classical_mds, consecutive_distances, default_rho_grid, estimate_rho_ls, estimate_rho_pc1,
    mahalanobis_distance_matrix, pca_fit, pca_project, rank_anomalies, residual_distances,
    AnomalyRanking, DistanceSeries, MdsResult, PcaModel, RhoEstimate, RhoGridResult,
};

pub const AUTO_GRID_POINTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    Cv,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BandwidthRepr {
    Number(f64),
    Text(String),
}

impl Serialize for Bandwidth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Bandwidth::Fixed(h) => BandwidthRepr::Number(h),
            Bandwidth::Cv => BandwidthRepr::Text("cv".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Bandwidth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match BandwidthRepr::deserialize(d)? {
            BandwidthRepr::Number(h) => Ok(Bandwidth::Fixed(h)),
            BandwidthRepr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl std::str::FromStr for Bandwidth {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.trim() == "cv" {
            return Ok(Bandwidth::Cv);
        }
        s.trim()
            .parse()
            .map(Bandwidth::Fixed)
            .map_err(|_| format!("bandwidth must be a positive number or \"cv\", got {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum QueryGrid {
    #[default]
    Auto,
    Points(Vec<Vec<f64>>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum QueryGridRepr {
    Text(String),
    Scalars(Vec<f64>),
    Vectors(Vec<Vec<f64>>),
}

impl Serialize for QueryGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            QueryGrid::Auto => QueryGridRepr::Text("auto".into()),
            QueryGrid::Points(p) => QueryGridRepr::Vectors(p.clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QueryGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match QueryGridRepr::deserialize(d)? {
            QueryGridRepr::Text(t) if t == "auto" => Ok(QueryGrid::Auto),
            QueryGridRepr::Text(t) => Err(serde::de::Error::custom(format!(
                "query_grid must be \"auto\" or a list, got {t:?}"
            ))),
            QueryGridRepr::Scalars(v) => {
                Ok(QueryGrid::Points(v.into_iter().map(|x| vec![x]).collect()))
            }
            QueryGridRepr::Vectors(v) => Ok(QueryGrid::Points(v)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoMethod {
    #[default]
    Ls,
    Pc1grid,
    Fixed,
}

impl std::str::FromStr for RhoMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ls" => Ok(RhoMethod::Ls),
            "pc1grid" => Ok(RhoMethod::Pc1grid),
            "fixed" => Ok(RhoMethod::Fixed),
            _ => Err(format!(
                "rho method must be ls, pc1grid or fixed, got {s:?}"
            )),
        }
    }
}

fn default_alpha() -> f64 {
    1.0
}
fn default_bandwidth() -> Bandwidth {
    Bandwidth::Cv
}
fn default_truncation() -> f64 {
    DEFAULT_TRUNCATION_MULTIPLE
}
fn default_top_k() -> usize {
    5
}
fn default_projection_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: Bandwidth,
    /// Candidate bandwidths; defaults to multiples of the covariate spread.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_grid: Option<Vec<f64>>,
    #[serde(default = "default_truncation")]
    pub truncation_multiple: f64,
    #[serde(default)]
    pub query_grid: QueryGrid,
    #[serde(default)]
    pub rho_method: RhoMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_fixed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_grid: Option<Vec<f64>>,
    /// Z-score covariates before smoothing; bandwidths are then in standard units.
    #[serde(default)]
    pub standardize: bool,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_projection_tol")]
    pub projection_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection_max_iter: Option<usize>,
    #[serde(default)]
    pub eigenvalue_floor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            bandwidth: default_bandwidth(),
            cv_grid: None,
            truncation_multiple: default_truncation(),
            query_grid: QueryGrid::Auto,
            rho_method: RhoMethod::Ls,
            rho_fixed: None,
            rho_grid: None,
            standardize: false,
            top_k: default_top_k(),
            projection_tol: default_projection_tol(),
            projection_max_iter: None,
            eigenvalue_floor: 0.0,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn power(&self) -> Result<PowerConfig> {
        let cfg = PowerConfig {
            alpha: self.alpha,
            eigenvalue_floor: self.eigenvalue_floor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn projection(&self) -> ProjectionOptions {
        ProjectionOptions {
            tol: self.projection_tol,
            max_iter: self.projection_max_iter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.power()?;
        if let Bandwidth::Fixed(h) = self.bandwidth {
            KernelConfig::with_truncation(h, self.truncation_multiple)?;
        }
        if let Some(grid) = &self.cv_grid {
            if grid.is_empty() {
                return Err(Error::InvalidParameter("cv_grid must not be empty".into()));
            }
            for &h in grid {
                KernelConfig::with_truncation(h, self.truncation_multiple)?;
            }
        }
        if !(self.truncation_multiple > 0.0) {
            return Err(Error::InvalidParameter(
                "truncation_multiple must be positive".into(),
            ));
        }
        if let QueryGrid::Points(p) = &self.query_grid {
            if p.is_empty() {
                return Err(Error::InvalidParameter(
                    "query_grid must not be empty".into(),
                ));
            }
        }
        match (self.rho_method, self.rho_fixed) {
            (RhoMethod::Fixed, None) => {
                return Err(Error::InvalidParameter(
                    "rho_method = fixed requires rho_fixed".into(),
                ))
            }
            (_, Some(r)) if !(r > 0.0 && r < 1.0) => {
                return Err(Error::InvalidParameter(format!(
                    "rho_fixed must lie in (0, 1), got {r}"
                )))
            }
            _ => {}
        }
        if let Some(grid) = &self.rho_grid {
            if grid.is_empty() || grid.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
                return Err(Error::InvalidParameter(
                    "rho_grid must be a nonempty list in (0, 1)".into(),
                ));
            }
        }
        if self.top_k == 0 {
            return Err(Error::InvalidParameter("top_k must be at least 1".into()));
        }
        if !(self.projection_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "projection_tol must be positive".into(),
            ));
        }
        if self.projection_max_iter == Some(0) {
            return Err(Error::InvalidParameter(
                "projection_max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A loaded dataset prepared for analysis under one configuration.
pub struct Session {
    pub loaded: LoadedDataset,
    /// The dataset in model units (standardized when requested).
    pub data: NetworkDataset,
    pub standardization: Option<Standardization>,
    pub power: PowerConfig,
    pub projection: ProjectionOptions,
}

impl Session {
    pub fn open(manifest: impl AsRef<Path>, config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let loaded = load_dataset(manifest).map_err(|e| e.in_stage("load"))?;
        let (data, standardization) = if config.standardize {
            let (d, s) = loaded.dataset.standardized();
            (d, Some(s))
        } else {
            (loaded.dataset.clone(), None)
        };
        Ok(Self {
            loaded,
            data,
            standardization,
            power: config.power()?,
            projection: config.projection(),
        })
    }

    /// Maps a covariate given in input units into model units.
    pub fn model_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.data.covariate_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.data.covariate_dim(),
                found: x.len(),
            });
        }
        Ok(match &self.standardization {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        })
    }

    pub fn model(&self) -> Result<PowerNw<'_>> {
        Ok(PowerNw::new(&self.data, self.power)?.with_projection(self.projection))
    }

    /// Raw covariates, in the same canonical order as `data`.
    pub fn raw_covariates(&self) -> &[Vec<f64>] {
        self.loaded.dataset.covariates()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.loaded.covariate_names
    }

    pub fn cv(&self, config: &RunConfig) -> Result<CvResult> {
        let grid = config
            .cv_grid
            .clone()
            .unwrap_or_else(|| default_cv_grid(&self.data));
        loocv_bandwidth(&self.data, &grid, config.truncation_multiple, &self.power)
    }

    /// The kernel to use, cross-validating first when the bandwidth is `cv`.
    pub fn kernel(&self, config: &RunConfig) -> Result<(KernelConfig, Option<CvResult>)> {
        match config.bandwidth {
            Bandwidth::Fixed(h) => Ok((
                KernelConfig::with_truncation(h, config.truncation_multiple)?,
                None,
            )),
            Bandwidth::Cv => {
                let cv = self
                    .cv(config)
                    .map_err(|e| e.in_stage("cross-validation"))?;
                Ok((
                    KernelConfig::with_truncation(cv.best_h, config.truncation_multiple)?,
                    Some(cv),
                ))
            }
        }
    }

    /// Query points in input units.
    pub fn query_points(&self, grid: &QueryGrid) -> Result<Vec<Vec<f64>>> {
        match grid {
            QueryGrid::Points(p) => {
                for x in p {
                    self.model_point(x)?;
                }
                Ok(p.clone())
            }
            QueryGrid::Auto => Ok(auto_grid(self.raw_covariates())),
        }
    }

    pub fn rho_grid(config: &RunConfig) -> Vec<f64> {
        config.rho_grid.clone().unwrap_or_else(default_rho_grid)
    }
}

/// 20 evenly spaced points over the covariate range when `p = 1`; the observed covariates otherwise.
pub fn auto_grid(covariates: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if covariates.first().map_or(0, Vec::len) != 1 {
        return covariates.to_vec();
    }
    let lo = covariates
        .iter()
        .map(|x| x[0])
        .fold(f64::INFINITY, f64::min);
    let hi = covariates
        .iter()
        .map(|x| x[0])
        .fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![vec![lo]];
    }
    let steps = (AUTO_GRID_POINTS - 1) as f64;
    (0..AUTO_GRID_POINTS)
        .map(|k| {
            let x = if k == AUTO_GRID_POINTS - 1 {
                hi
            } else {
                lo + (hi - lo) * k as f64 / steps
            };
            vec![x]
        })
        .collect()
}

fn covariate_header(prefix: &[&str], names: &[String], suffix: &[String]) -> Vec<String> {
    prefix
        .iter()
        .map(|s| s.to_string())
        .chain(names.iter().cloned())
        .chain(suffix.iter().cloned())
        .collect()
}

fn fmt_row(xs: &[f64]) -> impl Iterator<Item = String> + '_ {
    xs.iter().map(|&v| fmt_f64(v))
}

pub fn cv_table(cv: &CvResult) -> Table {
    let mut t = Table::new(["h", "criterion", "selected"]);
    for &(h, c) in &cv.table {
        t.push(vec![fmt_f64(h), fmt_f64(c), (h == cv.best_h).to_string()]);
    }
    t
}

pub fn series_table(
    series: &DistanceSeries,
    data: &NetworkDataset,
    raw: &[Vec<f64>],
    names: &[String],
) -> Table {
    let mut t = Table::new(covariate_header(&["label"], names, &["distance".into()]));
    for (i, d) in series.values.iter().enumerate() {
        let mut row = vec![data.labels()[i].clone()];
        row.extend(fmt_row(&raw[i]));
        row.push(fmt_f64(*d));
        t.push(row);
    }
    t
}

pub fn consecutive_table(series: &DistanceSeries, data: &NetworkDataset) -> Table {
    let mut t = Table::new(["from", "to", "distance"]);
    for (i, d) in series.values.iter().enumerate() {
        t.push(vec![
            data.labels()[i].clone(),
            data.labels()[i + 1].clone(),
            fmt_f64(*d),
        ]);
    }
    t
}

pub fn anomaly_table(ranking: &AnomalyRanking) -> Table {
    let mut t = Table::new(["rank", "label", "residual", "flagged"]);
    for (r, a) in ranking.top.iter().enumerate() {
        t.push(vec![
            (r + 1).to_string(),
            a.label.clone(),
            fmt_f64(a.score),
            a.flagged.to_string(),
        ]);
    }
    t
}

pub fn pca_variance_table(model: &PcaModel) -> Table {
    let mut t = Table::new(["component", "variance", "ratio"]);
    for (c, (v, r)) in model
        .explained_variance
        .iter()
        .zip(model.explained_ratio())
        .enumerate()
    {
        t.push(vec![(c + 1).to_string(), fmt_f64(*v), fmt_f64(r)]);
    }
    t
}

pub fn scores_table(
    ids: &[String],
    raw: &[Vec<f64>],
    names: &[String],
    scores: &[Vec<f64>],
    prefix: &str,
) -> Table {
    let k = scores.first().map_or(0, Vec::len);
    let cols: Vec<String> = (1..=k).map(|c| format!("{prefix}{c}")).collect();
    let mut t = Table::new(covariate_header(&["label"], names, &cols));
    for ((id, x), s) in ids.iter().zip(raw).zip(scores) {
        let mut row = vec![id.clone()];
        row.extend(fmt_row(x));
        row.extend(fmt_row(s));
        t.push(row);
    }
    t
}

pub fn mds_tables(
    mds: &MdsResult,
    data: &NetworkDataset,
    raw: &[Vec<f64>],
    names: &[String],
) -> (Table, Table) {
    let scores: Vec<Vec<f64>> = (0..mds.coordinates.nrows())
        .map(|i| mds.coordinates.row(i).iter().copied().collect())
        .collect();
    let coords = scores_table(data.labels(), raw, names, &scores, "dim");
    let mut eig = Table::new(["axis", "eigenvalue"]);
    for (c, e) in mds.eigenvalues.iter().enumerate() {
        eig.push(vec![(c + 1).to_string(), fmt_f64(*e)]);
    }
    (coords, eig)
}

pub fn rho_grid_table(r: &RhoGridResult) -> Table {
    let mut t = Table::new(["rho", "first_axis_share", "selected"]);
    for &(rho, share) in &r.table {
        t.push(vec![
            fmt_f64(rho),
            share.map_or_else(|| "nan".into(), fmt_f64),
            (rho == r.rho).to_string(),
        ]);
    }
    t
}

pub fn distance_matrix_table(labels: &[String], d: &nalgebra::DMatrix<f64>) -> Table {
    let mut t = Table::new(std::iter::once("label".to_string()).chain(labels.iter().cloned()));
    for (i, l) in labels.iter().enumerate() {
        let mut row = vec![l.clone()];
        row.extend((0..d.ncols()).map(|j| fmt_f64(d[(i, j)])));
        t.push(row);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub h: f64,
    /// Absent when some fold has no observations within the kernel support.
    pub criterion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub projection_tol: f64,
    pub projection_max_iter: Option<usize>,
    pub eigenvalue_floor: f64,
    pub truncation_multiple: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub manifest: PathBuf,
    pub input_sha256: String,
    pub observations: usize,
    pub nodes: usize,
    pub covariate_dim: usize,
    pub normalization: crate::io::Normalization,
    /// Configuration as given, without the output directory.
    pub config: RunConfig,
    pub standardization: Option<Standardization>,
    pub alpha: f64,
    pub h: f64,
    pub cv: Option<Vec<CvRow>>,
    pub query_grid: Vec<Vec<f64>>,
    pub rho_ls: RhoEstimate,
    pub rho_pc1: f64,
    pub rho_fixed: Option<f64>,
    pub rho: f64,
    pub anomaly_threshold: f64,
    pub residual_median: f64,
    pub residual_mad: f64,
    pub tolerances: Tolerances,
    pub files: Vec<String>,
}

impl RunMetadata {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub metadata: RunMetadata,
    pub anomalies: AnomalyRanking,
}

struct Writer {
    root: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn put(&mut self, rel: &str, contents: String) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(rel.to_string());
        Ok(())
    }
}

/// Runs every analysis and writes the result directory.
pub fn run_pipeline(config: &RunConfig, manifest: impl AsRef<Path>) -> Result<RunSummary> {
    let manifest = manifest.as_ref();
    let output_dir = config
        .output_dir
        .clone()
        .ok_or_else(|| Error::InvalidParameter("output_dir is required".into()))?;
    let session = Session::open(manifest, config)?;
    let data = &session.data;
    if data.len() < 2 {
        return Err(Error::InsufficientData(
            "the full pipeline needs at least two networks".into(),
        )
        .in_stage("load"));
    }
    let raw = session.raw_covariates();
    let names = session.covariate_names();
    let power = session.power;

    let (kernel, cv) = session.kernel(config)?;
    let model = session.model().map_err(|e| e.in_stage("fit"))?;

    let query_raw = session
        .query_points(&config.query_grid)
        .map_err(|e| e.in_stage("fit"))?;
    let query_model = query_raw
        .iter()
        .map(|x| session.model_point(x))
        .collect::<Result<Vec<_>>>()?;
    let curve = fit_curve_with(&model, &query_model, &kernel).map_err(|e| e.in_stage("fit"))?;
    let at_obs =
        fit_curve_with(&model, data.covariates(), &kernel).map_err(|e| e.in_stage("residuals"))?;
    let residuals =
        residual_distances(data, &at_obs, &power).map_err(|e| e.in_stage("residuals"))?;
    let consecutive = consecutive_distances(data, &power).map_err(|e| e.in_stage("residuals"))?;
    let anomalies = rank_anomalies(&residuals, config.top_k.min(data.len()))
        .map_err(|e| e.in_stage("anomalies"))?;

    let obs_tangents = model.tangents();
    let curve_tangents = curve
        .fitted
        .iter()
        .map(|l| to_tangent(l, &power))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("pca"))?;
    let pca = pca_fit(obs_tangents).map_err(|e| e.in_stage("pca"))?;
    let k_pca = pca.components.len().min(2);
    let obs_scores = pca_project(&pca, obs_tangents, k_pca).map_err(|e| e.in_stage("pca"))?;
    let curve_scores = pca_project(&pca, &curve_tangents, k_pca).map_err(|e| e.in_stage("pca"))?;

    let rho_ls = estimate_rho_ls(obs_tangents).map_err(|e| e.in_stage("rho"))?;
    let rho_pc1 = estimate_rho_pc1(data, &Session::rho_grid(config), &power)
        .map_err(|e| e.in_stage("rho"))?;
    let mut mds_runs: Vec<(&str, f64)> = vec![("ls", rho_ls.rho), ("pc1", rho_pc1.rho)];
    if let Some(r) = config.rho_fixed {
        mds_runs.push(("fixed", r));
    }
    let rho = match config.rho_method {
        RhoMethod::Ls => rho_ls.rho,
        RhoMethod::Pc1grid => rho_pc1.rho,
        RhoMethod::Fixed => config.rho_fixed.expect("validated"),
    };

    fs::create_dir_all(&output_dir).map_err(|e| Error::io(&output_dir, e))?;
    let mut w = Writer {
        root: output_dir.clone(),
        files: Vec::new(),
    };
    if let Some(cv) = &cv {
        w.put("cv.csv", cv_table(cv).render())?;
    }
    let mut index = Table::new(covariate_header(&["index", "file"], names, &[]));
    for (q, (x, l)) in query_raw.iter().zip(&curve.fitted).enumerate() {
        let file = format!("point_{q:04}.txt");
        let mut row = vec![q.to_string(), file.clone()];
        row.extend(fmt_row(x));
        index.push(row);
        w.put(&format!("curve/{file}"), format_matrix(l.matrix()))?;
    }
    w.put("curve/index.csv", index.render())?;
    w.put(
        "residuals.csv",
        series_table(&residuals, data, raw, names).render(),
    )?;
    w.put(
        "consecutive.csv",
        consecutive_table(&consecutive, data).render(),
    )?;
    w.put("anomalies.csv", anomaly_table(&anomalies).render())?;
    w.put("pca_variance.csv", pca_variance_table(&pca).render())?;
    w.put(
        "pca_observations.csv",
        scores_table(data.labels(), raw, names, &obs_scores, "pc").render(),
    )?;
    let curve_ids: Vec<String> = (0..query_raw.len()).map(|q| q.to_string()).collect();
    w.put(
        "pca_curve.csv",
        scores_table(&curve_ids, &query_raw, names, &curve_scores, "pc").render(),
    )?;
    w.put("rho_pc1.csv", rho_grid_table(&rho_pc1).render())?;
    for (tag, r) in &mds_runs {
        let d = mahalanobis_distance_matrix(data, *r, &power).map_err(|e| e.in_stage("mds"))?;
        let mds = classical_mds(&d, 2).map_err(|e| e.in_stage("mds"))?;
        let (coords, eig) = mds_tables(&mds, data, raw, names);
        w.put(&format!("mds_{tag}.csv"), coords.render())?;
        w.put(&format!("mds_{tag}_eigenvalues.csv"), eig.render())?;
    }

    let mut files = w.files.clone();
    files.push("metadata.json".into());
    let metadata = RunMetadata {
        version: env!("CARGO_PKG_VERSION").into(),
        manifest: manifest.to_path_buf(),
        input_sha256: session.loaded.digest.clone(),
        observations: data.len(),
        nodes: data.node_count(),
        covariate_dim: data.covariate_dim(),
        normalization: session.loaded.normalization,
        config: RunConfig {
            output_dir: None,
            ..config.clone()
        },
        standardization: session.standardization.clone(),
        alpha: power.alpha,
        h: kernel.h,
        cv: cv.as_ref().map(|cv| {
            cv.table
                .iter()
                .map(|&(h, c)| CvRow {
                    h,
                    criterion: c.is_finite().then_some(c),
                })
                .collect()
        }),
        query_grid: query_raw.clone(),
        rho_ls,
        rho_pc1: rho_pc1.rho,
        rho_fixed: config.rho_fixed,
        rho,
        anomaly_threshold: anomalies.threshold,
        residual_median: anomalies.median,
        residual_mad: anomalies.mad,
        tolerances: Tolerances {
            projection_tol: config.projection_tol,
            projection_max_iter: config.projection_max_iter,
            eigenvalue_floor: config.eigenvalue_floor,
            truncation_multiple: config.truncation_multiple,
        },
        files,
    };
    let json = serde_json::to_string_pretty(&metadata).expect("metadata serializes") + "\n";
    w.put("metadata.json", json)?;
    Ok(RunSummary {
        output_dir,
        metadata,
        anomalies,
    })
}

/// Repeats a recorded run into `output_dir`, refusing if the inputs changed since.
pub fn rerun(
    metadata_path: impl AsRef<Path>,
    output_dir: impl Into<PathBuf>,
) -> Result<RunSummary> {
    let meta = RunMetadata::load(metadata_path)?;
    let loaded = load_dataset(&meta.manifest).map_err(|e| e.in_stage("load"))?;
    if loaded.digest != meta.input_sha256 {
        return Err(Error::InvalidParameter(format!(
            "inputs changed since the recorded run (digest {} != {})",
            loaded.digest, meta.input_sha256
        ))
        .in_stage("load"));
    }
    let config = RunConfig {
        output_dir: Some(output_dir.into()),
        ..meta.config
    };
    run_pipeline(&config, &meta.manifest)
}

/// Fitted Laplacians at `points` (input units).
pub fn predict_points(
    session: &Session,
    kernel: &KernelConfig,
    points: &[Vec<f64>],
) -> Result<Vec<GraphLaplacian>> {
    let model = session.model()?;
    let pts = points
        .iter()
        .map(|x| session.model_point(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(fit_curve_with(&model, &pts, kernel)?.fitted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let cfg = RunConfig::from_toml(
            "alpha = 0.5\nbandwidth = \"cv\"\ncv_grid = [0.5, 1, 2, 4, 8]\nquery_grid = [1.0, 2.0]\nrho_method = \"pc1grid\"\n",
        )
        .unwrap();
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.bandwidth, Bandwidth::Cv);
        assert_eq!(
            cfg.query_grid,
            QueryGrid::Points(vec![vec![1.0], vec![2.0]])
        );
        assert_eq!(cfg.rho_method, RhoMethod::Pc1grid);

        let cfg = RunConfig::from_toml("bandwidth = 2\n").unwrap();
        assert_eq!(cfg.bandwidth, Bandwidth::Fixed(2.0));
        assert_eq!(cfg.query_grid, QueryGrid::Auto);

        assert!(RunConfig::from_toml("bandwidth = \"wide\"\n").is_err());
        assert!(RunConfig::from_toml("bandwidth = -1\n").is_err());
        assert!(RunConfig::from_toml("cv_grid = []\n").is_err());
        assert!(RunConfig::from_toml("rho_method = \"fixed\"\n").is_err());
        assert!(RunConfig::from_toml("rho_method = \"fixed\"\nrho_fixed = 1.5\n").is_err());
        assert!(RunConfig::from_toml("rho_method = \"fixed\"\nrho_fixed = 0.5\n").is_ok());
        assert!(RunConfig::from_toml("alpha = 0\n").is_err());
        assert!(RunConfig::from_toml("colour = 1\n").is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = RunConfig {
            bandwidth: Bandwidth::Fixed(1.5),
            query_grid: QueryGrid::Points(vec![vec![0.0], vec![0.5]]),
            rho_fixed: Some(0.3),
            ..RunConfig::default()
        };
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn auto_grid_spans_range() {
        let covs: Vec<Vec<f64>> = (1..=36).map(|k| vec![k as f64]).collect();
        let g = auto_grid(&covs);
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], vec![1.0]);
        assert_eq!(g[19], vec![36.0]);
        assert!(g.windows(2).all(|w| w[1][0] > w[0][0]));
        assert_eq!(auto_grid(&[vec![3.0], vec![3.0]]), vec![vec![3.0]]);
        let two_d = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(auto_grid(&two_d), two_d);
    }
}
